#pragma once

// Minimal dense-network machinery for the shared trunk and the model heads:
// forward pass with cached activations, exact analytic gradients, and plain
// SGD updates. No learning framework; matrices are small enough that
// straightforward loops are the whole story.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace colormod {

inline constexpr std::size_t kColorDim = 3;
inline constexpr std::size_t kFc1Out = 32;
inline constexpr std::size_t kFc2Out = 16;

enum class Activation { Identity, Relu, Tanh, Sigmoid };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

double apply_activation(Activation a, double z);
// Derivative expressed in terms of the pre-activation z. Relu uses the
// zero subgradient at z = 0.
double activation_derivative(Activation a, double z);

// Row-major out x in matrix.
struct Matrix {
    std::size_t rows{};
    std::size_t cols{};
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct DenseLayer {
    Matrix weights;           // out x in
    std::vector<double> bias; // out
    Activation activation = Activation::Identity;

    std::size_t out_dim() const { return weights.rows; }
    std::size_t in_dim() const { return weights.cols; }
};

// Uniform(-limit, limit) weights with limit = sqrt(6 / (fan_in + fan_out)),
// zero biases. Draw order is fixed (row-major), so layers are a pure
// function of the rng state.
DenseLayer make_dense(std::size_t out, std::size_t in, Activation act,
                      std::mt19937_64& rng);

std::vector<double> layer_forward(const DenseLayer& layer, const std::vector<double>& in,
                                  std::vector<double>* pre_activation = nullptr);

// The shared trunk: fc1 consumes [modifier embedding; reference], fc2
// consumes [fc1 output; reference]. The reference representation is
// whatever 3-vector the calling model feeds in (normalized RGB, scaled
// HSV, or zeros).
struct TrunkParams {
    DenseLayer fc1; // kFc1Out x (embedding_dim + kColorDim)
    DenseLayer fc2; // kFc2Out x (kFc1Out + kColorDim)
};

TrunkParams make_trunk(std::size_t embedding_dim, Activation hidden_act,
                       std::mt19937_64& rng);

// Activations cached by a forward pass, consumed by backward().
struct ForwardCache {
    std::vector<double> x1; // fc1 input
    std::vector<double> z1; // fc1 pre-activation
    std::vector<double> a1; // fc1 output
    std::vector<double> x2; // fc2 input
    std::vector<double> z2; // fc2 pre-activation
    std::vector<double> h1; // fc2 output (the trunk state)
    std::vector<double> head_out;
};

std::vector<double> trunk_forward(const TrunkParams& trunk,
                                  const std::vector<double>& modifier,
                                  const std::vector<double>& reference,
                                  ForwardCache* cache = nullptr);

std::vector<double> network_forward(const TrunkParams& trunk, const DenseLayer& head,
                                    const std::vector<double>& modifier,
                                    const std::vector<double>& reference,
                                    ForwardCache* cache = nullptr);

struct LayerGrads {
    Matrix weights;
    std::vector<double> bias;
};

// Mirrors TrunkParams + head. Accumulated across a batch, then applied in
// one sgd_step.
struct GradientBuffer {
    LayerGrads fc1;
    LayerGrads fc2;
    LayerGrads head;

    void zero();
    bool is_zero() const;
};

GradientBuffer make_gradient_buffer(const TrunkParams& trunk, const DenseLayer& head);

// Accumulates d(loss)/d(params) into grads, given d(loss)/d(head output).
// The cache must come from a network_forward over the same parameters.
void backward(const TrunkParams& trunk, const DenseLayer& head, const ForwardCache& cache,
              const std::vector<double>& loss_grad_at_output, GradientBuffer& grads);

// p := p - lr * g, elementwise.
void sgd_step(TrunkParams& trunk, DenseLayer& head, const GradientBuffer& grads,
              double lr);

} // namespace colormod
