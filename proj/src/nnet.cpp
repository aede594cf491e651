#include "colormod/nnet.hpp"

#include <algorithm>
#include <cmath>

#include "colormod/errors.hpp"
#include "colormod/rng.hpp"

namespace colormod {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw StructuralError("unknown activation: " + s);
}

double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::Identity: return z;
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Tanh: return std::tanh(z);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    }
    return z;
}

double activation_derivative(Activation a, double z) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 - s);
        }
    }
    return 1.0;
}

DenseLayer make_dense(std::size_t out, std::size_t in, Activation act,
                      std::mt19937_64& rng) {
    DenseLayer layer;
    layer.weights = Matrix(out, in);
    layer.bias.assign(out, 0.0);
    layer.activation = act;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& w : layer.weights.data) w = next_uniform(rng, -limit, limit);
    return layer;
}

std::vector<double> layer_forward(const DenseLayer& layer, const std::vector<double>& in,
                                  std::vector<double>* pre_activation) {
    if (in.size() != layer.in_dim()) {
        throw StructuralError("layer_forward: input size " + std::to_string(in.size()) +
                              " != " + std::to_string(layer.in_dim()));
    }
    const std::size_t out_n = layer.out_dim();
    std::vector<double> out(out_n);
    for (std::size_t i = 0; i < out_n; ++i) {
        double z = layer.bias[i];
        const double* wrow = &layer.weights.data[i * layer.weights.cols];
        for (std::size_t j = 0; j < in.size(); ++j) z += wrow[j] * in[j];
        out[i] = z;
    }
    if (pre_activation) *pre_activation = out;
    for (auto& z : out) z = apply_activation(layer.activation, z);
    return out;
}

TrunkParams make_trunk(std::size_t embedding_dim, Activation hidden_act,
                       std::mt19937_64& rng) {
    TrunkParams trunk;
    trunk.fc1 = make_dense(kFc1Out, embedding_dim + kColorDim, hidden_act, rng);
    trunk.fc2 = make_dense(kFc2Out, kFc1Out + kColorDim, hidden_act, rng);
    return trunk;
}

namespace {

std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

} // namespace

std::vector<double> trunk_forward(const TrunkParams& trunk,
                                  const std::vector<double>& modifier,
                                  const std::vector<double>& reference,
                                  ForwardCache* cache) {
    if (reference.size() != kColorDim) {
        throw StructuralError("trunk_forward: reference must have 3 components");
    }
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.x1 = concat(modifier, reference);
    c.a1 = layer_forward(trunk.fc1, c.x1, &c.z1);
    c.x2 = concat(c.a1, reference);
    c.h1 = layer_forward(trunk.fc2, c.x2, &c.z2);
    return c.h1;
}

std::vector<double> network_forward(const TrunkParams& trunk, const DenseLayer& head,
                                    const std::vector<double>& modifier,
                                    const std::vector<double>& reference,
                                    ForwardCache* cache) {
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    trunk_forward(trunk, modifier, reference, &c);
    c.head_out = layer_forward(head, c.h1, nullptr);
    return c.head_out;
}

void GradientBuffer::zero() {
    std::fill(fc1.weights.data.begin(), fc1.weights.data.end(), 0.0);
    std::fill(fc1.bias.begin(), fc1.bias.end(), 0.0);
    std::fill(fc2.weights.data.begin(), fc2.weights.data.end(), 0.0);
    std::fill(fc2.bias.begin(), fc2.bias.end(), 0.0);
    std::fill(head.weights.data.begin(), head.weights.data.end(), 0.0);
    std::fill(head.bias.begin(), head.bias.end(), 0.0);
}

bool GradientBuffer::is_zero() const {
    auto all_zero = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    };
    return all_zero(fc1.weights.data) && all_zero(fc1.bias) && all_zero(fc2.weights.data) &&
           all_zero(fc2.bias) && all_zero(head.weights.data) && all_zero(head.bias);
}

GradientBuffer make_gradient_buffer(const TrunkParams& trunk, const DenseLayer& head) {
    GradientBuffer g;
    g.fc1.weights = Matrix(trunk.fc1.weights.rows, trunk.fc1.weights.cols);
    g.fc1.bias.assign(trunk.fc1.bias.size(), 0.0);
    g.fc2.weights = Matrix(trunk.fc2.weights.rows, trunk.fc2.weights.cols);
    g.fc2.bias.assign(trunk.fc2.bias.size(), 0.0);
    g.head.weights = Matrix(head.weights.rows, head.weights.cols);
    g.head.bias.assign(head.bias.size(), 0.0);
    return g;
}

namespace {

// Accumulates grads for one dense layer and returns d(loss)/d(input).
std::vector<double> dense_backward(const DenseLayer& layer, const std::vector<double>& input,
                                   const std::vector<double>& pre_activation,
                                   const std::vector<double>& grad_out, LayerGrads& grads) {
    const std::size_t out_n = layer.out_dim();
    const std::size_t in_n = layer.in_dim();
    std::vector<double> grad_in(in_n, 0.0);
    for (std::size_t i = 0; i < out_n; ++i) {
        const double gz =
            grad_out[i] * activation_derivative(layer.activation, pre_activation[i]);
        grads.bias[i] += gz;
        double* gw = &grads.weights.data[i * in_n];
        const double* w = &layer.weights.data[i * in_n];
        for (std::size_t j = 0; j < in_n; ++j) {
            gw[j] += gz * input[j];
            grad_in[j] += gz * w[j];
        }
    }
    return grad_in;
}

} // namespace

void backward(const TrunkParams& trunk, const DenseLayer& head, const ForwardCache& cache,
              const std::vector<double>& loss_grad_at_output, GradientBuffer& grads) {
    if (loss_grad_at_output.size() != head.out_dim()) {
        throw StructuralError("backward: upstream gradient size mismatch");
    }
    if (cache.h1.size() != trunk.fc2.out_dim() || cache.x1.size() != trunk.fc1.in_dim()) {
        throw StructuralError("backward: cache does not match parameters");
    }

    // Head is linear on h1; its pre-activation equals its output.
    std::vector<double> head_pre = cache.head_out;
    if (head.activation != Activation::Identity) {
        throw StructuralError("backward: heads are linear by construction");
    }
    std::vector<double> g_h1 =
        dense_backward(head, cache.h1, head_pre, loss_grad_at_output, grads.head);

    std::vector<double> g_x2 = dense_backward(trunk.fc2, cache.x2, cache.z2, g_h1, grads.fc2);
    // Only the fc1 slice of x2 backpropagates; the reference slice is input.
    std::vector<double> g_a1(g_x2.begin(), g_x2.begin() + static_cast<long>(kFc1Out));
    dense_backward(trunk.fc1, cache.x1, cache.z1, g_a1, grads.fc1);
}

namespace {

void apply(DenseLayer& layer, const LayerGrads& g, double lr) {
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
        layer.weights.data[i] -= lr * g.weights.data[i];
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
        layer.bias[i] -= lr * g.bias[i];
    }
}

} // namespace

void sgd_step(TrunkParams& trunk, DenseLayer& head, const GradientBuffer& grads, double lr) {
    if (grads.fc1.weights.data.size() != trunk.fc1.weights.data.size() ||
        grads.fc2.weights.data.size() != trunk.fc2.weights.data.size() ||
        grads.head.weights.data.size() != head.weights.data.size()) {
        throw StructuralError("sgd_step: gradient buffer shape mismatch");
    }
    apply(trunk.fc1, grads.fc1, lr);
    apply(trunk.fc2, grads.fc2, lr);
    apply(head, grads.head, lr);
}

} // namespace colormod
