#pragma once

#include <stdexcept>
#include <string>

namespace colormod {

// Input value outside its documented domain (color channel, hue range, ...).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file content; message carries the offending line/row number.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration (fractions, hyperparameters, degenerate split requests).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Shape or cache mismatch between cooperating structures. Programming error.
class StructuralError : public std::logic_error {
public:
    explicit StructuralError(const std::string& what) : std::logic_error(what) {}
};

// A modifier token has no embedding.
class OovError : public std::runtime_error {
public:
    explicit OovError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int epoch)
        : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

} // namespace colormod
