#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "maskaudit/linalg.hpp"

// Layer vocabulary shared by the network evaluator and the masking
// transfer-function module.

namespace maskaudit::net {

// Arithmetic precision used for forward and backward evaluation. f32 rounds
// every intermediate (inputs, weights, activations, cotangents) to float;
// it exists to reproduce single-precision saturation effects exactly.
enum class Precision { f64, f32 };

// Gradient convention for the piecewise-constant layers.
//   exact : the true almost-everywhere derivative (zero on flats).
//   bpda  : straight-through replacement, treating Staircase/RampStaircase
//           as identity in the backward pass only.
enum class BackwardMode { exact, bpda };

struct Dense {
    Matrix W; // out x in
    Vector b; // out
};

struct Relu {};

// y = sigmoid(gain * x), elementwise. gain > 0.
struct Sigmoid {
    double gain = 1.0;
};

// y = ceil(c * x) / c, elementwise. Piecewise constant with c steps per unit;
// derivative zero almost everywhere.
struct Staircase {
    int levels = 1; // c >= 1
};

// Continuous staircase surrogate: each step of width 1/c starts with a ramp
// occupying the leading `delta` fraction of the step (slope 1/delta), then
// stays flat. delta in (0, 1).
struct RampStaircase {
    int levels = 1;     // c >= 1
    double delta = 0.5; // fraction of the step width occupied by the ramp
};

struct Identity {};

using Layer = std::variant<Dense, Relu, Sigmoid, Staircase, RampStaircase, Identity>;

// Output width of `layer` given input width `in_dim`.
inline std::size_t layer_out_dim(const Layer& layer, std::size_t in_dim) {
    if (const auto* d = std::get_if<Dense>(&layer)) return d->W.rows();
    return in_dim;
}

inline bool layer_is_dense(const Layer& layer) {
    return std::holds_alternative<Dense>(layer);
}

} // namespace maskaudit::net
