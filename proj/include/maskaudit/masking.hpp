#pragma once

#include <cmath>
#include <vector>

#include "maskaudit/errors.hpp"
#include "maskaudit/layers.hpp"
#include "maskaudit/linalg.hpp"

// Scalar transfer functions used to build gradient-masked models, plus their
// exact derivatives and analytic Lipschitz constants.
//
// The staircase h(x) = ceil(c*x)/c quantizes to c levels per unit; its
// derivative is zero almost everywhere even though the function tracks the
// identity to within 1/c. The ramp staircase is the continuous surrogate:
// each step of width 1/c begins with a ramp of slope 1/delta occupying the
// leading `delta` fraction of the step, then stays flat, so the derivative
// is zero with probability 1-delta under a uniformly random input but the
// function is within 1/c of the staircase everywhere.

namespace maskaudit::mask {

// ---- templated cores (shared with the f32/f64 network evaluator) ----------

template <class T>
T staircase_eval_t(T x, int levels) {
    return std::ceil(T(levels) * x) / T(levels);
}

template <class T>
T ramp_staircase_eval_t(T x, int levels, T delta) {
    const T t = T(levels) * x;
    const T k = std::floor(t);
    const T frac = t - k;
    // Breakpoints belong to the ramp: frac == 0 starts a ramp, frac == delta
    // ends it (continuously) at the flat value.
    if (frac <= delta) return (k + frac / delta) / T(levels);
    return (k + T(1)) / T(levels);
}

template <class T>
T ramp_staircase_grad_t(T x, int levels, T delta) {
    const T t = T(levels) * x;
    const T frac = t - std::floor(t);
    return frac <= delta ? T(1) / delta : T(0);
}

template <class T>
T sigmoid_eval_t(T x, T gain) {
    return T(1) / (T(1) + std::exp(-(gain * x)));
}

template <class T>
T sigmoid_grad_t(T x, T gain) {
    const T s = sigmoid_eval_t(x, gain);
    return gain * s * (T(1) - s);
}

// ---- validated double-precision API ----------------------------------------

inline void require_levels(int levels) {
    if (levels < 1) throw ArgumentError("staircase levels must be >= 1");
}

inline void require_delta(double delta) {
    if (!(delta > 0.0) || !(delta < 1.0)) {
        throw ArgumentError("ramp fraction delta must lie in (0, 1)");
    }
}

inline void require_gain(double gain) {
    if (!(gain > 0.0) || !std::isfinite(gain)) {
        throw ArgumentError("sigmoid gain must be finite and > 0");
    }
}

inline double staircase_eval(double x, int levels) {
    require_levels(levels);
    if (!std::isfinite(x)) throw DomainError("staircase_eval: non-finite input");
    return staircase_eval_t(x, levels);
}

inline double ramp_staircase_eval(double x, int levels, double delta) {
    require_levels(levels);
    require_delta(delta);
    if (!std::isfinite(x)) throw DomainError("ramp_staircase_eval: non-finite input");
    return ramp_staircase_eval_t(x, levels, delta);
}

inline double ramp_staircase_grad(double x, int levels, double delta) {
    require_levels(levels);
    require_delta(delta);
    if (!std::isfinite(x)) throw DomainError("ramp_staircase_grad: non-finite input");
    return ramp_staircase_grad_t(x, levels, delta);
}

// Steep sigmoid sigma(gain*x). With precision = f32 the evaluation rounds
// input, gain, and every intermediate to float, reproducing the saturation
// that makes single-precision gradients exactly zero outside a narrow band.
inline double saturating_sigmoid_eval(double x, double gain,
                                      net::Precision precision = net::Precision::f64) {
    require_gain(gain);
    if (!std::isfinite(x)) throw DomainError("saturating_sigmoid_eval: non-finite input");
    if (precision == net::Precision::f32) {
        return static_cast<double>(
            sigmoid_eval_t(static_cast<float>(x), static_cast<float>(gain)));
    }
    return sigmoid_eval_t(x, gain);
}

inline double saturating_sigmoid_grad(double x, double gain,
                                      net::Precision precision = net::Precision::f64) {
    require_gain(gain);
    if (!std::isfinite(x)) throw DomainError("saturating_sigmoid_grad: non-finite input");
    if (precision == net::Precision::f32) {
        return static_cast<double>(
            sigmoid_grad_t(static_cast<float>(x), static_cast<float>(gain)));
    }
    return sigmoid_grad_t(x, gain);
}

// ---- configuration ----------------------------------------------------------

struct MaskConfig {
    int levels = 255;    // staircase / ramp staircase steps per unit
    double delta = 0.2;  // ramp fraction of the step width
    double gain = 1.0e4; // sigmoid steepness

    void validate() const {
        require_levels(levels);
        require_delta(delta);
        require_gain(gain);
    }
};

// ---- analytic Lipschitz constants -------------------------------------------

// Exact (global) Lipschitz constant of a single layer w.r.t. the l_p input
// norm, p in {2, inf}:
//   Dense          : operator norm of W (spectral for p=2, max row l1 for inf)
//   Relu, Identity : 1
//   Sigmoid        : gain / 4
//   RampStaircase  : 1 / delta
//   Staircase      : +infinity (jump discontinuities)
double analytic_lipschitz(const net::Layer& layer, Norm p);

// Sampled comparison curve of the staircase and its ramp surrogate on
// [lo, hi] with `resolution` evenly spaced points (endpoints included).
struct CurvePoint {
    double x;
    double h;    // staircase value
    double hhat; // ramp surrogate value
};

std::vector<CurvePoint> sample_curve(int levels, double delta, double lo, double hi,
                                     int resolution);

} // namespace maskaudit::mask
