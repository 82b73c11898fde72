#pragma once

#include <span>

// Reverse Weibull (Weibull-for-maxima) location estimation.
//
// The reverse Weibull CDF with location a, scale b > 0, shape c > 0 is
//   F(x) = exp(-((a - x) / b)^c)   for x <= a,  F(x) = 1 beyond.
// Batch maxima of bounded quantities converge to this family, and the
// location a is the estimated supremum — here, the estimated local Lipschitz
// constant.

namespace maskaudit::evt {

struct WeibullFit {
    double location = 0.0; // a: estimated right endpoint
    double scale = 0.0;    // b
    double shape = 0.0;    // c
    double loglik = 0.0;   // profile log-likelihood at the optimum
    bool degenerate = false;
};

// Maximum-likelihood fit of (a, b, c) to a sample of maxima.
//
// The full 3-parameter likelihood is unbounded as a -> max(x) with c < 1, so
// the fit profiles the likelihood over a grid of locations above the sample
// maximum (refined by golden-section search) and solves the 2-parameter
// Weibull MLE for b, c at each location with the shape constrained to
// c >= 1, which keeps the likelihood bounded. The non-degenerate optimum
// always satisfies location >= max(x).
//
// Degenerate samples short-circuit (degenerate = true, scale/shape/loglik
// meaningless, set to 0/0/0):
//   * all values equal up to 1e-12 relative range -> location = that value;
//   * more than half the values tie the sample minimum exactly -> location =
//     that minimum. Tie-dominated samples (e.g. gradient norms that are
//     mostly exactly zero) carry an atom, which is outside the continuous
//     Weibull family; the dominant atom is the meaningful location estimate,
//     and a continuous fit above the stray upper values would be fiction.
//
// Throws ArgumentError for n < 5 or non-finite input; FitError if the inner
// shape equation fails to converge within its iteration budget.
WeibullFit fit_reverse_weibull(std::span<const double> maxima);

} // namespace maskaudit::evt
