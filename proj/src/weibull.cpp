#include "maskaudit/weibull.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "maskaudit/errors.hpp"

namespace maskaudit::evt {

namespace {

// 2-parameter Weibull MLE for y_i > 0 with the shape constrained to c >= 1.
// Works on w_i = y_i / max(y) so powers never overflow (w <= 1 and the
// largest term is exactly 1, keeping sums away from zero).
struct ConditionalFit {
    double scale = 0.0;
    double shape = 0.0;
    double loglik = 0.0;
};

struct ShapeSums {
    double s0 = 0.0; // sum w^c
    double s1 = 0.0; // sum w^c ln w
    double s2 = 0.0; // sum w^c (ln w)^2
};

ShapeSums shape_sums(const std::vector<double>& logw, double c) {
    ShapeSums s;
    for (double lw : logw) {
        const double t = std::exp(c * lw); // w^c, in (0, 1]
        s.s0 += t;
        s.s1 += t * lw;
        s.s2 += t * lw * lw;
    }
    return s;
}

ConditionalFit conditional_mle(const std::vector<double>& y, double& scratch_max) {
    const std::size_t n = y.size();
    const double ym = *std::max_element(y.begin(), y.end());
    scratch_max = ym;
    std::vector<double> logw(n);
    double logw_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        logw[i] = std::log(y[i] / ym); // <= 0
        logw_mean += logw[i];
    }
    logw_mean /= static_cast<double>(n);

    // phi(c) = S1/S0 - 1/c - mean(ln w); strictly increasing in c.
    const auto phi = [&](double c, ShapeSums& s) {
        s = shape_sums(logw, c);
        return s.s1 / s.s0 - 1.0 / c - logw_mean;
    };

    ShapeSums s;
    double c = 1.0;
    double p1 = phi(1.0, s);
    if (p1 < 0.0) {
        // Bracket the root: phi is increasing and -> -mean(ln w) > 0.
        double lo = 1.0;
        double hi = 2.0;
        double phi_hi = phi(hi, s);
        int doublings = 0;
        while (phi_hi < 0.0 && doublings < 200) {
            lo = hi;
            hi *= 2.0;
            phi_hi = phi(hi, s);
            ++doublings;
        }
        if (phi_hi < 0.0) {
            throw FitError("weibull shape equation: no bracket after 200 doublings (n=" +
                           std::to_string(n) + ")");
        }
        // Newton with bisection safeguard.
        c = 0.5 * (lo + hi);
        bool converged = false;
        for (int it = 0; it < 200; ++it) {
            const double f = phi(c, s);
            if (std::fabs(f) < 1e-13 || (hi - lo) < 1e-13 * c) {
                converged = true;
                break;
            }
            if (f > 0.0) {
                hi = c;
            } else {
                lo = c;
            }
            const double fp = (s.s2 * s.s0 - s.s1 * s.s1) / (s.s0 * s.s0) + 1.0 / (c * c);
            double next = c - f / fp;
            if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
            c = next;
        }
        if (!converged) {
            throw FitError("weibull shape equation: no convergence in 200 iterations (n=" +
                           std::to_string(n) + ", c=" + std::to_string(c) + ")");
        }
    } else {
        // Root below 1: constrained optimum at the boundary c = 1.
        c = 1.0;
        s = shape_sums(logw, 1.0);
    }

    // Conditional scale MLE: b = ym * (S0/n)^(1/c). At this b the term
    // sum (y/b)^c equals n exactly, so the log-likelihood simplifies.
    const double b = ym * std::pow(s.s0 / static_cast<double>(n), 1.0 / c);
    const double sum_log_y = logw_mean * static_cast<double>(n) +
                             static_cast<double>(n) * std::log(ym);
    const double ll = static_cast<double>(n) * (std::log(c) - c * std::log(b)) +
                      (c - 1.0) * sum_log_y - static_cast<double>(n);
    return {b, c, ll};
}

} // namespace

WeibullFit fit_reverse_weibull(std::span<const double> maxima) {
    const std::size_t n = maxima.size();
    if (n < 5) {
        throw ArgumentError("fit_reverse_weibull: need at least 5 samples, got " +
                            std::to_string(n));
    }
    double mx = -std::numeric_limits<double>::infinity();
    double mn = std::numeric_limits<double>::infinity();
    for (double v : maxima) {
        if (!std::isfinite(v)) throw ArgumentError("fit_reverse_weibull: non-finite sample");
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    const double range = mx - mn;

    // Degenerate: effectively constant sample.
    if (range <= 1e-12 * std::max(1.0, std::fabs(mx))) {
        return {mx, 0.0, 0.0, 0.0, true};
    }
    // Degenerate: atom at the minimum dominates (ties are exact).
    std::size_t at_min = 0;
    for (double v : maxima) {
        if (v == mn) ++at_min;
    }
    if (2 * at_min > n) {
        return {mn, 0.0, 0.0, 0.0, true};
    }

    // Profile likelihood over the location. Offsets above max(x) span
    // [1e-6, 3] x range on a log grid; golden-section refinement around the
    // best grid point.
    std::vector<double> y(n);
    const auto profile_at = [&](double offset) {
        const double a = mx + offset;
        for (std::size_t i = 0; i < n; ++i) y[i] = a - maxima[i];
        double ym = 0.0;
        return conditional_mle(y, ym);
    };

    constexpr int kGrid = 96;
    const double lo_off = 1e-6 * range;
    const double hi_off = 3.0 * range;
    const double log_lo = std::log(lo_off);
    const double log_hi = std::log(hi_off);

    int best_idx = -1;
    double best_ll = -std::numeric_limits<double>::infinity();
    ConditionalFit best_fit;
    std::vector<double> offsets(kGrid);
    for (int g = 0; g < kGrid; ++g) {
        const double u = log_lo + (log_hi - log_lo) * static_cast<double>(g) /
                                      static_cast<double>(kGrid - 1);
        offsets[static_cast<std::size_t>(g)] = std::exp(u);
        const ConditionalFit fit = profile_at(offsets[static_cast<std::size_t>(g)]);
        if (fit.loglik > best_ll) {
            best_ll = fit.loglik;
            best_idx = g;
            best_fit = fit;
        }
    }

    // Golden-section refinement in log-offset between the grid neighbors of
    // the best point.
    const int lo_idx = std::max(0, best_idx - 1);
    const int hi_idx = std::min(kGrid - 1, best_idx + 1);
    double ua = std::log(offsets[static_cast<std::size_t>(lo_idx)]);
    double ub = std::log(offsets[static_cast<std::size_t>(hi_idx)]);
    const double gr = 0.6180339887498949;
    double u1 = ub - gr * (ub - ua);
    double u2 = ua + gr * (ub - ua);
    ConditionalFit f1 = profile_at(std::exp(u1));
    ConditionalFit f2 = profile_at(std::exp(u2));
    for (int it = 0; it < 80; ++it) {
        if (f1.loglik >= f2.loglik) {
            ub = u2;
            u2 = u1;
            f2 = f1;
            u1 = ub - gr * (ub - ua);
            f1 = profile_at(std::exp(u1));
        } else {
            ua = u1;
            u1 = u2;
            f1 = f2;
            u2 = ua + gr * (ub - ua);
            f2 = profile_at(std::exp(u2));
        }
    }
    const double u_best = (f1.loglik >= f2.loglik) ? u1 : u2;
    const ConditionalFit refined = (f1.loglik >= f2.loglik) ? f1 : f2;
    if (refined.loglik >= best_ll) {
        best_ll = refined.loglik;
        best_fit = refined;
        return {mx + std::exp(u_best), best_fit.scale, best_fit.shape, best_ll, false};
    }
    return {mx + offsets[static_cast<std::size_t>(best_idx)], best_fit.scale, best_fit.shape,
            best_ll, false};
}

} // namespace maskaudit::evt
