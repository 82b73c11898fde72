#include "maskaudit/masking.hpp"

#include <cmath>
#include <limits>
#include <variant>

namespace maskaudit::mask {

namespace {

// Largest singular value of W by power iteration on W^T W. Matrices here are
// tiny (dims <= 16), so a fixed iteration budget with a relative-change stop
// is plenty. Deterministic start vector.
double spectral_norm(const Matrix& W) {
    const std::size_t rows = W.rows();
    const std::size_t cols = W.cols();
    std::vector<double> v(cols);
    for (std::size_t j = 0; j < cols; ++j) v[j] = 1.0 + 1e-3 * static_cast<double>(j);
    double vn = norm_l2(v);
    for (double& x : v) x /= vn;

    std::vector<double> u(rows);
    double sigma = 0.0;
    for (int it = 0; it < 500; ++it) {
        for (std::size_t i = 0; i < rows; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) acc += W(i, j) * v[j];
            u[i] = acc;
        }
        const double s = norm_l2(u);
        if (s == 0.0) return 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < rows; ++i) acc += W(i, j) * u[i];
            v[j] = acc;
        }
        const double n2 = norm_l2(v);
        if (n2 == 0.0) return s;
        for (double& x : v) x /= n2;
        if (it > 4 && std::fabs(s - sigma) <= 1e-14 * std::max(1.0, s)) {
            return s;
        }
        sigma = s;
    }
    return sigma;
}

double max_row_l1(const Matrix& W) {
    double best = 0.0;
    for (std::size_t i = 0; i < W.rows(); ++i) {
        best = std::max(best, norm_l1(W.row(i)));
    }
    return best;
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

} // namespace

double analytic_lipschitz(const net::Layer& layer, Norm p) {
    return std::visit(
        overloaded{
            [&](const net::Dense& d) {
                return p == Norm::l2 ? spectral_norm(d.W) : max_row_l1(d.W);
            },
            [](const net::Relu&) { return 1.0; },
            [](const net::Identity&) { return 1.0; },
            [](const net::Sigmoid& s) {
                require_gain(s.gain);
                return s.gain / 4.0;
            },
            [](const net::RampStaircase& r) {
                require_levels(r.levels);
                require_delta(r.delta);
                return 1.0 / r.delta;
            },
            [](const net::Staircase& s) {
                require_levels(s.levels);
                return std::numeric_limits<double>::infinity();
            },
        },
        layer);
}

std::vector<CurvePoint> sample_curve(int levels, double delta, double lo, double hi,
                                     int resolution) {
    require_levels(levels);
    require_delta(delta);
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw ArgumentError("sample_curve: window must satisfy lo < hi and be finite");
    }
    if (resolution < 2) throw ArgumentError("sample_curve: resolution must be >= 2");
    std::vector<CurvePoint> pts;
    pts.reserve(static_cast<std::size_t>(resolution));
    const double span = hi - lo;
    for (int i = 0; i < resolution; ++i) {
        const double x = lo + span * static_cast<double>(i) / static_cast<double>(resolution - 1);
        pts.push_back({x, staircase_eval_t(x, levels), ramp_staircase_eval_t(x, levels, delta)});
    }
    return pts;
}

} // namespace maskaudit::mask
