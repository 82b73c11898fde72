#include "maskaudit/clever.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "maskaudit/errors.hpp"
#include "maskaudit/rng.hpp"

namespace maskaudit::clever {

namespace {

constexpr std::uint64_t kTargetTag = 0x7467; // substream family for targets
constexpr std::uint64_t kBatchTag = 0x6261;  // substream family for batches

// One uniform draw from the radius-R l_p ball, written into `offset`.
// l2: Gaussian direction scaled by R * U^(1/d); linf: per-coordinate uniform.
void draw_ball_offset(rng::Stream& rs, std::vector<double>& offset, double radius, Norm p) {
    const std::size_t d = offset.size();
    if (p == Norm::l2) {
        double norm2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            offset[i] = rs.normal();
            norm2 += offset[i] * offset[i];
        }
        const double u = rs.uniform01_open_left();
        const double r = radius * std::pow(u, 1.0 / static_cast<double>(d));
        const double n = std::sqrt(norm2);
        const double scale = (n > 0.0) ? r / n : 0.0;
        for (std::size_t i = 0; i < d; ++i) offset[i] *= scale;
    } else {
        for (std::size_t i = 0; i < d; ++i) offset[i] = rs.uniform(-radius, radius);
    }
}

void require_target_pair(const net::Model& m, int true_class, int target) {
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= m.num_classes) {
        throw ArgumentError("true_class out of range");
    }
    if (target < 0 || static_cast<std::size_t>(target) >= m.num_classes) {
        throw ArgumentError("target class out of range");
    }
    if (target == true_class) throw ArgumentError("target must differ from true_class");
}

} // namespace

void CleverParams::validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw DomainError("CleverParams: radius must be finite and > 0");
    }
    if (n_batches < 5) {
        throw ArgumentError("CleverParams: n_batches must be >= 5 (the location fit needs "
                            "at least 5 batch maxima; >= 20 recommended)");
    }
    if (batch_size < 1) throw ArgumentError("CleverParams: batch_size must be >= 1");
}

std::vector<Vector> sample_ball(const Vector& x0, double radius, Norm p, int n,
                                std::uint64_t seed) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw DomainError("sample_ball: radius must be finite and > 0");
    }
    if (n < 0) throw ArgumentError("sample_ball: n must be >= 0");
    if (x0.empty()) throw ShapeError("sample_ball: empty center");
    rng::Stream rs(seed);
    std::vector<double> offset(x0.size());
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        draw_ball_offset(rs, offset, radius, p);
        std::vector<double> point(x0.size());
        for (std::size_t i = 0; i < x0.size(); ++i) point[i] = x0[i] + offset[i];
        out.emplace_back(std::move(point));
    }
    return out;
}

GradSampleStats batch_max_grad_norms(const net::Model& m, const Vector& x0, int true_class,
                                     int target, const CleverParams& params, Execution exec) {
    m.validate();
    params.validate();
    require_target_pair(m, true_class, target);
    if (x0.size() != m.input_dim) throw ShapeError("batch_max_grad_norms: x0 size mismatch");

    const int nb = params.n_batches;
    std::vector<double> maxima(static_cast<std::size_t>(nb), 0.0);
    std::vector<long> zeros(static_cast<std::size_t>(nb), 0);

    // Each batch owns an independent substream and its own output slot, so
    // scheduling cannot affect results.
    const auto run_batch = [&](int b) {
        rng::Stream rs(rng::mix2(params.seed, kBatchTag, static_cast<std::uint64_t>(b)));
        net::EvalWorkspace ws;
        std::vector<double> offset(m.input_dim);
        std::vector<double> point(m.input_dim);
        std::vector<double> grad;
        double best = 0.0;
        long nz = 0;
        for (int s = 0; s < params.batch_size; ++s) {
            draw_ball_offset(rs, offset, params.radius, params.p);
            for (std::size_t i = 0; i < point.size(); ++i) point[i] = x0[i] + offset[i];
            net::head_gradient_into(m, point, true_class, target, grad, ws);
            const double nrm = gradient_dual_norm(grad, params.p);
            if (nrm == 0.0) ++nz;
            best = std::max(best, nrm);
        }
        maxima[static_cast<std::size_t>(b)] = best;
        zeros[static_cast<std::size_t>(b)] = nz;
    };

    if (exec == Execution::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int b = 0; b < nb; ++b) run_batch(b);
    } else {
        for (int b = 0; b < nb; ++b) run_batch(b);
    }

    GradSampleStats stats;
    stats.maxima = std::move(maxima);
    stats.n_samples = static_cast<long>(nb) * params.batch_size;
    stats.n_zero = 0;
    for (long z : zeros) stats.n_zero += z;
    stats.zero_fraction =
        static_cast<double>(stats.n_zero) / static_cast<double>(stats.n_samples);
    return stats;
}

double assemble_score(double margin_value, double lipschitz, double radius, bool& capped) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw DomainError("assemble_score: radius must be finite and > 0");
    }
    if (margin_value < 0.0) throw DomainError("assemble_score: margin must be >= 0");
    if (lipschitz <= 0.0) {
        capped = true;
        return radius;
    }
    const double s = margin_value / lipschitz;
    if (s >= radius) {
        capped = true;
        return radius;
    }
    capped = false;
    return s;
}

CleverScore clever_score(const net::Model& m, const Vector& x0, int true_class,
                         const CleverParams& params, Execution exec) {
    m.validate();
    params.validate();
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= m.num_classes) {
        throw ArgumentError("clever_score: true_class out of range");
    }
    if (x0.size() != m.input_dim) throw ShapeError("clever_score: x0 size mismatch");

    CleverScore out;
    out.params = params;
    out.true_class = true_class;

    net::EvalWorkspace ws;
    std::vector<double> logits;
    net::forward_into(m, x0.span(), logits, ws);
    out.predicted =
        static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (out.predicted != true_class) {
        out.misclassified = true;
        out.untargeted = 0.0;
        return out;
    }

    long total_samples = 0;
    long total_zero = 0;
    double best = std::numeric_limits<double>::infinity();
    bool any_valid = false;
    std::string last_error;

    for (int j = 0; j < static_cast<int>(m.num_classes); ++j) {
        if (j == true_class) continue;
        CleverParams pj = params;
        pj.seed = rng::mix2(params.seed, kTargetTag, static_cast<std::uint64_t>(j));
        const GradSampleStats stats = batch_max_grad_norms(m, x0, true_class, j, pj, exec);
        total_samples += stats.n_samples;
        total_zero += stats.n_zero;

        TargetScore ts;
        ts.target = j;
        ts.margin = logits[static_cast<std::size_t>(true_class)] -
                    logits[static_cast<std::size_t>(j)];
        ts.zero_fraction = stats.zero_fraction;
        try {
            const evt::WeibullFit fit = evt::fit_reverse_weibull(stats.maxima);
            ts.lipschitz = fit.location;
            ts.degenerate = fit.degenerate;
            ts.score = assemble_score(ts.margin, ts.lipschitz, params.radius, ts.capped);
            best = std::min(best, ts.score);
            any_valid = true;
        } catch (const FitError& e) {
            ts.error = e.what();
            last_error = e.what();
        }
        out.targets.push_back(std::move(ts));
    }

    if (!any_valid) {
        throw FitError("clever_score: every target fit failed; last error: " + last_error);
    }
    out.zero_fraction = static_cast<double>(total_zero) / static_cast<double>(total_samples);
    out.untargeted = best;
    return out;
}

DiagnosticResult masking_diagnostic(double zero_fraction, double threshold) {
    if (!(threshold > 0.0) || !(threshold < 1.0)) {
        throw ArgumentError("masking_diagnostic: threshold must lie in (0, 1)");
    }
    if (zero_fraction < 0.0 || zero_fraction > 1.0) {
        throw DomainError("masking_diagnostic: zero_fraction must lie in [0, 1]");
    }
    return {zero_fraction > threshold, zero_fraction, threshold};
}

DiagnosticResult masking_diagnostic(const GradSampleStats& stats, double threshold) {
    return masking_diagnostic(stats.zero_fraction, threshold);
}

nlohmann::ordered_json to_json(const CleverScore& score) {
    nlohmann::ordered_json j;
    j["p"] = norm_name(score.params.p);
    j["R"] = score.params.radius;
    j["N_b"] = score.params.n_batches;
    j["batch_size"] = score.params.batch_size;
    j["seed"] = score.params.seed;
    j["zero_fraction"] = score.zero_fraction;
    j["misclassified"] = score.misclassified;
    nlohmann::ordered_json targets = nlohmann::ordered_json::array();
    for (const TargetScore& t : score.targets) {
        nlohmann::ordered_json tj;
        tj["j"] = t.target;
        tj["margin"] = t.margin;
        if (t.error.empty()) {
            tj["L_hat"] = t.lipschitz;
            tj["score"] = t.score;
            tj["capped"] = t.capped;
            tj["degenerate"] = t.degenerate;
        } else {
            tj["error"] = t.error;
        }
        targets.push_back(std::move(tj));
    }
    j["targets"] = std::move(targets);
    j["untargeted_score"] = score.untargeted;
    return j;
}

} // namespace maskaudit::clever
