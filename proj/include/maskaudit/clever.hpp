#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "maskaudit/linalg.hpp"
#include "maskaudit/network.hpp"
#include "maskaudit/parallel.hpp"
#include "maskaudit/weibull.hpp"

// Sampling-based local-Lipschitz robustness estimator.
//
// For a point x0 with true class i and a target class j, the margin
// g(x) = f_i(x) - f_j(x) is positive at x0 and zero on the decision
// boundary. If L is the local Lipschitz constant of g on the radius-R ball
// around x0 (measured in the dual norm of the perturbation norm p), then no
// perturbation smaller than g(x0)/L can flip i to j, so g(x0)/L is reported
// as a robustness lower bound. L is estimated statistically: sample
// gradients of g at uniform points in the ball, take per-batch maxima of
// their dual norms, and fit a reverse Weibull to the batch maxima; the
// fitted location is the estimated maximum gradient norm.
//
// The estimate inherits everything the gradient samples can see — and
// nothing they cannot. Models whose gradients are zero almost everywhere
// (quantized/saturated transfer functions) yield tiny fitted constants and
// wildly inflated "bounds"; quantifying exactly that failure is the point of
// this toolkit.

namespace maskaudit::clever {

struct CleverParams {
    Norm p = Norm::l2;
    double radius = 1.0; // sampling ball radius R; also caps the score
    int n_batches = 50;
    int batch_size = 100;
    std::uint64_t seed = 0;

    // radius finite > 0; n_batches >= 5 (the fit needs that many maxima;
    // >= 20 recommended); batch_size >= 1.
    void validate() const;
};

struct GradSampleStats {
    std::vector<double> maxima; // one entry per batch: max dual-norm gradient
    long n_samples = 0;
    long n_zero = 0; // samples whose gradient dual norm is exactly zero
    double zero_fraction = 0.0;
};

struct TargetScore {
    int target = -1;
    double margin = 0.0;    // g(x0) = f_true - f_target
    double lipschitz = 0.0; // fitted reverse-Weibull location
    double score = 0.0;     // min(margin / lipschitz, radius); radius if lipschitz == 0
    bool capped = false;    // score hit the sampling radius
    bool degenerate = false;
    double zero_fraction = 0.0;
    std::string error; // nonempty if the fit failed; score invalid then
};

struct CleverScore {
    CleverParams params;
    int true_class = -1;
    int predicted = -1;
    bool misclassified = false; // x0 not predicted as true_class: score is 0
    double zero_fraction = 0.0; // aggregate across targets
    std::vector<TargetScore> targets;
    double untargeted = 0.0; // min over valid targeted scores
};

// n points uniform in the radius-R l_p ball (p in {2, inf}) around x0.
// Deterministic in seed; draw order is fixed.
std::vector<Vector> sample_ball(const Vector& x0, double radius, Norm p, int n,
                                std::uint64_t seed);

// Per-batch maxima of the dual-norm gradient of f_true - f_target over
// uniform samples in the ball. Batch b draws from an independent substream
// of params.seed, so serial and parallel execution are bit-identical.
GradSampleStats batch_max_grad_norms(const net::Model& m, const Vector& x0, int true_class,
                                     int target, const CleverParams& params,
                                     Execution exec = Execution::parallel);

// Score assembly rule (exposed for property tests): min(margin/L, R), with
// L <= 0 mapped to the cap R.
double assemble_score(double margin_value, double lipschitz, double radius, bool& capped);

// Full score: per-target estimates for every j != true_class plus the
// untargeted minimum. Fit failures are recorded per target and excluded
// from the minimum; if every target fails, the last FitError is rethrown.
CleverScore clever_score(const net::Model& m, const Vector& x0, int true_class,
                         const CleverParams& params, Execution exec = Execution::parallel);

struct DiagnosticResult {
    bool flagged = false;
    double zero_fraction = 0.0;
    double threshold = 0.5;
};

// Gradient-masking tripwire: flags when the fraction of exactly-zero
// sampled gradients exceeds the threshold (in (0,1)).
DiagnosticResult masking_diagnostic(double zero_fraction, double threshold = 0.5);
DiagnosticResult masking_diagnostic(const GradSampleStats& stats, double threshold = 0.5);

nlohmann::ordered_json to_json(const CleverScore& score);

} // namespace maskaudit::clever
