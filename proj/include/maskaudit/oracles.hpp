#pragma once

#include <cstdint>
#include <optional>

#include "json.hpp"

#include "maskaudit/linalg.hpp"
#include "maskaudit/network.hpp"
#include "maskaudit/parallel.hpp"

// Ground-truth oracles, independent of the statistical estimator: a PGD
// attack (optionally with straight-through gradients for the
// piecewise-constant layers), a bisection wrapper that turns it into a
// minimal-perturbation upper bound, an exhaustive grid scan for low
// dimensions, and the closed-form distance for linear models. Any successful
// attack is a constructive refutation of a larger claimed "lower bound".

namespace maskaudit::oracle {

struct AttackParams {
    Norm p = Norm::l2;
    int pgd_steps = 60;
    double step_size = 0.15; // per-step length as a fraction of the budget eps
    int restarts = 8;        // restart 0 starts exactly at x0; later restarts jitter
    double init_frac = 0.25; // jitter radius for restarts >= 1, as a fraction of eps
    int bisect_iters = 25;
    double eps_hi = 1.0; // initial outer radius for the bisection
    net::BackwardMode gradient_mode = net::BackwardMode::exact; // exact = vanilla, bpda
    std::uint64_t seed = 0;

    void validate() const;
};

struct AttackResult {
    bool success = false;
    double epsilon = 0.0; // achieved perturbation norm; +inf when failed
    std::optional<Vector> x_adv;
    long queries = 0; // forward + gradient evaluations
};

// Distance from x0 to the hyperplane {x : w.x + b = 0} in the l_p norm:
// |w.x0 + b| / dual_norm(w). Exact minimal adversarial distance of a binary
// linear classifier with margin w.x + b.
double analytic_linear_distance(const Vector& w, double b, const Vector& x0, Norm p);

// Projected gradient ascent on the margin max_j f_j - f_true inside the
// radius-eps l_p ball. Success is verified with an exact forward pass; the
// reported epsilon is the achieved perturbation norm (<= eps). All restarts
// always run (so query counts are deterministic); the returned candidate is
// the successful one with the smallest epsilon, ties broken by
// lexicographically smallest x_adv. Serial and parallel execution are
// bit-identical.
AttackResult pgd_attack(const net::Model& m, const Vector& x0, int true_class, double eps,
                        const AttackParams& params, Execution exec = Execution::parallel);

// Bisects the attack budget down from params.eps_hi. Returns the smallest
// verified-successful perturbation found (interval width shrinks by 2x per
// iteration); failure at eps_hi reports success = false, epsilon = +inf.
AttackResult min_perturbation_bisect(const net::Model& m, const Vector& x0, int true_class,
                                     const AttackParams& params,
                                     Execution exec = Execution::parallel);

// Exhaustive scan of the grid x0 + grid_step * k (k integer vectors) out to
// max_radius in the l_p norm, enumerated shell by shell in increasing
// inf-norm with early termination once no closer point can exist. Returns
// the smallest l_p distance of a misclassified grid point, or +inf if none.
// Only for input_dim <= 3.
double brute_force_min_perturbation(const net::Model& m, const Vector& x0, int true_class,
                                    Norm p, double grid_step, double max_radius,
                                    Execution exec = Execution::parallel);

nlohmann::ordered_json to_json(const AttackResult& result, const AttackParams& params);

} // namespace maskaudit::oracle
