#include "maskaudit/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "maskaudit/errors.hpp"
#include "maskaudit/model_io.hpp"
#include "maskaudit/rng.hpp"

namespace maskaudit::oracle {

namespace {

constexpr std::uint64_t kRestartTag = 0x7273; // substream family for restarts
constexpr std::uint64_t kBisectTag = 0x6273;  // substream family for bisection rounds

constexpr double kInf = std::numeric_limits<double>::infinity();

void draw_jitter(rng::Stream& rs, std::vector<double>& offset, double radius, Norm p) {
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

struct RestartOutcome {
    bool success = false;
    double epsilon = kInf;
    std::vector<double> x_adv;
    long queries = 0;
};

int argmax_excluding(const std::vector<double>& v, int excluded) {
    int best = -1;
    for (int k = 0; k < static_cast<int>(v.size()); ++k) {
        if (k == excluded) continue;
        if (best < 0 || v[static_cast<std::size_t>(k)] > v[static_cast<std::size_t>(best)]) {
            best = k;
        }
    }
    return best;
}

void project_ball(std::vector<double>& x, const Vector& x0, double eps, Norm p) {
    if (p == Norm::l2) {
        double n2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - x0[i];
            n2 += d * d;
        }
        const double n = std::sqrt(n2);
        if (n > eps) {
            const double s = eps / n;
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + (x[i] - x0[i]) * s;
        }
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = std::clamp(x[i] - x0[i], -eps, eps);
            x[i] = x0[i] + d;
        }
    }
}

// One PGD restart. Ascends the margin of the currently-strongest wrong class
// with gradient steps sized step_size * eps, projecting back onto the ball
// after each step. Checks (with an exact forward pass) for misclassification
// before every step and once after the last.
RestartOutcome run_restart(const net::Model& m, const net::Model& m_grad, const Vector& x0,
                           int true_class, double eps, const AttackParams& params, int restart) {
    const std::size_t d = x0.size();
    RestartOutcome out;
    net::EvalWorkspace ws;
    std::vector<double> x(x0.begin(), x0.end());
    if (restart > 0) {
        rng::Stream rs(rng::mix2(params.seed, kRestartTag, static_cast<std::uint64_t>(restart)));
        std::vector<double> jitter(d);
        draw_jitter(rs, jitter, params.init_frac * eps, params.p);
        for (std::size_t i = 0; i < d; ++i) x[i] += jitter[i];
        project_ball(x, x0, eps, params.p);
    }

    std::vector<double> logits;
    std::vector<double> grad;
    const double step_len = params.step_size * eps;

    for (int step = 0; step <= params.pgd_steps; ++step) {
        net::forward_into(m, x, logits, ws);
        ++out.queries;
        const int pred =
            static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (pred != true_class) {
            std::vector<double> delta(d);
            for (std::size_t i = 0; i < d; ++i) delta[i] = x[i] - x0[i];
            out.success = true;
            out.epsilon = perturbation_norm(delta, params.p);
            out.x_adv = x;
            return out;
        }
        if (step == params.pgd_steps) break;

        const int j = argmax_excluding(logits, true_class);
        net::head_gradient_into(m_grad, x, j, true_class, grad, ws);
        ++out.queries;
        if (params.p == Norm::l2) {
            const double gn = norm_l2(grad);
            if (gn == 0.0) break; // flat: no direction to follow
            const double s = step_len / gn;
            for (std::size_t i = 0; i < d; ++i) x[i] += s * grad[i];
        } else {
            bool moved = false;
            for (std::size_t i = 0; i < d; ++i) {
                if (grad[i] > 0.0) {
                    x[i] += step_len;
                    moved = true;
                } else if (grad[i] < 0.0) {
                    x[i] -= step_len;
                    moved = true;
                }
            }
            if (!moved) break;
        }
        project_ball(x, x0, eps, params.p);
    }
    return out;
}

} // namespace

void AttackParams::validate() const {
    if (pgd_steps < 1) throw ArgumentError("AttackParams: pgd_steps must be >= 1");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
        throw ArgumentError("AttackParams: step_size must be finite and > 0");
    }
    if (restarts < 1) throw ArgumentError("AttackParams: restarts must be >= 1");
    if (!(init_frac >= 0.0) || !std::isfinite(init_frac)) {
        throw ArgumentError("AttackParams: init_frac must be finite and >= 0");
    }
    if (bisect_iters < 1) throw ArgumentError("AttackParams: bisect_iters must be >= 1");
    if (!(eps_hi > 0.0) || !std::isfinite(eps_hi)) {
        throw DomainError("AttackParams: eps_hi must be finite and > 0");
    }
}

double analytic_linear_distance(const Vector& w, double b, const Vector& x0, Norm p) {
    if (w.size() != x0.size()) throw ShapeError("analytic_linear_distance: size mismatch");
    if (!std::isfinite(b)) throw DomainError("analytic_linear_distance: non-finite offset");
    double dot = b;
    for (std::size_t i = 0; i < w.size(); ++i) dot += w[i] * x0[i];
    const double dn = gradient_dual_norm(w.span(), p);
    if (dn == 0.0) throw DomainError("analytic_linear_distance: zero normal vector");
    return std::fabs(dot) / dn;
}

AttackResult pgd_attack(const net::Model& m, const Vector& x0, int true_class, double eps,
                        const AttackParams& params, Execution exec) {
    m.validate();
    params.validate();
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw DomainError("pgd_attack: eps must be finite and > 0");
    }
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= m.num_classes) {
        throw ArgumentError("pgd_attack: true_class out of range");
    }
    if (x0.size() != m.input_dim) throw ShapeError("pgd_attack: x0 size mismatch");

    // Forward passes use the model as-is; only the backward pass honors the
    // requested gradient mode.
    net::Model m_grad = m;
    m_grad.backward_mode = params.gradient_mode;

    std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(params.restarts));
    // All restarts always run, so query counts do not depend on scheduling.
    if (exec == Execution::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (int r = 0; r < params.restarts; ++r) {
            outcomes[static_cast<std::size_t>(r)] =
                run_restart(m, m_grad, x0, true_class, eps, params, r);
        }
    } else {
        for (int r = 0; r < params.restarts; ++r) {
            outcomes[static_cast<std::size_t>(r)] =
                run_restart(m, m_grad, x0, true_class, eps, params, r);
        }
    }

    AttackResult result;
    result.epsilon = kInf;
    for (const RestartOutcome& oc : outcomes) result.queries += oc.queries;
    // Deterministic reduction over the full outcome set: smallest epsilon
    // wins, ties broken by lexicographically smallest x_adv, so serial and
    // parallel runs agree regardless of scheduling.
    const RestartOutcome* best = nullptr;
    for (const RestartOutcome& oc : outcomes) {
        if (!oc.success) continue;
        if (best == nullptr || oc.epsilon < best->epsilon ||
            (oc.epsilon == best->epsilon &&
             std::lexicographical_compare(oc.x_adv.begin(), oc.x_adv.end(), best->x_adv.begin(),
                                          best->x_adv.end()))) {
            best = &oc;
        }
    }
    if (best != nullptr) {
        // Verify the candidate before trusting it: exact forward pass and
        // budget check.
        Vector cand(best->x_adv);
        if (net::predict(m, cand) == true_class) {
            throw DomainError("pgd_attack: internal verification failed (candidate does "
                              "not misclassify)");
        }
        if (best->epsilon > eps * (1.0 + 1e-12)) {
            throw DomainError("pgd_attack: internal verification failed (candidate left "
                              "the budget ball)");
        }
        result.success = true;
        result.epsilon = best->epsilon;
        result.x_adv = std::move(cand);
    }
    return result;
}

AttackResult min_perturbation_bisect(const net::Model& m, const Vector& x0, int true_class,
                                     const AttackParams& params, Execution exec) {
    params.validate();
    AttackResult hi_result = pgd_attack(m, x0, true_class, params.eps_hi, params, exec);
    long queries = hi_result.queries;
    if (!hi_result.success) {
        AttackResult fail;
        fail.success = false;
        fail.epsilon = kInf;
        fail.queries = queries;
        return fail;
    }

    double lo = 0.0;
    AttackResult best = std::move(hi_result);
    for (int t = 0; t < params.bisect_iters; ++t) {
        const double mid = 0.5 * (lo + best.epsilon);
        if (!(mid > 0.0) || mid >= best.epsilon) break; // interval exhausted numerically
        AttackParams pt = params;
        pt.seed = rng::mix2(params.seed, kBisectTag, static_cast<std::uint64_t>(t));
        AttackResult r = pgd_attack(m, x0, true_class, mid, pt, exec);
        queries += r.queries;
        if (r.success) {
            best = std::move(r);
        } else {
            lo = mid;
        }
    }
    best.queries = queries;
    return best;
}

double brute_force_min_perturbation(const net::Model& m, const Vector& x0, int true_class,
                                    Norm p, double grid_step, double max_radius,
                                    Execution exec) {
    m.validate();
    if (m.input_dim > 3) {
        throw ArgumentError("brute_force_min_perturbation: only input_dim <= 3 is tractable");
    }
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= m.num_classes) {
        throw ArgumentError("brute_force_min_perturbation: true_class out of range");
    }
    if (x0.size() != m.input_dim) {
        throw ShapeError("brute_force_min_perturbation: x0 size mismatch");
    }
    if (!(grid_step > 0.0) || !std::isfinite(grid_step)) {
        throw DomainError("brute_force_min_perturbation: grid_step must be finite and > 0");
    }
    if (!(max_radius > 0.0) || !std::isfinite(max_radius)) {
        throw DomainError("brute_force_min_perturbation: max_radius must be finite and > 0");
    }

    const int d = static_cast<int>(m.input_dim);
    if (net::predict(m, x0) != true_class) return 0.0;

    const int shells = static_cast<int>(std::floor(max_radius / grid_step * (1.0 + 1e-12)));
    double best = kInf;

    std::vector<std::array<int, 3>> offsets;
    std::vector<double> norms;
    std::vector<char> hits;

    for (int s = 1; s <= shells; ++s) {
        // Every point of shell s has inf-norm exactly s*grid_step, and the
        // l2 norm dominates the inf norm, so once best <= s*grid_step no
        // closer point can appear in this or any later shell.
        if (best <= static_cast<double>(s) * grid_step) break;

        offsets.clear();
        const int lo1 = (d >= 2) ? -s : 0;
        const int hi1 = (d >= 2) ? s : 0;
        const int lo2 = (d >= 3) ? -s : 0;
        const int hi2 = (d >= 3) ? s : 0;
        for (int k0 = -s; k0 <= s; ++k0) {
            for (int k1 = lo1; k1 <= hi1; ++k1) {
                for (int k2 = lo2; k2 <= hi2; ++k2) {
                    int mx = std::abs(k0);
                    if (d >= 2) mx = std::max(mx, std::abs(k1));
                    if (d >= 3) mx = std::max(mx, std::abs(k2));
                    if (mx != s) continue;
                    offsets.push_back({k0, k1, k2});
                }
            }
        }

        const std::size_t np = offsets.size();
        norms.assign(np, kInf);
        hits.assign(np, 0);

        const auto eval_point = [&](std::size_t idx) {
            const auto& k = offsets[idx];
            std::vector<double> delta(static_cast<std::size_t>(d));
            for (int c = 0; c < d; ++c) {
                delta[static_cast<std::size_t>(c)] = static_cast<double>(k[static_cast<std::size_t>(c)]) * grid_step;
            }
            const double nrm = perturbation_norm(delta, p);
            if (nrm > max_radius * (1.0 + 1e-12)) return;
            if (nrm >= best) return; // prune against the shell-entry best (read-only)
            net::EvalWorkspace ws;
            std::vector<double> logits;
            std::vector<double> point(static_cast<std::size_t>(d));
            for (int c = 0; c < d; ++c) point[static_cast<std::size_t>(c)] = x0[static_cast<std::size_t>(c)] + delta[static_cast<std::size_t>(c)];
            net::forward_into(m, point, logits, ws);
            const int pred = static_cast<int>(
                std::max_element(logits.begin(), logits.end()) - logits.begin());
            if (pred != true_class) {
                norms[idx] = nrm;
                hits[idx] = 1;
            }
        };

        if (exec == Execution::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (long long i = 0; i < static_cast<long long>(np); ++i) {
                eval_point(static_cast<std::size_t>(i));
            }
        } else {
            for (std::size_t i = 0; i < np; ++i) eval_point(i);
        }

        // Deterministic reduction: canonical enumeration order breaks ties.
        for (std::size_t i = 0; i < np; ++i) {
            if (hits[i] != 0 && norms[i] < best) best = norms[i];
        }
    }
    return best;
}

nlohmann::ordered_json to_json(const AttackResult& result, const AttackParams& params) {
    nlohmann::ordered_json j;
    j["mode"] = params.gradient_mode == net::BackwardMode::bpda ? "bpda" : "vanilla";
    j["p"] = norm_name(params.p);
    j["success"] = result.success;
    if (std::isfinite(result.epsilon)) {
        j["epsilon"] = result.epsilon;
    } else {
        j["epsilon"] = nullptr;
    }
    j["queries"] = result.queries;
    if (result.success && result.x_adv.has_value()) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (double v : *result.x_adv) arr.push_back(io::encode_f64(v));
        j["x_adv"] = std::move(arr);
    } else {
        j["x_adv"] = nullptr;
    }
    return j;
}

} // namespace maskaudit::oracle
