#include "maskaudit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "maskaudit/errors.hpp"
#include "maskaudit/masking.hpp"
#include "maskaudit/model_io.hpp"
#include "maskaudit/rng.hpp"

namespace maskaudit::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Substream tags: estimator seeds are mixed per (section, row); attack seeds
// per (section, mode, row).
constexpr std::uint64_t kSectionBase = 0;
constexpr std::uint64_t kSectionMasked = 1;

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

std::string join_coords(const Vector& x) {
    std::string out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) out += ';';
        out += fmt17(x[i]);
    }
    return out;
}

std::string sanitize_csv(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    return out;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& context) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ParseError(context + ": unknown field \"" + it.key() + "\"");
    }
}

const json& field(const json& j, const char* key, const std::string& context) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(context + ": missing field \"" + key + "\"");
    return *it;
}

int get_int(const json& j, const char* key, const std::string& context) {
    const json& f = field(j, key, context);
    if (!f.is_number_integer()) {
        throw ParseError(context + ": field \"" + key + "\" must be an integer");
    }
    return f.get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& context) {
    const json& f = field(j, key, context);
    if (f.is_number_unsigned()) return f.get<std::uint64_t>();
    if (f.is_number_integer() && f.get<long long>() >= 0) {
        return static_cast<std::uint64_t>(f.get<long long>());
    }
    throw ParseError(context + ": field \"" + key + "\" must be a non-negative integer");
}

double get_double(const json& j, const char* key, const std::string& context) {
    return io::decode_f64(field(j, key, context), context + "." + key);
}

std::string get_string(const json& j, const char* key, const std::string& context) {
    const json& f = field(j, key, context);
    if (!f.is_string()) throw ParseError(context + ": field \"" + key + "\" must be a string");
    return f.get<std::string>();
}

std::string get_string_or(const json& j, const char* key, const std::string& fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

net::Precision precision_from_string(const std::string& s, const std::string& context) {
    if (s == "f64") return net::Precision::f64;
    if (s == "f32") return net::Precision::f32;
    throw ParseError(context + ": precision must be \"f64\" or \"f32\", got \"" + s + "\"");
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

std::string mask_kind_name(MaskKind k) {
    switch (k) {
        case MaskKind::none: return "none";
        case MaskKind::staircase: return "staircase";
        case MaskKind::ramp: return "ramp";
        case MaskKind::sigmoid: return "sigmoid";
    }
    throw ArgumentError("mask_kind_name: invalid kind");
}

MaskKind mask_kind_from_string(const std::string& s) {
    if (s == "none") return MaskKind::none;
    if (s == "staircase") return MaskKind::staircase;
    if (s == "ramp") return MaskKind::ramp;
    if (s == "sigmoid") return MaskKind::sigmoid;
    throw ArgumentError("mask kind must be none|staircase|ramp|sigmoid, got \"" + s + "\"");
}

void ExperimentConfig::validate() const {
    if (schema_version != 1) {
        throw ArgumentError("config: unsupported schema_version " +
                            std::to_string(schema_version));
    }
    if (dataset.d < 1 || dataset.d > 3) {
        throw ArgumentError("config: dataset.d must be in [1, 3] (brute force tractability)");
    }
    if (dataset.n_per_class < 1) throw ArgumentError("config: dataset.n_per_class must be >= 1");
    if (dataset.num_classes < 2 || dataset.num_classes > dataset.d) {
        throw ArgumentError("config: dataset.num_classes must be in [2, d]");
    }
    if (!(dataset.separation > 0.0) || !std::isfinite(dataset.separation)) {
        throw DomainError("config: dataset.separation must be finite and > 0");
    }
    if (dataset.n_test_points < 1) {
        throw ArgumentError("config: dataset.n_test_points must be >= 1");
    }
    if (dataset.n_test_points > dataset.n_per_class * dataset.num_classes) {
        throw ArgumentError("config: dataset.n_test_points exceeds the held-out pool");
    }
    if (!train.hidden.empty()) {
        throw ArgumentError("config: train.hidden must be empty; factor-based radii need the "
                            "closed-form distance of a linear base model");
    }
    if (!(train.lr > 0.0) || train.epochs < 1) {
        throw ArgumentError("config: train.lr must be > 0 and train.epochs >= 1");
    }
    mask::require_levels(mask.levels);
    mask::require_delta(mask.delta);
    mask::require_gain(mask.gain);
    if (!(mask.margin_scale > 0.0) || !std::isfinite(mask.margin_scale)) {
        throw ArgumentError("config: mask.margin_scale must be finite and > 0");
    }
    if (mask.kind == MaskKind::sigmoid && dataset.num_classes != 2) {
        throw ArgumentError("config: the sigmoid mask construction is binary-only");
    }
    if (estimator.p != attack.p) {
        throw ArgumentError("config: estimator.p and attack.p must agree (one norm per "
                            "experiment)");
    }
    if (!(estimator.radius_factor > 0.0) || !std::isfinite(estimator.radius_factor)) {
        throw DomainError("config: estimator.radius_factor must be finite and > 0");
    }
    if (estimator.n_batches < 5 || estimator.batch_size < 1) {
        throw ArgumentError("config: estimator needs n_batches >= 5 and batch_size >= 1");
    }
    if (attack.pgd_steps < 1 || attack.restarts < 1 || attack.bisect_iters < 1) {
        throw ArgumentError("config: attack.pgd_steps/restarts/bisect_iters must be >= 1");
    }
    if (!(attack.step_size > 0.0) || !(attack.init_frac >= 0.0)) {
        throw ArgumentError("config: attack.step_size must be > 0 and init_frac >= 0");
    }
    if (!(attack.eps_hi_factor > 0.0) || !std::isfinite(attack.eps_hi_factor)) {
        throw DomainError("config: attack.eps_hi_factor must be finite and > 0");
    }
    if (attack.init_frac * attack.eps_hi_factor >= 1.0) {
        // Jittered restarts must start inside the correct region: the jitter
        // radius (init_frac * eps) may never reach the analytic distance even
        // at the outer bisection budget, or "success at the starting point"
        // would contaminate the attack comparison.
        throw ArgumentError("config: attack.init_frac * eps_hi_factor must be < 1");
    }
    if (!(brute_force.grid_step_factor > 0.0) || !(brute_force.max_radius_factor > 0.0)) {
        throw DomainError("config: brute_force factors must be > 0");
    }
    if (output.csv_path.empty() || output.json_path.empty()) {
        throw ArgumentError("config: output.csv_path and output.json_path are required");
    }
}

ordered_json config_to_json(const ExperimentConfig& c) {
    ordered_json j;
    j["schema_version"] = c.schema_version;
    j["dataset"] = {{"seed", c.dataset.seed},
                    {"d", c.dataset.d},
                    {"n_per_class", c.dataset.n_per_class},
                    {"num_classes", c.dataset.num_classes},
                    {"separation", c.dataset.separation},
                    {"test_seed", c.dataset.test_seed},
                    {"n_test_points", c.dataset.n_test_points}};
    j["train"] = {{"lr", c.train.lr},
                  {"epochs", c.train.epochs},
                  {"seed", c.train.seed},
                  {"hidden", c.train.hidden},
                  {"activation", c.train.activation},
                  {"gain", c.train.gain}};
    j["mask"] = {{"kind", mask_kind_name(c.mask.kind)},
                 {"levels", c.mask.levels},
                 {"delta", c.mask.delta},
                 {"gain", c.mask.gain},
                 {"margin_scale", c.mask.margin_scale},
                 {"precision", c.mask.precision == net::Precision::f32 ? "f32" : "f64"}};
    j["estimator"] = {{"p", norm_name(c.estimator.p)},
                      {"radius_factor", c.estimator.radius_factor},
                      {"n_batches", c.estimator.n_batches},
                      {"batch_size", c.estimator.batch_size},
                      {"seed", c.estimator.seed}};
    j["attack"] = {{"p", norm_name(c.attack.p)},
                   {"pgd_steps", c.attack.pgd_steps},
                   {"step_size", c.attack.step_size},
                   {"restarts", c.attack.restarts},
                   {"init_frac", c.attack.init_frac},
                   {"bisect_iters", c.attack.bisect_iters},
                   {"eps_hi_factor", c.attack.eps_hi_factor},
                   {"seed", c.attack.seed}};
    j["brute_force"] = {{"grid_step_factor", c.brute_force.grid_step_factor},
                        {"max_radius_factor", c.brute_force.max_radius_factor}};
    ordered_json out;
    out["csv_path"] = c.output.csv_path;
    out["json_path"] = c.output.json_path;
    if (!c.output.base_model_path.empty()) out["base_model_path"] = c.output.base_model_path;
    if (!c.output.masked_model_path.empty()) {
        out["masked_model_path"] = c.output.masked_model_path;
    }
    j["output"] = std::move(out);
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("config: expected a JSON object");
    check_keys(j, {"schema_version", "dataset", "train", "mask", "estimator", "attack",
                   "brute_force", "output"},
               "config");
    ExperimentConfig c;
    c.schema_version = get_int(j, "schema_version", "config");

    const json& ds = field(j, "dataset", "config");
    check_keys(ds, {"seed", "d", "n_per_class", "num_classes", "separation", "test_seed",
                    "n_test_points"},
               "config.dataset");
    c.dataset.seed = get_u64(ds, "seed", "config.dataset");
    c.dataset.d = get_int(ds, "d", "config.dataset");
    c.dataset.n_per_class = get_int(ds, "n_per_class", "config.dataset");
    c.dataset.num_classes = get_int(ds, "num_classes", "config.dataset");
    c.dataset.separation = get_double(ds, "separation", "config.dataset");
    c.dataset.test_seed = get_u64(ds, "test_seed", "config.dataset");
    c.dataset.n_test_points = get_int(ds, "n_test_points", "config.dataset");

    const json& tr = field(j, "train", "config");
    check_keys(tr, {"lr", "epochs", "seed", "hidden", "activation", "gain"}, "config.train");
    c.train.lr = get_double(tr, "lr", "config.train");
    c.train.epochs = get_int(tr, "epochs", "config.train");
    c.train.seed = get_u64(tr, "seed", "config.train");
    const json& hidden = field(tr, "hidden", "config.train");
    if (!hidden.is_array()) throw ParseError("config.train: \"hidden\" must be an array");
    c.train.hidden.clear();
    for (const auto& h : hidden) {
        if (!h.is_number_integer()) {
            throw ParseError("config.train: \"hidden\" entries must be integers");
        }
        c.train.hidden.push_back(h.get<int>());
    }
    c.train.activation = get_string(tr, "activation", "config.train");
    c.train.gain = get_double(tr, "gain", "config.train");

    const json& mk = field(j, "mask", "config");
    check_keys(mk, {"kind", "levels", "delta", "gain", "margin_scale", "precision"},
               "config.mask");
    c.mask.kind = mask_kind_from_string(get_string(mk, "kind", "config.mask"));
    c.mask.levels = get_int(mk, "levels", "config.mask");
    c.mask.delta = get_double(mk, "delta", "config.mask");
    c.mask.gain = get_double(mk, "gain", "config.mask");
    c.mask.margin_scale = get_double(mk, "margin_scale", "config.mask");
    c.mask.precision =
        precision_from_string(get_string(mk, "precision", "config.mask"), "config.mask");

    const json& es = field(j, "estimator", "config");
    check_keys(es, {"p", "radius_factor", "n_batches", "batch_size", "seed"},
               "config.estimator");
    c.estimator.p = norm_from_string(get_string(es, "p", "config.estimator"));
    c.estimator.radius_factor = get_double(es, "radius_factor", "config.estimator");
    c.estimator.n_batches = get_int(es, "n_batches", "config.estimator");
    c.estimator.batch_size = get_int(es, "batch_size", "config.estimator");
    c.estimator.seed = get_u64(es, "seed", "config.estimator");

    const json& at = field(j, "attack", "config");
    check_keys(at, {"p", "pgd_steps", "step_size", "restarts", "init_frac", "bisect_iters",
                    "eps_hi_factor", "seed"},
               "config.attack");
    c.attack.p = norm_from_string(get_string(at, "p", "config.attack"));
    c.attack.pgd_steps = get_int(at, "pgd_steps", "config.attack");
    c.attack.step_size = get_double(at, "step_size", "config.attack");
    c.attack.restarts = get_int(at, "restarts", "config.attack");
    c.attack.init_frac = get_double(at, "init_frac", "config.attack");
    c.attack.bisect_iters = get_int(at, "bisect_iters", "config.attack");
    c.attack.eps_hi_factor = get_double(at, "eps_hi_factor", "config.attack");
    c.attack.seed = get_u64(at, "seed", "config.attack");

    const json& bf = field(j, "brute_force", "config");
    check_keys(bf, {"grid_step_factor", "max_radius_factor"}, "config.brute_force");
    c.brute_force.grid_step_factor = get_double(bf, "grid_step_factor", "config.brute_force");
    c.brute_force.max_radius_factor = get_double(bf, "max_radius_factor", "config.brute_force");

    const json& out = field(j, "output", "config");
    check_keys(out, {"csv_path", "json_path", "base_model_path", "masked_model_path"},
               "config.output");
    c.output.csv_path = get_string(out, "csv_path", "config.output");
    c.output.json_path = get_string(out, "json_path", "config.output");
    c.output.base_model_path = get_string_or(out, "base_model_path", "");
    c.output.masked_model_path = get_string_or(out, "masked_model_path", "");

    try {
        c.validate();
    } catch (const std::exception& e) {
        throw ParseError(std::string("config: invalid values: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    json j;
    try {
        j = json::parse(io::read_text_file(path));
    } catch (const json::exception& e) {
        throw ParseError("config " + path + ": JSON parse failure: " + e.what());
    }
    return config_from_json(j);
}

ExperimentConfig reference_ramp_config() {
    ExperimentConfig c;
    c.dataset = {20240817ULL, 2, 200, 2, 6.0, 20240818ULL, 10};
    c.train = {0.5, 400, 3ULL, {}, "relu", 1.0};
    c.mask = {MaskKind::ramp, 255, 0.001, 1.0e4, 2.0, net::Precision::f64};
    c.estimator = {Norm::l2, 10.0, 50, 100, 101ULL};
    c.attack = {Norm::l2, 60, 0.15, 8, 0.2, 25, 4.0, 202ULL};
    c.brute_force = {0.02, 1.3};
    c.output = {"reports/reference_ramp.csv", "reports/reference_ramp.json",
                "reports/reference_base_model.json", "reports/reference_masked_model.json"};
    return c;
}

ExperimentConfig sigmoid_f32_config() {
    ExperimentConfig c;
    c.dataset = {20240817ULL, 2, 200, 2, 6.0, 20240818ULL, 10};
    c.train = {0.5, 400, 3ULL, {}, "relu", 1.0};
    c.mask = {MaskKind::sigmoid, 255, 0.001, 1.0e4, 2.0, net::Precision::f32};
    c.estimator = {Norm::l2, 100.0, 20, 50, 303ULL};
    c.attack = {Norm::l2, 60, 0.15, 8, 0.2, 25, 4.0, 404ULL};
    c.brute_force = {0.02, 1.3};
    c.output = {"reports/sigmoid_f32.csv", "reports/sigmoid_f32.json",
                "reports/sigmoid_base_model.json", "reports/sigmoid_masked_model.json"};
    return c;
}

net::Model apply_mask(const net::Model& base, const MaskSpec& mask) {
    base.validate();
    switch (mask.kind) {
        case MaskKind::none:
            return base;
        case MaskKind::staircase:
        case MaskKind::ramp: {
            net::Model m = base;
            net::Layer front = (mask.kind == MaskKind::staircase)
                                   ? net::Layer(net::Staircase{mask.levels})
                                   : net::Layer(net::RampStaircase{mask.levels, mask.delta});
            m.layers.insert(m.layers.begin(), std::move(front));
            m.precision = mask.precision;
            m.validate();
            return m;
        }
        case MaskKind::sigmoid: {
            const net::Dense* dense = net::as_single_dense(base);
            if (dense == nullptr || base.num_classes != 2) {
                throw ArgumentError("apply_mask: the sigmoid construction needs a binary "
                                    "single-dense base model");
            }
            const std::size_t d = dense->W.cols();
            // Collapse the two logits into one margin row, squash it through
            // the steep sigmoid, then re-expand to two logits with a fixed
            // separation. Decision boundary is unchanged; margins saturate.
            Matrix w_diff(1, d);
            for (std::size_t k = 0; k < d; ++k) w_diff(0, k) = dense->W(1, k) - dense->W(0, k);
            Vector b_diff{dense->b[1] - dense->b[0]};
            Matrix w_out(2, 1);
            w_out(0, 0) = 0.0;
            w_out(1, 0) = mask.margin_scale;
            Vector b_out{0.0, -0.5 * mask.margin_scale};
            net::Model m;
            m.input_dim = base.input_dim;
            m.num_classes = 2;
            m.precision = mask.precision;
            m.layers.emplace_back(net::Dense{std::move(w_diff), std::move(b_diff)});
            m.layers.emplace_back(net::Sigmoid{mask.gain});
            m.layers.emplace_back(net::Dense{std::move(w_out), std::move(b_out)});
            m.validate();
            return m;
        }
    }
    throw ArgumentError("apply_mask: invalid mask kind");
}

double analytic_model_distance(const net::Model& m, const Vector& x0, int true_class, Norm p) {
    m.validate();
    const net::Dense* dense = net::as_single_dense(m);
    if (dense == nullptr) {
        throw ArgumentError("analytic_model_distance: model is not a single dense layer");
    }
    if (true_class < 0 || static_cast<std::size_t>(true_class) >= m.num_classes) {
        throw ArgumentError("analytic_model_distance: true_class out of range");
    }
    if (x0.size() != m.input_dim) {
        throw ShapeError("analytic_model_distance: x0 size mismatch");
    }
    double best = kInf;
    const auto t = static_cast<std::size_t>(true_class);
    for (std::size_t jcls = 0; jcls < m.num_classes; ++jcls) {
        if (jcls == t) continue;
        double dot = dense->b[t] - dense->b[jcls];
        std::vector<double> w(m.input_dim);
        for (std::size_t k = 0; k < m.input_dim; ++k) {
            w[k] = dense->W(t, k) - dense->W(jcls, k);
            dot += w[k] * x0[k];
        }
        const double dn = gradient_dual_norm(w, p);
        if (dn == 0.0) continue; // constant margin: this class never wins
        best = std::min(best, std::fabs(dot) / dn);
    }
    if (!std::isfinite(best)) {
        throw DomainError("analytic_model_distance: model has no decision boundary");
    }
    return best;
}

namespace {

RowReport compute_row(const net::Model& model, const ExperimentConfig& cfg, int index,
                      const Vector& x0, int label, double scale, std::uint64_t section_tag,
                      Execution exec) {
    RowReport row;
    row.index = index;
    row.x0 = x0;
    row.true_class = label;
    row.analytic = scale;
    row.clever_seed =
        rng::mix2(cfg.estimator.seed, section_tag, static_cast<std::uint64_t>(index));
    row.vanilla_seed =
        rng::mix2(cfg.attack.seed, section_tag * 2, static_cast<std::uint64_t>(index));
    row.bpda_seed =
        rng::mix2(cfg.attack.seed, section_tag * 2 + 1, static_cast<std::uint64_t>(index));
    clever::CleverParams cp;
    cp.p = cfg.estimator.p;
    cp.radius = cfg.estimator.radius_factor * scale;
    cp.n_batches = cfg.estimator.n_batches;
    cp.batch_size = cfg.estimator.batch_size;
    cp.seed = row.clever_seed;
    row.clever.params = cp; // echoed even when the row fails below
    try {
        row.clever = clever::clever_score(model, x0, label, cp, exec);

        oracle::AttackParams ap;
        ap.p = cfg.attack.p;
        ap.pgd_steps = cfg.attack.pgd_steps;
        ap.step_size = cfg.attack.step_size;
        ap.restarts = cfg.attack.restarts;
        ap.init_frac = cfg.attack.init_frac;
        ap.bisect_iters = cfg.attack.bisect_iters;
        ap.eps_hi = cfg.attack.eps_hi_factor * scale;
        ap.gradient_mode = net::BackwardMode::exact;
        ap.seed = row.vanilla_seed;
        row.vanilla = oracle::min_perturbation_bisect(model, x0, label, ap, exec);

        ap.gradient_mode = net::BackwardMode::bpda;
        ap.seed = row.bpda_seed;
        row.bpda = oracle::min_perturbation_bisect(model, x0, label, ap, exec);

        row.brute = oracle::brute_force_min_perturbation(
            model, x0, label, cfg.estimator.p, cfg.brute_force.grid_step_factor * scale,
            cfg.brute_force.max_radius_factor * scale, exec);

        row.diag_flagged = clever::masking_diagnostic(row.clever.zero_fraction).flagged;

        row.exhibited = row.brute;
        if (row.vanilla.success) row.exhibited = std::min(row.exhibited, row.vanilla.epsilon);
        if (row.bpda.success) row.exhibited = std::min(row.exhibited, row.bpda.epsilon);
        row.contradiction =
            std::isfinite(row.exhibited) && row.clever.untargeted > row.exhibited;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

} // namespace

void finalize_section(SectionReport& section) {
    std::vector<double> ratios;
    section.contradiction_count = 0;
    section.diag_flag_count = 0;
    double zsum = 0.0;
    long zcount = 0;
    for (const RowReport& row : section.rows) {
        if (!row.error.empty()) continue;
        if (row.contradiction) ++section.contradiction_count;
        if (row.diag_flagged) ++section.diag_flag_count;
        zsum += row.clever.zero_fraction;
        ++zcount;
        if (row.bpda.success && row.bpda.epsilon > 0.0 && std::isfinite(row.bpda.epsilon)) {
            ratios.push_back(row.clever.untargeted / row.bpda.epsilon);
        }
    }
    section.inflation_ratio_median = median(std::move(ratios));
    section.mean_zero_fraction =
        zcount > 0 ? zsum / static_cast<double>(zcount) : std::numeric_limits<double>::quiet_NaN();
}

ExperimentReport run_demo_masking(const ExperimentConfig& config, Execution exec) {
    config.validate();
    const net::Dataset train_data =
        net::make_blobs(config.dataset.seed, config.dataset.n_per_class, config.dataset.d,
                        config.dataset.num_classes, config.dataset.separation);
    net::ArchSpec arch;
    arch.hidden = config.train.hidden;
    arch.activation = config.train.activation;
    arch.gain = config.train.gain;
    net::Model base =
        net::train_toy(arch, train_data, config.train.lr, config.train.epochs,
                       config.train.seed);

    const net::Dataset held_out =
        net::make_blobs(config.dataset.test_seed, config.dataset.n_per_class, config.dataset.d,
                        config.dataset.num_classes, config.dataset.separation);
    std::vector<std::pair<Vector, int>> points;
    for (std::size_t i = 0;
         i < held_out.points.size() &&
         points.size() < static_cast<std::size_t>(config.dataset.n_test_points);
         ++i) {
        if (net::predict(base, held_out.points[i]) == held_out.labels[i]) {
            points.emplace_back(held_out.points[i], held_out.labels[i]);
        }
    }
    if (points.size() < static_cast<std::size_t>(config.dataset.n_test_points)) {
        throw TrainingError("run_demo_masking: only " + std::to_string(points.size()) + " of " +
                            std::to_string(config.dataset.n_test_points) +
                            " requested held-out points are correctly classified");
    }

    ExperimentReport report;
    report.config = config;
    report.base_model = base;

    report.base.model_name = "base";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double scale = analytic_model_distance(base, points[i].first, points[i].second,
                                                     config.estimator.p);
        report.base.rows.push_back(compute_row(base, config, static_cast<int>(i),
                                               points[i].first, points[i].second, scale,
                                               kSectionBase, exec));
    }
    finalize_section(report.base);

    if (config.mask.kind != MaskKind::none) {
        net::Model masked = apply_mask(base, config.mask);
        report.masked_model = masked;
        SectionReport section;
        section.model_name = "masked";
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double scale = analytic_model_distance(base, points[i].first,
                                                         points[i].second, config.estimator.p);
            section.rows.push_back(compute_row(masked, config, static_cast<int>(i),
                                               points[i].first, points[i].second, scale,
                                               kSectionMasked, exec));
        }
        finalize_section(section);
        report.masked = std::move(section);
    }
    return report;
}

namespace {

void append_rows_csv(std::string& out, const SectionReport& section) {
    for (const RowReport& row : section.rows) {
        out += section.model_name;
        out += ',';
        out += std::to_string(row.index);
        out += ',';
        out += std::to_string(row.true_class);
        out += ',';
        out += join_coords(row.x0);
        out += ',';
        out += std::to_string(row.clever_seed);
        out += ',';
        out += std::to_string(row.vanilla_seed);
        out += ',';
        out += std::to_string(row.bpda_seed);
        out += ',';
        out += fmt17(row.analytic);
        out += ',';
        out += fmt17(row.clever.params.radius);
        out += ',';
        if (row.error.empty()) {
            // Flags describe the target that realizes the untargeted minimum.
            const clever::TargetScore* argmin = nullptr;
            for (const auto& t : row.clever.targets) {
                if (!t.error.empty()) continue;
                if (argmin == nullptr || t.score < argmin->score) argmin = &t;
            }
            out += fmt17(row.clever.untargeted);
            out += ',';
            out += (argmin != nullptr && argmin->capped) ? "1" : "0";
            out += ',';
            out += (argmin != nullptr && argmin->degenerate) ? "1" : "0";
            out += ',';
            out += fmt17(row.clever.zero_fraction);
            out += ',';
            out += row.diag_flagged ? "1" : "0";
            out += ',';
            out += row.vanilla.success ? "1" : "0";
            out += ',';
            out += fmt17(row.vanilla.epsilon);
            out += ',';
            out += std::to_string(row.vanilla.queries);
            out += ',';
            out += row.bpda.success ? "1" : "0";
            out += ',';
            out += fmt17(row.bpda.epsilon);
            out += ',';
            out += std::to_string(row.bpda.queries);
            out += ',';
            out += fmt17(row.brute);
            out += ',';
            out += fmt17(row.exhibited);
            out += ',';
            out += row.contradiction ? "1" : "0";
            out += ',';
        } else {
            out += "nan,0,0,nan,0,0,nan,0,0,nan,0,nan,nan,0,";
        }
        out += sanitize_csv(row.error);
        out += '\n';
    }
}

ordered_json section_json(const SectionReport& section) {
    ordered_json j;
    j["model"] = section.model_name;
    j["rows"] = section.rows.size();
    if (std::isnan(section.inflation_ratio_median)) {
        j["inflation_ratio_median"] = nullptr;
    } else {
        j["inflation_ratio_median"] = section.inflation_ratio_median;
    }
    j["contradiction_count"] = section.contradiction_count;
    j["diag_flag_count"] = section.diag_flag_count;
    if (std::isnan(section.mean_zero_fraction)) {
        j["mean_zero_fraction"] = nullptr;
    } else {
        j["mean_zero_fraction"] = section.mean_zero_fraction;
    }
    return j;
}

} // namespace

std::string report_csv(const ExperimentReport& report) {
    std::string out =
        "section,point,true_class,x0,clever_seed,vanilla_seed,bpda_seed,analytic,radius,"
        "clever_untargeted,clever_capped,clever_degenerate,zero_fraction,diag_flagged,"
        "vanilla_success,vanilla_epsilon,vanilla_queries,bpda_success,bpda_epsilon,"
        "bpda_queries,brute_epsilon,exhibited,contradiction,error\n";
    append_rows_csv(out, report.base);
    if (report.masked.has_value()) append_rows_csv(out, *report.masked);
    return out;
}

ordered_json report_json(const ExperimentReport& report) {
    ordered_json j;
    j["schema_version"] = 1;
    j["config"] = config_to_json(report.config);
    ordered_json sections = ordered_json::array();
    sections.push_back(section_json(report.base));
    if (report.masked.has_value()) sections.push_back(section_json(*report.masked));
    j["sections"] = std::move(sections);
    return j;
}

std::string cmd_demo_masking(const std::string& config_path, Execution exec) {
    const ExperimentConfig config = load_config_file(config_path);
    const ExperimentReport report = run_demo_masking(config, exec);
    io::write_text_file(config.output.csv_path, report_csv(report));
    io::write_text_file(config.output.json_path, report_json(report).dump(2) + "\n");
    if (!config.output.base_model_path.empty()) {
        io::save_model_file(report.base_model, config.output.base_model_path);
    }
    if (!config.output.masked_model_path.empty() && report.masked_model.has_value()) {
        io::save_model_file(*report.masked_model, config.output.masked_model_path);
    }

    std::ostringstream ss;
    const auto describe = [&](const SectionReport& s) {
        ss << s.model_name << ": inflation median ";
        if (std::isnan(s.inflation_ratio_median)) {
            ss << "n/a";
        } else {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.3g", s.inflation_ratio_median);
            ss << buf;
        }
        ss << ", contradictions " << s.contradiction_count << "/" << s.rows.size()
           << ", diagnostic flags " << s.diag_flag_count << "/" << s.rows.size() << "\n";
    };
    describe(report.base);
    if (report.masked.has_value()) describe(*report.masked);
    ss << "wrote " << config.output.csv_path << " and " << config.output.json_path << "\n";
    return ss.str();
}

clever::CleverParams clever_params_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("estimator params: expected a JSON object");
    check_keys(j, {"p", "radius", "n_batches", "batch_size", "seed"}, "estimator params");
    clever::CleverParams p;
    p.p = norm_from_string(get_string(j, "p", "estimator params"));
    p.radius = get_double(j, "radius", "estimator params");
    p.n_batches = get_int(j, "n_batches", "estimator params");
    p.batch_size = get_int(j, "batch_size", "estimator params");
    p.seed = get_u64(j, "seed", "estimator params");
    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ParseError(std::string("estimator params: ") + e.what());
    }
    return p;
}

oracle::AttackParams attack_params_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("attack params: expected a JSON object");
    check_keys(j, {"p", "pgd_steps", "step_size", "restarts", "init_frac", "bisect_iters",
                   "eps_hi", "mode", "seed"},
               "attack params");
    oracle::AttackParams p;
    p.p = norm_from_string(get_string(j, "p", "attack params"));
    p.pgd_steps = get_int(j, "pgd_steps", "attack params");
    p.step_size = get_double(j, "step_size", "attack params");
    p.restarts = get_int(j, "restarts", "attack params");
    p.init_frac = get_double(j, "init_frac", "attack params");
    p.bisect_iters = get_int(j, "bisect_iters", "attack params");
    p.eps_hi = get_double(j, "eps_hi", "attack params");
    const std::string mode = get_string(j, "mode", "attack params");
    if (mode == "vanilla") {
        p.gradient_mode = net::BackwardMode::exact;
    } else if (mode == "bpda") {
        p.gradient_mode = net::BackwardMode::bpda;
    } else {
        throw ParseError("attack params: mode must be \"vanilla\" or \"bpda\", got \"" + mode +
                         "\"");
    }
    p.seed = get_u64(j, "seed", "attack params");
    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ParseError(std::string("attack params: ") + e.what());
    }
    return p;
}

std::string cmd_clever(const std::string& model_path, const std::string& point_path,
                       int true_class, const std::string& params_path, Execution exec) {
    const net::Model m = io::load_model_file(model_path);
    const Vector x0 = io::point_from_csv(io::read_text_file(point_path));
    json pj;
    try {
        pj = json::parse(io::read_text_file(params_path));
    } catch (const json::exception& e) {
        throw ParseError("estimator params " + params_path + ": JSON parse failure: " +
                         e.what());
    }
    const clever::CleverParams params = clever_params_from_json(pj);
    const int label = true_class >= 0 ? true_class : net::predict(m, x0);
    const clever::CleverScore score = clever::clever_score(m, x0, label, params, exec);
    return clever::to_json(score).dump(2) + "\n";
}

std::string cmd_attack(const std::string& model_path, const std::string& point_path,
                       int true_class, const std::string& params_path, Execution exec) {
    const net::Model m = io::load_model_file(model_path);
    const Vector x0 = io::point_from_csv(io::read_text_file(point_path));
    json pj;
    try {
        pj = json::parse(io::read_text_file(params_path));
    } catch (const json::exception& e) {
        throw ParseError("attack params " + params_path + ": JSON parse failure: " + e.what());
    }
    const oracle::AttackParams params = attack_params_from_json(pj);
    const int label = true_class >= 0 ? true_class : net::predict(m, x0);
    const oracle::AttackResult result =
        oracle::min_perturbation_bisect(m, x0, label, params, exec);
    return oracle::to_json(result, params).dump(2) + "\n";
}

std::string plot_ramps_tsv(int levels, double delta, int resolution, double lo, double hi) {
    const std::vector<mask::CurvePoint> curve =
        mask::sample_curve(levels, delta, lo, hi, resolution);
    std::string out = "x\th\thhat\n";
    for (const mask::CurvePoint& pt : curve) {
        out += fmt17(pt.x);
        out += '\t';
        out += fmt17(pt.h);
        out += '\t';
        out += fmt17(pt.hhat);
        out += '\n';
    }
    return out;
}

} // namespace maskaudit::harness
