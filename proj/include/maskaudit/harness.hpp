#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "maskaudit/clever.hpp"
#include "maskaudit/linalg.hpp"
#include "maskaudit/network.hpp"
#include "maskaudit/oracles.hpp"
#include "maskaudit/parallel.hpp"

// End-to-end experiment driver: train a toy classifier, optionally wrap it
// in a gradient-masking transfer function, then for a set of held-out test
// points compare the statistical robustness estimate against constructive
// oracles (PGD with vanilla and straight-through gradients, exhaustive grid
// search, and the closed-form linear distance). A "contradiction" is a row
// where the claimed lower bound strictly exceeds an exhibited adversarial
// perturbation — the smoking gun this toolkit exists to produce.

namespace maskaudit::harness {

enum class MaskKind { none, staircase, ramp, sigmoid };

std::string mask_kind_name(MaskKind k);
MaskKind mask_kind_from_string(const std::string& s);

struct DatasetSpec {
    std::uint64_t seed = 1;
    int d = 2;
    int n_per_class = 200;
    int num_classes = 2;
    double separation = 6.0;
    std::uint64_t test_seed = 2;
    int n_test_points = 10;
};

struct TrainSpec {
    double lr = 0.5;
    int epochs = 400;
    std::uint64_t seed = 3;
    std::vector<int> hidden; // empty = linear model
    std::string activation = "relu";
    double gain = 1.0;
};

struct MaskSpec {
    MaskKind kind = MaskKind::none;
    int levels = 255;      // staircase / ramp steps per unit
    double delta = 0.001;  // ramp fraction of the step width
    double gain = 1.0e4;   // sigmoid steepness
    double margin_scale = 2.0; // logit separation of the sigmoid construction
    net::Precision precision = net::Precision::f64;
};

struct EstimatorSpec {
    Norm p = Norm::l2;
    double radius_factor = 10.0; // sampling radius as a multiple of the analytic distance
    int n_batches = 50;
    int batch_size = 100;
    std::uint64_t seed = 101;
};

struct AttackSpec {
    Norm p = Norm::l2;
    int pgd_steps = 60;
    double step_size = 0.15;
    int restarts = 8;
    double init_frac = 0.2;
    int bisect_iters = 25;
    double eps_hi_factor = 4.0; // outer bisection radius as a multiple of the analytic distance
    std::uint64_t seed = 202;
};

struct BruteForceSpec {
    double grid_step_factor = 0.02;  // grid pitch as a multiple of the analytic distance
    double max_radius_factor = 1.3;  // scan radius as a multiple of the analytic distance
};

struct OutputSpec {
    std::string csv_path = "reports/demo.csv";
    std::string json_path = "reports/demo.json";
    std::string base_model_path;   // optional: save the trained base model
    std::string masked_model_path; // optional: save the masked model
};

struct ExperimentConfig {
    int schema_version = 1;
    DatasetSpec dataset;
    TrainSpec train;
    MaskSpec mask;
    EstimatorSpec estimator;
    AttackSpec attack;
    BruteForceSpec brute_force;
    OutputSpec output;

    void validate() const;
};

nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

// Pinned demonstration configs (the shipped JSON files mirror these).
ExperimentConfig reference_ramp_config();
ExperimentConfig sigmoid_f32_config();

// Wraps a trained model in the configured masking transfer function.
//   staircase / ramp : prepend the elementwise quantization layer.
//   sigmoid          : rebuild a binary linear base as
//                      dense(w1-w0) -> sigmoid(gain) -> dense to two logits
//                      separated by margin_scale; same decision boundary,
//                      saturated margins. Requires a single-dense binary base.
net::Model apply_mask(const net::Model& base, const MaskSpec& mask);

// Closed-form minimal adversarial distance of a single-dense (linear) model:
// min over wrong classes j of |g_j(x0)| / dual_norm(w_true - w_j). Throws
// ArgumentError if the model is not a single dense layer.
double analytic_model_distance(const net::Model& m, const Vector& x0, int true_class, Norm p);

struct RowReport {
    int index = -1;
    Vector x0;
    int true_class = -1;
    double analytic = 0.0; // base-model closed-form distance (the scale unit)
    std::uint64_t clever_seed = 0; // derived substream seeds actually used
    std::uint64_t vanilla_seed = 0;
    std::uint64_t bpda_seed = 0;
    clever::CleverScore clever;
    oracle::AttackResult vanilla;
    oracle::AttackResult bpda;
    double brute = 0.0;
    bool diag_flagged = false;
    double exhibited = 0.0; // smallest verified adversarial perturbation
    bool contradiction = false;
    std::string error; // row-level failure; other fields invalid when set
};

struct SectionReport {
    std::string model_name; // "base" or "masked"
    std::vector<RowReport> rows;
    double inflation_ratio_median = 0.0; // median of clever / bpda epsilon
    int contradiction_count = 0;
    int diag_flag_count = 0;
    double mean_zero_fraction = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    net::Model base_model;
    std::optional<net::Model> masked_model;
    SectionReport base;
    std::optional<SectionReport> masked;
};

ExperimentReport run_demo_masking(const ExperimentConfig& config,
                                  Execution exec = Execution::parallel);

// Report rendering. CSV holds one row per (section, point) with 17
// significant digit floats; the JSON aggregate is recomputable from the CSV.
std::string report_csv(const ExperimentReport& report);
nlohmann::ordered_json report_json(const ExperimentReport& report);

// Aggregate recomputation used by tests and by report_json itself.
void finalize_section(SectionReport& section);

// ---- CLI entry points --------------------------------------------------------

// Runs the demo and writes CSV/JSON (and optional model files). Returns a
// short human-readable summary.
std::string cmd_demo_masking(const std::string& config_path, Execution exec);

// Scores a serialized model at a point; true_class < 0 means "use the
// model's own prediction". Returns the score JSON as text.
std::string cmd_clever(const std::string& model_path, const std::string& point_path,
                       int true_class, const std::string& params_path, Execution exec);

// Minimal-perturbation attack against a serialized model. Returns the
// attack-result JSON as text.
std::string cmd_attack(const std::string& model_path, const std::string& point_path,
                       int true_class, const std::string& params_path, Execution exec);

// Staircase-vs-ramp comparison table with `resolution` points on [lo, hi]:
// TSV with header "x	h	hhat" and 17-significant-digit values.
std::string plot_ramps_tsv(int levels, double delta, int resolution, double lo, double hi);

// Estimator/attack parameter parsing for the single-shot CLI commands.
clever::CleverParams clever_params_from_json(const nlohmann::json& j);
oracle::AttackParams attack_params_from_json(const nlohmann::json& j);

} // namespace maskaudit::harness
