#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "maskaudit/errors.hpp"
#include "maskaudit/harness.hpp"
#include "maskaudit/model_io.hpp"
#include "maskaudit/parallel.hpp"

namespace {

maskaudit::Execution pick_exec(bool serial) {
    return serial ? maskaudit::Execution::serial : maskaudit::Execution::parallel;
}

void parse_zoom(const std::string& text, double& lo, double& hi) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) {
        throw maskaudit::ArgumentError("--zoom expects \"lo,hi\"");
    }
    try {
        lo = std::stod(text.substr(0, comma));
        hi = std::stod(text.substr(comma + 1));
    } catch (const std::exception&) {
        throw maskaudit::ArgumentError("--zoom expects two numbers, got \"" + text + "\"");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"maskaudit: stress-tests a sampling-based robustness estimator against "
                 "gradient-masked models using independent attack and search oracles"};
    app.require_subcommand(1);

    // demo-masking
    std::string demo_config;
    bool demo_serial = false;
    CLI::App* demo = app.add_subcommand(
        "demo-masking", "train a toy model, mask it, and compare the estimator against "
                        "attack/search oracles on both variants");
    demo->add_option("--config", demo_config, "experiment config JSON")->required();
    demo->add_flag("--serial", demo_serial, "run the reference serial kernels");

    // clever
    std::string clever_model, clever_point, clever_config;
    int clever_true_class = -1;
    bool clever_serial = false;
    CLI::App* clever = app.add_subcommand(
        "clever", "estimated robustness lower bound of a serialized model at a point");
    clever->add_option("--model", clever_model, "model JSON file")->required();
    clever->add_option("--point", clever_point, "path to a one-line CSV input point")->required();
    clever->add_option("--config", clever_config, "estimator params JSON")->required();
    clever->add_option("--true-class", clever_true_class,
                       "label to score against (default: the model's prediction)");
    clever->add_flag("--serial", clever_serial, "run the reference serial kernels");

    // attack
    std::string attack_model, attack_point, attack_config;
    int attack_true_class = -1;
    bool attack_serial = false;
    CLI::App* attack = app.add_subcommand(
        "attack", "minimal-perturbation PGD attack (bisected budget) on a serialized model");
    attack->add_option("--model", attack_model, "model JSON file")->required();
    attack->add_option("--point", attack_point, "path to a one-line CSV input point")->required();
    attack->add_option("--config", attack_config, "attack params JSON")->required();
    attack->add_option("--true-class", attack_true_class,
                       "label to attack (default: the model's prediction)");
    attack->add_flag("--serial", attack_serial, "run the reference serial kernels");

    // plot-ramps
    int pr_levels = 255;
    double pr_delta = 0.2;
    int pr_resolution = 2000;
    std::string pr_zoom;
    std::string pr_out;
    CLI::App* plot = app.add_subcommand(
        "plot-ramps", "tab-separated staircase vs ramp-surrogate comparison table");
    plot->add_option("--c", pr_levels, "steps per unit")->required();
    plot->add_option("--delta", pr_delta, "ramp fraction of the step width")->required();
    plot->add_option("--resolution", pr_resolution, "number of sample points")->required();
    plot->add_option("--zoom", pr_zoom, "window as \"lo,hi\" (default 0,1)");
    plot->add_option("--out", pr_out, "output TSV path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (demo->parsed()) {
            std::cout << maskaudit::harness::cmd_demo_masking(demo_config,
                                                              pick_exec(demo_serial));
        } else if (clever->parsed()) {
            std::cout << maskaudit::harness::cmd_clever(clever_model, clever_point,
                                                        clever_true_class, clever_config,
                                                        pick_exec(clever_serial));
        } else if (attack->parsed()) {
            std::cout << maskaudit::harness::cmd_attack(attack_model, attack_point,
                                                        attack_true_class, attack_config,
                                                        pick_exec(attack_serial));
        } else if (plot->parsed()) {
            double lo = 0.0;
            double hi = 1.0;
            if (!pr_zoom.empty()) parse_zoom(pr_zoom, lo, hi);
            const std::string tsv =
                maskaudit::harness::plot_ramps_tsv(pr_levels, pr_delta, pr_resolution, lo, hi);
            if (pr_out.empty()) {
                std::cout << tsv;
            } else {
                maskaudit::io::write_text_file(pr_out, tsv);
                std::cout << "wrote " << pr_out << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
