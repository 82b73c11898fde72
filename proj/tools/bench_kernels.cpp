// Benchmark comparing the serial reference kernels against the OpenMP paths:
// gradient-sample batching, PGD restarts, and the brute-force grid scan. The
// two paths are bit-identical by construction (per-work-item substreams and
// output slots); this tool reports wall times and verifies the identity on
// the benchmarked outputs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "maskaudit/clever.hpp"
#include "maskaudit/harness.hpp"
#include "maskaudit/network.hpp"
#include "maskaudit/oracles.hpp"
#include "maskaudit/parallel.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct BenchRow {
    const char* name;
    double serial_s;
    double parallel_s;
    bool identical;
};

void print_row(const BenchRow& row) {
    std::printf("%-24s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   %s\n", row.name,
                row.serial_s, row.parallel_s,
                row.parallel_s > 0 ? row.serial_s / row.parallel_s : 0.0,
                row.identical ? "bit-identical" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial-vs-parallel kernel benchmark"};
    int scale = 1;
    app.add_option("--scale", scale, "work multiplier (default 1)");
    CLI11_PARSE(app, argc, argv);
    if (scale < 1) scale = 1;

    using namespace maskaudit;

    std::printf("threads available: %d (OpenMP %s)\n", hardware_threads(),
                openmp_enabled() ? "enabled" : "disabled");

    // A ramp-masked linear model: cheap forward, zero gradient almost
    // everywhere -- the workload the toolkit actually runs.
    const harness::ExperimentConfig cfg = harness::reference_ramp_config();
    const net::Dataset data = net::make_blobs(cfg.dataset.seed, cfg.dataset.n_per_class,
                                              cfg.dataset.d, cfg.dataset.num_classes,
                                              cfg.dataset.separation);
    net::ArchSpec arch;
    arch.hidden = cfg.train.hidden;
    arch.activation = cfg.train.activation;
    const net::Model base = net::train_toy(arch, data, cfg.train.lr, cfg.train.epochs,
                                           cfg.train.seed);
    const net::Model masked = harness::apply_mask(base, cfg.mask);
    const Vector x0 = data.points.front();
    const int label = data.labels.front();
    const double dist = harness::analytic_model_distance(base, x0, label, Norm::l2);

    // Gradient-sample batches.
    {
        clever::CleverParams cp;
        cp.p = Norm::l2;
        cp.radius = 10.0 * dist;
        cp.n_batches = 400 * scale;
        cp.batch_size = 250;
        cp.seed = 42;
        auto t0 = Clock::now();
        const auto serial =
            clever::batch_max_grad_norms(masked, x0, label, 1 - label, cp, Execution::serial);
        const double ts = seconds_since(t0);
        t0 = Clock::now();
        const auto parallel =
            clever::batch_max_grad_norms(masked, x0, label, 1 - label, cp, Execution::parallel);
        const double tp = seconds_since(t0);
        print_row({"gradient batches", ts, tp,
                   serial.maxima == parallel.maxima && serial.n_zero == parallel.n_zero});
    }

    // PGD restarts.
    {
        oracle::AttackParams ap;
        ap.p = Norm::l2;
        ap.pgd_steps = 300;
        ap.step_size = 0.02;
        ap.restarts = 64 * scale;
        ap.init_frac = 0.2;
        ap.eps_hi = 4.0 * dist;
        ap.gradient_mode = net::BackwardMode::bpda;
        ap.seed = 7;
        auto t0 = Clock::now();
        const auto serial = oracle::pgd_attack(masked, x0, label, 2.0 * dist, ap,
                                               Execution::serial);
        const double ts = seconds_since(t0);
        t0 = Clock::now();
        const auto parallel = oracle::pgd_attack(masked, x0, label, 2.0 * dist, ap,
                                                 Execution::parallel);
        const double tp = seconds_since(t0);
        const bool same = serial.success == parallel.success &&
                          serial.epsilon == parallel.epsilon &&
                          serial.queries == parallel.queries;
        print_row({"pgd restarts", ts, tp, same});
    }

    // Brute-force grid scan.
    {
        const double grid = dist * 0.002 / scale;
        auto t0 = Clock::now();
        const double serial = oracle::brute_force_min_perturbation(
            masked, x0, label, Norm::l2, grid, 1.2 * dist, Execution::serial);
        const double ts = seconds_since(t0);
        t0 = Clock::now();
        const double parallel = oracle::brute_force_min_perturbation(
            masked, x0, label, Norm::l2, grid, 1.2 * dist, Execution::parallel);
        const double tp = seconds_since(t0);
        print_row({"brute-force scan", ts, tp, serial == parallel});
    }
    return 0;
}
