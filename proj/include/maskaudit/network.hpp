#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskaudit/layers.hpp"
#include "maskaudit/linalg.hpp"

// Tiny feed-forward models: a layer list evaluated at a configurable
// precision (f64 or f32), with exact vector-Jacobian gradients and an
// optional straight-through ("bpda") backward for the piecewise-constant
// layers. Everything is deliberately small and allocation-conscious: the
// sampling kernels call forward/gradient millions of times.

namespace maskaudit::net {

struct Model {
    std::vector<Layer> layers;
    std::size_t input_dim = 0;
    std::size_t num_classes = 2;
    Precision precision = Precision::f64;
    BackwardMode backward_mode = BackwardMode::exact;

    // Throws ShapeError/ArgumentError if layer shapes do not chain from
    // input_dim to num_classes or layer parameters are invalid.
    void validate() const;
};

// Reusable scratch buffers for the hot paths. A workspace is not thread-safe;
// parallel loops hold one per thread.
struct EvalWorkspace {
    std::vector<std::vector<double>> acts_d;
    std::vector<std::vector<float>> acts_f;
    std::vector<double> cot_d_a, cot_d_b;
    std::vector<float> cot_f_a, cot_f_b;
};

// Logits for input x (size input_dim), written to `logits` (resized to
// num_classes). Model precision f32 rounds input, parameters, and all
// intermediates to float; results are widened back to double at the end.
void forward_into(const Model& m, std::span<const double> x, std::vector<double>& logits,
                  EvalWorkspace& ws);

Vector forward(const Model& m, const Vector& x);

// argmax over logits, first index winning ties.
int predict(const Model& m, const Vector& x);

// f_i(x) - f_j(x).
double margin(const Model& m, const Vector& x, int i, int j);

// Gradient of the scalar head f_i - f_j at x via reverse-mode VJP, honoring
// the model's precision and backward_mode. Written to `grad` (resized to
// input_dim).
void head_gradient_into(const Model& m, std::span<const double> x, int i, int j,
                        std::vector<double>& grad, EvalWorkspace& ws);

Vector scalar_head_gradient(const Model& m, const Vector& x, int i, int j);

// Central finite differences of f_i - f_j with the given step, evaluated
// through the model's own forward pass. Independent check on the VJP.
Vector finite_diff_gradient(const Model& m, const Vector& x, int i, int j, double step);

// If the model is exactly one Dense layer (optionally followed by Identity
// layers), returns it; otherwise nullptr.
const Dense* as_single_dense(const Model& m);

// ---- toy data and training --------------------------------------------------

struct Dataset {
    std::vector<Vector> points;
    std::vector<int> labels;
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::uint64_t seed = 0;
};

// Gaussian blobs: class k is a unit-variance isotropic Gaussian centered at
// separation * e_{k} (k-th coordinate axis). Requires num_classes <= d so
// centers are distinct. Deterministic in seed: class-major, then point, then
// coordinate draw order.
Dataset make_blobs(std::uint64_t seed, int n_per_class, int d, int num_classes,
                   double separation);

struct ArchSpec {
    std::vector<int> hidden;       // hidden layer widths; empty = linear model
    std::string activation = "relu"; // "relu" or "sigmoid"
    double gain = 1.0;               // sigmoid activation gain
};

// Full-batch gradient descent on softmax cross-entropy. Deterministic in
// seed (init) and data order. Throws TrainingError if the loss or any
// parameter becomes non-finite.
Model train_toy(const ArchSpec& arch, const Dataset& data, double lr, int epochs,
                std::uint64_t seed);

double dataset_accuracy(const Model& m, const Dataset& data);

} // namespace maskaudit::net
