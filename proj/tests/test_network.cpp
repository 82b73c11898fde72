#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "maskaudit/model_io.hpp"
#include "maskaudit/network.hpp"
#include "maskaudit/rng.hpp"

using namespace maskaudit;

namespace {

net::Model dense_model(Matrix W, Vector b, std::size_t input_dim, std::size_t classes) {
    net::Model m;
    m.input_dim = input_dim;
    m.num_classes = classes;
    m.layers.push_back(net::Dense{std::move(W), std::move(b)});
    return m;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, rng::Stream& stream) {
    std::vector<double> a(rows * cols);
    for (double& v : a) v = stream.normal();
    return Matrix(rows, cols, std::move(a));
}

Vector random_vector(std::size_t n, rng::Stream& stream) {
    std::vector<double> a(n);
    for (double& v : a) v = stream.normal();
    return Vector(std::move(a));
}

double rel_l2_error(const Vector& a, const Vector& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

} // namespace

TEST_CASE("dense forward, predict, and margin on hand values") {
    auto m = dense_model(Matrix(2, 2, {1, 2, 3, 4}), Vector({0.5, -0.5}), 2, 2);
    const Vector x{1.0, 1.0};
    const Vector logits = net::forward(m, x);
    REQUIRE(logits.size() == 2);
    CHECK(logits[0] == 3.5);
    CHECK(logits[1] == 6.5);
    CHECK(net::predict(m, x) == 1);
    CHECK(net::margin(m, x, 1, 0) == 3.0);
    CHECK(net::margin(m, x, 0, 1) == -3.0);
}

TEST_CASE("predict breaks ties toward the first index") {
    auto m = dense_model(Matrix(2, 2, {0, 0, 0, 0}), Vector({0.3, 0.3}), 2, 2);
    CHECK(net::predict(m, Vector{1.0, -2.0}) == 0);
}

TEST_CASE("dense head gradient is the row difference, bitwise") {
    auto m = dense_model(Matrix(2, 2, {1, 2, 3, 4}), Vector({0.5, -0.5}), 2, 2);
    const Vector g = net::scalar_head_gradient(m, Vector{0.7, -0.3}, 0, 1);
    CHECK(g[0] == -2.0); // W0 - W1 = (1-3, 2-4)
    CHECK(g[1] == -2.0);
    // linear model: gradient independent of the evaluation point
    const Vector g2 = net::scalar_head_gradient(m, Vector{100.0, 3.0}, 0, 1);
    CHECK(g == g2);
}

TEST_CASE("margin is antisymmetric in the class pair") {
    rng::Stream stream(12);
    net::Model m;
    m.input_dim = 3;
    m.num_classes = 3;
    m.layers.push_back(net::Dense{random_matrix(4, 3, stream), random_vector(4, stream)});
    m.layers.push_back(net::Sigmoid{1.5});
    m.layers.push_back(net::Dense{random_matrix(3, 4, stream), random_vector(3, stream)});
    const Vector x = random_vector(3, stream);
    CHECK(net::margin(m, x, 0, 2) == -net::margin(m, x, 2, 0));
}

TEST_CASE("reverse-mode gradient matches central finite differences") {
    rng::Stream stream(31337);
    for (int trial = 0; trial < 5; ++trial) {
        net::Model m;
        m.input_dim = 3;
        m.num_classes = 3;
        m.layers.push_back(net::Dense{random_matrix(4, 3, stream), random_vector(4, stream)});
        m.layers.push_back(net::Sigmoid{2.0});
        m.layers.push_back(net::Dense{random_matrix(3, 4, stream), random_vector(3, stream)});
        const Vector x = random_vector(3, stream);
        const Vector g = net::scalar_head_gradient(m, x, 0, 1);
        const Vector fd = net::finite_diff_gradient(m, x, 0, 1, 1e-5);
        CHECK(rel_l2_error(g, fd) < 1e-6);
    }
}

TEST_CASE("relu gates the gradient by sign of the preactivation") {
    net::Model m;
    m.input_dim = 1;
    m.num_classes = 2;
    m.layers.push_back(net::Dense{Matrix(1, 1, {1.0}), Vector({0.0})});
    m.layers.push_back(net::Relu{});
    m.layers.push_back(net::Dense{Matrix(2, 1, {1.0, -1.0}), Vector({0.0, 0.0})});
    CHECK(net::scalar_head_gradient(m, Vector{2.0}, 0, 1)[0] == 2.0);
    CHECK(net::scalar_head_gradient(m, Vector{-2.0}, 0, 1)[0] == 0.0);
    const Vector fd = net::finite_diff_gradient(m, Vector{2.0}, 0, 1, 1e-6);
    CHECK(fd[0] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("staircase exact gradient is identically zero") {
    rng::Stream stream(88);
    net::Model m;
    m.input_dim = 2;
    m.num_classes = 2;
    m.layers.push_back(net::Dense{random_matrix(3, 2, stream), random_vector(3, stream)});
    m.layers.push_back(net::Staircase{255});
    m.layers.push_back(net::Dense{random_matrix(2, 3, stream), random_vector(2, stream)});
    for (int i = 0; i < 20; ++i) {
        const Vector x = random_vector(2, stream);
        const Vector g = net::scalar_head_gradient(m, x, 0, 1);
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 0.0);
    }
}

TEST_CASE("straight-through backward treats the quantizer as identity") {
    rng::Stream stream(414);
    const Matrix W1 = random_matrix(3, 2, stream);
    const Vector b1 = random_vector(3, stream);
    const Matrix W2 = random_matrix(2, 3, stream);
    const Vector b2 = random_vector(2, stream);

    net::Model quant;
    quant.input_dim = 2;
    quant.num_classes = 2;
    quant.backward_mode = net::BackwardMode::bpda;
    quant.layers.push_back(net::Dense{W1, b1});
    quant.layers.push_back(net::Staircase{17});
    quant.layers.push_back(net::Dense{W2, b2});

    net::Model plain;
    plain.input_dim = 2;
    plain.num_classes = 2;
    plain.layers.push_back(net::Dense{W1, b1});
    plain.layers.push_back(net::Identity{});
    plain.layers.push_back(net::Dense{W2, b2});

    // the chain is linear apart from the quantizer, so the straight-through
    // cotangent path is literally the identity model's: bitwise equal
    for (int i = 0; i < 10; ++i) {
        const Vector x = random_vector(2, stream);
        CHECK(net::scalar_head_gradient(quant, x, 0, 1) ==
              net::scalar_head_gradient(plain, x, 0, 1));
    }
    // with the exact convention the same model has zero gradient
    quant.backward_mode = net::BackwardMode::exact;
    const Vector g = net::scalar_head_gradient(quant, Vector{0.3, -0.4}, 0, 1);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
}

TEST_CASE("f32 evaluation saturates a steep sigmoid that f64 resolves") {
    net::Model m;
    m.input_dim = 1;
    m.num_classes = 2;
    m.layers.push_back(net::Dense{Matrix(1, 1, {1.0}), Vector({0.0})});
    m.layers.push_back(net::Sigmoid{1e4});
    m.layers.push_back(net::Dense{Matrix(2, 1, {1.0, -1.0}), Vector({0.0, 0.0})});
    const Vector x{0.002}; // sigmoid argument 20
    const Vector l64 = net::forward(m, x);
    CHECK(l64[0] < 1.0); // sigma(20) = 0.99999999794...
    m.precision = net::Precision::f32;
    const Vector l32 = net::forward(m, x);
    CHECK(l32[0] == 1.0); // 1 + e^-20 rounds to 1 in float
    CHECK(net::scalar_head_gradient(m, x, 0, 1)[0] == 0.0);
    m.precision = net::Precision::f64;
    CHECK(net::scalar_head_gradient(m, x, 0, 1)[0] != 0.0);
}

TEST_CASE("workspace reuse does not leak state across evaluations") {
    rng::Stream stream(7);
    net::Model m;
    m.input_dim = 2;
    m.num_classes = 2;
    m.layers.push_back(net::Dense{random_matrix(5, 2, stream), random_vector(5, stream)});
    m.layers.push_back(net::Relu{});
    m.layers.push_back(net::Dense{random_matrix(2, 5, stream), random_vector(2, stream)});
    net::EvalWorkspace ws;
    std::vector<double> out_shared, out_fresh;
    std::vector<double> grad_shared, grad_fresh;
    for (int i = 0; i < 6; ++i) {
        const Vector x = random_vector(2, stream);
        net::forward_into(m, x.span(), out_shared, ws);
        net::EvalWorkspace fresh;
        net::forward_into(m, x.span(), out_fresh, fresh);
        CHECK(out_shared == out_fresh);
        net::head_gradient_into(m, x.span(), 0, 1, grad_shared, ws);
        net::EvalWorkspace fresh2;
        net::head_gradient_into(m, x.span(), 0, 1, grad_fresh, fresh2);
        CHECK(grad_shared == grad_fresh);
    }
}

TEST_CASE("shape and argument validation") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((Vector{1.0, nan}), DomainError);
    CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), ShapeError);

    auto m = dense_model(Matrix(2, 2, {1, 0, 0, 1}), Vector({0.0, 0.0}), 2, 2);
    CHECK_NOTHROW(m.validate());
    CHECK_THROWS_AS(net::forward(m, Vector{1.0}), ShapeError); // wrong input width
    CHECK_THROWS_AS(net::margin(m, Vector{1.0, 2.0}, 0, 0), ArgumentError);
    CHECK_THROWS_AS(net::scalar_head_gradient(m, Vector{1.0, 2.0}, 0, 2), ArgumentError);

    net::Model bad = m;
    bad.layers.push_back(net::Dense{Matrix(2, 3, {1, 2, 3, 4, 5, 6}), Vector({0.0, 0.0})});
    CHECK_THROWS_AS(bad.validate(), ShapeError); // 3-wide dense after 2-wide output

    net::Model badclasses = m;
    badclasses.num_classes = 3;
    CHECK_THROWS_AS(badclasses.validate(), ShapeError);

    net::Model badgain = m;
    badgain.layers.push_back(net::Sigmoid{-1.0});
    CHECK_THROWS_AS(badgain.validate(), ArgumentError);

    net::Model baddelta = m;
    baddelta.layers.insert(baddelta.layers.begin(), net::RampStaircase{10, 1.5});
    CHECK_THROWS_AS(baddelta.validate(), ArgumentError);
}

TEST_CASE("make_blobs is deterministic and class-major") {
    const auto d1 = net::make_blobs(7, 10, 2, 2, 4.0);
    const auto d2 = net::make_blobs(7, 10, 2, 2, 4.0);
    REQUIRE(d1.points.size() == 20);
    REQUIRE(d1.labels.size() == 20);
    CHECK(d1.dim == 2);
    CHECK(d1.num_classes == 2);
    CHECK(d1.seed == 7);
    for (int i = 0; i < 10; ++i) {
        CHECK(d1.labels[static_cast<std::size_t>(i)] == 0);
        CHECK(d1.labels[static_cast<std::size_t>(10 + i)] == 1);
    }
    for (std::size_t i = 0; i < d1.points.size(); ++i) CHECK(d1.points[i] == d2.points[i]);
    const auto other = net::make_blobs(8, 10, 2, 2, 4.0);
    CHECK(d1.points[0] != other.points[0]);

    const auto empty = net::make_blobs(7, 0, 2, 2, 4.0);
    CHECK(empty.points.empty());
    CHECK(empty.labels.empty());

    CHECK_THROWS_AS(net::make_blobs(7, 10, 2, 3, 4.0), ArgumentError); // classes > d
    CHECK_THROWS_AS(net::make_blobs(7, -1, 2, 2, 4.0), ArgumentError);
    CHECK_THROWS_AS(net::make_blobs(7, 10, 2, 2, -4.0), DomainError);
}

TEST_CASE("train_toy learns separable blobs and is deterministic") {
    const auto data = net::make_blobs(21, 30, 2, 2, 50.0);
    net::ArchSpec arch; // linear
    const auto m1 = net::train_toy(arch, data, 0.5, 200, 5);
    const auto m2 = net::train_toy(arch, data, 0.5, 200, 5);
    CHECK(io::model_to_string(m1) == io::model_to_string(m2));
    CHECK(net::dataset_accuracy(m1, data) == 1.0);
}

TEST_CASE("train_toy with a hidden layer fits easy data") {
    const auto data = net::make_blobs(33, 40, 2, 2, 8.0);
    net::ArchSpec arch;
    arch.hidden = {4};
    arch.activation = "sigmoid";
    arch.gain = 1.0;
    const auto m = net::train_toy(arch, data, 0.5, 300, 9);
    CHECK(net::dataset_accuracy(m, data) >= 0.95);
}

TEST_CASE("train_toy epochs=0 returns the seeded init, independent of lr") {
    const auto data = net::make_blobs(7, 10, 2, 2, 4.0);
    net::ArchSpec arch;
    const auto a = net::train_toy(arch, data, 0.1, 0, 11);
    const auto b = net::train_toy(arch, data, 100.0, 0, 11);
    CHECK(io::model_to_string(a) == io::model_to_string(b));
}

TEST_CASE("train_toy surfaces divergence instead of returning garbage") {
    net::Dataset data;
    data.dim = 1;
    data.num_classes = 2;
    data.points.emplace_back(std::vector<double>{1e160});
    data.points.emplace_back(std::vector<double>{-1e160});
    data.labels = {0, 0};
    net::ArchSpec arch;
    CHECK_THROWS_AS(net::train_toy(arch, data, 1.0, 5, 3), TrainingError);
}

TEST_CASE("train_toy argument validation") {
    const auto data = net::make_blobs(7, 10, 2, 2, 4.0);
    net::ArchSpec arch;
    CHECK_THROWS_AS(net::train_toy(arch, data, 0.0, 10, 1), ArgumentError);
    CHECK_THROWS_AS(net::train_toy(arch, data, 0.5, -1, 1), ArgumentError);
    net::ArchSpec bad;
    bad.activation = "tanh";
    bad.hidden = {4};
    CHECK_THROWS_AS(net::train_toy(bad, data, 0.5, 10, 1), ArgumentError);
}

TEST_CASE("as_single_dense sees through trailing identities only") {
    auto m = dense_model(Matrix(2, 2, {1, 0, 0, 1}), Vector({0.0, 0.0}), 2, 2);
    CHECK(net::as_single_dense(m) != nullptr);
    m.layers.push_back(net::Identity{});
    CHECK(net::as_single_dense(m) != nullptr);
    m.layers.push_back(net::Relu{});
    CHECK(net::as_single_dense(m) == nullptr);
}
