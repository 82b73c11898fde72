#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "maskaudit/errors.hpp"

// Small dense linear algebra. Dimensions in this toolkit are tiny (d <= 16,
// a few layers), so everything is plain row-major storage and simple loops;
// the interesting performance lives one level up, in the embarrassingly
// parallel sampling kernels.
//
// Vector and Matrix check that every entry is finite on construction and
// reject non-finite values with DomainError. Mutation through operator[] is
// unchecked; code that writes entries re-validates where it matters.

namespace maskaudit {

inline void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw DomainError(std::string(what) + ": non-finite entry");
        }
    }
}

class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t n) : v_(n, 0.0) {}
    Vector(std::initializer_list<double> init) : v_(init) {
        check_finite(v_, "Vector");
    }
    explicit Vector(std::vector<double> values) : v_(std::move(values)) {
        check_finite(v_, "Vector");
    }

    static Vector zeros(std::size_t n) { return Vector(n); }

    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    std::span<const double> span() const { return {v_.data(), v_.size()}; }
    std::span<double> span() { return {v_.data(), v_.size()}; }

    const std::vector<double>& raw() const { return v_; }

    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }
    auto begin() { return v_.begin(); }
    auto end() { return v_.end(); }

    bool operator==(const Vector& o) const { return v_ == o.v_; }

private:
    std::vector<double> v_;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}
    // Row-major entries.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), a_(std::move(entries)) {
        if (a_.size() != rows_ * cols_) {
            throw ShapeError("Matrix: entry count does not match rows*cols");
        }
        check_finite(a_, "Matrix");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const { return {a_.data() + i * cols_, cols_}; }
    const std::vector<double>& raw() const { return a_; }
    std::vector<double>& raw() { return a_; }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> a_;
};

// ---- norms -----------------------------------------------------------------
//
// Perturbations are measured in an l_p norm with p in {2, inf}. Gradients are
// measured in the dual norm: dual(l2) = l2, dual(linf) = l1.

enum class Norm { l2, linf };

inline std::string norm_name(Norm p) { return p == Norm::l2 ? "2" : "inf"; }

inline Norm norm_from_string(const std::string& s) {
    if (s == "2") return Norm::l2;
    if (s == "inf") return Norm::linf;
    throw ArgumentError("norm must be \"2\" or \"inf\", got \"" + s + "\"");
}

inline double norm_l2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double norm_l1(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::fabs(x);
    return s;
}

inline double norm_linf(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::fabs(x));
    return s;
}

inline double perturbation_norm(std::span<const double> v, Norm p) {
    return p == Norm::l2 ? norm_l2(v) : norm_linf(v);
}

inline double gradient_dual_norm(std::span<const double> g, Norm p) {
    return p == Norm::l2 ? norm_l2(g) : norm_l1(g);
}

} // namespace maskaudit
