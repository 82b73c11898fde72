#pragma once

#include <stdexcept>
#include <string>

namespace maskaudit {

// Mismatched dimensions between containers that must agree (matrix/vector
// products, layer chaining, dataset shapes).
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric input outside the mathematical domain of an operation
// (non-finite entries, radii <= 0, probabilities outside (0,1), ...).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally invalid argument: bad enum string, malformed config field,
// unsupported combination of options.
struct ArgumentError : std::runtime_error {
    explicit ArgumentError(const std::string& what) : std::runtime_error(what) {}
};

// Optimization of a toy model diverged (non-finite loss or parameters).
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// Extreme-value fit failed to converge; message carries diagnostics
// (sample size, bracket, iteration count).
struct FitError : std::runtime_error {
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed serialized input (JSON/CSV parse or schema violations).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace maskaudit
