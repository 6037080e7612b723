#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

// Shared scalar/matrix aliases and error types for the hpath library.
//
// All tensors live in the left-invariant model (co)frame, so every linear
// object is a small dense matrix. Dimensions are bounded by kMaxDim so the
// Eigen types below are stack-allocated.

namespace hpath {

inline constexpr int kMaxDim = 8;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

// Contract violation by the caller (bad model name, invalid grid, ...).
// The CLI maps this to exit code 2.
struct UsageError : std::invalid_argument {
    explicit UsageError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failure inside an operation (solver blow-up, singular matrix).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr double kPi = 3.14159265358979323846;

} // namespace hpath
