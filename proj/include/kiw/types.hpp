/// @file types.hpp
/// @brief Small fixed-capacity linear algebra types and the library error hierarchy.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace kiw {

/// Spatial dimensions supported by every module.
inline constexpr int kMaxDim = 3;

/// Dynamic-size vector with inline storage for up to three entries (no heap).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
/// Dynamic-size matrix with inline storage for up to 3x3 entries.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument, unknown catalog entry, malformed configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-finite sample, singular Jacobian, Newton failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// File-system failure.
class IoError : public Error {
public:
    using Error::Error;
};

inline Vec make_vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

}  // namespace kiw
