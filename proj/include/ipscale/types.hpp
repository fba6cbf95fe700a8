#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace ipscale {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using IndexVector = Eigen::Matrix<Index, Eigen::Dynamic, 1>;

// Coordinates are clamped to [-kClamp, kClamp]; MLEs at +-infinity show up there.
inline constexpr Scalar kClamp = 250.0;

/// Malformed user input (files, schemas, flags).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Problem dimensions exceed what can be represented.
class SizeError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

} // namespace ipscale
