#pragma once

#include "ipscale/model.hpp"

#include <vector>

namespace ipscale {

/// Majorizers of l(beta) around beta_minus. Each equals l at beta = beta_minus
/// and lies above it elsewhere (for the design class it is stated for).
/// The MM steps in solvers.hpp minimize these in closed form or per block.
namespace surrogate {

/// Binary designs, weights 1/p.
Scalar g1(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta);
/// Non-negative designs, weights x_ij / x_{i+}.
Scalar g20(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta);
/// Non-negative designs, weights x_ij / R plus slack (GIS).
Scalar g2(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta);
/// Arbitrary designs, weights |x_ij| / R plus slack.
Scalar g3_general(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta);
/// Non-negative designs, separable over the column blocks.
Scalar g4(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta,
          const std::vector<std::vector<Index>>& blocks);

/// L(b-) + grad L(b-)^T d + d^T W d / 2 on the slopes.
Scalar quadratic(const ProblemInstance& inst, const Vector& slope_minus, const Vector& slope, const Matrix& w);

} // namespace surrogate
} // namespace ipscale
