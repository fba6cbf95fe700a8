#pragma once

#include "ipscale/design.hpp"
#include "ipscale/types.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <optional>
#include <vector>

namespace ipscale {

/**
 * Observed data of a log-affine Poisson model mu = q o exp(X beta).
 *
 * Rows with q_i = 0 are removed at construction (they cannot carry mass);
 * kept_rows() maps back to the caller's indexing and expand() re-inserts
 * zeros. Either full counts n or only the sufficient statistics X^T n may be
 * supplied; goodness-of-fit diagnostics need the counts.
 */
class ProblemInstance {
public:
    /// q defaults to all ones.
    static ProblemInstance from_counts(DesignMatrix x, Vector counts, Vector offset = {},
                                       std::optional<Vector> beta_true = std::nullopt);

    /// For raking: targets s = X^T n are given without n. The total <1,n> is
    /// read from the intercept column.
    static ProblemInstance from_sufficient_stats(DesignMatrix x, Vector suff_stats, Vector offset = {});

    const DesignMatrix& design() const { return x_; }
    const Vector& offset() const { return q_; }
    const Vector& log_offset() const { return log_q_; }
    const Vector& suff_stats() const { return s_; }
    bool has_counts() const { return n_.has_value(); }
    /// Throws ContractError when only sufficient statistics were supplied.
    const Vector& counts() const;
    /// <1, n>
    Scalar total() const { return total_; }
    const std::optional<Vector>& beta_true() const { return beta_true_; }
    void set_beta_true(Vector beta) { beta_true_ = std::move(beta); }

    Index rows() const { return x_.rows(); }
    Index cols() const { return x_.cols(); }

    const std::vector<Index>& kept_rows() const { return kept_; }
    Index original_rows() const { return original_rows_; }
    /// Length-original_rows() copy of a fitted vector with zeros at dropped rows.
    Vector expand(const Vector& fitted) const;

private:
    ProblemInstance() = default;
    void drop_zero_offsets(Vector& q, Vector* n);

    DesignMatrix x_;
    Vector q_, log_q_, s_;
    std::optional<Vector> n_;
    Scalar total_ = 0;
    std::optional<Vector> beta_true_;
    std::vector<Index> kept_;
    Index original_rows_ = 0;
};

/// beta together with mu = q o exp(X beta).
struct Coefficients {
    Vector beta;
    Vector mu;

    Scalar intercept() const { return beta[0]; }
    auto slope() const { return beta.tail(beta.size() - 1); }
};

Coefficients make_coefficients(const ProblemInstance& inst, Vector beta);
/// Recomputes mu from beta.
void resync(const ProblemInstance& inst, Coefficients& c);
/// ||log(mu / q) - X beta||_inf
Scalar consistency_error(const ProblemInstance& inst, const Coefficients& c);

/// l(beta) = -<s, beta> + <1, mu>; +inf when mu overflowed.
Scalar neg_log_likelihood(const ProblemInstance& inst, const Coefficients& c);
Scalar neg_log_likelihood(const ProblemInstance& inst, const Vector& beta);

/// X^T mu - X^T n
Vector gradient(const ProblemInstance& inst, const Coefficients& c);

// --- intercept reparametrization ----------------------------------------------
//
// With X = [1 Xs], profiling out the intercept leaves
//   L(b) = -<n, Xs b> + <1,n> log <q, exp(Xs b)>,
// and min over b0 of l([b0, b]) = L(b) + <1,n>(1 - log <1,n>).

/// Throws ContractError unless column 0 is the intercept.
void require_intercept(const ProblemInstance& inst);

/// Xs b, the slope part of the linear predictor.
Vector slope_times(const DesignMatrix& x, const Vector& slope);
/// Xs^T v
Vector slope_transpose_times(const DesignMatrix& x, const Vector& v);

Scalar reparam_objective(const ProblemInstance& inst, const Vector& slope);
Vector reparam_gradient(const ProblemInstance& inst, const Vector& slope);
/// log <1,n> - log <q, exp(Xs b)>
Scalar optimal_intercept(const ProblemInstance& inst, const Vector& slope);
/// <1,n>(1 - log <1,n>)
Scalar reparam_offset(const ProblemInstance& inst);

/**
 * Overflow-safe representation of mu_s = q o exp(Xs b): normalized weights
 * (summing to one) and the log of the total mass.
 */
struct SlopeState {
    Vector slope;
    Vector weights;
    Scalar log_mass = 0;

    /// L(b)
    Scalar objective(const ProblemInstance& inst) const;
    /// grad L(b) = -s_slope + <1,n> Xs^T weights
    Vector gradient(const ProblemInstance& inst) const;
    Scalar intercept(const ProblemInstance& inst) const;
    /// Fitted mean with the optimal intercept: <1,n> * weights.
    Vector fitted_mean(const ProblemInstance& inst) const;
    /// Full coefficient vector [b0*, b].
    Vector full_beta(const ProblemInstance& inst) const;
};

SlopeState make_slope_state(const ProblemInstance& inst, Vector slope);
/// mu_s <- mu_s o exp(delta_eta), renormalized in the log domain.
void scale_slope_state(SlopeState& state, const Vector& delta_eta);

// --- goodness of fit -----------------------------------------------------------

/// 2 sum n_i log(n_i / mu_i); zero counts contribute 0, mu_i = 0 < n_i gives +inf.
Scalar g_squared(const Vector& n, const Vector& mu);
/// sum (n_i - mu_i)^2 / mu_i; zero counts contribute mu_i.
Scalar pearson_x2(const Vector& n, const Vector& mu);
Scalar g_squared(const ProblemInstance& inst, const Coefficients& c);
Scalar pearson_x2(const ProblemInstance& inst, const Coefficients& c);

// --- curvature bounds for the reparametrized objective ---------------------------

/// Xs^T (<1,n> I - 1 1^T) Xs / 2
Matrix bohning_bound(const ProblemInstance& inst);
/// <1,n> ||Xs||_2^2 / 2 (the bound is this multiple of the identity)
Scalar spectral_bound(const ProblemInstance& inst);

/// <1,n> Xs^T [diag(w) - w w^T] Xs for weights w on the simplex.
Matrix reparam_hessian(const ProblemInstance& inst, const Vector& weights);

/**
 * Smallest sampled value of v^T (W - H(w)) v / ||v||^2 over random simplex
 * weights w and random directions v (plus the direction with Xs v closest to
 * the all-ones vector). Negative values beyond round-off mean W is not a valid
 * quadratic majorizer.
 */
Scalar sampled_bound_gap(const ProblemInstance& inst, const Matrix& w, int n_weights, int n_directions,
                         std::uint64_t seed);

enum class CurvatureChoice { Spectral, Bohning };

/// W with its Cholesky factorization, plus what had to be done to get it.
struct CurvatureBound {
    Matrix w;
    Eigen::LLT<Matrix> llt;
    CurvatureChoice used = CurvatureChoice::Bohning;
    bool fell_back = false;     // Bohning failed validation, spectral used instead
    bool ridge_repaired = false;

    Vector solve(const Vector& rhs) const { return llt.solve(rhs); }
};

/// Builds and factors W (+ ridge * I). The Bohning matrix is accepted outright
/// when <1,n> >= N, otherwise it must pass sampled_bound_gap.
CurvatureBound make_curvature_bound(const ProblemInstance& inst, CurvatureChoice choice, Scalar ridge = 0,
                                    std::uint64_t seed = 0);

} // namespace ipscale
