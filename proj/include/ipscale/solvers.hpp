#pragma once

#include "ipscale/model.hpp"
#include "ipscale/rng.hpp"
#include "ipscale/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ipscale {

enum class Variant {
    IPS,
    A_IPS,
    X2_IPS,
    MM_BINARY,
    GIS,
    MM_GENERAL,
    MM_PARALLEL,
    IIS,
    Q_IPS,
    B_IPS,
    NEWTON,
    L1_IPS,
    RIDGE_Q_IPS,
};

/// CLI spelling, e.g. "a-ips", "mm-general".
std::string to_string(Variant v);
/// Throws InputError listing the valid names.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

enum class Termination { TolReached, TimeLimit, IterLimit, Diverged };
std::string to_string(Termination t);

struct SolverConfig {
    Variant variant = Variant::IPS;
    Scalar eps_tol = 1e-4;
    double t_max_secs = 600;
    Index max_iters = 1'000'000;
    Scalar lambda = 0;
    /// Explicit block sizes; empty means blocks of default_block_size.
    std::vector<Index> block_sizes;
    Index default_block_size = 200;
    CurvatureChoice w_choice = CurvatureChoice::Bohning;
    std::uint64_t seed = 0;
    std::optional<Vector> beta_init;
    Scalar clamp = kClamp;
    Scalar inner_tol = 1e-10;
    int inner_max_iters = 50;
    /// Newton steps per block visit in B-IPS; 0 solves every block to inner_tol.
    int block_newton_steps = 1;
    /// Sweeps between trace records; 0 picks 1 for p <= 1000 and 5 above.
    int record_every = 0;
    /// Worker threads for MM_PARALLEL block subproblems.
    int jobs = 1;
};

struct TraceRecord {
    Index iter = 0;
    double wall_seconds = 0;
    /// Deterministic cost counter (design entries touched).
    double work = 0;
    Scalar objective = 0;
    Scalar rel_grad = 0;
    std::optional<Scalar> est_error;
};

struct ConvergenceTrace {
    std::vector<TraceRecord> records;
    Termination termination = Termination::IterLimit;
    Scalar grad0_norm = 0;
};

struct FitResult {
    Variant variant = Variant::IPS;
    Vector beta;
    Vector mu;
    ConvergenceTrace trace;
    Index iterations = 0;
    double wall_seconds = 0;
    std::vector<std::string> warnings;

    bool has_warning(const std::string& w) const;
};

/// Warning tags attached to FitResult::warnings.
namespace warning {
inline constexpr const char* kDivergentCoordinate = "divergent_coordinate";
inline constexpr const char* kBohningFallback = "bohning_fallback";
inline constexpr const char* kRidgeRepair = "ridge_repair";
inline constexpr const char* kMomentumRestart = "momentum_restart";
inline constexpr const char* kSubsolver = "subsolver_nonconvergence";
inline constexpr const char* kDamping = "levenberg_damping";
} // namespace warning

/**
 * Evaluates the stopping rule on the last trace record: relative gradient
 * <= eps_tol (inclusive), wall clock >= t_max_secs, iteration >= max_iters, or
 * a non-finite objective. Sets trace.termination when it fires.
 */
bool check_stop(ConvergenceTrace& trace, const SolverConfig& cfg);

/// Dispatches on cfg.variant.
FitResult fit(const ProblemInstance& inst, const SolverConfig& cfg);

// --- coordinate descent family --------------------------------------------------

/// Visiting order of the p coordinates for one sweep.
using SweepOrder = std::function<std::vector<Index>(Index p)>;

/// Cyclic coordinate descent with the closed-form binary update; ascending order.
FitResult ips_fit(const ProblemInstance& inst, const SolverConfig& cfg);
/// Same with a fresh Fisher-Yates permutation per sweep drawn from cfg.seed.
FitResult a_ips_fit(const ProblemInstance& inst, const SolverConfig& cfg);
/// Coordinate descent with an injected order (identity order reproduces ips_fit).
FitResult ips_fit_ordered(const ProblemInstance& inst, const SolverConfig& cfg, const SweepOrder& order);
/// Cyclic coordinate descent on Pearson's X^2; needs full counts.
FitResult x2_ips_fit(const ProblemInstance& inst, const SolverConfig& cfg);

/// beta_j + log(b / a) with b = <x_j, n>, a = <x_j, mu>, clamped to [-clamp, clamp].
Scalar ips_coordinate_update(Scalar beta_j, Scalar b, Scalar a, Scalar clamp, bool& clamped);

/**
 * Soft-threshold coordinate update for the l1-penalized likelihood on a
 * binary column: delta = b - a exp(-beta_j); zero when |delta| <= lambda,
 * otherwise beta_j + log((b - lambda sgn(delta)) / a).
 */
Scalar l1_threshold_update(Scalar beta_j, Scalar b, Scalar a, Scalar lambda, Scalar clamp, bool& clamped);

/// Intercept-first cyclic sweeps with l1_threshold_update on slopes.
FitResult l1_ips_fit(const ProblemInstance& inst, const SolverConfig& cfg);

/// Max |KKT violation| of the l1 problem at (beta, mu); zero at an exact solution.
Scalar l1_kkt_residual(const ProblemInstance& inst, const Coefficients& c, Scalar lambda);

// --- majorization-minimization ------------------------------------------------

struct StepReport {
    bool clamped = false;
    bool subsolver_failed = false;
};

/// Synchronized update with step 1/p (binary designs).
StepReport mm_binary_step(const ProblemInstance& inst, Coefficients& c, Scalar clamp = kClamp);
/// Synchronized update with step 1/R (non-negative designs).
StepReport gis_step(const ProblemInstance& inst, Coefficients& c, Scalar clamp = kClamp);
/// Positive/negative split update for arbitrary designs.
StepReport mm_general_step(const ProblemInstance& inst, Coefficients& c, Scalar clamp = kClamp);
/// Separable block surrogate; each block solved by damped Newton, all applied at once.
StepReport mm_parallel_step(const ProblemInstance& inst, Coefficients& c, const std::vector<std::vector<Index>>& blocks,
                            const SolverConfig& cfg);

/// Root of -b + a u - c / u = 0 in log form: (1/R) log u, with the clamp
/// handling for roots at 0 or infinity.
Scalar general_mm_delta(Scalar a, Scalar b, Scalar c_neg, Scalar r, Scalar clamp, bool& clamped);

FitResult mm_binary_fit(const ProblemInstance& inst, const SolverConfig& cfg);
FitResult gis_fit(const ProblemInstance& inst, const SolverConfig& cfg);
FitResult mm_general_fit(const ProblemInstance& inst, const SolverConfig& cfg);
FitResult mm_parallel_fit(const ProblemInstance& inst, const SolverConfig& cfg);

// --- reparametrized solvers -----------------------------------------------------

/**
 * Solves (<1,n>/<1,mu_s>) sum_i x_ij mu_s,i exp(r_i delta) = rhs for delta with
 * safeguarded Newton-bisection on the log of the left side. `terms` holds
 * log(x_ij * w_i) (w normalized), `rates` the row sums r_i.
 */
Scalar iis_solve_coordinate(const Vector& log_terms, const Vector& rates, Scalar log_rhs, Scalar clamp, bool& clamped);

/// One IIS sweep: all slope coordinates from the same state, then a synchronized update.
StepReport iis_step(const ProblemInstance& inst, SlopeState& state, Scalar clamp = kClamp);
FitResult iis_fit(const ProblemInstance& inst, const SolverConfig& cfg);

/// Momentum recursion theta' = (sqrt(theta^4 + 4 theta^2) - theta^2) / 2.
Scalar next_theta(Scalar theta);
/// Accelerated quadratic-surrogate solver; cfg.lambda adds a ridge on the slopes.
FitResult qips_fit(const ProblemInstance& inst, const SolverConfig& cfg);

/// Shuffles 0..d-1 and cuts it into consecutive blocks of the given sizes.
std::vector<std::vector<Index>> random_blocks(Index d, const std::vector<Index>& sizes, SplitMix64& rng);
/// Block sizes for d coordinates from cfg (explicit list or chunks of the default).
std::vector<Index> resolve_block_sizes(Index d, const SolverConfig& cfg);

/// Minimizes L over one block of slopes by damped Newton with Armijo backtracking.
StepReport bips_block_update(const ProblemInstance& inst, SlopeState& state, std::span<const Index> block,
                             const SolverConfig& cfg, double* work = nullptr);
FitResult bips_fit(const ProblemInstance& inst, const SolverConfig& cfg);

/// Dense Newton on l(beta) with Armijo backtracking (c1 = 1e-4, halving, <= 50 steps).
FitResult newton_fit(const ProblemInstance& inst, const SolverConfig& cfg);

} // namespace ipscale
