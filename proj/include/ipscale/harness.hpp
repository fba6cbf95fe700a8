#pragma once

#include "ipscale/design.hpp"
#include "ipscale/model.hpp"
#include "ipscale/rng.hpp"
#include "ipscale/solvers.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ipscale {

enum class Scenario { TableModerate, TableLarge, NonnegSmall, NonnegLarge, General, L1Path };

/// "table-moderate", "nonneg-small", ...
std::string to_string(Scenario s);
/// Throws InputError listing the valid names.
Scenario parse_scenario(const std::string& name);
const std::vector<Scenario>& all_scenarios();

/// Which time axis the averaged curves use.
enum class ClockKind { Work, Wall };

struct ExperimentSpec {
    Scenario scenario = Scenario::TableModerate;
    int replications = 20;
    /// Shrinks table cells or (N, p) of the Gaussian scenarios; 1 is full size.
    double scale_factor = 1.0;
    std::vector<Variant> roster;
    std::uint64_t seed = 0;
    /// Coefficient setting of TABLE_MODERATE: 1 = last 10 non-zero, 2 = plus 20 random.
    int setting = 1;
    /// Overrides of the Gaussian N and p (0 keeps the scaled default).
    Index n_rows = 0;
    Index n_cols = 0;
    /// eps_tol, t_max, block sizes, ... shared by every roster entry.
    SolverConfig solver;
    int jobs = 1;
    ClockKind clock = ClockKind::Work;
    /// Points of the common time grid.
    int grid_points = 101;

    /// Throws InputError on replications < 1, empty roster, scale outside (0, 1].
    void validate() const;
};

ExperimentSpec parse_experiment_json(const std::string& text);
std::string experiment_to_json(const ExperimentSpec& spec);

// --- data generation -------------------------------------------------------------

/// Schema of the (possibly scaled) table scenarios.
TableSchema scenario_schema(Scenario s, double scale_factor);
/// (N, p) of the Gaussian scenarios after scaling and overrides; p counts the intercept.
std::pair<Index, Index> scenario_dimensions(const ExperimentSpec& spec);

/// Table design, scenario coefficients, Poisson counts (q = 1).
ProblemInstance gen_table_instance(const ExperimentSpec& spec, int replication = 0);
/// Gaussian prototype design through the scenario's shift/scale/jitter pipeline.
ProblemInstance gen_gaussian_instance(const ExperimentSpec& spec, int replication = 0);
/// Dispatches on spec.scenario.
ProblemInstance gen_instance(const ExperimentSpec& spec, int replication = 0);

/// Generator stream of one replication.
SplitMix64 replication_rng(std::uint64_t seed, int replication, std::uint64_t purpose);

namespace pipeline {
/// Rows x_1 = z_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j with z iid N(0,1).
Matrix ar1_rows(Index n, Index d, double rho, SplitMix64& rng);
/// X <- X - min(X).
void shift_to_nonnegative(Matrix& x);
/// X <- X / (factor * max |x_ij|).
void scale_by_max(Matrix& x, double factor);
/// Row i multiplied by 1 + |z_i|.
void jitter_rows(Matrix& x, SplitMix64& rng);
/// [1 X]
Matrix with_intercept(const Matrix& x);
/// 0.5 N(a, 1) + 0.5 N(b, 1) draws.
Vector normal_mixture(Index k, double a, double b, SplitMix64& rng);
/// n_i ~ Poisson(q_i exp(x_i^T beta)); InputError when a mean overflows.
Vector poisson_counts(const DesignMatrix& x, const Vector& beta, SplitMix64& rng);
} // namespace pipeline

// --- experiments -----------------------------------------------------------------

struct RunRecord {
    int replication = 0;
    Variant variant = Variant::IPS;
    bool ok = false;
    std::string error;
    Termination termination = Termination::IterLimit;
    double wall_seconds = 0;
    double work = 0;
    Index iterations = 0;
    Scalar final_rel_grad = 0;
    std::optional<Scalar> final_est_err;
    std::vector<std::string> warnings;
    ConvergenceTrace trace;
};

struct AveragedCurve {
    Variant variant = Variant::IPS;
    std::vector<double> time;
    std::vector<double> rel_grad;
    std::vector<double> est_err; // empty when no true coefficients
    int used = 0;
    int failed = 0;
};

struct ExperimentReport {
    ExperimentSpec spec;
    std::vector<RunRecord> runs;
    std::vector<AveragedCurve> curves;
};

/**
 * Runs every roster solver on every replication (replications may run
 * concurrently with spec.jobs > 1) and averages the traces on a common grid.
 * A throwing fit is recorded as a failed run and left out of the averages.
 */
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Linear interpolation of (t, y) at grid points, holding the last value past the end.
std::vector<double> interpolate_hold(const std::vector<double>& t, const std::vector<double>& y,
                                     const std::vector<double>& grid);

/// <solver>.csv per roster entry, runs.csv, summary.json.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

// --- l1 path ---------------------------------------------------------------------

struct PathSpec {
    int grid_size = 50;
    double r_min = 1e-3;
    double gamma = 1.0;
    SolverConfig solver = [] {
        SolverConfig c;
        c.variant = Variant::L1_IPS;
        c.eps_tol = 1e-8;
        return c;
    }();
};

struct PathPoint {
    Scalar lambda = 0;
    Vector beta;
    Index support_size = 0;
    Scalar neg_loglik = 0;
    Scalar deviance = 0; // NaN without counts
    Scalar ebic = 0;
    Scalar kkt_residual = 0;
    Termination termination = Termination::IterLimit;
    Index iterations = 0;
};

struct PathResult {
    Scalar lambda_max = 0;
    std::vector<PathPoint> points;
    std::size_t selected = 0;
};

/// max_{j >= 1} |<x_j, n - mu>| at the intercept-only fit.
Scalar l1_lambda_max(const ProblemInstance& inst);
/// 2 l + k log N + 2 gamma k log(p - 1)
Scalar ebic(Scalar neg_loglik, Index k, Index n_rows, Index p, double gamma);

/// Warm-started l1-IPS fits on a log-spaced decreasing grid from lambda_max.
PathResult l1_path(const ProblemInstance& inst, const PathSpec& spec);

// --- instance export -------------------------------------------------------------

/// design.csv, counts.csv, beta_true.csv, and schema.json when a schema is given.
void write_instance(const ProblemInstance& inst, const std::filesystem::path& dir,
                    const std::optional<TableSchema>& schema = std::nullopt);

} // namespace ipscale
