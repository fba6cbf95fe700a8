#pragma once

#include "ipscale/csv.hpp"
#include "ipscale/design.hpp"
#include "ipscale/model.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace ipscale {

/// Targets that no fitted table can match (inconsistent totals, positive target on an empty seed margin).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Contingency table read from a counts CSV: observed cells only.
struct TableData {
    TableSchema schema;
    /// Cell index of every instance row.
    std::vector<Index> cells;
    /// Labels of model columns that vanish on the observed cells (dropped from the fit).
    std::vector<std::string> dropped_columns;
    ProblemInstance instance;
};

/**
 * Counts CSV: one column per schema factor (1-based levels) and `count`.
 * Absent cells are unobserved and left out; model columns that become zero
 * on the observed cells are dropped and reported.
 */
TableData load_table_counts(const TableSchema& schema, const csv::Table& counts);

/// Design triplets plus a `count` CSV with one row per design row.
ProblemInstance load_design_counts(const csv::Table& design, const csv::Table& counts);

/// One margin of a raking problem: factor indices and a target per margin cell
/// (cells in row-major order over those factors).
struct Margin {
    std::vector<int> factors;
    Vector targets;
};

/// Seed table as offsets (factor columns + `value`); absent cells get 0.
Vector load_seed_table(const TableSchema& schema, const csv::Table& seed);

/// Margin CSV: a subset of the factor columns + `target`; every margin cell must appear once.
Margin load_margin(const TableSchema& schema, const csv::Table& margin);

struct RakeProblem {
    ProblemInstance instance;
    /// Largest relative mismatch between the margins' grand totals.
    Scalar total_mismatch = 0;
};

/// Raking design (intercept plus full margin indicators) with the targets as
/// sufficient statistics. The intercept target is the first margin's total.
RakeProblem build_rake_problem(const TableSchema& schema, const Vector& seed, const std::vector<Margin>& margins);

/// Largest |<x_j, mu> - s_j| / max(s_j, tiny) over the columns.
Scalar max_relative_margin_residual(const ProblemInstance& inst, const Vector& mu);

} // namespace ipscale
