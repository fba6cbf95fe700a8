#include "ipscale/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipscale {

namespace {

[[noreturn]] void fail_at(const csv::Table& t, std::size_t row, const std::string& what)
{
    throw InputError(t.source + ":" + std::to_string(t.lines.at(row)) + ": " + what);
}

/// Positions of the named factor columns, in schema order; missing ones are -1.
std::vector<long> factor_columns(const TableSchema& schema, const csv::Table& t)
{
    std::vector<long> pos;
    for (const auto& f : schema.factors) pos.push_back(t.column(f.name));
    return pos;
}

long require_column(const csv::Table& t, const std::string& name)
{
    const long c = t.column(name);
    if (c < 0) throw InputError(t.source + ": missing column '" + name + "'");
    return c;
}

void reject_unknown_columns(const TableSchema& schema, const csv::Table& t, const std::string& value_col)
{
    for (const auto& h : t.header) {
        if (h == value_col) continue;
        bool known = false;
        for (const auto& f : schema.factors) known = known || f.name == h;
        if (!known) throw InputError(t.source + ": column '" + h + "' is not a schema factor");
    }
}

int read_level(const TableSchema& schema, const csv::Table& t, std::size_t row, std::size_t f, long col)
{
    const long lv = csv::to_long(t, row, static_cast<std::size_t>(col));
    const int m = schema.factors[f].levels;
    if (lv < 1 || lv > m)
        fail_at(t, row, "level " + std::to_string(lv) + " of factor '" + schema.factors[f].name + "' outside 1.." +
                            std::to_string(m));
    return static_cast<int>(lv - 1);
}

} // namespace

TableData load_table_counts(const TableSchema& schema, const csv::Table& counts)
{
    schema.validate();
    reject_unknown_columns(schema, counts, "count");
    const long ccol = require_column(counts, "count");
    const auto fcols = factor_columns(schema, counts);
    for (std::size_t f = 0; f < fcols.size(); ++f)
        if (fcols[f] < 0) throw InputError(counts.source + ": missing factor column '" + schema.factors[f].name + "'");
    if (counts.rows.empty()) throw InputError(counts.source + ": no observed cells");

    std::vector<std::pair<Index, double>> obs;
    std::vector<int> lv(schema.factors.size());
    for (std::size_t r = 0; r < counts.rows.size(); ++r) {
        for (std::size_t f = 0; f < fcols.size(); ++f) lv[f] = read_level(schema, counts, r, f, fcols[f]);
        const double n = csv::to_double(counts, r, static_cast<std::size_t>(ccol));
        if (!(n >= 0) || !std::isfinite(n)) fail_at(counts, r, "count must be a finite non-negative number");
        obs.emplace_back(schema.cell_index(lv), n);
    }
    std::vector<std::size_t> order(obs.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return obs[a].first < obs[b].first; });
    for (std::size_t k = 1; k < order.size(); ++k)
        if (obs[order[k]].first == obs[order[k - 1]].first) fail_at(counts, order[k], "duplicate cell");

    TableData out{schema, {}, {}, ProblemInstance::from_counts(DesignMatrix::sparse_binary(1, {{0}}), Vector::Ones(1))};
    Vector n(static_cast<Index>(obs.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        out.cells.push_back(obs[order[k]].first);
        n[static_cast<Index>(k)] = obs[order[k]].second;
    }
    DesignMatrix full = build_table_design(schema);
    const auto zero = full.zero_columns_after(out.cells);
    std::vector<Index> keep;
    for (Index j = 0, z = 0; j < full.cols(); ++j) {
        if (z < static_cast<Index>(zero.size()) && zero[static_cast<std::size_t>(z)] == j) {
            out.dropped_columns.push_back(full.column_labels()[static_cast<std::size_t>(j)]);
            ++z;
        } else {
            keep.push_back(j);
        }
    }
    DesignMatrix x = zero.empty() ? std::move(full) : full.select_columns(keep);
    if (static_cast<Index>(out.cells.size()) < x.rows()) x = x.select_rows(out.cells);
    out.instance = ProblemInstance::from_counts(std::move(x), std::move(n));
    return out;
}

ProblemInstance load_design_counts(const csv::Table& design, const csv::Table& counts)
{
    const long ccol = require_column(counts, "count");
    Vector n(static_cast<Index>(counts.rows.size()));
    for (std::size_t r = 0; r < counts.rows.size(); ++r) {
        n[static_cast<Index>(r)] = csv::to_double(counts, r, static_cast<std::size_t>(ccol));
        if (!(n[static_cast<Index>(r)] >= 0) || !std::isfinite(n[static_cast<Index>(r)]))
            fail_at(counts, r, "count must be a finite non-negative number");
    }
    const long rc = require_column(design, "row"), cc = require_column(design, "col"), vc = require_column(design, "value");
    Index rows = n.size(), cols = 0;
    std::vector<std::tuple<Index, Index, double>> trip;
    for (std::size_t r = 0; r < design.rows.size(); ++r) {
        const long i = csv::to_long(design, r, static_cast<std::size_t>(rc));
        const long j = csv::to_long(design, r, static_cast<std::size_t>(cc));
        const double v = csv::to_double(design, r, static_cast<std::size_t>(vc));
        if (i < 0 || i >= rows) fail_at(design, r, "row index outside the count vector");
        if (j < 0) fail_at(design, r, "negative column index");
        if (!std::isfinite(v)) fail_at(design, r, "non-finite design entry");
        cols = std::max<Index>(cols, j + 1);
        trip.emplace_back(i, j, v);
    }
    if (cols == 0) throw InputError(design.source + ": empty design");
    Matrix x = Matrix::Zero(rows, cols);
    for (const auto& [i, j, v] : trip) x(i, j) += v;
    try {
        return ProblemInstance::from_counts(DesignMatrix::from_dense(std::move(x)), std::move(n));
    } catch (const ContractError& e) {
        throw InputError(e.what());
    }
}

Vector load_seed_table(const TableSchema& schema, const csv::Table& seed)
{
    schema.validate();
    reject_unknown_columns(schema, seed, "value");
    const long vcol = require_column(seed, "value");
    const auto fcols = factor_columns(schema, seed);
    for (std::size_t f = 0; f < fcols.size(); ++f)
        if (fcols[f] < 0) throw InputError(seed.source + ": missing factor column '" + schema.factors[f].name + "'");
    Vector q = Vector::Zero(schema.cell_count());
    std::vector<char> seen(static_cast<std::size_t>(q.size()), 0);
    std::vector<int> lv(schema.factors.size());
    for (std::size_t r = 0; r < seed.rows.size(); ++r) {
        for (std::size_t f = 0; f < fcols.size(); ++f) lv[f] = read_level(schema, seed, r, f, fcols[f]);
        const Index cell = schema.cell_index(lv);
        if (seen[static_cast<std::size_t>(cell)]) fail_at(seed, r, "duplicate cell");
        seen[static_cast<std::size_t>(cell)] = 1;
        const double v = csv::to_double(seed, r, static_cast<std::size_t>(vcol));
        if (!(v >= 0) || !std::isfinite(v)) fail_at(seed, r, "seed value must be finite and non-negative");
        q[cell] = v;
    }
    return q;
}

Margin load_margin(const TableSchema& schema, const csv::Table& margin)
{
    schema.validate();
    reject_unknown_columns(schema, margin, "target");
    const long tcol = require_column(margin, "target");
    Margin m;
    std::vector<long> cols;
    for (std::size_t f = 0; f < schema.factors.size(); ++f) {
        const long c = margin.column(schema.factors[f].name);
        if (c >= 0) {
            m.factors.push_back(static_cast<int>(f));
            cols.push_back(c);
        }
    }
    if (m.factors.empty()) throw InputError(margin.source + ": margin names no schema factor");
    Index cells = 1;
    for (int f : m.factors) cells *= schema.factors[static_cast<std::size_t>(f)].levels;
    m.targets = Vector::Constant(cells, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < margin.rows.size(); ++r) {
        Index idx = 0;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const auto f = static_cast<std::size_t>(m.factors[k]);
            idx = idx * schema.factors[f].levels + read_level(schema, margin, r, f, cols[k]);
        }
        if (!std::isnan(m.targets[idx])) fail_at(margin, r, "duplicate margin cell");
        const double v = csv::to_double(margin, r, static_cast<std::size_t>(tcol));
        if (!(v >= 0) || !std::isfinite(v)) fail_at(margin, r, "target must be finite and non-negative");
        m.targets[idx] = v;
    }
    for (Index k = 0; k < cells; ++k)
        if (std::isnan(m.targets[k]))
            throw InputError(margin.source + ": margin cell " + std::to_string(k + 1) + " has no target");
    return m;
}

RakeProblem build_rake_problem(const TableSchema& schema, const Vector& seed, const std::vector<Margin>& margins)
{
    if (margins.empty()) throw InputError("raking needs at least one margin");
    if (seed.size() != schema.cell_count()) throw ContractError("seed length does not match the table");
    std::vector<std::vector<int>> subsets;
    for (const auto& m : margins) subsets.push_back(m.factors);
    DesignMatrix x = build_raking_design(schema, subsets);

    RakeProblem out{ProblemInstance::from_counts(DesignMatrix::sparse_binary(1, {{0}}), Vector::Ones(1)), 0};
    const Scalar total = margins.front().targets.sum();
    if (!(total > 0)) throw InfeasibleError("margin targets sum to zero");
    Vector s(x.cols());
    s[0] = total;
    Index at = 1;
    for (const auto& m : margins) {
        const Scalar mt = m.targets.sum();
        out.total_mismatch = std::max(out.total_mismatch, std::abs(mt - total) / total);
        s.segment(at, m.targets.size()) = m.targets;
        at += m.targets.size();
    }
    if (out.total_mismatch > 1e-12)
        throw InfeasibleError("margin totals disagree (relative mismatch " + csv::format(out.total_mismatch) + ")");

    std::vector<Index> support;
    for (Index i = 0; i < seed.size(); ++i)
        if (seed[i] > 0) support.push_back(i);
    if (support.empty()) throw InputError("seed table is all zero");
    const auto zero = x.zero_columns_after(support);
    std::vector<Index> keep;
    for (Index j = 0, z = 0; j < x.cols(); ++j) {
        if (z < static_cast<Index>(zero.size()) && zero[static_cast<std::size_t>(z)] == j) {
            ++z;
            if (s[j] > 0)
                throw InfeasibleError("margin cell '" + x.column_labels()[static_cast<std::size_t>(j)] +
                                      "' has a positive target but no seed mass");
        } else {
            keep.push_back(j);
        }
    }
    if (!zero.empty()) {
        Vector sk(static_cast<Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) sk[static_cast<Index>(k)] = s[keep[k]];
        s = std::move(sk);
        // the intercept survives, so no row becomes zero
        Matrix dense = x.to_dense();
        Matrix kept(dense.rows(), static_cast<Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) kept.col(static_cast<Index>(k)) = dense.col(keep[k]);
        std::vector<std::string> labels;
        for (Index j : keep) labels.push_back(x.column_labels()[static_cast<std::size_t>(j)]);
        out.instance = ProblemInstance::from_sufficient_stats(DesignMatrix::from_dense(std::move(kept), labels), s, seed);
        return out;
    }
    out.instance = ProblemInstance::from_sufficient_stats(std::move(x), std::move(s), seed);
    return out;
}

Scalar max_relative_margin_residual(const ProblemInstance& inst, const Vector& mu)
{
    const Vector fitted = inst.design().transpose_times(mu);
    const Vector& s = inst.suff_stats();
    Scalar worst = 0;
    for (Index j = 0; j < s.size(); ++j)
        worst = std::max(worst, std::abs(fitted[j] - s[j]) / std::max(std::abs(s[j]), 1e-300));
    return worst;
}

} // namespace ipscale
