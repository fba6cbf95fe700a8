#include "ipscale/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ipscale {

const char* to_string(DesignKind kind)
{
    switch (kind) {
    case DesignKind::Binary: return "binary";
    case DesignKind::NonNegative: return "non_negative";
    case DesignKind::General: return "general";
    }
    return "?";
}

// --- TableSchema -------------------------------------------------------------

void TableSchema::validate() const
{
    if (factors.empty()) throw InputError("table schema needs at least one factor");
    for (const auto& f : factors) {
        if (f.levels < 2)
            throw InputError("factor '" + f.name + "' has " + std::to_string(f.levels) + " levels; need >= 2");
    }
    if (order < 1 || order > 3) throw InputError("interaction order must be 1, 2 or 3");
    for (std::size_t a = 0; a < factors.size(); ++a)
        for (std::size_t b = a + 1; b < factors.size(); ++b)
            if (factors[a].name == factors[b].name)
                throw InputError("duplicate factor name '" + factors[a].name + "'");
}

Index TableSchema::cell_count() const
{
    Index n = 1;
    for (const auto& f : factors) {
        if (f.levels <= 0) throw InputError("factor levels must be positive");
        if (n > std::numeric_limits<Index>::max() / f.levels)
            throw SizeError("table cell count overflows the index type");
        n *= f.levels;
    }
    return n;
}

std::vector<int> TableSchema::cell_levels(Index cell) const
{
    std::vector<int> lv(factors.size());
    for (std::size_t k = factors.size(); k-- > 0;) {
        lv[k] = static_cast<int>(cell % factors[k].levels);
        cell /= factors[k].levels;
    }
    return lv;
}

Index TableSchema::cell_index(std::span<const int> levels) const
{
    Index cell = 0;
    for (std::size_t k = 0; k < factors.size(); ++k) cell = cell * factors[k].levels + levels[k];
    return cell;
}

Index TableSchema::factor_index(const std::string& name) const
{
    for (std::size_t k = 0; k < factors.size(); ++k)
        if (factors[k].name == name) return static_cast<Index>(k);
    return -1;
}

// --- DesignMatrix ------------------------------------------------------------

DesignMatrix DesignMatrix::sparse_binary(Index n_rows, std::vector<std::vector<Index>> columns,
                                         std::vector<std::string> labels)
{
    DesignMatrix x;
    x.n_rows_ = n_rows;
    x.n_cols_ = static_cast<Index>(columns.size());
    x.storage_ = DesignStorage::SparseBinary;
    x.kind_ = DesignKind::Binary;
    x.col_ptr_.assign(static_cast<std::size_t>(x.n_cols_) + 1, 0);
    for (std::size_t j = 0; j < columns.size(); ++j) {
        auto& c = columns[j];
        std::sort(c.begin(), c.end());
        if (std::adjacent_find(c.begin(), c.end()) != c.end())
            throw ContractError("duplicate row index in sparse column " + std::to_string(j));
        if (!c.empty() && (c.front() < 0 || c.back() >= n_rows))
            throw ContractError("row index out of range in sparse column " + std::to_string(j));
        x.col_ptr_[j + 1] = x.col_ptr_[j] + static_cast<Index>(c.size());
    }
    x.row_idx_.reserve(static_cast<std::size_t>(x.col_ptr_.back()));
    for (const auto& c : columns) x.row_idx_.insert(x.row_idx_.end(), c.begin(), c.end());
    x.labels_ = std::move(labels);
    x.finalize();
    return x;
}

DesignMatrix DesignMatrix::from_dense(Matrix values, std::vector<std::string> labels)
{
    if (!values.allFinite()) throw ContractError("design contains non-finite entries");
    const bool binary = ((values.array() == 0) || (values.array() == 1)).all();
    if (binary) {
        std::vector<std::vector<Index>> cols(static_cast<std::size_t>(values.cols()));
        for (Index j = 0; j < values.cols(); ++j)
            for (Index i = 0; i < values.rows(); ++i)
                if (values(i, j) != 0) cols[static_cast<std::size_t>(j)].push_back(i);
        return sparse_binary(values.rows(), std::move(cols), std::move(labels));
    }
    DesignMatrix x;
    x.n_rows_ = values.rows();
    x.n_cols_ = values.cols();
    x.storage_ = DesignStorage::DenseGeneral;
    x.kind_ = (values.array() >= 0).all() ? DesignKind::NonNegative : DesignKind::General;
    x.dense_ = std::move(values);
    x.labels_ = std::move(labels);
    x.finalize();
    return x;
}

void DesignMatrix::finalize()
{
    if (n_rows_ <= 0 || n_cols_ <= 0) throw ContractError("design must have at least one row and one column");
    if (labels_.empty()) {
        labels_.reserve(static_cast<std::size_t>(n_cols_));
        for (Index j = 0; j < n_cols_; ++j) labels_.push_back("x" + std::to_string(j));
    }
    if (static_cast<Index>(labels_.size()) != n_cols_) throw ContractError("label count does not match column count");

    Vector abs_sums = Vector::Zero(n_rows_);
    row_sums_ = Vector::Zero(n_rows_);
    if (is_sparse()) {
        nnz_ = static_cast<Index>(row_idx_.size());
        std::vector<Index> count(static_cast<std::size_t>(n_rows_) + 1, 0);
        for (Index i : row_idx_) ++count[static_cast<std::size_t>(i) + 1];
        for (Index j = 0; j < n_cols_; ++j)
            if (col_ptr_[j + 1] == col_ptr_[j]) throw ContractError("design column " + labels_[j] + " is all zero");
        row_ptr_.assign(count.size(), 0);
        std::partial_sum(count.begin(), count.end(), row_ptr_.begin());
        col_idx_.assign(row_idx_.size(), 0);
        std::vector<Index> fill(row_ptr_.begin(), row_ptr_.end() - 1);
        for (Index j = 0; j < n_cols_; ++j)
            for (Index k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k)
                col_idx_[static_cast<std::size_t>(fill[static_cast<std::size_t>(row_idx_[k])]++)] = j;
        for (Index i = 0; i < n_rows_; ++i) row_sums_[i] = static_cast<Scalar>(row_ptr_[i + 1] - row_ptr_[i]);
        abs_sums = row_sums_;
        has_intercept_ = (col_ptr_[1] - col_ptr_[0]) == n_rows_;
    } else {
        nnz_ = (dense_.array() != 0).count();
        for (Index j = 0; j < n_cols_; ++j)
            if ((dense_.col(j).array() == 0).all())
                throw ContractError("design column " + labels_[j] + " is all zero");
        row_sums_ = dense_.rowwise().sum();
        abs_sums = dense_.cwiseAbs().rowwise().sum();
        has_intercept_ = (dense_.col(0).array() == 1).all();
    }
    for (Index i = 0; i < n_rows_; ++i)
        if (abs_sums[i] == 0) throw ContractError("design row " + std::to_string(i) + " is all zero");
    row_sum_max_ = abs_sums.maxCoeff();
}

Scalar DesignMatrix::entry(Index i, Index j) const
{
    if (!is_sparse()) return dense_(i, j);
    auto s = column_support(j);
    return std::binary_search(s.begin(), s.end(), i) ? 1.0 : 0.0;
}

std::span<const Index> DesignMatrix::column_support(Index j) const
{
    if (!is_sparse()) throw ContractError("column_support requires sparse storage");
    return {row_idx_.data() + col_ptr_[j], static_cast<std::size_t>(col_ptr_[j + 1] - col_ptr_[j])};
}

std::span<const Index> DesignMatrix::row_support(Index i) const
{
    if (!is_sparse()) throw ContractError("row_support requires sparse storage");
    return {col_idx_.data() + row_ptr_[i], static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
}

Scalar DesignMatrix::dot_column(Index j, const Vector& v) const
{
    if (is_sparse()) {
        Scalar s = 0;
        for (Index i : column_support(j)) s += v[i];
        return s;
    }
    return dense_.col(j).dot(v);
}

Scalar DesignMatrix::dot_column_positive(Index j, const Vector& v) const
{
    if (is_sparse()) return dot_column(j, v);
    return dense_.col(j).cwiseMax(0.0).dot(v);
}

Scalar DesignMatrix::dot_column_negative(Index j, const Vector& v) const
{
    if (is_sparse()) return 0.0;
    return (-dense_.col(j)).cwiseMax(0.0).dot(v);
}

Vector DesignMatrix::transpose_times(const Vector& v) const
{
    if (!is_sparse()) return dense_.transpose() * v;
    Vector out(n_cols_);
    for (Index j = 0; j < n_cols_; ++j) out[j] = dot_column(j, v);
    return out;
}

Vector DesignMatrix::times(const Vector& beta) const
{
    if (!is_sparse()) return dense_ * beta;
    Vector out = Vector::Zero(n_rows_);
    for (Index j = 0; j < n_cols_; ++j) {
        const Scalar b = beta[j];
        if (b == 0) continue;
        for (Index i : column_support(j)) out[i] += b;
    }
    return out;
}

void DesignMatrix::add_column(Index j, Scalar a, Vector& out) const
{
    if (is_sparse()) {
        for (Index i : column_support(j)) out[i] += a;
    } else {
        out.noalias() += a * dense_.col(j);
    }
}

Matrix DesignMatrix::block_gram(std::span<const Index> block, const Vector& w) const
{
    const auto g = static_cast<Index>(block.size());
    if (!is_sparse()) {
        Matrix xg(n_rows_, g);
        for (Index k = 0; k < g; ++k) xg.col(k) = dense_.col(block[static_cast<std::size_t>(k)]);
        Matrix out = Matrix::Zero(g, g);
        out.selfadjointView<Eigen::Lower>().rankUpdate(xg.transpose() * w.cwiseSqrt().asDiagonal());
        return out.selfadjointView<Eigen::Lower>();
    }
    std::vector<Index> pos(static_cast<std::size_t>(n_cols_), -1);
    for (Index k = 0; k < g; ++k) pos[static_cast<std::size_t>(block[static_cast<std::size_t>(k)])] = k;
    Matrix out = Matrix::Zero(g, g);
    std::vector<Index> local;
    for (Index i = 0; i < n_rows_; ++i) {
        local.clear();
        for (Index j : row_support(i))
            if (pos[static_cast<std::size_t>(j)] >= 0) local.push_back(pos[static_cast<std::size_t>(j)]);
        const Scalar wi = w[i];
        for (Index a : local)
            for (Index b : local) out(a, b) += wi;
    }
    return out;
}

Vector DesignMatrix::block_transpose_times(std::span<const Index> block, const Vector& v) const
{
    Vector out(static_cast<Index>(block.size()));
    for (std::size_t k = 0; k < block.size(); ++k) out[static_cast<Index>(k)] = dot_column(block[k], v);
    return out;
}

Vector DesignMatrix::block_times(std::span<const Index> block, const Vector& delta) const
{
    Vector out = Vector::Zero(n_rows_);
    for (std::size_t k = 0; k < block.size(); ++k) {
        const Scalar d = delta[static_cast<Index>(k)];
        if (d != 0) add_column(block[k], d, out);
    }
    return out;
}

Vector DesignMatrix::block_row_sums(std::span<const Index> block) const
{
    Vector out = Vector::Zero(n_rows_);
    for (Index j : block) add_column(j, 1.0, out);
    return out;
}

Matrix DesignMatrix::to_dense() const
{
    if (!is_sparse()) return dense_;
    Matrix out = Matrix::Zero(n_rows_, n_cols_);
    for (Index j = 0; j < n_cols_; ++j)
        for (Index i : column_support(j)) out(i, j) = 1.0;
    return out;
}

std::vector<Index> DesignMatrix::zero_columns_after(std::span<const Index> keep_rows) const
{
    std::vector<char> kept(static_cast<std::size_t>(n_rows_), 0);
    for (Index i : keep_rows) kept[static_cast<std::size_t>(i)] = 1;
    std::vector<Index> zero;
    for (Index j = 0; j < n_cols_; ++j) {
        bool any = false;
        for_each_in_column(j, [&](Index i, Scalar) { any = any || kept[static_cast<std::size_t>(i)]; });
        if (!any) zero.push_back(j);
    }
    return zero;
}

DesignMatrix DesignMatrix::select_rows(std::span<const Index> keep) const
{
    if (!is_sparse()) {
        Matrix sub(static_cast<Index>(keep.size()), n_cols_);
        for (std::size_t r = 0; r < keep.size(); ++r) sub.row(static_cast<Index>(r)) = dense_.row(keep[r]);
        return from_dense(std::move(sub), labels_);
    }
    std::vector<Index> new_row(static_cast<std::size_t>(n_rows_), -1);
    for (std::size_t r = 0; r < keep.size(); ++r) new_row[static_cast<std::size_t>(keep[r])] = static_cast<Index>(r);
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(n_cols_));
    for (Index j = 0; j < n_cols_; ++j)
        for (Index i : column_support(j))
            if (new_row[static_cast<std::size_t>(i)] >= 0) cols[static_cast<std::size_t>(j)].push_back(new_row[static_cast<std::size_t>(i)]);
    return sparse_binary(static_cast<Index>(keep.size()), std::move(cols), labels_);
}

DesignMatrix DesignMatrix::select_columns(std::span<const Index> keep) const
{
    std::vector<std::string> labels;
    for (Index j : keep) labels.push_back(labels_[static_cast<std::size_t>(j)]);
    if (!is_sparse()) {
        Matrix sub(n_rows_, static_cast<Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) sub.col(static_cast<Index>(k)) = dense_.col(keep[k]);
        return from_dense(std::move(sub), std::move(labels));
    }
    std::vector<std::vector<Index>> cols;
    for (Index j : keep) {
        auto s = column_support(j);
        cols.emplace_back(s.begin(), s.end());
    }
    return sparse_binary(n_rows_, std::move(cols), std::move(labels));
}

// --- builders ----------------------------------------------------------------

namespace {

std::string level_label(const Factor& f, int level) { return f.name + "=" + std::to_string(level + 1); }

// All k-subsets of {0..r-1} in lexicographic order.
std::vector<std::vector<int>> subsets_of_size(int r, int k)
{
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    auto rec = [&](auto&& self, int start) -> void {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int f = start; f < r; ++f) {
            cur.push_back(f);
            self(self, f + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

// Enumerates level tuples for the given factors, last fastest; `first` is the
// lowest level used (1 for reference coding, 0 for full indicators).
template <class F>
void for_each_level_tuple(const TableSchema& s, const std::vector<int>& fs, int first, F&& f)
{
    std::vector<int> lv(fs.size(), first);
    while (true) {
        f(lv);
        std::size_t k = fs.size();
        while (k-- > 0) {
            if (++lv[k] < s.factors[static_cast<std::size_t>(fs[k])].levels) break;
            lv[k] = first;
            if (k == 0) return;
        }
        if (fs.empty()) return;
    }
}

struct ColumnSpec {
    std::vector<int> factors;
    std::vector<int> levels;
};

DesignMatrix assemble(const TableSchema& schema, const std::vector<ColumnSpec>& specs, Index n_cells)
{
    // Map every (factor subset, level tuple) column to its index so cells can be
    // scanned once and scattered into columns.
    std::vector<std::vector<Index>> cols(specs.size() + 1);
    std::vector<std::string> labels;
    labels.reserve(specs.size() + 1);
    labels.emplace_back("(Intercept)");
    for (const auto& c : specs) {
        std::string lab;
        for (std::size_t k = 0; k < c.factors.size(); ++k) {
            if (k) lab += ":";
            lab += level_label(schema.factors[static_cast<std::size_t>(c.factors[k])], c.levels[k]);
        }
        labels.push_back(std::move(lab));
    }
    cols[0].resize(static_cast<std::size_t>(n_cells));
    std::iota(cols[0].begin(), cols[0].end(), Index{0});

    // Group specs by factor subset; within a group, the column for a level
    // tuple is found through a dense lookup table.
    struct Group {
        std::vector<int> factors;
        std::vector<Index> lookup; // level tuple (mixed radix) -> column, or -1
    };
    std::vector<Group> groups;
    for (std::size_t c = 0; c < specs.size(); ++c) {
        const auto& sp = specs[c];
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.factors == sp.factors; });
        if (it == groups.end()) {
            Group g;
            g.factors = sp.factors;
            Index size = 1;
            for (int f : sp.factors) size *= schema.factors[static_cast<std::size_t>(f)].levels;
            g.lookup.assign(static_cast<std::size_t>(size), -1);
            groups.push_back(std::move(g));
            it = groups.end() - 1;
        }
        Index key = 0;
        for (std::size_t k = 0; k < sp.factors.size(); ++k)
            key = key * schema.factors[static_cast<std::size_t>(sp.factors[k])].levels + sp.levels[k];
        it->lookup[static_cast<std::size_t>(key)] = static_cast<Index>(c) + 1;
    }
    for (Index cell = 0; cell < n_cells; ++cell) {
        const auto lv = schema.cell_levels(cell);
        for (const auto& g : groups) {
            Index key = 0;
            for (int f : g.factors) key = key * schema.factors[static_cast<std::size_t>(f)].levels + lv[static_cast<std::size_t>(f)];
            const Index col = g.lookup[static_cast<std::size_t>(key)];
            if (col >= 0) cols[static_cast<std::size_t>(col)].push_back(cell);
        }
    }
    return DesignMatrix::sparse_binary(n_cells, std::move(cols), std::move(labels));
}

} // namespace

Index table_design_columns(const TableSchema& schema)
{
    schema.validate();
    const int r = static_cast<int>(schema.factors.size());
    Index p = 1;
    for (int k = 1; k <= std::min(schema.order, r); ++k)
        for (const auto& sub : subsets_of_size(r, k)) {
            Index c = 1;
            for (int f : sub) c *= schema.factors[static_cast<std::size_t>(f)].levels - 1;
            p += c;
        }
    return p;
}

DesignMatrix build_table_design(const TableSchema& schema)
{
    schema.validate();
    const Index n_cells = schema.cell_count();
    const int r = static_cast<int>(schema.factors.size());
    std::vector<ColumnSpec> specs;
    for (int k = 1; k <= std::min(schema.order, r); ++k)
        for (const auto& sub : subsets_of_size(r, k))
            for_each_level_tuple(schema, sub, 1, [&](const std::vector<int>& lv) { specs.push_back({sub, lv}); });
    return assemble(schema, specs, n_cells);
}

DesignMatrix build_raking_design(const TableSchema& schema, const std::vector<std::vector<int>>& margins)
{
    schema.validate();
    const Index n_cells = schema.cell_count();
    std::vector<std::vector<int>> seen;
    std::vector<ColumnSpec> specs;
    for (auto m : margins) {
        if (m.empty()) throw InputError("raking margin subsets must be nonempty");
        std::sort(m.begin(), m.end());
        if (std::adjacent_find(m.begin(), m.end()) != m.end()) throw InputError("raking margin repeats a factor");
        for (int f : m)
            if (f < 0 || f >= static_cast<int>(schema.factors.size())) throw InputError("raking margin names an unknown factor");
        if (std::find(seen.begin(), seen.end(), m) != seen.end()) throw InputError("duplicate raking margin subset");
        seen.push_back(m);
        for_each_level_tuple(schema, m, 0, [&](const std::vector<int>& lv) { specs.push_back({m, lv}); });
    }
    return assemble(schema, specs, n_cells);
}

} // namespace ipscale
