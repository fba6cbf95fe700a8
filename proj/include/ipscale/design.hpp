#pragma once

#include "ipscale/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ipscale {

/// Sign pattern of a design: binary {0,1}, non-negative, or unrestricted.
enum class DesignKind { Binary, NonNegative, General };

enum class DesignStorage { SparseBinary, DenseGeneral };

const char* to_string(DesignKind kind);

struct Factor {
    std::string name;
    int levels = 0;
};

/**
 * Categorical factors of a contingency table plus the highest interaction
 * order kept in the model (1 = main effects, 2 = two-way, 3 = three-way).
 * Cells enumerate row-major over factor levels, last factor fastest.
 */
struct TableSchema {
    std::vector<Factor> factors;
    int order = 1;

    /// Throws InputError on an empty factor list, levels < 2 or order outside {1,2,3}.
    void validate() const;

    /// Product of all level counts; SizeError if it does not fit in Index.
    Index cell_count() const;

    /// Zero-based level of every factor for a cell index.
    std::vector<int> cell_levels(Index cell) const;

    /// Cell index of a zero-based level tuple.
    Index cell_index(std::span<const int> levels) const;

    Index factor_index(const std::string& name) const;
};

/**
 * N x p design matrix of a log-affine model.
 *
 * Binary designs are stored as per-column sorted row lists (with a row-wise
 * mirror for block operations); everything else is a dense Eigen matrix.
 * Construction rejects all-zero rows and columns, so R = max_i sum_j |x_ij| > 0.
 * Immutable after construction.
 */
class DesignMatrix {
public:
    DesignMatrix() = default;

    static DesignMatrix sparse_binary(Index n_rows,
                                      std::vector<std::vector<Index>> columns,
                                      std::vector<std::string> labels = {});

    /// Infers the kind from the entries; {0,1}-valued matrices are stored sparse.
    static DesignMatrix from_dense(Matrix values, std::vector<std::string> labels = {});

    Index rows() const { return n_rows_; }
    Index cols() const { return n_cols_; }
    DesignKind kind() const { return kind_; }
    DesignStorage storage() const { return storage_; }
    bool is_sparse() const { return storage_ == DesignStorage::SparseBinary; }

    /// R = ||X||_inf.
    Scalar row_sum_max() const { return row_sum_max_; }
    /// Signed row sums x_{i+}.
    const Vector& row_sums() const { return row_sums_; }
    const std::vector<std::string>& column_labels() const { return labels_; }
    Index nonzeros() const { return nnz_; }

    /// Column 0 is identically one.
    bool has_intercept() const { return has_intercept_; }

    Scalar entry(Index i, Index j) const;

    /// <x_j, v>.
    Scalar dot_column(Index j, const Vector& v) const;
    /// <x_j^p, v> and <x_j^n, v> with x^p = max(x,0), x^n = max(-x,0).
    Scalar dot_column_positive(Index j, const Vector& v) const;
    Scalar dot_column_negative(Index j, const Vector& v) const;

    /// X^T v
    Vector transpose_times(const Vector& v) const;
    /// X beta
    Vector times(const Vector& beta) const;
    /// out += a * x_j
    void add_column(Index j, Scalar a, Vector& out) const;

    /// Row indices of column j (sparse storage only).
    std::span<const Index> column_support(Index j) const;
    /// Column indices of row i (sparse storage only).
    std::span<const Index> row_support(Index i) const;

    /// Calls f(row, value) for each nonzero of column j.
    template <class F>
    void for_each_in_column(Index j, F&& f) const
    {
        if (is_sparse()) {
            for (Index i : column_support(j)) f(i, Scalar(1));
        } else {
            for (Index i = 0; i < n_rows_; ++i) {
                const Scalar x = dense_(i, j);
                if (x != 0) f(i, x);
            }
        }
    }

    /// X_G^T diag(w) X_G for a column subset G.
    Matrix block_gram(std::span<const Index> block, const Vector& w) const;
    /// X_G^T v
    Vector block_transpose_times(std::span<const Index> block, const Vector& v) const;
    /// X_G delta (length N)
    Vector block_times(std::span<const Index> block, const Vector& delta) const;
    /// Row sums restricted to the block, x_{i+,G}.
    Vector block_row_sums(std::span<const Index> block) const;

    Matrix to_dense() const;

    /// Keeps the listed rows in order. Throws ContractError if a column becomes zero.
    DesignMatrix select_rows(std::span<const Index> keep) const;
    /// Keeps the listed columns in order. Throws ContractError if a row becomes zero.
    DesignMatrix select_columns(std::span<const Index> keep) const;

    /// Indices of columns that are zero on the kept rows (used by partial-table loaders).
    std::vector<Index> zero_columns_after(std::span<const Index> keep_rows) const;

private:
    void finalize();

    Index n_rows_ = 0;
    Index n_cols_ = 0;
    DesignKind kind_ = DesignKind::Binary;
    DesignStorage storage_ = DesignStorage::SparseBinary;
    // sparse: CSC and CSR index arrays
    std::vector<Index> col_ptr_, row_idx_, row_ptr_, col_idx_;
    Matrix dense_;
    Vector row_sums_;
    Scalar row_sum_max_ = 0;
    Index nnz_ = 0;
    bool has_intercept_ = false;
    std::vector<std::string> labels_;
};

/// <x_j, v>
inline Scalar column_stats(const DesignMatrix& x, Index j, const Vector& v) { return x.dot_column(j, v); }

/**
 * Intercept, then reference-coded main effects (levels 2..m_k), then products
 * of dummies for every factor pair (and triple when order = 3). Columns are
 * ordered by factor tuple, then level tuple with the last factor fastest.
 */
DesignMatrix build_table_design(const TableSchema& schema);

/// Closed-form column count of build_table_design.
Index table_design_columns(const TableSchema& schema);

/**
 * Intercept plus one indicator column per cell of each requested margin
 * (full coding, no reference level), so x_j^T mu is that margin cell of mu.
 * Margins are lists of factor indices.
 */
DesignMatrix build_raking_design(const TableSchema& schema, const std::vector<std::vector<int>>& margins);

// --- file formats -----------------------------------------------------------

/// Writes `row,col,value` triplets (0-based) with a header line.
void write_design_triplets(std::ostream& out, const DesignMatrix& x);
/// Reads the triplet CSV. Dimensions are 1 + the largest indices unless given.
DesignMatrix read_design_triplets(std::istream& in, Index n_rows = -1, Index n_cols = -1);

/// {"factors":[{"name":..,"levels":..}],"order":..}
TableSchema parse_schema_json(const std::string& text);
std::string schema_to_json(const TableSchema& schema);

} // namespace ipscale
