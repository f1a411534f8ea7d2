#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "labelgcn/dense.hpp"

namespace labelgcn {

using Edge = std::pair<std::size_t, std::size_t>;

/// Compressed-sparse-row matrix in canonical form: column indices are
/// strictly increasing within each row and every stored value is finite.
class SparseMatrix {
public:
    SparseMatrix() = default;

    /// Validates and adopts raw CSR arrays. Throws DataError if the arrays
    /// are not in canonical form.
    SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices, std::vector<double> values);

    static SparseMatrix identity(std::size_t n);
    static SparseMatrix zeros(std::size_t rows, std::size_t cols);
    /// Keeps every non-zero entry of `dense`.
    static SparseMatrix from_dense(const DenseMatrix& dense);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
    std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<const std::size_t> row_cols(std::size_t r) const noexcept {
        return {col_indices_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
    }
    std::span<const double> row_values(std::size_t r) const noexcept {
        return {values_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
    }

    /// Stored value at (r, c), or 0 when absent. O(log row length).
    double at(std::size_t r, std::size_t c) const noexcept;

    DenseMatrix to_dense() const;
    bool is_symmetric() const;

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
};

/// The trailing input columns that hold label features. An empty mask is
/// allowed and turns masked propagation into plain propagation.
class LabelColumnMask {
public:
    LabelColumnMask() = default;
    /// Throws DimensionError on duplicates or indices >= n_cols.
    LabelColumnMask(std::vector<std::size_t> label_cols, std::size_t n_cols);

    /// Mask covering the `count` last columns of an `n_cols` wide matrix.
    static LabelColumnMask trailing(std::size_t n_cols, std::size_t count);

    std::span<const std::size_t> columns() const noexcept { return cols_; }
    bool empty() const noexcept { return cols_.empty(); }
    std::size_t size() const noexcept { return cols_.size(); }
    bool contains(std::size_t c) const noexcept;
    /// Per-column flags for a matrix of width n_cols.
    std::vector<char> flags(std::size_t n_cols) const;

    friend bool operator==(const LabelColumnMask&, const LabelColumnMask&) = default;

private:
    std::vector<std::size_t> cols_;
};

/// Symmetric binary adjacency with zero diagonal. Self-pairs are dropped and
/// duplicate or reversed pairs are coalesced. Throws DataError naming the
/// first edge with an endpoint >= n.
SparseMatrix build_adjacency(std::span<const Edge> edges, std::size_t n);

/// D^{-1/2} (A + I) D^{-1/2} with D the row sums of A + I.
SparseMatrix normalize_adjacency(const SparseMatrix& adjacency);

/// m * x
DenseMatrix spmm(const SparseMatrix& m, const DenseMatrix& x);
/// m^T * x
DenseMatrix spmm_transpose(const SparseMatrix& m, const DenseMatrix& x);

/// Graph convolution aggregate with the self-loop removed on label columns:
/// non-label columns equal spmm(ahat, x); on label columns the diagonal
/// entry of ahat is left out of the row sum.
DenseMatrix propagate_masked(const SparseMatrix& ahat, const DenseMatrix& x, const LabelColumnMask& mask);

/// Adjoint of propagate_masked: maps dL/dP to dL/dX.
DenseMatrix propagate_masked_adjoint(const SparseMatrix& ahat, const DenseMatrix& grad,
                                     const LabelColumnMask& mask);

}  // namespace labelgcn
