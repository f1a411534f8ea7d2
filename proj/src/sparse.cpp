#include "labelgcn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "labelgcn/error.hpp"

namespace labelgcn {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
    if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 ||
        row_offsets_.back() != values_.size() || col_indices_.size() != values_.size()) {
        throw DataError("csr: offsets inconsistent with stored entries");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
        if (row_offsets_[r] > row_offsets_[r + 1]) throw DataError("csr: decreasing row offsets");
        for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
            if (col_indices_[k] >= cols_) throw DataError("csr: column index out of range in row " + std::to_string(r));
            if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
                throw DataError("csr: columns not strictly increasing in row " + std::to_string(r));
            }
            if (!std::isfinite(values_[k])) throw DataError("csr: non-finite value in row " + std::to_string(r));
        }
    }
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<std::size_t> offsets(n + 1);
    std::vector<std::size_t> cols(n);
    for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
    for (std::size_t i = 0; i < n; ++i) cols[i] = i;
    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::zeros(std::size_t rows, std::size_t cols) {
    return SparseMatrix(rows, cols, std::vector<std::size_t>(rows + 1, 0), {}, {});
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    offsets.reserve(dense.rows() + 1);
    for (std::size_t r = 0; r < dense.rows(); ++r) {
        for (std::size_t c = 0; c < dense.cols(); ++c) {
            const double v = dense(r, c);
            if (v != 0.0) {
                cols.push_back(c);
                vals.push_back(v);
            }
        }
        offsets.push_back(vals.size());
    }
    return SparseMatrix(dense.rows(), dense.cols(), std::move(offsets), std::move(cols), std::move(vals));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const noexcept {
    const auto cs = row_cols(r);
    const auto it = std::lower_bound(cs.begin(), cs.end(), c);
    if (it == cs.end() || *it != c) return 0.0;
    return values_[row_offsets_[r] + static_cast<std::size_t>(it - cs.begin())];
}

DenseMatrix SparseMatrix::to_dense() const {
    DenseMatrix out(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) out(r, col_indices_[k]) = values_[k];
    }
    return out;
}

bool SparseMatrix::is_symmetric() const {
    if (rows_ != cols_) return false;
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
            if (at(col_indices_[k], r) != values_[k]) return false;
        }
    }
    return true;
}

LabelColumnMask::LabelColumnMask(std::vector<std::size_t> label_cols, std::size_t n_cols)
    : cols_(std::move(label_cols)) {
    std::vector<std::size_t> sorted = cols_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw DimensionError("label mask: duplicate column");
    }
    if (!sorted.empty() && sorted.back() >= n_cols) {
        throw DimensionError("label mask: column " + std::to_string(sorted.back()) + " outside width " +
                             std::to_string(n_cols));
    }
}

LabelColumnMask LabelColumnMask::trailing(std::size_t n_cols, std::size_t count) {
    if (count > n_cols) throw DimensionError("label mask: more label columns than columns");
    std::vector<std::size_t> cols(count);
    for (std::size_t k = 0; k < count; ++k) cols[k] = n_cols - count + k;
    return LabelColumnMask(std::move(cols), n_cols);
}

bool LabelColumnMask::contains(std::size_t c) const noexcept {
    return std::find(cols_.begin(), cols_.end(), c) != cols_.end();
}

std::vector<char> LabelColumnMask::flags(std::size_t n_cols) const {
    std::vector<char> f(n_cols, 0);
    for (std::size_t c : cols_) {
        if (c >= n_cols) throw DimensionError("label mask: column outside matrix width");
        f[c] = 1;
    }
    return f;
}

SparseMatrix build_adjacency(std::span<const Edge> edges, std::size_t n) {
    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
        if (u >= n || v >= n) {
            throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") references a node >= " +
                            std::to_string(n));
        }
        if (u == v) continue;
        directed.emplace_back(u, v);
        directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<std::size_t> cols;
    cols.reserve(directed.size());
    for (const auto& [u, v] : directed) {
        ++offsets[u + 1];
        cols.push_back(v);
    }
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    std::vector<double> vals(cols.size(), 1.0);
    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
}

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency) {
    if (adjacency.rows() != adjacency.cols()) throw DimensionError("normalize_adjacency: matrix not square");
    const std::size_t n = adjacency.rows();
    std::vector<double> degree(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : adjacency.row_values(i)) degree[i] += v;
    }

    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    offsets.reserve(n + 1);
    cols.reserve(adjacency.nnz() + n);
    vals.reserve(adjacency.nnz() + n);
    // 1/sqrt(d_i d_j) is computed from a commutative product, so the result
    // is exactly symmetric.
    auto emit = [&](std::size_t i, std::size_t j, double a) {
        cols.push_back(j);
        vals.push_back(a / std::sqrt(degree[i] * degree[j]));
    };
    for (std::size_t i = 0; i < n; ++i) {
        const auto rc = adjacency.row_cols(i);
        const auto rv = adjacency.row_values(i);
        bool diag_done = false;
        for (std::size_t k = 0; k < rc.size(); ++k) {
            const std::size_t j = rc[k];
            if (j == i) {
                emit(i, i, rv[k] + 1.0);
                diag_done = true;
                continue;
            }
            if (!diag_done && j > i) {
                emit(i, i, 1.0);
                diag_done = true;
            }
            emit(i, j, rv[k]);
        }
        if (!diag_done) emit(i, i, 1.0);
        offsets.push_back(vals.size());
    }
    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
}

namespace {

// Shared kernel for the four propagation routines. With skip_self set, the
// diagonal entry of m is left out of the sum for flagged columns.
DenseMatrix propagate(const SparseMatrix& m, const DenseMatrix& x, bool transpose, const std::vector<char>* skip_self) {
    const std::size_t in_rows = transpose ? m.rows() : m.cols();
    const std::size_t out_rows = transpose ? m.cols() : m.rows();
    if (x.rows() != in_rows) {
        throw DimensionError("propagate: operand has " + std::to_string(x.rows()) + " rows, expected " +
                             std::to_string(in_rows));
    }
    const std::size_t width = x.cols();
    DenseMatrix out(out_rows, width);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto rc = m.row_cols(r);
        const auto rv = m.row_values(r);
        for (std::size_t k = 0; k < rc.size(); ++k) {
            const std::size_t c = rc[k];
            const double a = rv[k];
            const std::size_t src = transpose ? r : c;
            const std::size_t dst = transpose ? c : r;
            const double* xs = x.row(src).data();
            double* o = out.row(dst).data();
            if (skip_self != nullptr && r == c) {
                const char* skip = skip_self->data();
                for (std::size_t j = 0; j < width; ++j) {
                    if (!skip[j]) o[j] += a * xs[j];
                }
            } else {
                for (std::size_t j = 0; j < width; ++j) o[j] += a * xs[j];
            }
        }
    }
    return out;
}

}  // namespace

DenseMatrix spmm(const SparseMatrix& m, const DenseMatrix& x) { return propagate(m, x, false, nullptr); }

DenseMatrix spmm_transpose(const SparseMatrix& m, const DenseMatrix& x) { return propagate(m, x, true, nullptr); }

DenseMatrix propagate_masked(const SparseMatrix& ahat, const DenseMatrix& x, const LabelColumnMask& mask) {
    if (ahat.rows() != ahat.cols()) throw DimensionError("propagate_masked: adjacency not square");
    if (mask.empty()) return spmm(ahat, x);
    const auto flags = mask.flags(x.cols());
    return propagate(ahat, x, false, &flags);
}

DenseMatrix propagate_masked_adjoint(const SparseMatrix& ahat, const DenseMatrix& grad, const LabelColumnMask& mask) {
    if (ahat.rows() != ahat.cols()) throw DimensionError("propagate_masked_adjoint: adjacency not square");
    if (mask.empty()) return spmm_transpose(ahat, grad);
    const auto flags = mask.flags(grad.cols());
    return propagate(ahat, grad, true, &flags);
}

}  // namespace labelgcn
