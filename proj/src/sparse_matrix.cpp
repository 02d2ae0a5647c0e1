#include "neolink/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace neolink {

namespace {

bool keep(double v, double tau) { return std::abs(v) > tau; }

}  // namespace

SparseMatrix::SparseMatrix(NodeId rows, NodeId cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix dimension");
    row_offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
}

SparseMatrix SparseMatrix::from_triplets(NodeId rows, NodeId cols,
                                         std::span<const Triplet> entries,
                                         double tau) {
    SparseMatrix m(rows, cols);
    for (const Triplet& t : entries) {
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
            throw std::invalid_argument("triplet index out of range");
    }
    std::vector<Triplet> sorted(entries.begin(), entries.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Triplet& a, const Triplet& b) {
                         return a.row != b.row ? a.row < b.row : a.col < b.col;
                     });
    std::vector<std::int64_t> counts(static_cast<std::size_t>(rows) + 1, 0);
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < sorted.size() && sorted[j].row == sorted[i].row &&
               sorted[j].col == sorted[i].col) {
            sum += sorted[j].value;
            ++j;
        }
        if (keep(sum, tau)) {
            m.col_indices_.push_back(sorted[i].col);
            m.values_.push_back(sum);
            ++counts[static_cast<std::size_t>(sorted[i].row) + 1];
        }
        i = j;
    }
    for (std::size_t r = 1; r < counts.size(); ++r) counts[r] += counts[r - 1];
    m.row_offsets_ = std::move(counts);
    return m;
}

SparseMatrix SparseMatrix::from_csr(NodeId rows, NodeId cols,
                                    std::vector<std::int64_t> row_offsets,
                                    std::vector<NodeId> col_indices,
                                    std::vector<double> values) {
    SparseMatrix m(rows, cols);
    if (row_offsets.size() != static_cast<std::size_t>(rows) + 1 ||
        row_offsets.front() != 0 ||
        row_offsets.back() != static_cast<std::int64_t>(values.size()) ||
        col_indices.size() != values.size())
        throw std::invalid_argument("from_csr: inconsistent array shapes");
    for (NodeId i = 0; i < rows; ++i) {
        const std::int64_t b = row_offsets[static_cast<std::size_t>(i)];
        const std::int64_t e = row_offsets[static_cast<std::size_t>(i) + 1];
        if (e < b) throw std::invalid_argument("from_csr: offsets not monotone");
        for (std::int64_t k = b; k < e; ++k) {
            const NodeId c = col_indices[static_cast<std::size_t>(k)];
            if (c < 0 || c >= cols)
                throw std::invalid_argument("from_csr: column index out of range");
            if (k > b && col_indices[static_cast<std::size_t>(k - 1)] >= c)
                throw std::invalid_argument("from_csr: columns not strictly increasing");
        }
    }
    m.row_offsets_ = std::move(row_offsets);
    m.col_indices_ = std::move(col_indices);
    m.values_ = std::move(values);
    return m;
}

SparseMatrix SparseMatrix::identity(NodeId n) {
    SparseMatrix m(n, n);
    m.col_indices_.resize(static_cast<std::size_t>(n));
    m.values_.assign(static_cast<std::size_t>(n), 1.0);
    for (NodeId i = 0; i < n; ++i) {
        m.col_indices_[static_cast<std::size_t>(i)] = i;
        m.row_offsets_[static_cast<std::size_t>(i) + 1] = i + 1;
    }
    return m;
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> diag) {
    const NodeId n = static_cast<NodeId>(diag.size());
    SparseMatrix m(n, n);
    for (NodeId i = 0; i < n; ++i) {
        const double v = diag[static_cast<std::size_t>(i)];
        if (v != 0.0) {
            m.col_indices_.push_back(i);
            m.values_.push_back(v);
        }
        m.row_offsets_[static_cast<std::size_t>(i) + 1] =
            static_cast<std::int64_t>(m.values_.size());
    }
    return m;
}

std::span<const NodeId> SparseMatrix::row_cols(NodeId i) const {
    const std::int64_t b = row_offsets_[static_cast<std::size_t>(i)];
    const std::int64_t e = row_offsets_[static_cast<std::size_t>(i) + 1];
    return {col_indices_.data() + b, static_cast<std::size_t>(e - b)};
}

std::span<const double> SparseMatrix::row_values(NodeId i) const {
    const std::int64_t b = row_offsets_[static_cast<std::size_t>(i)];
    const std::int64_t e = row_offsets_[static_cast<std::size_t>(i) + 1];
    return {values_.data() + b, static_cast<std::size_t>(e - b)};
}

double SparseMatrix::at(NodeId i, NodeId j) const {
    auto cols = row_cols(i);
    auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return row_values(i)[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> SparseMatrix::row_sums() const {
    std::vector<double> sums(static_cast<std::size_t>(rows_), 0.0);
    for (NodeId i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (double v : row_values(i)) s += v;
        sums[static_cast<std::size_t>(i)] = s;
    }
    return sums;
}

bool SparseMatrix::is_symmetric(double tol) const {
    if (rows_ != cols_) return false;
    for (NodeId i = 0; i < rows_; ++i) {
        auto cols = row_cols(i);
        auto vals = row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (std::abs(at(cols[k], i) - vals[k]) > tol) return false;
        }
    }
    return true;
}

SparseMatrix SparseMatrix::pruned(double tau) const {
    SparseMatrix m(rows_, cols_);
    for (NodeId i = 0; i < rows_; ++i) {
        auto cols = row_cols(i);
        auto vals = row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (keep(vals[k], tau)) {
                m.col_indices_.push_back(cols[k]);
                m.values_.push_back(vals[k]);
            }
        }
        m.row_offsets_[static_cast<std::size_t>(i) + 1] =
            static_cast<std::int64_t>(m.values_.size());
    }
    return m;
}

std::vector<double> SparseMatrix::to_dense() const {
    std::vector<double> dense(static_cast<std::size_t>(rows_) * cols_, 0.0);
    for (NodeId i = 0; i < rows_; ++i) {
        auto cols = row_cols(i);
        auto vals = row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k)
            dense[static_cast<std::size_t>(i) * cols_ + cols[k]] = vals[k];
    }
    return dense;
}

SparseMatrix spmm(const SparseMatrix& a, const SparseMatrix& b, double tau) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("spmm: inner dimensions do not match");
    SparseMatrix c(a.rows(), b.cols());
    // Gustavson with a dense accumulator; per-row summation order is fixed
    // by the CSR traversal so results are deterministic.
    std::vector<double> acc(static_cast<std::size_t>(b.cols()), 0.0);
    std::vector<NodeId> touched;
    std::vector<char> seen(static_cast<std::size_t>(b.cols()), 0);
    for (NodeId i = 0; i < a.rows(); ++i) {
        touched.clear();
        auto a_cols = a.row_cols(i);
        auto a_vals = a.row_values(i);
        for (std::size_t k = 0; k < a_cols.size(); ++k) {
            const NodeId mid = a_cols[k];
            const double av = a_vals[k];
            auto b_cols = b.row_cols(mid);
            auto b_vals = b.row_values(mid);
            for (std::size_t t = 0; t < b_cols.size(); ++t) {
                const NodeId j = b_cols[t];
                if (!seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = 1;
                    touched.push_back(j);
                }
                acc[static_cast<std::size_t>(j)] += av * b_vals[t];
            }
        }
        std::sort(touched.begin(), touched.end());
        for (NodeId j : touched) {
            const double v = acc[static_cast<std::size_t>(j)];
            if (std::abs(v) > tau) {
                c.col_indices_.push_back(j);
                c.values_.push_back(v);
            }
            acc[static_cast<std::size_t>(j)] = 0.0;
            seen[static_cast<std::size_t>(j)] = 0;
        }
        c.row_offsets_[static_cast<std::size_t>(i) + 1] =
            static_cast<std::int64_t>(c.values_.size());
    }
    return c;
}

SparseMatrix sparse_add(const SparseMatrix& a, const SparseMatrix& b,
                        double ca, double cb) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("sparse_add: dimension mismatch");
    SparseMatrix c(a.rows(), a.cols());
    for (NodeId i = 0; i < a.rows(); ++i) {
        auto ac = a.row_cols(i);
        auto av = a.row_values(i);
        auto bc = b.row_cols(i);
        auto bv = b.row_values(i);
        std::size_t p = 0, q = 0;
        auto emit = [&](NodeId col, double v) {
            if (v != 0.0) {
                c.col_indices_.push_back(col);
                c.values_.push_back(v);
            }
        };
        while (p < ac.size() || q < bc.size()) {
            if (q == bc.size() || (p < ac.size() && ac[p] < bc[q])) {
                emit(ac[p], ca * av[p]);
                ++p;
            } else if (p == ac.size() || bc[q] < ac[p]) {
                emit(bc[q], cb * bv[q]);
                ++q;
            } else {
                emit(ac[p], ca * av[p] + cb * bv[q]);
                ++p;
                ++q;
            }
        }
        c.row_offsets_[static_cast<std::size_t>(i) + 1] =
            static_cast<std::int64_t>(c.values_.size());
    }
    return c;
}

SparseMatrix gcn_normalize(const SparseMatrix& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("gcn_normalize: matrix must be square");
    SparseMatrix with_loops = sparse_add(a, SparseMatrix::identity(a.rows()));
    std::vector<double> deg = with_loops.row_sums();
    std::vector<double> inv_sqrt(deg.size());
    for (std::size_t i = 0; i < deg.size(); ++i) {
        if (deg[i] <= 0.0)
            throw NumericError("gcn_normalize: non-positive degree after self-loop");
        inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
    }
    SparseMatrix out(a.rows(), a.cols());
    for (NodeId i = 0; i < with_loops.rows(); ++i) {
        auto cols = with_loops.row_cols(i);
        auto vals = with_loops.row_values(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            out.col_indices_.push_back(cols[k]);
            out.values_.push_back(inv_sqrt[static_cast<std::size_t>(i)] * vals[k] *
                                  inv_sqrt[static_cast<std::size_t>(cols[k])]);
        }
        out.row_offsets_[static_cast<std::size_t>(i) + 1] =
            static_cast<std::int64_t>(out.values_.size());
    }
    return out;
}

double row_dot(const SparseMatrix& a, NodeId i, NodeId j) {
    auto ic = a.row_cols(i);
    auto iv = a.row_values(i);
    auto jc = a.row_cols(j);
    auto jv = a.row_values(j);
    double dot = 0.0;
    std::size_t p = 0, q = 0;
    while (p < ic.size() && q < jc.size()) {
        if (ic[p] < jc[q]) {
            ++p;
        } else if (jc[q] < ic[p]) {
            ++q;
        } else {
            dot += iv[p] * jv[q];
            ++p;
            ++q;
        }
    }
    return dot;
}

PowerSeries power_series(const SparseMatrix& a, int hops, double beta, double tau) {
    if (hops < 1) throw std::invalid_argument("power_series: hops must be >= 1");
    if (beta < 0.0) throw std::invalid_argument("power_series: beta must be >= 0");
    if (tau < 0.0) throw std::invalid_argument("power_series: tau must be >= 0");
    PowerSeries series;
    series.hops = hops;
    series.beta = beta;
    series.tau = tau;
    series.matrices.reserve(static_cast<std::size_t>(hops));
    // Powers are chained exactly; only the stored copies are pruned. That
    // keeps every retained entry of `combined` within tau * sum_l beta^{l-1}
    // of the exact value instead of compounding pruning error through the
    // multiplications.
    SparseMatrix exact = a;
    series.matrices.push_back(tau > 0.0 ? exact.pruned(tau) : exact);
    for (int l = 2; l <= hops; ++l) {
        exact = spmm(exact, a);
        series.matrices.push_back(tau > 0.0 ? exact.pruned(tau) : exact);
    }
    series.combined = combine_powers(series.matrices, beta);
    return series;
}

SparseMatrix combine_powers(const std::vector<SparseMatrix>& powers, double beta) {
    if (powers.empty())
        throw std::invalid_argument("combine_powers: need at least one power");
    // 0^0 = 1: the l = 1 term always carries weight 1.
    SparseMatrix combined = powers[0];
    double weight = 1.0;
    for (std::size_t l = 2; l <= powers.size(); ++l) {
        weight *= beta;
        if (weight == 0.0) break;
        combined = sparse_add(combined, powers[l - 1], 1.0, weight);
    }
    return combined;
}

}  // namespace neolink
