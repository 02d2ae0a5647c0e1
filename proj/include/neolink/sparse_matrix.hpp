#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "neolink/common.hpp"

namespace neolink {

struct Triplet {
    NodeId row = 0;
    NodeId col = 0;
    double value = 0.0;
};

// CSR matrix of 64-bit reals. Column indices are strictly increasing within
// each row; construction with pruning enabled leaves no explicit zeros.
// Immutable after construction, safe to read from many threads.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(NodeId rows, NodeId cols);

    // Duplicate (row, col) entries are merged by summation. Entries with
    // |value| <= tau are dropped (tau = 0 drops exact zeros only).
    static SparseMatrix from_triplets(NodeId rows, NodeId cols,
                                      std::span<const Triplet> entries,
                                      double tau = 0.0);
    static SparseMatrix identity(NodeId n);
    static SparseMatrix diagonal(std::span<const double> diag);

    // Adopts already-valid CSR arrays verbatim (explicit zeros permitted).
    // Validates shape and column ordering.
    static SparseMatrix from_csr(NodeId rows, NodeId cols,
                                 std::vector<std::int64_t> row_offsets,
                                 std::vector<NodeId> col_indices,
                                 std::vector<double> values);

    NodeId rows() const { return rows_; }
    NodeId cols() const { return cols_; }
    std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }

    const std::vector<std::int64_t>& row_offsets() const { return row_offsets_; }
    const std::vector<NodeId>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }

    std::span<const NodeId> row_cols(NodeId i) const;
    std::span<const double> row_values(NodeId i) const;

    // Zero when (i, j) is not stored.
    double at(NodeId i, NodeId j) const;

    std::vector<double> row_sums() const;
    bool is_symmetric(double tol = 0.0) const;

    // Copy with entries |v| <= tau removed.
    SparseMatrix pruned(double tau) const;

    // Row-major dense copy, rows*cols doubles. Intended for small matrices.
    std::vector<double> to_dense() const;

private:
    NodeId rows_ = 0;
    NodeId cols_ = 0;
    std::vector<std::int64_t> row_offsets_{0};
    std::vector<NodeId> col_indices_;
    std::vector<double> values_;

    friend SparseMatrix spmm(const SparseMatrix&, const SparseMatrix&, double);
    friend SparseMatrix sparse_add(const SparseMatrix&, const SparseMatrix&,
                                   double, double);
    friend SparseMatrix gcn_normalize(const SparseMatrix&);
};

// Exact CSR product A*B with entries |v| <= tau dropped afterwards.
// Sequential with a fixed per-row summation order, so results are
// reproducible bit for bit.
SparseMatrix spmm(const SparseMatrix& a, const SparseMatrix& b, double tau = 0.0);

// ca*A + cb*B with exact-zero results dropped.
SparseMatrix sparse_add(const SparseMatrix& a, const SparseMatrix& b,
                        double ca = 1.0, double cb = 1.0);

// D~^{-1/2} (A + I) D~^{-1/2} where D~ is the degree matrix of A + I.
// An isolated node ends up with a self-loop of weight 1.
SparseMatrix gcn_normalize(const SparseMatrix& a);

// Inner product of rows i and j (merge walk over sorted columns).
double row_dot(const SparseMatrix& a, NodeId i, NodeId j);

// Adjacency powers A^1..A^L and their decayed sum. Each stored power is the
// exact A^l pruned by tau, so every retained entry of `combined` is within
// tau * (1 + beta + ... + beta^{L-1}) of the exact series.
struct PowerSeries {
    int hops = 1;
    double beta = 0.0;
    double tau = 0.0;
    std::vector<SparseMatrix> matrices;  // matrices[l-1] = A^l
    SparseMatrix combined;               // sum_l beta^{l-1} A^l
};

// beta = 0 uses the 0^0 = 1 convention: combined degenerates to A.
PowerSeries power_series(const SparseMatrix& a, int hops, double beta,
                         double tau = 0.0);

// sum_l beta^{l-1} powers[l-1] with the same convention and summation order
// as power_series (also used when rebuilding cached series).
SparseMatrix combine_powers(const std::vector<SparseMatrix>& powers, double beta);

}  // namespace neolink
