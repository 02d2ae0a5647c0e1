#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "neolink/common.hpp"

namespace neolink {

// Row-major dense matrix. Used for node feature/representation blocks and
// GCN weights; everything N x N stays in SparseMatrix.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(int r, int c)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    std::span<double> row(int i) {
        return {data.data() + static_cast<std::size_t>(i) * cols,
                static_cast<std::size_t>(cols)};
    }
    std::span<const double> row(int i) const {
        return {data.data() + static_cast<std::size_t>(i) * cols,
                static_cast<std::size_t>(cols)};
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

class SparseMatrix;

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // A B
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // A^T B
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // A B^T
DenseMatrix spmm_dense(const SparseMatrix& a, const DenseMatrix& b);

}  // namespace neolink
