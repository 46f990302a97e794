#pragma once

// Dense and block-sparse kernels used by the GNN. Every kernel has a serial
// reference and an OpenMP variant; both accumulate each output element in the
// same order, so their results are bit-identical for any thread count.

#include <cstddef>
#include <string_view>
#include <vector>

#include "ropf/matrix.hpp"

namespace ropf {

struct CsrMatrix {
  std::size_t n = 0;  // square n x n
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;
};

CsrMatrix to_csr(const Matrix& dense);

namespace kernels {

enum class Backend { Serial, OpenMP };

std::string_view to_string(Backend backend);
// OpenMP when compiled in, otherwise Serial.
Backend default_backend();
bool openmp_available();
int max_threads();

// out = a * b
void matmul(Backend backend, const Matrix& a, const Matrix& b, Matrix& out);
// out = a^T * b
void matmul_tn(Backend backend, const Matrix& a, const Matrix& b, Matrix& out);
// out = a * b^T
void matmul_nt(Backend backend, const Matrix& a, const Matrix& b, Matrix& out);
// Applies adj to each consecutive block of adj.n rows of x (a batch of graphs
// stacked vertically).
void block_spmm(Backend backend, const CsrMatrix& adj, const Matrix& x, Matrix& out);
// out[j] = sum_r a(r, j)
void column_sums(Backend backend, const Matrix& a, std::vector<double>& out);

namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void block_spmm(const CsrMatrix& adj, const Matrix& x, Matrix& out);
void column_sums(const Matrix& a, std::vector<double>& out);
}  // namespace serial

namespace omp {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void block_spmm(const CsrMatrix& adj, const Matrix& x, Matrix& out);
void column_sums(const Matrix& a, std::vector<double>& out);
}  // namespace omp

}  // namespace kernels
}  // namespace ropf
