#include "ropf/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ropf {

CsrMatrix to_csr(const Matrix& dense) {
  CsrMatrix csr;
  csr.n = dense.rows();
  csr.row_ptr.push_back(0);
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    for (std::size_t j = 0; j < dense.cols(); ++j) {
      if (dense(i, j) == 0.0) continue;
      csr.col.push_back(j);
      csr.val.push_back(dense(i, j));
    }
    csr.row_ptr.push_back(csr.col.size());
  }
  return csr;
}

namespace kernels {

std::string_view to_string(Backend backend) { return backend == Backend::Serial ? "serial" : "openmp"; }

bool openmp_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

Backend default_backend() { return openmp_available() ? Backend::OpenMP : Backend::Serial; }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul(Backend backend, const Matrix& a, const Matrix& b, Matrix& out) {
  backend == Backend::Serial ? serial::matmul(a, b, out) : omp::matmul(a, b, out);
}
void matmul_tn(Backend backend, const Matrix& a, const Matrix& b, Matrix& out) {
  backend == Backend::Serial ? serial::matmul_tn(a, b, out) : omp::matmul_tn(a, b, out);
}
void matmul_nt(Backend backend, const Matrix& a, const Matrix& b, Matrix& out) {
  backend == Backend::Serial ? serial::matmul_nt(a, b, out) : omp::matmul_nt(a, b, out);
}
void block_spmm(Backend backend, const CsrMatrix& adj, const Matrix& x, Matrix& out) {
  backend == Backend::Serial ? serial::block_spmm(adj, x, out) : omp::block_spmm(adj, x, out);
}
void column_sums(Backend backend, const Matrix& a, std::vector<double>& out) {
  backend == Backend::Serial ? serial::column_sums(a, out) : omp::column_sums(a, out);
}

}  // namespace kernels
}  // namespace ropf
