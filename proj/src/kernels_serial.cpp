// Serial reference kernels. The OpenMP versions in kernels_omp.cpp must match
// these bit for bit.

#include <stdexcept>

#include "ropf/kernels.hpp"

namespace ropf::kernels::serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  out.resize(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: row counts differ");
  out.resize(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* brow = b.data() + r * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a(r, i);
      double* o = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * brow[j];
    }
  }
}

// Accumulates over k in ascending order per output element, like a dot
// product, but in a layout the compiler can vectorize.
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: column counts differ");
  out.resize(a.rows(), b.rows());
  const Matrix bt = transposed(b);
  const std::size_t n = bt.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* btrow = bt.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * btrow[j];
    }
  }
}

void block_spmm(const CsrMatrix& adj, const Matrix& x, Matrix& out) {
  if (adj.n == 0 || x.rows() % adj.n != 0) throw std::invalid_argument("block_spmm: rows are not whole blocks");
  out.resize(x.rows(), x.cols());
  const std::size_t d = x.cols();
  const std::size_t blocks = x.rows() / adj.n;
  for (std::size_t s = 0; s < blocks; ++s) {
    const std::size_t offset = s * adj.n;
    for (std::size_t i = 0; i < adj.n; ++i) {
      double* o = out.data() + (offset + i) * d;
      for (std::size_t p = adj.row_ptr[i]; p < adj.row_ptr[i + 1]; ++p) {
        const double w = adj.val[p];
        const double* xrow = x.data() + (offset + adj.col[p]) * d;
        for (std::size_t j = 0; j < d; ++j) o[j] += w * xrow[j];
      }
    }
  }
}

void column_sums(const Matrix& a, std::vector<double>& out) {
  out.assign(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(r, j);
}

}  // namespace ropf::kernels::serial
