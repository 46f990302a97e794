// OpenMP kernels. Work is split over output rows (or output columns) only, so
// each output element is accumulated by one thread in the serial order.

#include <stdexcept>

#include "ropf/kernels.hpp"

namespace ropf::kernels::omp {

namespace {
using Index = long long;
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  out.resize(a.rows(), b.cols());
  const std::size_t n = b.cols();
  const Index rows = static_cast<Index>(a.rows());
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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
  const Index cols = static_cast<Index>(a.cols());
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < cols; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* o = out.data() + i * n;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double ari = a(r, i);
      const double* brow = b.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * brow[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: column counts differ");
  out.resize(a.rows(), b.rows());
  const Matrix bt = transposed(b);
  const std::size_t n = bt.cols();
  const Index rows = static_cast<Index>(a.rows());
#pragma omp parallel for schedule(static)
  for (Index ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
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
  const Index rows = static_cast<Index>(x.rows());
#pragma omp parallel for schedule(static)
  for (Index rr = 0; rr < rows; ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    const std::size_t offset = r - r % adj.n;
    const std::size_t i = r % adj.n;
    double* o = out.data() + r * d;
    for (std::size_t p = adj.row_ptr[i]; p < adj.row_ptr[i + 1]; ++p) {
      const double w = adj.val[p];
      const double* xrow = x.data() + (offset + adj.col[p]) * d;
      for (std::size_t j = 0; j < d; ++j) o[j] += w * xrow[j];
    }
  }
}

void column_sums(const Matrix& a, std::vector<double>& out) {
  out.assign(a.cols(), 0.0);
  const Index cols = static_cast<Index>(a.cols());
#pragma omp parallel for schedule(static)
  for (Index jj = 0; jj < cols; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, j);
    out[j] = s;
  }
}

}  // namespace ropf::kernels::omp
