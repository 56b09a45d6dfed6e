#include "maxcorr/kernels.hpp"

#include <omp.h>

#include "maxcorr/error.hpp"

namespace maxcorr::kernels {
namespace {

struct GemmDims {
  std::size_t m, k, n;
};

GemmDims check_dims(Op op_a, Op op_b, const Matrix& a, const Matrix& b, const Matrix& c) {
  const std::size_t m = op_a == Op::None ? a.rows() : a.cols();
  const std::size_t ka = op_a == Op::None ? a.cols() : a.rows();
  const std::size_t kb = op_b == Op::None ? b.rows() : b.cols();
  const std::size_t n = op_b == Op::None ? b.cols() : b.rows();
  if (ka != kb || c.rows() != m || c.cols() != n)
    throw ShapeError("gemm: shape mismatch " + a.shape_str() + (op_a == Op::None ? "" : "^T") +
                     " * " + b.shape_str() + (op_b == Op::None ? "" : "^T") + " -> " +
                     c.shape_str());
  return {m, ka, n};
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void gemm_acc(Op op_a, Op op_b, const Matrix& a, const Matrix& b, Matrix& c) {
  const auto [m, k, n] = check_dims(op_a, op_b, a, b, c);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const std::size_t lda = a.cols();
  const std::size_t ldb = b.cols();
  const bool parallel = m * k * n >= kParallelThreshold && m > 1;
  const auto rows = static_cast<std::ptrdiff_t>(m);

  if (op_b == Op::None) {
    // i-p-j order keeps the innermost loop contiguous in b and c.
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      double* crow = pc + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = op_a == Op::None ? pa[i * lda + p] : pa[p * lda + i];
        if (av == 0.0) continue;
        const double* brow = pb + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
#pragma omp parallel for schedule(static) if (parallel)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        const double* brow = pb + j * ldb;
        if (op_a == Op::None) {
          const double* arow = pa + i * lda;
          for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        } else {
          for (std::size_t p = 0; p < k; ++p) s += pa[p * lda + i] * brow[p];
        }
        pc[i * n + j] += s;
      }
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  gemm_acc(Op::None, Op::None, a, b, c);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  gemm_acc(Op::None, Op::Transpose, a, b, c);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  gemm_acc(Op::Transpose, Op::None, a, b, c);
  return c;
}

namespace reference {

void gemm_acc(Op op_a, Op op_b, const Matrix& a, const Matrix& b, Matrix& c) {
  const auto [m, k, n] = check_dims(op_a, op_b, a, b, c);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = op_a == Op::None ? a(i, p) : a(p, i);
        const double bv = op_b == Op::None ? b(p, j) : b(j, p);
        s += av * bv;
      }
      c(i, j) += s;
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  reference::gemm_acc(Op::None, Op::None, a, b, c);
  return c;
}

}  // namespace reference
}  // namespace maxcorr::kernels
