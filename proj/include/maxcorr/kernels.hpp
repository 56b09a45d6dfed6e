#pragma once

#include "maxcorr/matrix.hpp"

// Dense GEMM kernels. The OpenMP versions split work over output rows only,
// so each output element is accumulated by a single thread in a fixed order
// and results do not depend on the thread count.
namespace maxcorr::kernels {

enum class Op { None, Transpose };

/// c += op(a) * op(b)
void gemm_acc(Op op_a, Op op_b, const Matrix& a, const Matrix& b, Matrix& c);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b

/// Work (rows*inner*cols) below which the kernels stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

int max_threads();

namespace reference {

// Plain triple loops, kept as the test/benchmark baseline for the kernels above.
void gemm_acc(Op op_a, Op op_b, const Matrix& a, const Matrix& b, Matrix& c);
Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace reference

}  // namespace maxcorr::kernels
