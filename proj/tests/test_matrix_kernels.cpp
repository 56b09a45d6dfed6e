#include <doctest.h>

#include <random>

#include "maxcorr/error.hpp"
#include "maxcorr/kernels.hpp"
#include "oracles.hpp"

using maxcorr::Matrix;
namespace k = maxcorr::kernels;

TEST_CASE("matrix basics") {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(m.transposed()(2, 1) == 6);
  CHECK(m.shape_str() == "2x3");
  CHECK(Matrix::identity(3)(1, 1) == 1.0);
  CHECK(Matrix::identity(3)(0, 1) == 0.0);
  CHECK(maxcorr::all_finite(m));
  m(0, 0) = std::nan("");
  CHECK_FALSE(maxcorr::all_finite(m));
}

TEST_CASE("kernels match the naive product for every transpose combination") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    // Include sizes above the parallel threshold.
    const std::size_t m = 3 + trial * 7, n = 2 + trial * 5, p = 4 + trial * 3;
    const Matrix a = oracle::random_matrix(m, p, rng), b = oracle::random_matrix(p, n, rng);
    const Matrix want = oracle::naive_matmul(a, b);
    CHECK(oracle::max_abs_diff(k::matmul(a, b), want) < 1e-10);
    CHECK(oracle::max_abs_diff(k::matmul_nt(a, b.transposed()), want) < 1e-10);
    CHECK(oracle::max_abs_diff(k::matmul_tn(a.transposed(), b), want) < 1e-10);
    CHECK(oracle::max_abs_diff(k::reference::matmul(a, b), want) < 1e-10);

    Matrix acc(m, n, 1.0), ref(m, n, 1.0);
    k::gemm_acc(k::Op::Transpose, k::Op::Transpose, a.transposed(), b.transposed(), acc);
    k::reference::gemm_acc(k::Op::Transpose, k::Op::Transpose, a.transposed(), b.transposed(), ref);
    CHECK(oracle::max_abs_diff(acc, ref) < 1e-10);
  }
}

TEST_CASE("parallel kernel is bitwise identical to itself across thread counts") {
  std::mt19937_64 rng(3);
  const Matrix a = oracle::random_matrix(300, 200, rng), b = oracle::random_matrix(200, 64, rng);
  const Matrix first = k::matmul(a, b);
  for (int rep = 0; rep < 3; ++rep) CHECK(k::matmul(a, b) == first);
}

TEST_CASE("kernels reject mismatched shapes") {
  CHECK_THROWS_AS(k::matmul(Matrix(2, 3), Matrix(4, 2)), maxcorr::ShapeError);
  Matrix c(2, 5);
  CHECK_THROWS_AS(k::gemm_acc(k::Op::None, k::Op::None, Matrix(2, 3), Matrix(3, 2), c),
                  maxcorr::ShapeError);
}
