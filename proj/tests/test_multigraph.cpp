#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "maxcorr/error.hpp"
#include "maxcorr/multigraph.hpp"
#include "oracles.hpp"

using maxcorr::Matrix;
namespace ad = maxcorr::ad;

namespace {

struct Instance {
  std::vector<Matrix> zs;
  Matrix s;
};

Instance random_instance(std::mt19937_64& rng, std::size_t p, std::size_t k, std::size_t d) {
  Instance in;
  for (std::size_t i = 0; i < k; ++i) in.zs.push_back(oracle::random_matrix(p, d, rng));
  in.s = oracle::random_matrix(k, k, rng, 2.0);
  return in;
}

maxcorr::ProjectedBatch as_batch(ad::Tape& tape, const std::vector<Matrix>& zs) {
  maxcorr::ProjectedBatch pb;
  for (const auto& z : zs) pb.z.push_back(tape.constant(z));
  return pb;
}

}  // namespace

TEST_CASE("pairwise rho and soft thresholds match loop oracles") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, 2 + trial % 7, 2, 1 + trial % 5);
    ad::Tape tape(false);
    const auto r = maxcorr::pairwise_rho(tape.constant(in.zs[0]), tape.constant(in.zs[1]));
    CHECK(oracle::max_abs_diff(r.value(), oracle::rho(in.zs[0], in.zs[1])) < 1e-9);
    const auto t = maxcorr::soft_thresholds(tape.constant(in.s));
    CHECK(oracle::max_abs_diff(t.value(), oracle::soft_thresholds(in.s)) < 1e-12);
    CHECK(t.value() == t.value().transposed());
  }
}

TEST_CASE("assembled supra matrices match the dense oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 2 + trial % 6, k = 2 + trial % 3;
    auto in = random_instance(rng, p, k, 3);
    in.s = oracle::random_matrix(k, k, rng, 0.5);
    for (double& v : in.s.flat()) v -= 2.0;  // low thresholds, dense graphs
    ad::Tape tape(false);
    const auto pb = as_batch(tape, in.zs);
    const auto s_tilde = maxcorr::soft_thresholds(tape.constant(in.s));
    const auto supra = maxcorr::assemble_supra(maxcorr::build_multigraph(pb, s_tilde));
    const auto want = oracle::supra(in.zs, oracle::soft_thresholds(in.s));
    CHECK(oracle::max_abs_diff(supra.a_supra.value(), want.a) < 1e-9);
    CHECK(oracle::max_abs_diff(supra.c_supra.value(), want.c) < 1e-9);
    CHECK(oracle::max_abs_diff(supra.walk_ac.value(), want.ac) < 1e-9);
    CHECK(oracle::max_abs_diff(supra.walk_ca.value(), want.ca) < 1e-9);
  }
}

TEST_CASE("structural invariants hold on random instances") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> pd(1, 12), kd(1, 4);
    const std::size_t p = pd(rng), k = kd(rng);
    const auto in = random_instance(rng, p, k, 4);
    ad::Tape tape(false);
    const auto s_tilde = maxcorr::soft_thresholds(tape.constant(in.s));
    const auto mg = maxcorr::build_multigraph(as_batch(tape, in.zs), s_tilde);
    const auto supra = maxcorr::assemble_supra(mg);
    const Matrix& a = supra.a_supra.value();
    const Matrix& c = supra.c_supra.value();
    for (std::size_t i = 0; i < p * k; ++i)
      for (std::size_t j = 0; j < p * k; ++j) {
        const bool same_plane = i / p == j / p;
        if (!same_plane) CHECK(a(i, j) == 0.0);
        if (same_plane) CHECK(c(i, j) == (i == j ? 1.0 : 0.0));
        CHECK(a(i, j) >= 0.0);
        CHECK(a(i, j) <= 1.0);
        CHECK(c(i, j) >= 0.0);
        CHECK(c(i, j) <= 1.0);
      }
    // In-plane blocks are symmetric since |cos| is.
    CHECK(oracle::max_abs_diff(a, a.transposed()) < 1e-15);
  }
}

TEST_CASE("raising thresholds never adds edges") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = random_instance(rng, 6, 3, 4);
    ad::Tape tape(false);
    const auto pb = as_batch(tape, in.zs);
    const auto s_tilde = maxcorr::soft_thresholds(tape.constant(in.s));
    Matrix prev;
    for (double off : {-1.0, -0.3, 0.0, 0.2, 0.5}) {
      const auto cur = maxcorr::assemble_supra(maxcorr::build_multigraph(pb, s_tilde, off));
      Matrix total = cur.a_supra.value();
      for (std::size_t i = 0; i < total.rows(); ++i)
        for (std::size_t j = 0; j < total.cols(); ++j) total(i, j) += cur.c_supra.value()(i, j);
      if (prev.rows() > 0)
        for (std::size_t i = 0; i < total.rows(); ++i)
          for (std::size_t j = 0; j < total.cols(); ++j) CHECK(total(i, j) <= prev(i, j));
      prev = total;
    }
  }
}

TEST_CASE("patient permutation permutes the supra matrices") {
  std::mt19937_64 rng(4);
  const std::size_t p = 5, k = 3;
  auto in = random_instance(rng, p, k, 4);
  for (double& v : in.s.flat()) v -= 3.0;
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Matrix> permuted;
  for (const auto& z : in.zs) {
    Matrix pz(p, z.cols());
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t c = 0; c < z.cols(); ++c) pz(i, c) = z(perm[i], c);
    permuted.push_back(pz);
  }
  ad::Tape tape(false);
  const auto s_tilde = maxcorr::soft_thresholds(tape.constant(in.s));
  const auto base = maxcorr::assemble_supra(maxcorr::build_multigraph(as_batch(tape, in.zs), s_tilde));
  const auto moved = maxcorr::assemble_supra(maxcorr::build_multigraph(as_batch(tape, permuted), s_tilde));
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t m = 0; m < k; ++m)
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
          CHECK(moved.walk_ac.value()(l * p + i, m * p + j) ==
                doctest::Approx(base.walk_ac.value()(l * p + perm[i], m * p + perm[j])));
}

TEST_CASE("induced subgraph restricts blocks and recomputes walks") {
  std::mt19937_64 rng(6);
  auto in = random_instance(rng, 6, 2, 3);
  for (double& v : in.s.flat()) v -= 3.0;
  ad::Tape tape(false);
  const auto s_tilde = maxcorr::soft_thresholds(tape.constant(in.s));
  const auto mg = maxcorr::build_multigraph(as_batch(tape, in.zs), s_tilde);
  const std::vector<std::size_t> keep{4, 1, 2};
  const auto sub = maxcorr::induced_subgraph(maxcorr::assemble_supra(mg), keep);

  std::vector<Matrix> zs_sub;
  for (const auto& z : in.zs) {
    Matrix s(keep.size(), z.cols());
    for (std::size_t i = 0; i < keep.size(); ++i)
      for (std::size_t c = 0; c < z.cols(); ++c) s(i, c) = z(keep[i], c);
    zs_sub.push_back(s);
  }
  const auto want = oracle::supra(zs_sub, oracle::soft_thresholds(in.s));
  CHECK(oracle::max_abs_diff(sub.a_supra.value(), want.a) < 1e-12);
  CHECK(oracle::max_abs_diff(sub.walk_ca.value(), want.ca) < 1e-12);
  const auto sub_mg = maxcorr::induced_subgraph(mg, keep);
  CHECK(oracle::max_abs_diff(maxcorr::assemble_supra(sub_mg).walk_ac.value(), want.ac) < 1e-12);

  const std::vector<std::size_t> repeated{1, 1};
  const std::vector<std::size_t> outside{0, 9};
  CHECK_THROWS_AS(maxcorr::induced_subgraph(mg, repeated), maxcorr::DataError);
  CHECK_THROWS_AS(maxcorr::induced_subgraph(mg, outside), maxcorr::DataError);
}

TEST_CASE("edge list lists each nonzero edge once") {
  std::mt19937_64 rng(12);
  auto in = random_instance(rng, 4, 3, 3);
  ad::Tape tape(false);
  const auto s_tilde = maxcorr::soft_thresholds(tape.constant(in.s));
  const auto mg = maxcorr::build_multigraph(as_batch(tape, in.zs), s_tilde);
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  std::ostringstream os;
  const std::size_t n = maxcorr::write_edge_list(os, mg, ids);

  std::size_t expected = 0;
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i; j < 4; ++j) expected += mg.in_plane(l).value()(i, j) > 0 ? 1 : 0;
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t m = l + 1; m < 3; ++m)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) expected += mg.cross(l, m).value()(i, j) > 0 ? 1 : 0;
  CHECK(n == expected);
  const std::string text = os.str();
  CHECK(text.rfind("plane_l,plane_m,patient_i,patient_j,weight\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == n + 1);
}

TEST_CASE("threshold gradient matches finite differences") {
  std::mt19937_64 rng(31);
  const auto in = random_instance(rng, 4, 3, 3);
  maxcorr::ParameterStore store;
  Matrix s0 = oracle::random_matrix(3, 3, rng, 0.3);
  for (double& v : s0.flat()) v -= 2.5;  // keep edges away from the ReLU kink
  store.add(maxcorr::kThresholdParam, s0);
  const auto res = oracle::check_gradients(store, [&](maxcorr::ParamBinder& p) {
    ad::Tape& tape = p.tape();
    const auto supra = maxcorr::assemble_supra(
        maxcorr::build_multigraph(as_batch(tape, in.zs), maxcorr::soft_thresholds(p)));
    return ad::sum_all(ad::add(supra.walk_ac, supra.walk_ca));
  });
  CHECK(res.worst_rel < 1e-5);
}
