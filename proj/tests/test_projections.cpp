#include <doctest.h>

#include <random>

#include "maxcorr/error.hpp"
#include "maxcorr/projections.hpp"
#include "oracles.hpp"

using maxcorr::Matrix;
using maxcorr::ParamBinder;
using maxcorr::ParameterStore;
using maxcorr::ProjectionBank;
using maxcorr::ProjectionSpec;
namespace ad = maxcorr::ad;

TEST_CASE("covariance matches the loop oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix z = oracle::center(oracle::random_matrix(3 + trial % 9, 1 + trial % 6, rng));
    ad::Tape tape(false);
    const auto c = maxcorr::covariance(tape.constant(z));
    CHECK(oracle::max_abs_diff(c.value(), oracle::covariance(z)) < 1e-9);
  }
  ad::Tape tape(false);
  CHECK_THROWS_AS(maxcorr::covariance(tape.constant(Matrix(1, 3))), maxcorr::Error);
}

TEST_CASE("sHGR loss matches the loop oracle and is symmetric in modality order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + trial % 3, n = 4 + trial % 5, d = 2 + trial % 4;
    std::vector<Matrix> zs;
    for (std::size_t i = 0; i < k; ++i) zs.push_back(oracle::center(oracle::random_matrix(n, d, rng)));
    ad::Tape tape(false);
    maxcorr::ProjectedBatch pb;
    for (const auto& z : zs) pb.z.push_back(tape.constant(z));
    const double got = maxcorr::shgr_loss(pb).value()(0, 0);
    CHECK(got == doctest::Approx(oracle::shgr(zs)).epsilon(1e-10));
    std::reverse(pb.z.begin(), pb.z.end());
    CHECK(maxcorr::shgr_loss(pb).value()(0, 0) == doctest::Approx(got).epsilon(1e-12));
  }
  ad::Tape tape(false);
  maxcorr::ProjectedBatch single;
  single.z.push_back(tape.constant(Matrix(4, 2)));
  CHECK_THROWS_AS(maxcorr::shgr_loss(single), maxcorr::Error);
}

TEST_CASE("identical modalities give the closed-form sHGR value") {
  // With Z_l = Z_m = Z: -(Tr(Cov) - Tr(Cov^2)/2).
  std::mt19937_64 rng(9);
  const Matrix z = oracle::center(oracle::random_matrix(8, 3, rng));
  const Matrix c = oracle::covariance(z);
  double tr = 0, tr2 = 0;
  for (std::size_t a = 0; a < 3; ++a) {
    tr += c(a, a);
    for (std::size_t b = 0; b < 3; ++b) tr2 += c(a, b) * c(b, a);
  }
  ad::Tape tape(false);
  maxcorr::ProjectedBatch pb;
  pb.z = {tape.constant(z), tape.constant(z)};
  CHECK(maxcorr::shgr_loss(pb).value()(0, 0) == doctest::Approx(-(tr - 0.5 * tr2)).epsilon(1e-12));
}

TEST_CASE("projection bank shapes, names and centering") {
  ProjectionBank bank(ProjectionSpec{{4, 7}, 32, 16, 0.01});
  ParameterStore store;
  std::mt19937_64 rng(1);
  bank.init_parameters(store, rng);
  CHECK(store.names().size() == 12);
  CHECK(store.at("proj.1.fc1.weight").rows() == 7);
  CHECK(store.at("proj.1.fc3.weight").cols() == 16);
  CHECK(ProjectionBank::is_projection_param("proj.0.fc2.bias"));
  CHECK_FALSE(ProjectionBank::is_projection_param("graph.S"));

  const std::vector<Matrix> inputs{oracle::random_matrix(6, 4, rng), oracle::random_matrix(6, 7, rng)};
  ad::Tape tape(false);
  ParamBinder binder(tape, store);
  const auto pb = maxcorr::project(bank, binder, inputs);
  REQUIRE(pb.z.size() == 2);
  for (const auto& z : pb.z) {
    CHECK(z.rows() == 6);
    CHECK(z.cols() == 16);
    for (std::size_t c = 0; c < 16; ++c) {
      double s = 0;
      for (std::size_t r = 0; r < 6; ++r) s += z.value()(r, c);
      CHECK(std::fabs(s) < 1e-12);
    }
  }
  // Stored means replace batch means.
  const auto stored = maxcorr::project(bank, binder, inputs, &pb.means);
  CHECK(oracle::max_abs_diff(stored.z[0].value(), pb.z[0].value()) < 1e-12);
  std::vector<Matrix> zero_means{Matrix(1, 16), Matrix(1, 16)};
  const auto raw = maxcorr::project(bank, binder, inputs, &zero_means);
  CHECK(oracle::max_abs_diff(raw.z[1].value(), bank.forward(binder, 1, tape.constant(inputs[1])).value()) <
        1e-12);

  const std::vector<Matrix> wrong{oracle::random_matrix(6, 4, rng), oracle::random_matrix(6, 8, rng)};
  try {
    maxcorr::project(bank, binder, wrong);
    FAIL("expected ShapeError");
  } catch (const maxcorr::ShapeError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("sHGR gradient through the projection networks matches finite differences") {
  ProjectionBank bank(ProjectionSpec{{3, 4}, 5, 4, 0.01});
  ParameterStore store;
  std::mt19937_64 rng(21);
  bank.init_parameters(store, rng);
  const std::vector<Matrix> inputs{oracle::random_matrix(7, 3, rng), oracle::random_matrix(7, 4, rng)};
  const auto res = oracle::check_gradients(store, [&](ParamBinder& p) {
    return maxcorr::shgr_loss(maxcorr::project(bank, p, inputs));
  });
  INFO(res.worst_param);
  CHECK(res.worst_rel < 1e-4);
}
