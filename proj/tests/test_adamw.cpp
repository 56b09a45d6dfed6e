#include <doctest.h>

#include <cmath>
#include <limits>

#include "maxcorr/adamw.hpp"
#include "maxcorr/error.hpp"

using maxcorr::AdamW;
using maxcorr::AdamWConfig;
using maxcorr::Matrix;
using maxcorr::ParameterStore;

TEST_CASE("three AdamW steps follow the decoupled recurrence") {
  AdamWConfig cfg{0.1, 0.01, 0.9, 0.999, 1e-8};
  AdamW opt(cfg);
  ParameterStore store;
  store.add("w", Matrix{{1.0, -0.5}});
  const double grads[3][2] = {{0.5, -1.0}, {0.2, 0.3}, {-0.4, 0.0}};

  double w[2] = {1.0, -0.5}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 3; ++t) {
    opt.step(store, {{"w", Matrix{{grads[t - 1][0], grads[t - 1][1]}}}});
    for (int j = 0; j < 2; ++j) {
      const double g = grads[t - 1][j];
      w[j] -= cfg.lr * cfg.weight_decay * w[j];
      m[j] = 0.9 * m[j] + 0.1 * g;
      v[j] = 0.999 * v[j] + 0.001 * g * g;
      const double mh = m[j] / (1 - std::pow(0.9, t)), vh = v[j] / (1 - std::pow(0.999, t));
      w[j] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      CHECK(store.at("w")(0, j) == doctest::Approx(w[j]).epsilon(1e-14));
    }
  }
  CHECK(opt.moments().at("w").step == 3);
}

TEST_CASE("parameters without gradients keep their values and step counts") {
  AdamW opt;
  ParameterStore store;
  store.add("a", Matrix(1, 1, 1.0));
  store.add("b", Matrix(1, 1, 1.0));
  opt.step(store, {{"a", Matrix(1, 1, 1.0)}});
  CHECK(store.at("b")(0, 0) == 1.0);
  CHECK(opt.moments().count("b") == 0);
}

TEST_CASE("a non-finite gradient aborts before any update and names the parameter") {
  AdamW opt;
  ParameterStore store;
  store.add("a", Matrix(1, 1, 1.0));
  store.add("z", Matrix(1, 1, 1.0));
  try {
    opt.step(store, {{"a", Matrix(1, 1, 1.0)},
                     {"z", Matrix(1, 1, std::numeric_limits<double>::quiet_NaN())}});
    FAIL("expected NonFiniteError");
  } catch (const maxcorr::NonFiniteError& e) {
    CHECK(std::string(e.what()).find("z") != std::string::npos);
  }
  CHECK(store.at("a")(0, 0) == 1.0);
}

TEST_CASE("gradient shape mismatch is rejected") {
  AdamW opt;
  ParameterStore store;
  store.add("a", Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(opt.step(store, {{"a", Matrix(1, 2)}}), maxcorr::ShapeError);
}
