#pragma once

// Brute-force reference computations, written as plain loops over indices
// and kept independent of the library's own kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "maxcorr/autodiff.hpp"
#include "maxcorr/matrix.hpp"
#include "maxcorr/parameters.hpp"

namespace oracle {

using maxcorr::Matrix;

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

inline Matrix center(const Matrix& z) {
  Matrix out = z;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) mean += z(i, j);
    mean /= static_cast<double>(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) out(i, j) -= mean;
  }
  return out;
}

inline Matrix covariance(const Matrix& z) {
  const std::size_t n = z.rows(), d = z.cols();
  Matrix c(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += z(i, a) * z(i, b);
      c(a, b) = s / static_cast<double>(n - 1);
    }
  return c;
}

/// Soft-HGR objective over ordered pairs of centered projections.
inline double shgr(const std::vector<Matrix>& zs) {
  const std::size_t k = zs.size(), n = zs[0].rows(), d = zs[0].cols();
  double total = 0.0;
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t m = 0; m < k; ++m) {
      if (l == m) continue;
      double inner = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) inner += zs[l](i, j) * zs[m](i, j);
      inner /= static_cast<double>(n - 1);
      const Matrix cl = covariance(zs[l]), cm = covariance(zs[m]);
      double tr = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) tr += cl(a, b) * cm(b, a);
      total += inner - 0.5 * tr;
    }
  return -total / static_cast<double>(k * (k - 1));
}

inline Matrix rho(const Matrix& zl, const Matrix& zm) {
  Matrix r(zl.rows(), zm.rows());
  for (std::size_t i = 0; i < zl.rows(); ++i)
    for (std::size_t j = 0; j < zm.rows(); ++j) {
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (std::size_t d = 0; d < zl.cols(); ++d) {
        dot += zl(i, d) * zm(j, d);
        ni += zl(i, d) * zl(i, d);
        nj += zm(j, d) * zm(j, d);
      }
      r(i, j) = std::fabs(dot) / (std::sqrt(ni) * std::sqrt(nj) + 1e-8);
    }
  return r;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Matrix soft_thresholds(const Matrix& s) {
  Matrix t(s.rows(), s.cols());
  for (std::size_t a = 0; a < s.rows(); ++a)
    for (std::size_t b = 0; b < s.cols(); ++b) t(a, b) = sigmoid(0.5 * (s(a, b) + s(b, a)));
  return t;
}

inline Matrix wmean(const Matrix& h, const Matrix& w) {
  Matrix out(w.rows(), h.cols());
  for (std::size_t s = 0; s < w.rows(); ++s) {
    double rs = 0.0;
    for (std::size_t t = 0; t < w.cols(); ++t) rs += w(s, t);
    for (std::size_t c = 0; c < h.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < w.cols(); ++t) acc += w(s, t) * h(t, c);
      out(s, c) = acc / (rs + 1e-8);
    }
  }
  return out;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

struct Supra {
  Matrix a, c, ac, ca;
};

/// Dense supra matrices straight from the edge definitions: supra index
/// k*P + i, in-plane weights ReLU(rho - t_kk), cross weights ReLU(rho - t_lm),
/// identity on the diagonal blocks of C.
inline Supra supra(const std::vector<Matrix>& zs, const Matrix& t) {
  const std::size_t k = zs.size(), p = zs[0].rows(), n = k * p;
  Supra s{Matrix(n, n), Matrix(n, n), {}, {}};
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t m = 0; m < k; ++m) {
      const Matrix r = rho(zs[l], zs[m]);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          const double w = std::max(0.0, r(i, j) - t(l, m));
          if (l == m) {
            s.a(l * p + i, m * p + j) = w;
            s.c(l * p + i, m * p + j) = i == j ? 1.0 : 0.0;
          } else {
            s.c(l * p + i, m * p + j) = w;
          }
        }
    }
  s.ac = naive_matmul(s.a, s.c);
  s.ca = naive_matmul(s.c, s.a);
  return s;
}

/// AUROC by counting every positive/negative pair (ties count one half).
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::fabs(a(i, j) - b(i, j)));
  return m;
}

struct GradCheck {
  double worst_rel = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Central finite differences of `loss` against tape gradients for every
/// entry of every parameter. `loss` must be a pure function of the store.
inline GradCheck check_gradients(
    maxcorr::ParameterStore& store,
    const std::function<maxcorr::ad::Var(maxcorr::ParamBinder&)>& loss, double step = 1e-4,
    double floor = 1e-6) {
  maxcorr::ad::GradientMap grads;
  {
    maxcorr::ad::Tape tape;
    maxcorr::ParamBinder binder(tape, store);
    grads = tape.backward(loss(binder));
  }
  auto eval = [&]() {
    maxcorr::ad::Tape tape(false);
    maxcorr::ParamBinder binder(tape, store);
    return loss(binder).value()(0, 0);
  };
  GradCheck res;
  for (auto& entry : store.entries()) {
    const auto it = grads.find(entry.name);
    for (std::size_t r = 0; r < entry.value.rows(); ++r)
      for (std::size_t c = 0; c < entry.value.cols(); ++c) {
        const double orig = entry.value(r, c);
        entry.value(r, c) = orig + step;
        const double up = eval();
        entry.value(r, c) = orig - step;
        const double down = eval();
        entry.value(r, c) = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic = it == grads.end() ? 0.0 : it->second(r, c);
        const double rel = std::fabs(numeric - analytic) /
                           std::max({std::fabs(numeric), std::fabs(analytic), floor});
        ++res.checked;
        if (rel > res.worst_rel) {
          res.worst_rel = rel;
          res.worst_param = entry.name;
        }
      }
  }
  return res;
}

}  // namespace oracle
