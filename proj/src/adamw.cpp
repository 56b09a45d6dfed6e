#include "maxcorr/adamw.hpp"

#include <cmath>

#include "maxcorr/error.hpp"

namespace maxcorr {

void AdamW::step(ParameterStore& params, const ad::GradientMap& grads) {
  for (const auto& [name, g] : grads) {
    if (!all_finite(g))
      throw NonFiniteError("AdamW: non-finite gradient for parameter '" + name + "'",
                           "parameter=" + name);
    if (!g.same_shape(params.at(name)))
      throw ShapeError("AdamW: gradient for '" + name + "' is " + g.shape_str() +
                       ", parameter is " + params.at(name).shape_str());
  }
  for (const auto& [name, g] : grads) {
    Matrix& p = params.at(name);
    Moments& mo = moments_[name];
    if (mo.m.empty()) {
      mo.m = Matrix(p.rows(), p.cols());
      mo.v = Matrix(p.rows(), p.cols());
    }
    ++mo.step;
    const double t = static_cast<double>(mo.step);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double& w = p.data()[i];
      const double gi = g.data()[i];
      w -= cfg_.lr * cfg_.weight_decay * w;
      double& m = mo.m.data()[i];
      double& v = mo.v.data()[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * gi;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      w -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace maxcorr
