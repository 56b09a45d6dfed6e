#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "maxcorr/autodiff.hpp"
#include "maxcorr/parameters.hpp"

namespace maxcorr {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay. Moments and step counts are kept per
/// parameter name, so stepping a subset of parameters is well defined.
class AdamW {
 public:
  struct Moments {
    Matrix m;
    Matrix v;
    std::uint64_t step = 0;
  };

  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  /// Updates every parameter that has an entry in `grads`. Throws
  /// NonFiniteError naming the first parameter with a NaN/Inf gradient,
  /// before any parameter is modified.
  void step(ParameterStore& params, const ad::GradientMap& grads);

  const AdamWConfig& config() const noexcept { return cfg_; }
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }
  std::map<std::string, Moments>& moments() noexcept { return moments_; }

 private:
  AdamWConfig cfg_;
  std::map<std::string, Moments> moments_;
};

}  // namespace maxcorr
