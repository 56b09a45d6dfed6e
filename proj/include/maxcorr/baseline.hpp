#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "maxcorr/autodiff.hpp"
#include "maxcorr/parameters.hpp"

namespace maxcorr {

/// Early-fusion MLP over concatenated modality features, used as a
/// comparison model. Parameters: "baseline.fc<l>.{weight,bias}".
struct EarlyFusionSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {400, 20};
  std::size_t classes = 5;
  double leaky_slope = 0.01;
};

void init_early_fusion(const EarlyFusionSpec& spec, ParameterStore& store, std::mt19937_64& rng);
ad::Var early_fusion_forward(const EarlyFusionSpec& spec, ParamBinder& params, ad::Var x);

}  // namespace maxcorr
