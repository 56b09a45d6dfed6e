#include "maxcorr/baseline.hpp"

#include "maxcorr/error.hpp"

namespace maxcorr {

namespace {

std::vector<std::size_t> layer_dims(const EarlyFusionSpec& spec) {
  std::vector<std::size_t> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.classes);
  return dims;
}

std::string name(std::size_t layer, const char* kind) {
  return "baseline.fc" + std::to_string(layer) + "." + kind;
}

}  // namespace

void init_early_fusion(const EarlyFusionSpec& spec, ParameterStore& store, std::mt19937_64& rng) {
  const auto dims = layer_dims(spec);
  for (std::size_t d : dims)
    if (d == 0) throw ConfigError("early fusion: layer widths must be positive");
  for (std::size_t l = 1; l < dims.size(); ++l) {
    store.add(name(l, "weight"), uniform_fan_in(dims[l - 1], dims[l], rng));
    store.add(name(l, "bias"), Matrix(1, dims[l]));
  }
}

ad::Var early_fusion_forward(const EarlyFusionSpec& spec, ParamBinder& params, ad::Var x) {
  if (x.cols() != spec.input_dim)
    throw ShapeError("early fusion: expects " + std::to_string(spec.input_dim) +
                     " input features, got " + x.value().shape_str());
  const std::size_t layers = spec.hidden.size() + 1;
  ad::Var h = x;
  for (std::size_t l = 1; l <= layers; ++l) {
    h = ad::add(ad::matmul(h, params(name(l, "weight"))), params(name(l, "bias")));
    if (l < layers) h = ad::leaky_relu(h, spec.leaky_slope);
  }
  return h;
}

}  // namespace maxcorr
