#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "maxcorr/autodiff.hpp"
#include "maxcorr/multigraph.hpp"
#include "maxcorr/parameters.hpp"
#include "maxcorr/projections.hpp"

namespace maxcorr {

struct MgnnSpec {
  std::size_t planes = 1;
  std::size_t input_dim = 64;  // D_p
  std::size_t width = 64;      // per-branch output width
  std::size_t depth = 2;
  std::size_t classes = 5;
};

/// Multi-graph GIN stack with two branches per layer (walks A*C and C*A)
/// and a convex-combination readout over planes.
///
/// Parameters per layer d: "mgnn.<d>.eps" and, for branch b in {I, II},
/// "mgnn.<d>.phi_<b>.{weight,bias}" plus "mgnn.<d>.phi_<b>.bn.{gamma,beta}".
/// Readout: "readout.alpha" (1 x K), "readout.weight", "readout.bias".
class Mgnn {
 public:
  explicit Mgnn(MgnnSpec spec);

  const MgnnSpec& spec() const noexcept { return spec_; }
  std::size_t layer_input_dim(std::size_t depth) const;
  std::size_t output_dim() const noexcept { return 2 * spec_.width; }

  void init_parameters(ParameterStore& store, std::mt19937_64& rng) const;
  /// Running batch-norm statistics, two per layer (branch I then II).
  std::vector<ad::BatchNormStats> make_bn_stats() const;

  static std::string layer_param(std::size_t depth, const char* branch, const char* kind);

 private:
  MgnnSpec spec_;
};

/// H0 with row k*P + i holding z^k_i.
ad::Var init_embedding(const ProjectedBatch& pb);

/// Row-normalized aggregation: (W H)[s] / (sum_j W[s, j] + 1e-8).
ad::Var wmean(ad::Var h, ad::Var walk);

ad::Var mgnn_forward(const Mgnn& net, ParamBinder& params, ad::Var h0, const SupraMatrices& supra,
                     std::vector<ad::BatchNormStats>& bn, bool training);

/// P x classes logits: W_out * sum_k softmax(alpha)_k h[k*P + i] + b.
ad::Var readout(const Mgnn& net, ParamBinder& params, ad::Var h, std::size_t patients);

}  // namespace maxcorr
