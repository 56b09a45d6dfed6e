#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "maxcorr/autodiff.hpp"
#include "maxcorr/parameters.hpp"

namespace maxcorr {

struct ProjectionSpec {
  std::vector<std::size_t> input_dims;  // D_k per modality
  std::size_t hidden = 32;
  std::size_t output = 64;  // shared projection width D_p
  double leaky_slope = 0.01;
};

/// K modality networks D_k -> hidden -> hidden -> D_p with LeakyReLU between
/// layers. Weights live in a ParameterStore under "proj.<k>.fc<l>.{weight,bias}".
class ProjectionBank {
 public:
  explicit ProjectionBank(ProjectionSpec spec);

  const ProjectionSpec& spec() const noexcept { return spec_; }
  std::size_t modalities() const noexcept { return spec_.input_dims.size(); }
  std::size_t output_dim() const noexcept { return spec_.output; }

  void init_parameters(ParameterStore& store, std::mt19937_64& rng) const;
  static std::string param_name(std::size_t modality, int layer, const char* kind);
  static bool is_projection_param(const std::string& name);

  /// Uncentered f^k applied to the rows of `x`.
  ad::Var forward(ParamBinder& params, std::size_t modality, ad::Var x) const;

 private:
  ProjectionSpec spec_;
};

/// Centered projections of one batch, plus the means that were removed.
struct ProjectedBatch {
  std::vector<ad::Var> z;      // K matrices, N x D_p
  std::vector<Matrix> means;   // K row vectors, 1 x D_p
  std::size_t rows() const { return z.empty() ? 0 : z.front().rows(); }
};

/// Projects every modality block of the batch. With `stored_means` the given
/// training means are subtracted instead of the batch means.
ProjectedBatch project(const ProjectionBank& bank, ParamBinder& params,
                       std::span<const Matrix> inputs,
                       const std::vector<Matrix>* stored_means = nullptr);

/// Z^T Z / (N - 1) for a centered N x D matrix.
ad::Var covariance(ad::Var z);

/// Soft-HGR objective averaged over the K(K-1) ordered modality pairs.
ad::Var shgr_loss(const ProjectedBatch& pb);

}  // namespace maxcorr
