#include "maxcorr/projections.hpp"

#include "maxcorr/error.hpp"

namespace maxcorr {

ProjectionBank::ProjectionBank(ProjectionSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_dims.empty()) throw ConfigError("ProjectionBank: no modalities");
  for (std::size_t k = 0; k < spec_.input_dims.size(); ++k)
    if (spec_.input_dims[k] == 0)
      throw ConfigError("ProjectionBank: modality " + std::to_string(k) + " has zero features");
  if (spec_.hidden == 0 || spec_.output == 0)
    throw ConfigError("ProjectionBank: widths must be positive");
}

std::string ProjectionBank::param_name(std::size_t modality, int layer, const char* kind) {
  return "proj." + std::to_string(modality) + ".fc" + std::to_string(layer) + "." + kind;
}

bool ProjectionBank::is_projection_param(const std::string& name) {
  return name.rfind("proj.", 0) == 0;
}

void ProjectionBank::init_parameters(ParameterStore& store, std::mt19937_64& rng) const {
  for (std::size_t k = 0; k < modalities(); ++k) {
    const std::size_t dims[4] = {spec_.input_dims[k], spec_.hidden, spec_.hidden, spec_.output};
    for (int l = 1; l <= 3; ++l) {
      store.add(param_name(k, l, "weight"), uniform_fan_in(dims[l - 1], dims[l], rng));
      store.add(param_name(k, l, "bias"), Matrix(1, dims[l]));
    }
  }
}

ad::Var ProjectionBank::forward(ParamBinder& params, std::size_t modality, ad::Var x) const {
  if (modality >= modalities())
    throw Error("ProjectionBank: modality " + std::to_string(modality) + " out of range");
  if (x.cols() != spec_.input_dims[modality])
    throw ShapeError("project: modality " + std::to_string(modality) + " expects " +
                     std::to_string(spec_.input_dims[modality]) + " features, got " +
                     x.value().shape_str());
  ad::Var h = x;
  for (int l = 1; l <= 3; ++l) {
    h = ad::add(ad::matmul(h, params(param_name(modality, l, "weight"))),
                params(param_name(modality, l, "bias")));
    if (l < 3) h = ad::leaky_relu(h, spec_.leaky_slope);
  }
  return h;
}

ProjectedBatch project(const ProjectionBank& bank, ParamBinder& params,
                       std::span<const Matrix> inputs, const std::vector<Matrix>* stored_means) {
  if (inputs.size() != bank.modalities())
    throw ShapeError("project: expected " + std::to_string(bank.modalities()) +
                     " modality blocks, got " + std::to_string(inputs.size()));
  if (stored_means && stored_means->size() != bank.modalities())
    throw ShapeError("project: stored means cover " + std::to_string(stored_means->size()) +
                     " modalities, bank has " + std::to_string(bank.modalities()));
  ad::Tape& tape = params.tape();
  ProjectedBatch pb;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].rows() != inputs.front().rows())
      throw ShapeError("project: modality " + std::to_string(k) + " has " +
                       std::to_string(inputs[k].rows()) + " rows, modality 0 has " +
                       std::to_string(inputs.front().rows()));
    if (inputs[k].rows() == 0) throw ShapeError("project: empty batch");
    ad::Var raw = bank.forward(params, k, tape.constant(inputs[k]));
    ad::Var mean = stored_means ? tape.constant((*stored_means)[k]) : ad::mean_over_rows(raw);
    pb.means.push_back(mean.value());
    pb.z.push_back(ad::sub(raw, mean));
  }
  return pb;
}

ad::Var covariance(ad::Var z) {
  if (z.rows() < 2)
    throw ShapeError("covariance: need at least 2 samples, got " + z.value().shape_str());
  // Z^T Z via the NT product of the transposed view.
  ad::Var zt = ad::transpose(z);
  return ad::scale(ad::matmul_nt(zt, zt), 1.0 / static_cast<double>(z.rows() - 1));
}

ad::Var shgr_loss(const ProjectedBatch& pb) {
  const std::size_t k = pb.z.size();
  if (k < 2) throw Error("shgr_loss: need at least 2 modalities, got " + std::to_string(k));
  const std::size_t n = pb.rows();
  if (n < 2) throw ShapeError("shgr_loss: need at least 2 samples, got " + std::to_string(n));
  const double inv_n1 = 1.0 / static_cast<double>(n - 1);

  std::vector<ad::Var> cov;
  cov.reserve(k);
  for (const ad::Var& z : pb.z) cov.push_back(covariance(z));

  ad::Var total;
  for (std::size_t l = 0; l < k; ++l)
    for (std::size_t m = 0; m < k; ++m) {
      if (l == m) continue;
      ad::Var corr = ad::scale(ad::sum_all(ad::mul(pb.z[l], pb.z[m])), inv_n1);
      ad::Var penalty = ad::scale(ad::trace(ad::matmul(cov[l], cov[m])), 0.5);
      ad::Var term = ad::sub(corr, penalty);
      total = total.valid() ? ad::add(total, term) : term;
    }
  const double nz = static_cast<double>(k * (k - 1));
  return ad::scale(total, -1.0 / nz);
}

}  // namespace maxcorr
