#include "maxcorr/mgnn.hpp"

#include <numeric>

#include "maxcorr/error.hpp"

namespace maxcorr {

Mgnn::Mgnn(MgnnSpec spec) : spec_(spec) {
  if (spec_.planes == 0 || spec_.input_dim == 0 || spec_.width == 0 || spec_.depth == 0 ||
      spec_.classes == 0)
    throw ConfigError("Mgnn: planes, widths, depth and classes must be positive");
}

std::size_t Mgnn::layer_input_dim(std::size_t depth) const {
  return depth == 0 ? spec_.input_dim : 2 * spec_.width;
}

std::string Mgnn::layer_param(std::size_t depth, const char* branch, const char* kind) {
  return "mgnn." + std::to_string(depth) + ".phi_" + branch + "." + kind;
}

void Mgnn::init_parameters(ParameterStore& store, std::mt19937_64& rng) const {
  for (std::size_t d = 0; d < spec_.depth; ++d) {
    store.add("mgnn." + std::to_string(d) + ".eps", Matrix(1, 1, 0.0));
    for (const char* b : {"I", "II"}) {
      store.add(layer_param(d, b, "weight"), uniform_fan_in(layer_input_dim(d), spec_.width, rng));
      store.add(layer_param(d, b, "bias"), Matrix(1, spec_.width));
      store.add(layer_param(d, b, "bn.gamma"), Matrix(1, spec_.width, 1.0));
      store.add(layer_param(d, b, "bn.beta"), Matrix(1, spec_.width));
    }
  }
  store.add("readout.alpha", Matrix(1, spec_.planes));
  store.add("readout.weight", uniform_fan_in(output_dim(), spec_.classes, rng));
  store.add("readout.bias", Matrix(1, spec_.classes));
}

std::vector<ad::BatchNormStats> Mgnn::make_bn_stats() const {
  return std::vector<ad::BatchNormStats>(2 * spec_.depth, ad::BatchNormStats(spec_.width));
}

ad::Var init_embedding(const ProjectedBatch& pb) {
  if (pb.z.empty()) throw ShapeError("init_embedding: empty projected batch");
  std::vector<std::vector<std::optional<ad::Var>>> grid;
  for (const ad::Var& z : pb.z) grid.push_back({z});
  return ad::blocks(grid);
}

ad::Var wmean(ad::Var h, ad::Var walk) {
  if (walk.rows() != walk.cols() || walk.cols() != h.rows())
    throw ShapeError("wmean: shape mismatch " + walk.value().shape_str() + " vs " +
                     h.value().shape_str());
  return ad::div(ad::matmul(walk, h), ad::add_scalar(ad::sum_over_cols(walk), 1e-8));
}

ad::Var mgnn_forward(const Mgnn& net, ParamBinder& params, ad::Var h0, const SupraMatrices& supra,
                     std::vector<ad::BatchNormStats>& bn, bool training) {
  const MgnnSpec& s = net.spec();
  if (bn.size() != 2 * s.depth)
    throw ShapeError("mgnn_forward: expected " + std::to_string(2 * s.depth) +
                     " batch-norm states, got " + std::to_string(bn.size()));
  if (h0.rows() != supra.patients * supra.planes)
    throw ShapeError("mgnn_forward: embedding " + h0.value().shape_str() + " vs supra size " +
                     std::to_string(supra.patients * supra.planes));
  ad::Var h = h0;
  for (std::size_t d = 0; d < s.depth; ++d) {
    if (h.cols() != net.layer_input_dim(d))
      throw ShapeError("mgnn_forward: layer " + std::to_string(d) + " expects width " +
                       std::to_string(net.layer_input_dim(d)) + ", got " + h.value().shape_str());
    ad::Var one_plus_eps = ad::add_scalar(params("mgnn." + std::to_string(d) + ".eps"), 1.0);
    ad::Var self = ad::mul(h, one_plus_eps);
    const ad::Var walks[2] = {supra.walk_ac, supra.walk_ca};
    const char* branches[2] = {"I", "II"};
    std::vector<ad::Var> outs;
    for (int b = 0; b < 2; ++b) {
      ad::Var in = ad::add(self, wmean(h, walks[b]));
      ad::Var lin = ad::add(ad::matmul(in, params(Mgnn::layer_param(d, branches[b], "weight"))),
                            params(Mgnn::layer_param(d, branches[b], "bias")));
      outs.push_back(ad::batch_norm(ad::relu(lin),
                                    params(Mgnn::layer_param(d, branches[b], "bn.gamma")),
                                    params(Mgnn::layer_param(d, branches[b], "bn.beta")),
                                    bn[2 * d + b], training));
    }
    h = ad::concat_cols(outs);
  }
  return h;
}

ad::Var readout(const Mgnn& net, ParamBinder& params, ad::Var h, std::size_t patients) {
  const std::size_t k = net.spec().planes;
  if (h.rows() != patients * k)
    throw ShapeError("readout: embedding " + h.value().shape_str() + " vs " +
                     std::to_string(patients) + " patients x " + std::to_string(k) + " planes");
  ad::Var weights = ad::softmax_rows(params("readout.alpha"));
  std::vector<std::size_t> rows(patients);
  ad::Var mixed;
  for (std::size_t p = 0; p < k; ++p) {
    std::iota(rows.begin(), rows.end(), p * patients);
    ad::Var term = ad::mul(ad::select_rows(h, rows), ad::element(weights, 0, p));
    mixed = mixed.valid() ? ad::add(mixed, term) : term;
  }
  return ad::add(ad::matmul(mixed, params("readout.weight")), params("readout.bias"));
}

}  // namespace maxcorr
