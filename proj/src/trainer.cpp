#include "maxcorr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "maxcorr/error.hpp"
#include "maxcorr/multigraph.hpp"

namespace maxcorr {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::MaxCorrMgnn ? "maxcorr_mgnn" : "early_fusion";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "maxcorr_mgnn") return ModelKind::MaxCorrMgnn;
  if (s == "early_fusion") return ModelKind::EarlyFusion;
  throw ConfigError("unknown model kind '" + s + "' (expected maxcorr_mgnn or early_fusion)");
}

void ModelConfig::validate() const {
  if (projection_dim == 0 || hidden_width == 0 || mgnn_width == 0 || mgnn_depth == 0)
    throw ConfigError("model: widths and mgnn_depth must be positive");
  for (std::size_t h : baseline_hidden)
    if (h == 0) throw ConfigError("model: baseline_hidden widths must be positive");
  if (!(leaky_slope >= 0.0)) throw ConfigError("model: leaky_slope must be >= 0");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("train: lambda must lie in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (batch_size < 2) throw ConfigError("train: batch_size must be at least 2");
}

void SplitRatios::validate() const {
  if (!(train > 0.0 && val >= 0.0 && test >= 0.0))
    throw ConfigError("split ratios: train must be positive, val/test non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
}

void Split::validate(std::size_t patients) const {
  std::vector<int> owner(patients, -1);
  int tag = 0;
  for (const auto* part : {&train, &val, &test}) {
    for (std::size_t i : *part) {
      if (i >= patients) throw DataError("split: patient row " + std::to_string(i) + " out of range");
      if (owner[i] != -1) throw DataError("split: patient row " + std::to_string(i) + " appears twice");
      owner[i] = tag;
    }
    ++tag;
  }
}

Split make_split(std::span<const std::size_t> labels, std::size_t num_classes,
                 const SplitRatios& ratios, std::uint64_t seed, std::size_t run_index) {
  ratios.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run_index), 0x5B117u};
  std::mt19937_64 rng(seq);
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw DataError("make_split: label out of range");
    by_class[labels[i]].push_back(i);
  }
  Split s;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const double n = static_cast<double>(members.size());
    const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * n));
    const auto n_val = std::min(members.size() - n_test,
                                static_cast<std::size_t>(std::llround(ratios.val * n)));
    const std::size_t n_train = members.size() - n_test - n_val;
    s.train.insert(s.train.end(), members.begin(), members.begin() + n_train);
    s.val.insert(s.val.end(), members.begin() + n_train, members.begin() + n_train + n_val);
    s.test.insert(s.test.end(), members.begin() + n_train + n_val, members.end());
  }
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

// ---- state -----------------------------------------------------------------------

ProjectionBank TrainState::projection_bank() const {
  return ProjectionBank({feature_dims, model.hidden_width, model.projection_dim, model.leaky_slope});
}

Mgnn TrainState::mgnn() const {
  return Mgnn({modalities(), model.projection_dim, model.mgnn_width, model.mgnn_depth, classes});
}

EarlyFusionSpec TrainState::early_fusion() const {
  EarlyFusionSpec s;
  s.input_dim = std::accumulate(feature_dims.begin(), feature_dims.end(), std::size_t{0});
  s.hidden = model.baseline_hidden;
  s.classes = classes;
  s.leaky_slope = model.leaky_slope;
  return s;
}

TrainState init_state(const ModelConfig& model, const TrainConfig& train,
                      std::vector<std::size_t> feature_dims, std::size_t classes, Split split) {
  model.validate();
  train.validate();
  if (feature_dims.empty()) throw ConfigError("init_state: no modalities");
  if (classes < 2) throw ConfigError("init_state: need at least 2 classes");
  TrainState st;
  st.model = model;
  st.train = train;
  st.feature_dims = std::move(feature_dims);
  st.classes = classes;
  st.split = std::move(split);
  st.rng.seed(train.seed);
  st.optimizer = AdamW({train.lr, train.weight_decay});
  if (model.kind == ModelKind::MaxCorrMgnn) {
    st.projection_bank().init_parameters(st.params, st.rng);
    st.params.add(kThresholdParam, Matrix(st.modalities(), st.modalities()));
    const Mgnn net = st.mgnn();
    net.init_parameters(st.params, st.rng);
    st.bn = net.make_bn_stats();
    st.train_means.assign(st.modalities(), Matrix(1, model.projection_dim));
  } else {
    init_early_fusion(st.early_fusion(), st.params, st.rng);
  }
  return st;
}

std::vector<std::string> expected_parameter_names(const TrainState& state) {
  std::vector<std::string> names;
  if (state.model.kind == ModelKind::EarlyFusion) {
    for (std::size_t l = 1; l <= state.model.baseline_hidden.size() + 1; ++l)
      for (const char* k : {"weight", "bias"})
        names.push_back("baseline.fc" + std::to_string(l) + "." + k);
    return names;
  }
  for (std::size_t k = 0; k < state.modalities(); ++k)
    for (int l = 1; l <= 3; ++l)
      for (const char* kind : {"weight", "bias"})
        names.push_back(ProjectionBank::param_name(k, l, kind));
  names.push_back(kThresholdParam);
  for (std::size_t d = 0; d < state.model.mgnn_depth; ++d) {
    names.push_back("mgnn." + std::to_string(d) + ".eps");
    for (const char* b : {"I", "II"})
      for (const char* kind : {"weight", "bias", "bn.gamma", "bn.beta"})
        names.push_back(Mgnn::layer_param(d, b, kind));
  }
  for (const char* r : {"readout.alpha", "readout.weight", "readout.bias"}) names.push_back(r);
  return names;
}

// ---- losses and forward --------------------------------------------------------------

ad::Var joint_loss(ad::Var logits, std::span<const std::size_t> labels, ad::Var shgr,
                   double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("joint_loss: lambda must lie in [0, 1]");
  for (std::size_t l : labels)
    if (l >= logits.cols())
      throw DataError("joint_loss: label " + std::to_string(l) + " outside 0.." +
                      std::to_string(logits.cols() - 1));
  ad::Var ce = ad::cross_entropy(logits, labels);
  if (lambda == 0.0 || !shgr.valid()) return ce;
  if (lambda == 1.0) return shgr;
  return ad::add(ad::scale(shgr, lambda), ad::scale(ce, 1.0 - lambda));
}

ForwardResult model_forward(const TrainState& state, ParamBinder& params,
                            std::span<const Matrix> inputs, std::vector<ad::BatchNormStats>& bn,
                            bool training, const std::vector<Matrix>* stored_means,
                            double threshold_offset) {
  ad::Tape& tape = params.tape();
  ForwardResult out;
  if (state.model.kind == ModelKind::EarlyFusion) {
    std::size_t width = 0;
    for (const Matrix& m : inputs) width += m.cols();
    Matrix x(inputs.empty() ? 0 : inputs.front().rows(), width);
    std::size_t off = 0;
    for (const Matrix& m : inputs) {
      for (std::size_t r = 0; r < m.rows(); ++r)
        std::copy(m.row(r).begin(), m.row(r).end(), x.row(r).begin() + off);
      off += m.cols();
    }
    out.logits = early_fusion_forward(state.early_fusion(), params, tape.constant(std::move(x)));
    return out;
  }
  const ProjectionBank bank = state.projection_bank();
  const Mgnn net = state.mgnn();
  ProjectedBatch pb = project(bank, params, inputs, stored_means);
  if (pb.z.size() >= 2 && pb.rows() >= 2) out.shgr = shgr_loss(pb);
  MultiGraph mg = build_multigraph(pb, soft_thresholds(params), threshold_offset);
  SupraMatrices supra = assemble_supra(mg);
  ad::Var h = mgnn_forward(net, params, init_embedding(pb), supra, bn, training);
  out.logits = readout(net, params, h, pb.rows());
  return out;
}

// ---- training ------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> ids,
                                                   std::size_t batch_size, std::mt19937_64& rng) {
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < ids.size(); i += batch_size)
    batches.emplace_back(ids.begin() + i, ids.begin() + std::min(ids.size(), i + batch_size));
  // A single-patient tail cannot be centered or batch-normalized.
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

std::vector<std::size_t> labels_of(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(data.labels[r]);
  return out;
}

void check_data(const TrainState& state, const Dataset& data) {
  if (data.feature_dims() != state.feature_dims)
    throw DataError("dataset feature dimensions do not match the model");
  if (!data.complete()) throw DataError("dataset has missing cells; impute before training");
  state.split.validate(data.patients());
  if (state.split.train.size() < 2) throw DataError("training split needs at least 2 patients");
}

bool is_finite(double v) { return std::isfinite(v); }

}  // namespace

void pretrain(TrainState& state, const Dataset& data) {
  if (state.model.kind != ModelKind::MaxCorrMgnn || state.modalities() < 2) return;
  // lambda = 0 removes the correlation objective entirely, pre-training included.
  if (state.train.pretrain_epochs == 0 || state.train.lambda == 0.0) return;
  check_data(state, data);
  const ProjectionBank bank = state.projection_bank();
  for (std::size_t epoch = 0; epoch < state.train.pretrain_epochs; ++epoch) {
    auto batches = make_batches(state.split.train, state.train.batch_size, state.rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      ad::Tape tape;
      ParamBinder params(tape, state.params);
      const auto inputs = gather_rows(data, batches[b]);
      ad::Var loss = shgr_loss(project(bank, params, inputs));
      const double lv = loss.value()(0, 0);
      if (!is_finite(lv)) {
        std::ostringstream diag;
        diag << "phase=pretrain epoch=" << epoch << " batch=" << b << " shgr=" << lv;
        throw NonFiniteError("non-finite sHGR loss during pre-training", diag.str());
      }
      state.optimizer.step(state.params, tape.backward(loss));
    }
  }
  refresh_train_means(state, data);
}

double shgr_on_training(const TrainState& state, const Dataset& data) {
  if (state.modalities() < 2) return 0.0;
  ad::Tape tape(false);
  ParamBinder params(tape, state.params);
  const auto inputs = gather_rows(data, state.split.train);
  return shgr_loss(project(state.projection_bank(), params, inputs)).value()(0, 0);
}

void refresh_train_means(TrainState& state, const Dataset& data) {
  if (state.model.kind != ModelKind::MaxCorrMgnn) return;
  ad::Tape tape(false);
  ParamBinder params(tape, state.params);
  const auto inputs = gather_rows(data, state.split.train);
  ProjectedBatch pb = project(state.projection_bank(), params, inputs);
  state.train_means = pb.means;
}

std::vector<HistoryRow> train(TrainState& state, const Dataset& data, const EpochCallback& on_epoch) {
  std::vector<HistoryRow> history;
  if (state.train.epochs == 0) return history;
  check_data(state, data);

  struct Snapshot {
    ParameterStore params;
    std::vector<ad::BatchNormStats> bn;
    std::vector<Matrix> means;
  };
  std::optional<Snapshot> best;
  double best_auc = -std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 0; epoch < state.train.epochs; ++epoch) {
    auto batches = make_batches(state.split.train, state.train.batch_size, state.rng);
    double loss_sum = 0.0, ce_sum = 0.0, shgr_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      ad::Tape tape;
      ParamBinder params(tape, state.params);
      const auto inputs = gather_rows(data, batch);
      const auto labels = labels_of(data, batch);
      ForwardResult fwd = model_forward(state, params, inputs, state.bn, true, nullptr);
      const double lambda = state.model.kind == ModelKind::EarlyFusion ? 0.0 : state.train.lambda;
      ad::Var ce = ad::cross_entropy(fwd.logits, labels);
      ad::Var loss = joint_loss(fwd.logits, labels, fwd.shgr, lambda);
      const double lv = loss.value()(0, 0);
      const double cev = ce.value()(0, 0);
      const double sv = fwd.shgr.valid() ? fwd.shgr.value()(0, 0) : 0.0;
      if (!is_finite(lv)) {
        std::ostringstream diag;
        diag << "phase=train epoch=" << epoch << " batch=" << b << " loss=" << lv
             << " cross_entropy=" << cev << " shgr=" << sv << " batch_size=" << batch.size();
        throw NonFiniteError("non-finite joint loss", diag.str());
      }
      state.optimizer.step(state.params, tape.backward(loss));
      const double w = static_cast<double>(batch.size());
      loss_sum += w * lv;
      ce_sum += w * cev;
      shgr_sum += w * sv;
      seen += batch.size();
    }
    ++state.epoch;
    refresh_train_means(state, data);

    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.train_ce = ce_sum / static_cast<double>(seen);
    row.train_shgr = shgr_sum / static_cast<double>(seen);
    row.val_weighted_auc = std::numeric_limits<double>::quiet_NaN();
    if (!state.split.val.empty()) {
      const EvalResult ev = evaluate(state, data, state.split.val);
      row.val_weighted_auc = ev.roc.weighted_auc;
      if (std::isfinite(row.val_weighted_auc) && row.val_weighted_auc > best_auc) {
        best_auc = row.val_weighted_auc;
        best = Snapshot{state.params, state.bn, state.train_means};
      }
    }
    history.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  if (best) {
    state.params = std::move(best->params);
    state.bn = std::move(best->bn);
    state.train_means = std::move(best->means);
  }
  return history;
}

// ---- inference -----------------------------------------------------------------------

namespace {

// Frozen forward over `scope`; returns logits for every scope row.
Matrix frozen_forward(const TrainState& state, const Dataset& data,
                      std::span<const std::size_t> scope) {
  ad::Tape tape(false);
  ParamBinder params(tape, state.params);
  const auto inputs = gather_rows(data, scope);
  auto bn = state.bn;
  ForwardResult fwd = model_forward(state, params, inputs, bn, false, &state.train_means);
  return fwd.logits.value();
}

Matrix take_rows(const Matrix& m, std::size_t first, std::size_t count) {
  Matrix out(count, m.cols());
  for (std::size_t r = 0; r < count; ++r)
    std::copy(m.row(first + r).begin(), m.row(first + r).end(), out.row(r).begin());
  return out;
}

}  // namespace

Matrix predict_inductive(const TrainState& state, const Dataset& data,
                         std::span<const std::size_t> eval_ids) {
  if (eval_ids.empty()) return Matrix(0, state.classes);
  const std::set<std::size_t> train_set(state.split.train.begin(), state.split.train.end());
  std::set<std::size_t> seen;
  for (std::size_t id : eval_ids) {
    if (id >= data.patients()) throw DataError("predict_inductive: patient row out of range");
    if (train_set.count(id))
      throw DataError("predict_inductive: eval patient '" + data.patient_ids[id] +
                      "' belongs to the training split");
    if (!seen.insert(id).second)
      throw DataError("predict_inductive: eval patient '" + data.patient_ids[id] + "' repeated");
  }
  if (state.model.kind == ModelKind::EarlyFusion) return frozen_forward(state, data, eval_ids);
  std::vector<std::size_t> scope(state.split.train);
  scope.insert(scope.end(), eval_ids.begin(), eval_ids.end());
  return take_rows(frozen_forward(state, data, scope), state.split.train.size(), eval_ids.size());
}

EvalResult evaluate(const TrainState& state, const Dataset& data, std::span<const std::size_t> ids) {
  EvalResult res;
  const std::set<std::size_t> train_set(state.split.train.begin(), state.split.train.end());
  const bool all_train = !ids.empty() && std::all_of(ids.begin(), ids.end(), [&](std::size_t i) {
    return train_set.count(i) > 0;
  });
  if (all_train) {
    const Matrix full = frozen_forward(state, data, state.split.train);
    std::vector<std::size_t> pos;
    for (std::size_t id : ids)
      pos.push_back(static_cast<std::size_t>(
          std::lower_bound(state.split.train.begin(), state.split.train.end(), id) -
          state.split.train.begin()));
    const bool sorted_train = std::is_sorted(state.split.train.begin(), state.split.train.end());
    if (!sorted_train) throw DataError("evaluate: training split must be sorted");
    res.logits = Matrix(ids.size(), full.cols());
    for (std::size_t r = 0; r < ids.size(); ++r)
      std::copy(full.row(pos[r]).begin(), full.row(pos[r]).end(), res.logits.row(r).begin());
  } else {
    res.logits = predict_inductive(state, data, ids);
  }
  res.scores = softmax_scores(res.logits);
  std::vector<std::size_t> labels;
  for (std::size_t id : ids) labels.push_back(data.labels[id]);
  res.roc = multiclass_auroc(res.scores, labels);
  return res;
}

}  // namespace maxcorr
