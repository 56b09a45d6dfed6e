#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "maxcorr/adamw.hpp"
#include "maxcorr/autodiff.hpp"
#include "maxcorr/baseline.hpp"
#include "maxcorr/data.hpp"
#include "maxcorr/metrics.hpp"
#include "maxcorr/mgnn.hpp"
#include "maxcorr/parameters.hpp"
#include "maxcorr/projections.hpp"

namespace maxcorr {

enum class ModelKind { MaxCorrMgnn, EarlyFusion };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::MaxCorrMgnn;
  std::size_t projection_dim = 64;
  std::size_t hidden_width = 32;
  std::size_t mgnn_width = 64;
  std::size_t mgnn_depth = 2;
  std::vector<std::size_t> baseline_hidden = {400, 20};
  double leaky_slope = 0.01;

  void validate() const;
};

struct TrainConfig {
  double lambda = 0.01;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  std::size_t epochs = 50;
  std::size_t pretrain_epochs = 50;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  void validate() const;
};

/// Disjoint patient row indices.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  void validate(std::size_t patients) const;
  friend bool operator==(const Split&, const Split&) = default;
};

/// Class-stratified split; deterministic in (seed, run_index).
Split make_split(std::span<const std::size_t> labels, std::size_t num_classes,
                 const SplitRatios& ratios, std::uint64_t seed, std::size_t run_index);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_ce = 0.0;
  double train_shgr = 0.0;
  double val_weighted_auc = 0.0;  // NaN without validation patients
};

/// Everything that defines a trained model and its optimizer.
struct TrainState {
  ModelConfig model;
  TrainConfig train;
  std::vector<std::size_t> feature_dims;
  std::size_t classes = 5;
  Split split;
  ParameterStore params;
  std::vector<ad::BatchNormStats> bn;
  AdamW optimizer;
  std::vector<Matrix> train_means;  // per-modality projection means over the training cohort
  std::size_t epoch = 0;
  std::mt19937_64 rng;

  std::size_t modalities() const noexcept { return feature_dims.size(); }
  ProjectionBank projection_bank() const;
  Mgnn mgnn() const;
  EarlyFusionSpec early_fusion() const;
};

/// Fresh state: weights from a generator seeded with train.seed, S = 0,
/// alpha = 0, eps = 0, biases 0.
TrainState init_state(const ModelConfig& model, const TrainConfig& train,
                      std::vector<std::size_t> feature_dims, std::size_t classes, Split split);

/// Parameter names the optimizer is expected to update for this state.
std::vector<std::string> expected_parameter_names(const TrainState& state);

/// lambda * shgr + (1 - lambda) * mean cross-entropy; plain cross-entropy when
/// `shgr` is invalid. Throws DataError on an out-of-range label.
ad::Var joint_loss(ad::Var logits, std::span<const std::size_t> labels, ad::Var shgr,
                   double lambda);

struct ForwardResult {
  ad::Var logits;
  ad::Var shgr;  // invalid for a single modality or the early-fusion model
};

/// Full forward on one patient scope. `stored_means` switches centering to
/// the given training means.
ForwardResult model_forward(const TrainState& state, ParamBinder& params,
                            std::span<const Matrix> inputs, std::vector<ad::BatchNormStats>& bn,
                            bool training, const std::vector<Matrix>* stored_means,
                            double threshold_offset = 0.0);

/// sHGR-only optimization of the projection parameters. A no-op for
/// lambda = 0, the early-fusion model or a single modality.
void pretrain(TrainState& state, const Dataset& data);

/// Mean sHGR loss over the training cohort in batch order, no updates.
double shgr_on_training(const TrainState& state, const Dataset& data);

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Joint optimization. `data` must be complete (imputed). Keeps the
/// parameters with the best validation weighted AUROC.
std::vector<HistoryRow> train(TrainState& state, const Dataset& data,
                              const EpochCallback& on_epoch = {});

/// Recomputes the per-modality projection means over the training cohort.
void refresh_train_means(TrainState& state, const Dataset& data);

/// Frozen forward over train + eval patients; returns logits for eval_ids
/// in order. Never reads labels.
Matrix predict_inductive(const TrainState& state, const Dataset& data,
                         std::span<const std::size_t> eval_ids);

struct EvalResult {
  Matrix logits;
  Matrix scores;  // softmax probabilities
  RocResult roc;
};

/// Scores `ids` and computes AUROC. Ids disjoint from the training split go
/// through predict_inductive; the training split itself is scored with a
/// frozen forward over the training cohort alone.
EvalResult evaluate(const TrainState& state, const Dataset& data, std::span<const std::size_t> ids);

}  // namespace maxcorr
