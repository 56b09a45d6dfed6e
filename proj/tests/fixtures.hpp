#pragma once

// Small end-to-end setups shared by the trainer, checkpoint and acceptance tests.

#include <filesystem>
#include <random>
#include <string>

#include "maxcorr/data.hpp"
#include "maxcorr/trainer.hpp"

namespace fixture {

struct Setup {
  maxcorr::Dataset data;  // imputed
  maxcorr::TrainState state;
};

inline maxcorr::ModelConfig small_model() {
  maxcorr::ModelConfig m;
  m.projection_dim = 8;
  m.hidden_width = 8;
  m.mgnn_width = 8;
  m.baseline_hidden = {16, 8};
  return m;
}

inline maxcorr::TrainConfig quick_train(std::size_t epochs = 3, std::size_t pretrain = 3) {
  maxcorr::TrainConfig t;
  t.lr = 1e-2;
  t.epochs = epochs;
  t.pretrain_epochs = pretrain;
  t.batch_size = 16;
  t.seed = 3;
  return t;
}

inline Setup small_setup(std::size_t patients = 40, maxcorr::ModelConfig model = small_model(),
                         maxcorr::TrainConfig train = quick_train(), double missing_rate = 0.0) {
  maxcorr::SyntheticSpec spec;
  spec.patients = patients;
  spec.feature_dims = {6, 8, 5};
  spec.latent_dim = 4;
  spec.missing_rate = missing_rate;
  const maxcorr::Dataset raw = maxcorr::generate_synthetic(spec);
  maxcorr::Split split =
      maxcorr::make_split(raw.labels, raw.num_classes(), maxcorr::SplitRatios{}, train.seed, 0);
  maxcorr::Dataset data = maxcorr::impute_means(raw, split.train);
  auto dims = data.feature_dims();
  auto classes = data.num_classes();
  return {std::move(data), maxcorr::init_state(model, train, dims, classes, std::move(split))};
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("maxcorr_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace fixture
