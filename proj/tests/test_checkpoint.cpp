#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "maxcorr/checkpoint.hpp"
#include "maxcorr/error.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("checkpoint round trip restores the full state") {
  auto [data, state] = fixture::small_setup();
  maxcorr::pretrain(state, data);
  maxcorr::train(state, data);
  fixture::TempDir dir("ckpt");
  const maxcorr::Checkpoint ckpt{state, nlohmann::json{{"note", "x"}}, data.patient_ids};
  maxcorr::save_checkpoint(ckpt, dir.path / "a.json");
  const maxcorr::Checkpoint back = maxcorr::load_checkpoint(dir.path / "a.json");

  CHECK(back.state.params == state.params);
  CHECK(back.state.split == state.split);
  CHECK(back.state.feature_dims == state.feature_dims);
  CHECK(back.state.epoch == state.epoch);
  CHECK(back.state.rng == state.rng);
  CHECK(back.patient_ids == data.patient_ids);
  CHECK(back.config_echo == ckpt.config_echo);
  REQUIRE(back.state.bn.size() == state.bn.size());
  for (std::size_t i = 0; i < state.bn.size(); ++i) {
    CHECK(back.state.bn[i].running_mean == state.bn[i].running_mean);
    CHECK(back.state.bn[i].running_var == state.bn[i].running_var);
  }
  for (std::size_t k = 0; k < state.train_means.size(); ++k)
    CHECK(back.state.train_means[k] == state.train_means[k]);
  for (const auto& [name, mom] : state.optimizer.moments()) {
    const auto& other = back.state.optimizer.moments().at(name);
    CHECK(other.m == mom.m);
    CHECK(other.v == mom.v);
    CHECK(other.step == mom.step);
  }

  maxcorr::save_checkpoint(back, dir.path / "b.json");
  CHECK(slurp(dir.path / "a.json") == slurp(dir.path / "b.json"));

  // Identical predictions, and training resumes identically.
  CHECK(maxcorr::predict_inductive(back.state, data, state.split.test) ==
        maxcorr::predict_inductive(state, data, state.split.test));
  auto resumed = back.state;
  maxcorr::train(state, data);
  maxcorr::train(resumed, data);
  CHECK(resumed.params == state.params);
}

TEST_CASE("corrupt or mismatched checkpoints are rejected") {
  auto [data, state] = fixture::small_setup();
  fixture::TempDir dir("ckpt_bad");
  const maxcorr::Checkpoint ckpt{state, nlohmann::json::object(), data.patient_ids};
  auto j = maxcorr::checkpoint_to_json(ckpt);

  CHECK_THROWS_AS(maxcorr::load_checkpoint(dir.path / "missing.json"), maxcorr::DataError);
  std::ofstream(dir.path / "junk.json") << "{not json";
  CHECK_THROWS_AS(maxcorr::load_checkpoint(dir.path / "junk.json"), maxcorr::DataError);

  auto bad_format = j;
  bad_format["format"] = "other";
  CHECK_THROWS_AS(maxcorr::checkpoint_from_json(bad_format), maxcorr::DataError);
  auto dropped = j;
  dropped["parameters"].erase(dropped["parameters"].begin());
  CHECK_THROWS_AS(maxcorr::checkpoint_from_json(dropped), maxcorr::DataError);
}

TEST_CASE("history rows are written with full precision") {
  std::ostringstream os;
  maxcorr::write_history(os, {{0, 1.0 / 3.0, 0.5, -0.25, 0.75}});
  CHECK(os.str() ==
        "epoch,train_loss,train_ce,train_shgr,val_weighted_auc\n"
        "0,0.33333333333333331,0.5,-0.25,0.75\n");
}
