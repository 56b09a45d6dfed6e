#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxcorr/trainer.hpp"

namespace maxcorr {

inline constexpr int kCheckpointVersion = 1;

/// A saved model: full train state plus the run configuration it came from.
struct Checkpoint {
  TrainState state;
  nlohmann::json config_echo;  // the run config as given, for reproduction
  std::vector<std::string> patient_ids;  // dataset order the split indexes into
};

/// JSON container; doubles are written in shortest round-trip form, so a
/// save/load/save cycle is byte-identical.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

/// Delimited per-epoch history: epoch,train_loss,train_ce,train_shgr,val_weighted_auc.
void write_history(std::ostream& os, const std::vector<HistoryRow>& history);

}  // namespace maxcorr
