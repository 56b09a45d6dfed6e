#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "maxcorr/checkpoint.hpp"
#include "maxcorr/config.hpp"
#include "maxcorr/data.hpp"

namespace maxcorr {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // bad config, data or arguments
inline constexpr int kExitAbort = 2;    // runtime failure such as a non-finite loss

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  bool force = false;
  double threshold_offset = 0.0;
  std::optional<std::filesystem::path> out;
  std::vector<std::filesystem::path> checkpoints;
  bool on_train = false;
};

/// Loads the config and applies command-line overrides. For `synth` the seed
/// override applies to the generator, otherwise to training.
RunConfig effective_config(const CommandOptions& opts, bool synth);

/// The configured dataset, loaded or generated, without imputation.
Dataset load_run_data(const RunConfig& cfg);

/// Checks that a checkpoint fits the dataset: patient ids, modality count
/// and per-modality feature counts. Throws ShapeError or DataError.
void check_compatible(const Checkpoint& ckpt, const Dataset& data);

int cmd_synth(const CommandOptions& opts, std::ostream& out);
int cmd_train(const CommandOptions& opts, std::ostream& out);
int cmd_eval(const CommandOptions& opts, std::ostream& out);
int cmd_compare(const CommandOptions& opts, std::ostream& out);
int cmd_export_graph(const CommandOptions& opts, std::ostream& out);

/// Dispatches by name and maps exceptions to exit codes, printing the
/// message to `err`.
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out,
                std::ostream& err);

}  // namespace maxcorr
