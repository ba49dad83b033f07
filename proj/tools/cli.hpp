#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aed/ews.hpp"
#include "aed/preprocess.hpp"
#include "aed/seq2seq.hpp"
#include "aed/telemetry.hpp"

namespace aed::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

/// Everything a subcommand needs, resolved before any module call:
/// built-in defaults, then the --config file, then command-line flags.
struct RunConfig {
  SynthConfig synth;
  PreprocessConfig preprocess;
  ModelConfig model;
  TrainConfig train;
  ThresholdConfig thresholds;
  std::int64_t prediction_cadence_s = 60;
};

/// Reads a JSON config file over `cfg`. Top-level sections: synth,
/// preprocess, model, train, thresholds, monitor. Unknown keys are errors.
void load_config_file(RunConfig& cfg, const std::string& path);

/// Sets every seed in the configuration from one value.
void apply_seed(RunConfig& cfg, std::uint64_t seed);

/// Entry point used by main() and the tests. `in` backs `monitor --in -`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace aed::cli
