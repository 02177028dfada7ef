#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spherekick/config.hpp"

namespace spherekick {

inline constexpr int exit_pass = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_verification_failed = 2;

struct RunOptions {
  int threads = 1;
  std::optional<std::filesystem::path> out_dir;  ///< overrides config.output_dir
  std::ostream* log = nullptr;
};

struct RunResult {
  int exit_code = exit_error;
  std::string message;
  std::filesystem::path manifest;
  std::filesystem::path summary;
  std::vector<std::filesystem::path> csv;  ///< main series first
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path diagnostics;  ///< set on error
};

/// Runs cfg.experiment and writes
///   <exp>_<hash>_s<seed>.manifest.json, .csv, .summary.json
/// into the output directory. Never throws for experiment failures; errors
/// become exit_error with a diagnostics file.
RunResult run(const ExperimentConfig& cfg, const RunOptions& options = {});

/// File stem shared by every artifact of a run.
std::string artifact_stem(const ExperimentConfig& cfg);

}  // namespace spherekick
