#pragma once

// Experiment configuration: a JSON document validated up front. All
// violations are collected and reported together.
//
// {
//   "experiment": "chain",
//   "seed": 1,
//   "output_dir": "out",
//   "solver":   {"nu": 0.5, "omega": 0, "N": 21, "steps_per_period": 1000,
//                "oversample": 1, "nonlinear": true},
//   "forcing":  [{"mode": 1, "amplitude": 0.1, "profile": "cosine", "q": 1, "phase": 0}],
//   "zonal_forcing": [...],            // almost-zonal only
//   "kicks":    {"b": [0.1, 0.05], "law": "uniform"}
//            or {"rule": {"D": 1, "M": 2, "N_pos": 8, "amplitude_above_M": 0.01}, "law": "beta"},
//   "initial":   {"modes": [{"mode": 1, "amplitude": 1}], "random_norm": 0.5},
//   "initial_v": {...},                // second start for mixing/coupling/almost-zonal
//   "params":   {"K": 20, "n_chains": 64, ...}
// }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spherekick/kicks.hpp"
#include "spherekick/measure.hpp"

namespace spherekick {

inline constexpr const char* experiment_names[] = {
    "simulate", "chain",  "ensemble",     "verify-identities", "verify-energy",  "contraction",    "gamma",
    "ball",     "zonal",  "almost-zonal", "periodic-orbit",    "mixing",         "probe-stability"};

bool is_experiment(const std::string& name);

struct KickRule {
  std::optional<double> d;  ///< defaults to D(f)
  int m = 1;
  int n_pos = 1;
  std::optional<double> amplitude_above_m;  ///< defaults to 0.01 D
};

struct ModeAmplitude {
  int mode = 1;
  double amplitude = 0.0;
};

/// Initial velocity: sum of mode amplitudes plus an optional random smooth
/// field of given H norm drawn from sampler stream `random_stream`.
struct InitialSpec {
  std::vector<ModeAmplitude> modes;
  double random_norm = 0.0;
  std::uint64_t random_stream = 0;
};

struct ExperimentParams {
  int K = 20;
  int n_chains = 64;
  int chain = 0;  ///< chain index for "chain"
  int periods = 10;
  int record_every = 0;  ///< steps; 0 means one record per period
  double R = 1.0;
  double r = 0.5;
  std::vector<int> cutoffs{3, 8, 15, 24};
  int n_pairs = 16;
  int n_samples = 16;
  double tol = 1e-8;
  int j_max = 4;
  int M = 1;
  double delta = 0.1;
  int horizon = 10;
  double threshold = 1e-4;
  std::vector<double> scales;
  double perturbation_norm = 0.1;
  std::string ball_mode = "origin";
  std::string observable = "rational";  ///< rational | clipnorm | coordinate
  int observable_mode = 1;
  double observable_scale = 1.0;
  bool common_streams = false;
  bool shared = true;
  int checkpoint_every = 0;
  std::string resume;  ///< checkpoint path for "chain"
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  SolverParams solver;
  ForcingSpec forcing;
  ForcingSpec zonal_forcing;
  std::vector<double> kick_b;
  std::optional<KickRule> kick_rule;
  NoiseLaw law = NoiseLaw::uniform;
  InitialSpec initial;
  InitialSpec initial_v;
  ExperimentParams params;

  /// Explicit b list, or the big-kick rule resolved against D(f).
  KickSpec kick_spec() const;
  FlowState initial_state(const InitialSpec& spec) const;
};

/// Thrown by parse_config with every violation, one per line.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Canonical JSON with every default filled in.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical JSON without output_dir.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace spherekick
