#pragma once

// Binary chain checkpoints. All fields little-endian:
//
//   magic            8 bytes  "SPHKCKPT"
//   version          u32      1
//   N                i32
//   nu, omega, t     f64
//   k                i64
//   seed             u64
//   chain_index      u64
//   rng_position     u64
//   payload_count    u64      (N+1)(N+2)/2
//   payload          payload_count x (real f64, imag f64), (n, m) row-major

#include <cstdint>
#include <filesystem>

#include "spherekick/kicks.hpp"

namespace spherekick {

inline constexpr std::uint32_t checkpoint_version = 1;

struct CheckpointMeta {
  int truncation = 0;
  double nu = 0.0;
  double omega = 0.0;
  double t = 0.0;
  long long k = 0;
  std::uint64_t seed = 0;
  std::uint64_t chain_index = 0;
  std::uint64_t rng_position = 0;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  CheckpointMeta meta;
  FlowState state;
};

void save_checkpoint(const FlowState& state, const CheckpointMeta& meta, const std::filesystem::path& path);
void save_checkpoint(const ChainState& chain, const SolverParams& params, const std::filesystem::path& path);

/// Throws Errc::format naming the offending field on a bad or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Chain positioned exactly where the checkpoint was taken.
ChainState restore_chain(const Checkpoint& cp);

}  // namespace spherekick
