#pragma once

// Random kicks eta_k = sum_j b_j zeta_jk e_j applied at integer times, and the
// kicked chain u^{k+1} = S u^k + eta_{k+1}.

#include <cstdint>
#include <string>
#include <vector>

#include "spherekick/dynamics.hpp"

namespace spherekick {

/// SplitMix64 finalizer (Stafford variant 13). Used both for deriving stream
/// keys and as the output function of RngStream.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// Counter-based random stream. Draw number i of the stream with key K is
/// mix64(K ^ mix64(i)); the key of substream s under a master seed is
/// mix64(seed ^ mix64(s + 0x9e3779b97f4a7c15)). The position is the number of
/// draws consumed, so a stream can be checkpointed and resumed exactly.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : seed_(master_seed),
        index_(stream_index),
        key_(mix64(master_seed ^ mix64(stream_index + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(position_++)); }
  /// Uniform on [0, 1) with 53 random bits.
  double next_uniform() noexcept { return double(next_u64() >> 11) * 0x1.0p-53; }
  /// Standard normal by Box-Muller; consumes two draws.
  double next_normal() noexcept;

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t stream_index() const noexcept { return index_; }
  std::uint64_t position() const noexcept { return position_; }
  void seek(std::uint64_t position) noexcept { position_ = position; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t index_ = 0;
  std::uint64_t key_ = mix64(0x9e3779b97f4a7c15ULL);
  std::uint64_t position_ = 0;
};

/// Laws for zeta, all supported on [-1, 1] with positive mass near 0.
enum class NoiseLaw {
  uniform,     ///< density 1/2
  triangular,  ///< density 1 - |r|
  beta,        ///< 2X - 1 with X ~ Beta(2, 2), density 3/4 (1 - r^2)
};

const char* to_string(NoiseLaw law) noexcept;
NoiseLaw noise_law_from_string(const std::string& name);

/// Inverse CDF of the law at u in [0, 1).
double noise_quantile(NoiseLaw law, double u) noexcept;
/// P(|zeta| < eps).
double noise_mass_near_zero(NoiseLaw law, double eps) noexcept;
/// E zeta^2.
double noise_second_moment(NoiseLaw law) noexcept;

struct KickSpec {
  std::vector<double> b;  ///< b_j for j = 1..b.size(); zero beyond
  NoiseLaw law = NoiseLaw::uniform;
  std::uint64_t seed = 0;

  double coefficient(int j) const noexcept {
    return j >= 1 && std::size_t(j) <= b.size() ? b[std::size_t(j - 1)] : 0.0;
  }
  /// B0 = sum b_j^2.
  double b0() const noexcept;
  void validate(int truncation) const;
};

struct KickSample {
  std::vector<double> zeta;  ///< one value per mode j = 1..J
  SpectralScalar field;      ///< streamfunction of eta
};

/// Draws exactly J = N(N+2) values from the stream regardless of b.
KickSample sample_kick(const KickSpec& spec, int truncation, RngStream& rng);

/// Adds eta to the velocity (vorticity += Lap psi_eta); time unchanged.
FlowState apply_kick(FlowState state, const KickSample& kick);

struct ChainState {
  FlowState state;  ///< post-kick state at integer time k
  long long k = 0;
  RngStream rng;

  friend bool operator==(const ChainState&, const ChainState&) = default;
};

/// Chain `chain_index` of the ensemble seeded by spec.seed, starting at u0.
ChainState make_chain(const FlowState& u0, const KickSpec& spec, std::uint64_t chain_index);

/// One period of deterministic flow followed by a fresh kick.
ChainState chain_step(const NavierStokesSolver& solver, ChainState c, const ForcingSpec& f, const KickSpec& spec);

/// b_1 = 2D, b_j = 2D / sqrt(lambda_j) for 2 <= j <= M, b_j = amplitude_above_m
/// for M < j <= n_pos, zero beyond.
KickSpec big_kick_spec(double d, int m, int n_pos, double amplitude_above_m, NoiseLaw law = NoiseLaw::uniform,
                       std::uint64_t seed = 0);

/// sqrt((F^2 / (nu^2 lambda_1) + B0) / (1 - exp(-lambda_1 nu))): support
/// radius of the kicked chain about the origin.
double support_radius_origin(double forcing_sup, double nu, double b0);
/// sqrt(B0) / (1 - exp(-L)) about an attracting solution with rate L.
double support_radius_attractor(double b0, double rate);

}  // namespace spherekick
