#include "spherekick/kicks.hpp"

#include <cmath>

namespace spherekick {

double RngStream::next_normal() noexcept {
  const double u1 = 1.0 - next_uniform();  // (0, 1]
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

const char* to_string(NoiseLaw law) noexcept {
  switch (law) {
    case NoiseLaw::uniform: return "uniform";
    case NoiseLaw::triangular: return "triangular";
    case NoiseLaw::beta: return "beta";
  }
  return "uniform";
}

NoiseLaw noise_law_from_string(const std::string& name) {
  if (name == "uniform") return NoiseLaw::uniform;
  if (name == "triangular") return NoiseLaw::triangular;
  if (name == "beta") return NoiseLaw::beta;
  throw Error(Errc::argument, "unknown noise law '" + name + "' (expected uniform, triangular or beta)");
}

double noise_quantile(NoiseLaw law, double u) noexcept {
  switch (law) {
    case NoiseLaw::uniform: return 2.0 * u - 1.0;
    case NoiseLaw::triangular: return u < 0.5 ? -1.0 + std::sqrt(2.0 * u) : 1.0 - std::sqrt(2.0 * (1.0 - u));
    case NoiseLaw::beta:
      // 3x^2 - 2x^3 = u with x = (1 + zeta) / 2 has the root zeta = 2 sin(asin(2u - 1) / 3).
      return 2.0 * std::sin(std::asin(2.0 * u - 1.0) / 3.0);
  }
  return 0.0;
}

double noise_mass_near_zero(NoiseLaw law, double eps) noexcept {
  if (eps >= 1.0) return 1.0;
  if (eps <= 0.0) return 0.0;
  switch (law) {
    case NoiseLaw::uniform: return eps;
    case NoiseLaw::triangular: return 1.0 - (1.0 - eps) * (1.0 - eps);
    case NoiseLaw::beta: return 1.5 * eps - 0.5 * eps * eps * eps;
  }
  return 0.0;
}

double noise_second_moment(NoiseLaw law) noexcept {
  switch (law) {
    case NoiseLaw::uniform: return 1.0 / 3.0;
    case NoiseLaw::triangular: return 1.0 / 6.0;
    case NoiseLaw::beta: return 0.2;
  }
  return 0.0;
}

double KickSpec::b0() const noexcept {
  double s = 0.0;
  for (double x : b) s += x * x;
  return s;
}

void KickSpec::validate(int truncation) const {
  if (b.size() > std::size_t(mode_count(truncation))) {
    throw Error(Errc::argument, "kick list has " + std::to_string(b.size()) + " coefficients but only " +
                                    std::to_string(mode_count(truncation)) + " modes exist at N=" +
                                    std::to_string(truncation));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!(b[i] >= 0.0) || !std::isfinite(b[i])) {
      throw Error(Errc::argument, "b_" + std::to_string(i + 1) + " must be finite and >= 0");
    }
  }
}

KickSample sample_kick(const KickSpec& spec, int truncation, RngStream& rng) {
  const int modes = mode_count(truncation);
  KickSample out{std::vector<double>(std::size_t(modes)), SpectralScalar(truncation)};
  for (int j = 1; j <= modes; ++j) {
    const double zeta = noise_quantile(spec.law, rng.next_uniform());
    out.zeta[std::size_t(j - 1)] = zeta;
    const double bj = spec.coefficient(j);
    if (bj != 0.0) {
      const HarmonicIndex h = ModeOrdering::decode(j);
      add_real_component(out.field, h, bj * zeta / std::sqrt(h.eigenvalue()));
    }
  }
  return out;
}

FlowState apply_kick(FlowState state, const KickSample& kick) {
  const SpectralScalar& psi = kick.field;
  if (psi.truncation() != state.vorticity.truncation()) {
    throw Error(Errc::dimension, "kick truncation does not match state");
  }
  const int N = psi.truncation();
  for (int m = 0; m <= N; ++m) {
    for (int n = std::max(m, 1); n <= N; ++n) {
      const complex_t c = psi(n, m);
      if (c != complex_t{}) state.vorticity(n, m) += -degree_eigenvalue(n) * c;
    }
  }
  return state;
}

ChainState make_chain(const FlowState& u0, const KickSpec& spec, std::uint64_t chain_index) {
  return {u0, std::llround(u0.t), RngStream(spec.seed, chain_index)};
}

ChainState chain_step(const NavierStokesSolver& solver, ChainState c, const ForcingSpec& f, const KickSpec& spec) {
  try {
    c.state = solver.advance_periods(std::move(c.state), f, 1);
  } catch (const Error& e) {
    if (e.code() != Errc::blow_up) throw;
    throw Error(Errc::blow_up, "chain " + std::to_string(c.rng.stream_index()) + " at k=" +
                                   std::to_string(c.k + 1) + ": " + e.what());
  }
  const KickSample kick = sample_kick(spec, solver.truncation(), c.rng);
  c.state = apply_kick(std::move(c.state), kick);
  ++c.k;
  return c;
}

KickSpec big_kick_spec(double d, int m, int n_pos, double amplitude_above_m, NoiseLaw law, std::uint64_t seed) {
  if (!(d > 0.0)) throw Error(Errc::argument, "big kick rule needs D > 0");
  if (m < 1) throw Error(Errc::argument, "big kick rule needs M >= 1");
  if (m > n_pos) {
    throw Error(Errc::argument, "big kick rule needs M <= N_pos (M=" + std::to_string(m) +
                                    ", N_pos=" + std::to_string(n_pos) + ")");
  }
  if (n_pos > m && !(amplitude_above_m > 0.0)) {
    throw Error(Errc::argument, "amplitude_above_M must be > 0");
  }
  KickSpec spec;
  spec.law = law;
  spec.seed = seed;
  spec.b.resize(std::size_t(n_pos));
  spec.b[0] = 2.0 * d;
  for (int j = 2; j <= m; ++j) spec.b[std::size_t(j - 1)] = 2.0 * d / std::sqrt(ModeOrdering::decode(j).eigenvalue());
  for (int j = m + 1; j <= n_pos; ++j) spec.b[std::size_t(j - 1)] = amplitude_above_m;
  return spec;
}

double support_radius_origin(double forcing_sup, double nu, double b0) {
  const double lambda_1 = 2.0;
  return std::sqrt((forcing_sup * forcing_sup / (nu * nu * lambda_1) + b0) / (1.0 - std::exp(-lambda_1 * nu)));
}

double support_radius_attractor(double b0, double rate) {
  return std::sqrt(b0) / (1.0 - std::exp(-rate));
}

}  // namespace spherekick
