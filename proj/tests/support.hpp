#pragma once

#include <cmath>
#include <cstdint>

#include "spherekick/measure.hpp"

namespace spherekick::testing {

/// Reproducible smooth streamfunction with ||u||_H = h_norm.
inline SpectralScalar random_field(int N, std::uint64_t seed, std::uint64_t index = 0, double h_norm = 1.0) {
  RngStream rng(seed, sampler_stream_base + 500 + index);
  return sample_smooth_field(N, h_norm, rng);
}

/// Every coefficient drawn N(0, 1), including high degrees.
inline SpectralScalar rough_field(int N, std::uint64_t seed) {
  RngStream rng(seed, sampler_stream_base + 900);
  SpectralScalar s(N);
  for (int n = 1; n <= N; ++n) {
    for (int m = 0; m <= n; ++m) s(n, m) = complex_t(rng.next_normal(), m > 0 ? rng.next_normal() : 0.0);
  }
  return s;
}

inline double coeff_distance(const SpectralScalar& a, const SpectralScalar& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.coeffs().size(); ++i) s += std::norm(a.coeffs()[i] - b.coeffs()[i]);
  return std::sqrt(s);
}

inline double coeff_size(const SpectralScalar& a) { return coeff_distance(a, SpectralScalar(a.truncation())); }

}  // namespace spherekick::testing
