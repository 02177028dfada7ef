#pragma once

// Numerical self-checks run by the verify-identities and verify-energy
// experiments.

#include <cstdint>
#include <string>
#include <vector>

#include "spherekick/dynamics.hpp"

namespace spherekick {

struct IdentityCheck {
  std::string name;
  double max_error = 0.0;  ///< relative to the natural norm product
  double tolerance = 0.0;
  int samples = 0;
  bool passed() const noexcept { return max_error <= tolerance; }
};

/// Transform roundtrip, Parseval, Laplacian eigenvalues, Jacobian
/// antisymmetry and zero mean, trilinear cancellations, Coriolis
/// orthogonality and the Poincare inequality on `n_fields` random fields.
std::vector<IdentityCheck> verify_identities(const SphericalTransform& tr, int n_fields, std::uint64_t seed,
                                             double omega = 1.0);

struct EnergyCheck {
  int config = 0;
  double max_ratio_h = 0.0;  ///< max over t of ||u(t)||_H^2 / bound
  double max_ratio_v = 0.0;  ///< same for the V norm
};

/// ||u(t)||^2 <= ||u0||^2 e^{-2 nu t} + F^2 / (2 nu^2) (1 - e^{-2 nu t}) in H
/// and in V, checked at every step for random (u0, f).
std::vector<EnergyCheck> verify_energy(const NavierStokesSolver& solver, int n_configs, int periods,
                                       std::uint64_t seed, int workers = 1);

}  // namespace spherekick
