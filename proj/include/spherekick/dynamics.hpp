#pragma once

// Deterministic Navier-Stokes flow on the rotating unit sphere in
// streamfunction-vorticity form,
//
//   d omega/dt + J(psi, omega) + 2 Omega d psi/d lambda = nu Lap omega + g_omega,
//   omega = Lap psi,
//
// with a 1-periodic forcing given as a list of velocity modes, plus the
// trilinear and Coriolis forms of the velocity formulation.

#include <array>
#include <memory>
#include <utility>
#include <vector>

#include "spherekick/spectral.hpp"

namespace spherekick {

struct SolverParams {
  double nu = 0.5;
  double omega = 0.0;  ///< rotation rate; Coriolis parameter is 2 omega sin(phi)
  int truncation = 21;
  int steps_per_period = 1000;
  double oversample = 1.0;
  /// Test hook: drop J(psi, omega) so the flow is linear.
  bool nonlinear = true;

  double dt() const noexcept { return 1.0 / steps_per_period; }
  /// nu >= 0 (nu = 0 is allowed for inviscid checks), omega >= 0, N >= 1,
  /// steps_per_period >= 1.
  void validate() const;
};

struct FlowState {
  SpectralScalar vorticity;  ///< mean-free
  double t = 0.0;            ///< in forcing periods

  SpectralScalar streamfunction() const { return invert_laplacian(vorticity); }
  static FlowState from_streamfunction(const SpectralScalar& psi, double t = 0.0);
  static FlowState zero(int truncation, double t = 0.0) { return {SpectralScalar(truncation), t}; }

  friend bool operator==(const FlowState&, const FlowState&) = default;
};

//---------------------------------------------------------------------------//
// Forcing
//---------------------------------------------------------------------------//

enum class Profile { constant, cosine, sine };

/// amplitude * profile(2 pi q t + phase) * e_mode
struct ForcingTerm {
  int mode = 1;
  double amplitude = 0.0;
  Profile profile = Profile::constant;
  int q = 1;
  double phase = 0.0;

  double temporal(double t) const;
};

struct ForcingSpec {
  std::vector<ForcingTerm> terms;

  void validate(int truncation) const;
  /// True if every term acts on an m = 0 mode.
  bool zonal() const;
  bool empty() const noexcept { return terms.empty(); }
};

/// f(t) as a streamfunction (velocity in H).
SpectralScalar forcing_eval(const ForcingSpec& f, double t, int truncation);

/// ||f||_{L^inf(H)}: dense sampling over one period followed by golden-section
/// refinement around the best sample.
double forcing_sup_norm(const ForcingSpec& f, int samples = 2048);

/// f - g as a single term list.
ForcingSpec forcing_difference(const ForcingSpec& f, const ForcingSpec& g);

/// Deterministic absorbing radius D(f) = ||f||_{L^inf(H)} / (nu sqrt(lambda_1)).
double absorbing_radius(double forcing_sup, double nu);

//---------------------------------------------------------------------------//
// Solver
//---------------------------------------------------------------------------//

struct TrajectoryRecord {
  std::vector<double> t;
  std::vector<double> norm_h;
  std::vector<double> norm_v;
  std::vector<double> norm_h2;
  std::vector<FlowState> snapshots;

  void push(const FlowState& s, bool keep_snapshot);
};

/// Fixed-step integrating-factor RK4: diffusion is applied exactly through
/// exp(-nu n(n+1) dt); advection, Coriolis and forcing go through classical
/// RK4 in the transformed variable. Immutable; share freely across threads.
class NavierStokesSolver {
 public:
  explicit NavierStokesSolver(SolverParams params);
  NavierStokesSolver(SolverParams params, std::shared_ptr<const SphericalTransform> transform);

  const SolverParams& params() const noexcept { return params_; }
  const SphericalTransform& transform() const noexcept { return *transform_; }
  std::shared_ptr<const SphericalTransform> shared_transform() const noexcept { return transform_; }
  int truncation() const noexcept { return params_.truncation; }

  /// d omega / dt at state.t.
  SpectralScalar vorticity_rhs(const FlowState& state, const ForcingSpec& f) const;

  FlowState step(const FlowState& state, const ForcingSpec& f) const;

  /// Steps until t_target, which must lie a whole number of steps ahead.
  /// When `record` is given the initial state and every `record_every`-th
  /// step are appended; snapshots are kept if `snapshots` is set.
  FlowState advance(FlowState state, const ForcingSpec& f, double t_target, TrajectoryRecord* record = nullptr,
                    int record_every = 1, bool snapshots = false) const;

  /// Period map S applied `periods` times.
  FlowState advance_periods(FlowState state, const ForcingSpec& f, int periods = 1) const;

 private:
  SpectralScalar explicit_terms(const SpectralScalar& vorticity, double t, const ForcingSpec& f) const;
  void scale_by_degree(SpectralScalar& s, const std::vector<double>& factor) const;

  SolverParams params_;
  std::shared_ptr<const SphericalTransform> transform_;
  std::vector<double> decay_half_;  // per degree, exp(-nu lambda_n dt / 2)
  std::vector<double> decay_full_;
};

/// Vorticity source of a velocity forcing: Lap(psi_f).
SpectralScalar forcing_vorticity(const ForcingSpec& f, double t, int truncation);

//---------------------------------------------------------------------------//
// Trilinear and Coriolis forms (Gauss quadrature, exact for band-limited input)
//---------------------------------------------------------------------------//

/// Streamfunction of Au (Stokes operator): -Lap(psi).
SpectralScalar stokes_operator(const SpectralScalar& psi);

/// Cartesian components of u = n x grad(psi) on the grid.
std::array<GridScalar, 3> cartesian_velocity(const SphericalTransform& tr, const SpectralScalar& psi);

/// b(u, v, w) = <(u . grad) v, w> for velocities given by streamfunctions.
double trilinear(const SphericalTransform& tr, const SpectralScalar& u, const SpectralScalar& v,
                 const SpectralScalar& w);

/// <2 Omega sin(phi) n x u, w>.
double coriolis_form(const SphericalTransform& tr, double omega, const SpectralScalar& u, const SpectralScalar& w);

/// <2 Omega sin(phi) n x u, A^r u>, r in {0, 1}.
double coriolis_inner(const SphericalTransform& tr, double omega, const SpectralScalar& u, int r);

/// (b(u, v, Av), b(v, u, Av)) for zonal u. Throws precondition if u has
/// m != 0 content beyond 1e-14.
std::pair<double, double> zonal_trilinear_checks(const SphericalTransform& tr, const SpectralScalar& u_zonal,
                                                 const SpectralScalar& v);

}  // namespace spherekick
