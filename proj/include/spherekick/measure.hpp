#pragma once

// Monte Carlo over kicked chains and estimators built on the period map:
// observable mixing, coupled distances, contraction constants, gamma_N,
// absorbing balls, zonal stability, periodic orbits and stability probes.
//
// Every estimator is deterministic given its seed: chain i always uses stream
// i of the master seed, and reductions run in chain order.

#include <cstdint>
#include <string>
#include <vector>

#include "spherekick/kicks.hpp"

namespace spherekick {

//---------------------------------------------------------------------------//
// Observables
//---------------------------------------------------------------------------//

enum class ObservableKind { bounded_rational, clipped_norm, coordinate };

/// Bounded Lipschitz functional on H, evaluated on a streamfunction.
///   bounded_rational: 1 / (1 + ||u - w||_H^2)      Lipschitz 3 sqrt(3) / 8
///   clipped_norm:     min(1, ||u||_H / R0)         Lipschitz 1 / R0
///   coordinate:       clamp(<u, e_j>_H, -c, c)     Lipschitz 1
struct Observable {
  ObservableKind kind = ObservableKind::clipped_norm;
  SpectralScalar probe;  ///< w (bounded_rational)
  double scale = 1.0;    ///< R0 (clipped_norm) or c (coordinate)
  int mode = 1;          ///< j (coordinate)

  static Observable bounded_rational(SpectralScalar w);
  static Observable clipped_norm(double r0);
  static Observable coordinate(int j, double c);

  double operator()(const SpectralScalar& psi) const;
  double lipschitz() const;
  std::string id() const;
};

//---------------------------------------------------------------------------//
// Sampling
//---------------------------------------------------------------------------//

/// Streams at or above this index are reserved for field sampling so that
/// they never collide with kick streams.
inline constexpr std::uint64_t sampler_stream_base = std::uint64_t(1) << 62;

/// Random smooth streamfunction: independent Gaussian mode coordinates with
/// variance lambda_j^{-2}, rescaled so that ||u||_H = h_norm exactly.
SpectralScalar sample_smooth_field(int truncation, double h_norm, RngStream& rng);

/// Field with ||u||_H = radius * U, U uniform on [0, 1); direction as in
/// sample_smooth_field.
SpectralScalar sample_in_ball(int truncation, double radius, RngStream& rng);

//---------------------------------------------------------------------------//
// Least squares fit of y = C exp(-c t)
//---------------------------------------------------------------------------//

struct ExponentialFit {
  double rate = 0.0;       ///< c
  double prefactor = 0.0;  ///< C
  double log_range = 0.0;  ///< max - min of log y over fitted points
  double max_log_residual = 0.0;
  int points = 0;

  bool valid() const noexcept { return points >= 2; }
  /// max |log residual| / range of log y; 0 for fewer than 3 points.
  double residual_fraction() const noexcept {
    return log_range > 0.0 ? max_log_residual / log_range : 0.0;
  }
};

/// Ordinary least squares on log y. Non-positive y are skipped.
ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y);

//---------------------------------------------------------------------------//
// Ensembles
//---------------------------------------------------------------------------//

struct EnsembleConfig {
  int n_chains = 64;
  int steps = 20;  ///< K
  int workers = 1;
  std::uint64_t stream_offset = 0;  ///< chain i uses stream stream_offset + i
};

struct EnsembleStats {
  int n_chains = 0;
  int steps = 0;
  std::vector<std::string> observable_ids;
  /// [k][observable], k = 0..K
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> std_error;
  /// H norm statistics per k
  std::vector<double> norm_mean, norm_min, norm_q05, norm_median, norm_q95, norm_max;
};

/// Runs n_chains kicked chains from u0 for K steps.
EnsembleStats run_ensemble(const NavierStokesSolver& solver, const FlowState& u0, const ForcingSpec& f,
                           const KickSpec& kick, const std::vector<Observable>& observables,
                           const EnsembleConfig& cfg);

struct MixingConfig {
  EnsembleConfig ensemble;
  /// Both ensembles use the same kick streams (exact zero gap when u0 = v0).
  bool common_streams = false;
  /// Run an identical-start control pair to estimate the noise floor.
  bool control = true;
};

struct MixingReport {
  std::string observable_id;
  std::vector<double> gap;         ///< |mean_k h(u0) - mean_k h(v0)|, k = 0..K
  std::vector<double> half_width;  ///< 3 sigma of the difference of means
  std::vector<double> control_gap;
  std::vector<double> control_half_width;
  double noise_floor = 0.0;  ///< RMS of the control gap over k >= 1
  ExponentialFit fit;        ///< on gap[0..], stopping at the first value <= 3 floor
  bool inconclusive = false;
  /// Control gap within its 3 sigma band at every k.
  bool control_consistent = true;
};

MixingReport observable_gap_series(const NavierStokesSolver& solver, const FlowState& u0, const FlowState& v0,
                                   const ForcingSpec& f, const KickSpec& kick, const Observable& h,
                                   const MixingConfig& cfg);

//---------------------------------------------------------------------------//
// Coupling
//---------------------------------------------------------------------------//

struct CouplingSeries {
  std::vector<double> distance;           ///< ||u^k - v^k||_H, k = 0..K
  std::vector<double> pre_kick_distance;  ///< ||S u^{k-1} - S v^{k-1}||_H, k = 1..K (index 0 unused)
  ExponentialFit fit;
  int steps_run = 0;
};

struct CouplingConfig {
  int steps = 40;
  bool shared = true;
  std::uint64_t stream = 0;  ///< u uses this stream; v uses it too if shared, else stream + 1
  /// Stop once the distance falls to this value (0 = never).
  double stop_below = 0.0;
};

CouplingSeries coupled_distance(const NavierStokesSolver& solver, const FlowState& u0, const FlowState& v0,
                                const ForcingSpec& f, const KickSpec& kick, const CouplingConfig& cfg);

/// Smallest k such that the series never increases from index k on; the last
/// index when the series ends with an increase.
int monotone_from(const std::vector<double>& series);

//---------------------------------------------------------------------------//
// Deterministic contraction constants
//---------------------------------------------------------------------------//

struct ContractionConfig {
  double big_radius = 2.0;    ///< R
  double small_radius = 0.5;  ///< r
  int n_samples = 16;
  int max_periods = 10;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct ContractionReport {
  double big_radius = 0.0;
  double small_radius = 0.0;
  int samples = 0;
  /// a(n) = max over samples with ||u0||_H > r of (||S_n u0||_H - D) / ||u0||_H
  std::vector<double> a_by_n;
  double a = 1.0;  ///< at n0
  int n0 = 0;      ///< smallest n with a(n) < 1 and the ball bound holding; 0 if none
  double d = 0.0;         ///< measured: max over n of ||S_n 0||_H
  double d_theory = 0.0;  ///< D(f) = ||f||_{L^inf(H)} / (nu sqrt(2))
  /// max over samples and n >= n0 of ||S_n u0|| - max(a ||u0|| + D, r + D); <= 0 when satisfied
  double worst_excess = 0.0;
  double lipschitz = 0.0;  ///< max ||S u0 - S v0|| / ||u0 - v0|| over sampled pairs
  bool passed() const noexcept { return n0 > 0 && a < 1.0 && worst_excess <= 0.0; }
};

ContractionReport contraction_constants(const NavierStokesSolver& solver, const ForcingSpec& f,
                                        const ContractionConfig& cfg);

/// ||S u0 - S v0||_H / ||u0 - v0||_H. Throws argument if u0 == v0.
double one_step_ratio(const NavierStokesSolver& solver, const FlowState& u0, const FlowState& v0,
                      const ForcingSpec& f);

//---------------------------------------------------------------------------//
// Smoothing of high modes
//---------------------------------------------------------------------------//

struct GammaConfig {
  double radius = 1.0;  ///< R
  std::vector<int> cutoffs;
  int n_pairs = 16;  ///< random pairs in B_H(R)
  /// Add, for each cutoff N < J, a pair differing only along e_{N+1}.
  bool aligned_pairs = true;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct GammaReport {
  std::vector<int> cutoffs;
  std::vector<double> gamma;
  std::vector<int> argmax_pair;  ///< pair attaining the max, per cutoff
  int pairs = 0;
  bool monotone = true;  ///< non-increasing in the cutoff
};

GammaReport gamma_n(const NavierStokesSolver& solver, const ForcingSpec& f, const GammaConfig& cfg);

//---------------------------------------------------------------------------//
// Periodic orbits
//---------------------------------------------------------------------------//

struct PeriodicOrbit {
  bool converged = false;
  int period = 0;         ///< j
  FlowState limit;        ///< state at the last integer time reached
  std::vector<FlowState> cycle;  ///< limit, S limit, ..., S^{j-1} limit
  double residual = 0.0;  ///< ||S^j u_inf - u_inf||_H
  double rate = 0.0;      ///< alpha fitted on ||S^{k+j} u - S^k u||
  int iterations = 0;
  std::vector<double> increments;  ///< ||u_k - u_{k-j}|| for the detected j (or j = 1)
};

/// Iterates the period map from u0 until some j <= j_max satisfies
/// ||u_{k-i} - u_{k-i-j}||_H < tol for every phase i < j.
PeriodicOrbit periodic_orbit_find(const NavierStokesSolver& solver, const ForcingSpec& f, const FlowState& u0,
                                  double tol, int k_max, int j_max);

//---------------------------------------------------------------------------//
// Absorbing balls
//---------------------------------------------------------------------------//

enum class BallMode { origin, attractor };

struct BallConfig {
  int n_chains = 256;
  int steps = 200;
  int workers = 1;
  BallMode mode = BallMode::origin;
  const PeriodicOrbit* orbit = nullptr;  ///< required for attractor mode
  double slack = 1e-3;
};

struct BallReport {
  BallMode mode = BallMode::origin;
  double radius = 0.0;  ///< theoretical
  int burn_in = 0;      ///< K / 4
  std::vector<double> sup_by_k;  ///< max over chains of the distance to the centre
  double empirical_sup = 0.0;    ///< over k >= burn_in
  double max_distance = 0.0;     ///< over all k
  double slack = 0.0;
  int entry_step = -1;  ///< first k after which every sup_by_k stays within radius (1 + slack)
  bool entered() const noexcept { return entry_step >= 0; }
  bool contained() const noexcept { return empirical_sup <= radius * (1.0 + slack); }
};

BallReport absorbing_ball(const NavierStokesSolver& solver, const FlowState& u0, const ForcingSpec& f,
                          const KickSpec& kick, const BallConfig& cfg);

//---------------------------------------------------------------------------//
// Zonal and almost zonal stability
//---------------------------------------------------------------------------//

struct StabilitySeries {
  std::vector<double> t;
  std::vector<double> distance;    ///< ||u(t) - u_ref(t)||_{H^1}
  std::vector<double> distance_h;  ///< ||u(t) - u_ref(t)||_H
  ExponentialFit fit;              ///< on distance^2 for t >= 1/2
};

struct ZonalReport {
  std::vector<StabilitySeries> perturbations;
  double min_rate = 0.0;  ///< smallest fitted rate of the squared H^1 distance
  /// Max over sampled t of the nonzonal energy fraction of the unperturbed run.
  double max_nonzonal_fraction = 0.0;
};

/// Runs the zonal reference from u_zonal and each perturbed start for
/// `periods`, sampling `samples_per_period` times per period.
ZonalReport zonal_stability(const NavierStokesSolver& solver, const ForcingSpec& f_zonal,
                            const FlowState& u_zonal, const std::vector<SpectralScalar>& perturbations,
                            int periods, int samples_per_period = 10);

struct AlmostZonalScan {
  double scale = 0.0;
  double delta = 0.0;  ///< ||f - g||_{L^inf(H)}
  double final_distance = 0.0;
  bool converged = false;
};

struct AlmostZonalReport {
  double delta = 0.0;
  StabilitySeries series;
  double final_distance = 0.0;
  bool converged = false;
  std::vector<AlmostZonalScan> scan;
  double largest_converged_delta = 0.0;
};

/// Two g-forced runs from u0 and v0 for `periods`, sampled at integer times;
/// converged means the H distance drops below `threshold` at some sample. The scan repeats this with
/// g_s = f + s (g - f) for each s in `scales`.
AlmostZonalReport almost_zonal(const NavierStokesSolver& solver, const ForcingSpec& f_zonal, const ForcingSpec& g,
                               const FlowState& u0, const FlowState& v0, int periods, double threshold,
                               const std::vector<double>& scales = {});

//---------------------------------------------------------------------------//
// Finite stability probe
//---------------------------------------------------------------------------//

struct ProbeConfig {
  int m = 1;  ///< M
  double delta = 0.1;
  double radius = 1.0;  ///< R for the high modes
  int n_samples = 16;
  int horizon = 10;  ///< periods
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct ProbeReport {
  int samples = 0;
  double fraction = 0.0;
  double min = 0.0, median = 0.0, max = 0.0;
  std::vector<double> terminal;
};

/// Throws precondition if ||u_candidate||_H exceeds D(f) (plus 1e-9 relative).
ProbeReport finite_stability_probe(const NavierStokesSolver& solver, const ForcingSpec& f,
                                   const FlowState& u_candidate, const ProbeConfig& cfg);

}  // namespace spherekick
