#include "spherekick/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace spherekick {

namespace {

constexpr double lambda_1 = 2.0;

long long tick_of(double t, int steps_per_period) { return std::llround(t * steps_per_period); }

double time_of(long long tick, int steps_per_period) { return double(tick) / double(steps_per_period); }

bool all_finite(const SpectralScalar& s) {
  return std::all_of(s.coeffs().begin(), s.coeffs().end(),
                     [](const complex_t& c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); });
}

}  // namespace

void SolverParams::validate() const {
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw Error(Errc::argument, "nu must be >= 0");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw Error(Errc::argument, "omega must be >= 0");
  if (truncation < 1) throw Error(Errc::invalid_truncation, "N must be >= 1");
  if (steps_per_period < 1) throw Error(Errc::argument, "steps_per_period must be >= 1");
  if (!(oversample >= 1.0)) throw Error(Errc::argument, "oversample must be >= 1");
}

FlowState FlowState::from_streamfunction(const SpectralScalar& psi, double t) {
  SpectralScalar w = apply_laplacian(psi);
  if (w.size() > 0) w(0, 0) = 0.0;
  return {std::move(w), t};
}

//---------------------------------------------------------------------------//
// Forcing
//---------------------------------------------------------------------------//

double ForcingTerm::temporal(double t) const {
  switch (profile) {
    case Profile::constant: return 1.0;
    case Profile::cosine: return std::cos(2.0 * pi * q * t + phase);
    case Profile::sine: return std::sin(2.0 * pi * q * t + phase);
  }
  return 0.0;
}

void ForcingSpec::validate(int truncation) const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& term = terms[i];
    const std::string where = "forcing term " + std::to_string(i);
    if (term.mode < 1 || term.mode > mode_count(truncation)) {
      throw Error(Errc::index, where + ": mode " + std::to_string(term.mode) + " outside [1, " +
                                   std::to_string(mode_count(truncation)) + "]");
    }
    if (!std::isfinite(term.amplitude) || !std::isfinite(term.phase)) {
      throw Error(Errc::argument, where + ": amplitude and phase must be finite");
    }
    if (term.profile != Profile::constant && term.q < 1) {
      throw Error(Errc::argument, where + ": q must be >= 1");
    }
  }
}

bool ForcingSpec::zonal() const {
  return std::all_of(terms.begin(), terms.end(),
                     [](const ForcingTerm& t) { return ModeOrdering::decode(t.mode).m == 0; });
}

SpectralScalar forcing_eval(const ForcingSpec& f, double t, int truncation) {
  SpectralScalar psi(truncation);
  for (const auto& term : f.terms) {
    const HarmonicIndex h = ModeOrdering::decode(term.mode);
    if (h.n > truncation) throw Error(Errc::index, "forcing mode outside truncation");
    add_real_component(psi, h, term.amplitude * term.temporal(t) / std::sqrt(h.eigenvalue()));
  }
  return psi;
}

SpectralScalar forcing_vorticity(const ForcingSpec& f, double t, int truncation) {
  SpectralScalar w(truncation);
  for (const auto& term : f.terms) {
    const HarmonicIndex h = ModeOrdering::decode(term.mode);
    if (h.n > truncation) throw Error(Errc::index, "forcing mode outside truncation");
    add_real_component(w, h, -term.amplitude * term.temporal(t) * std::sqrt(h.eigenvalue()));
  }
  return w;
}

double forcing_sup_norm(const ForcingSpec& f, int samples) {
  if (f.terms.empty()) return 0.0;
  int max_mode = 1;
  for (const auto& term : f.terms) max_mode = std::max(max_mode, term.mode);
  int truncation = 1;
  while (mode_count(truncation) < max_mode) ++truncation;

  // ||f(t)||_H^2 is the sum over modes of the squared combined coefficient.
  auto norm_at = [&](double t) {
    std::vector<double> coeff(std::size_t(max_mode) + 1, 0.0);
    for (const auto& term : f.terms) coeff[std::size_t(term.mode)] += term.amplitude * term.temporal(t);
    double s = 0.0;
    for (double c : coeff) s += c * c;
    return std::sqrt(s);
  };

  samples = std::max(samples, 1024);
  double best = -1.0;
  int best_i = 0;
  for (int i = 0; i < samples; ++i) {
    const double v = norm_at(double(i) / samples);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  // Golden-section search on the bracket around the best sample.
  const double h = 1.0 / samples;
  double a = (best_i - 1) * h;
  double b = (best_i + 1) * h;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = norm_at(c);
  double fd = norm_at(d);
  for (int iter = 0; iter < 80; ++iter) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = norm_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = norm_at(d);
    }
  }
  return std::max({best, fc, fd});
}

ForcingSpec forcing_difference(const ForcingSpec& f, const ForcingSpec& g) {
  ForcingSpec out = f;
  for (ForcingTerm term : g.terms) {
    term.amplitude = -term.amplitude;
    out.terms.push_back(term);
  }
  return out;
}

double absorbing_radius(double forcing_sup, double nu) {
  if (!(nu > 0.0)) throw Error(Errc::argument, "absorbing radius needs nu > 0");
  return forcing_sup / (nu * std::sqrt(lambda_1));
}

//---------------------------------------------------------------------------//
// Solver
//---------------------------------------------------------------------------//

void TrajectoryRecord::push(const FlowState& s, bool keep_snapshot) {
  const SpectralScalar psi = s.streamfunction();
  t.push_back(s.t);
  norm_h.push_back(spectral_norm(psi, Norm::H));
  norm_v.push_back(spectral_norm(psi, Norm::V));
  norm_h2.push_back(spectral_norm(psi, Norm::H2));
  if (keep_snapshot) snapshots.push_back(s);
}

NavierStokesSolver::NavierStokesSolver(SolverParams params)
    : NavierStokesSolver(params, nullptr) {}

NavierStokesSolver::NavierStokesSolver(SolverParams params, std::shared_ptr<const SphericalTransform> transform)
    : params_(params), transform_(std::move(transform)) {
  params_.validate();
  if (!transform_) transform_ = std::make_shared<const SphericalTransform>(params_.truncation, params_.oversample);
  if (transform_->truncation() != params_.truncation) {
    throw Error(Errc::dimension, "transform truncation does not match solver truncation");
  }
  const double dt = params_.dt();
  decay_half_.resize(std::size_t(params_.truncation) + 1);
  decay_full_.resize(std::size_t(params_.truncation) + 1);
  for (int n = 0; n <= params_.truncation; ++n) {
    decay_half_[std::size_t(n)] = std::exp(-params_.nu * degree_eigenvalue(n) * dt * 0.5);
    decay_full_[std::size_t(n)] = std::exp(-params_.nu * degree_eigenvalue(n) * dt);
  }
}

void NavierStokesSolver::scale_by_degree(SpectralScalar& s, const std::vector<double>& factor) const {
  const int N = s.truncation();
  for (int m = 0; m <= N; ++m) {
    for (int n = m; n <= N; ++n) s(n, m) *= factor[std::size_t(n)];
  }
}

SpectralScalar NavierStokesSolver::explicit_terms(const SpectralScalar& vorticity, double t,
                                                  const ForcingSpec& f) const {
  const SpectralScalar psi = invert_laplacian(vorticity);
  SpectralScalar out = forcing_vorticity(f, t, params_.truncation);
  if (params_.nonlinear) {
    SpectralScalar advection = transform_->jacobian(psi, vorticity);
    advection(0, 0) = 0.0;
    out -= advection;
  }
  if (params_.omega != 0.0) {
    const int N = params_.truncation;
    const double two_omega = 2.0 * params_.omega;
    for (int m = 1; m <= N; ++m) {
      for (int n = m; n <= N; ++n) out(n, m) -= two_omega * complex_t(0.0, m) * psi(n, m);
    }
  }
  return out;
}

SpectralScalar NavierStokesSolver::vorticity_rhs(const FlowState& state, const ForcingSpec& f) const {
  SpectralScalar rhs = explicit_terms(state.vorticity, state.t, f);
  rhs += params_.nu * apply_laplacian(state.vorticity);
  return rhs;
}

FlowState NavierStokesSolver::step(const FlowState& state, const ForcingSpec& f) const {
  const int spp = params_.steps_per_period;
  const long long tick = tick_of(state.t, spp);
  const double h = params_.dt();
  const double t0 = time_of(tick, spp);
  const double t_half = (double(tick) + 0.5) / spp;
  const double t1 = time_of(tick + 1, spp);
  const SpectralScalar& w = state.vorticity;

  const SpectralScalar k1 = explicit_terms(w, t0, f);

  SpectralScalar w_half = w;  // E(h/2) w
  scale_by_degree(w_half, decay_half_);

  SpectralScalar stage = w + (0.5 * h) * k1;
  scale_by_degree(stage, decay_half_);
  const SpectralScalar k2 = explicit_terms(stage, t_half, f);

  stage = w_half + (0.5 * h) * k2;
  const SpectralScalar k3 = explicit_terms(stage, t_half, f);

  SpectralScalar k3_half = k3;
  scale_by_degree(k3_half, decay_half_);
  stage = w_half;
  scale_by_degree(stage, decay_half_);  // E(h) w
  stage += h * k3_half;
  const SpectralScalar k4 = explicit_terms(stage, t1, f);

  // w1 = E(h) w + h/6 [E(h) k1 + 2 E(h/2)(k2 + k3) + k4]
  SpectralScalar mid = k2 + k3;
  scale_by_degree(mid, decay_half_);
  SpectralScalar first = k1;
  scale_by_degree(first, decay_full_);
  SpectralScalar next = w;
  scale_by_degree(next, decay_full_);
  SpectralScalar incr = first + 2.0 * mid + k4;
  next += (h / 6.0) * incr;
  next(0, 0) = 0.0;

  if (!all_finite(next)) {
    throw Error(Errc::blow_up, "non-finite vorticity after step " + std::to_string(tick + 1) + " (t = " +
                                   std::to_string(t1) + ")");
  }
  return {std::move(next), t1};
}

FlowState NavierStokesSolver::advance(FlowState state, const ForcingSpec& f, double t_target,
                                      TrajectoryRecord* record, int record_every, bool snapshots) const {
  const int spp = params_.steps_per_period;
  const double delta = (t_target - state.t) * spp;
  const long long steps = std::llround(delta);
  if (steps < 0 || std::abs(delta - double(steps)) > 1e-9 * std::max(1.0, std::abs(delta))) {
    throw Error(Errc::alignment, "t_target " + std::to_string(t_target) + " is not a whole number of steps (dt = " +
                                     std::to_string(params_.dt()) + ") ahead of t = " + std::to_string(state.t));
  }
  record_every = std::max(record_every, 1);
  if (record) record->push(state, snapshots);
  for (long long i = 1; i <= steps; ++i) {
    state = step(state, f);
    if (record && (i % record_every == 0 || i == steps)) record->push(state, snapshots);
  }
  return state;
}

FlowState NavierStokesSolver::advance_periods(FlowState state, const ForcingSpec& f, int periods) const {
  const double target = time_of(tick_of(state.t, params_.steps_per_period) +
                                    (long long)periods * params_.steps_per_period,
                                params_.steps_per_period);
  return advance(std::move(state), f, target);
}

//---------------------------------------------------------------------------//
// Trilinear / Coriolis forms
//---------------------------------------------------------------------------//

SpectralScalar stokes_operator(const SpectralScalar& psi) {
  SpectralScalar out = apply_laplacian(psi);
  out *= -1.0;
  return out;
}

std::array<GridScalar, 3> cartesian_velocity(const SphericalTransform& tr, const SpectralScalar& psi) {
  const GaussGrid& g = tr.grid();
  const GridVector v = tr.velocity(psi);
  std::array<GridScalar, 3> out{GridScalar(g), GridScalar(g), GridScalar(g)};
  for (int i = 0; i < g.nlat; ++i) {
    const double mu = g.mu[std::size_t(i)];
    const double coslat = std::sqrt((1.0 - mu) * (1.0 + mu));
    for (int k = 0; k < g.nlon; ++k) {
      const double lon = g.longitude(k);
      const double cl = std::cos(lon);
      const double sl = std::sin(lon);
      const double e = v.east(i, k);
      const double nn = v.north(i, k);
      // east = (-sin lon, cos lon, 0), north = (-mu cos lon, -mu sin lon, cos lat)
      out[0](i, k) = -sl * e - mu * cl * nn;
      out[1](i, k) = cl * e - mu * sl * nn;
      out[2](i, k) = coslat * nn;
    }
  }
  return out;
}

double trilinear(const SphericalTransform& tr, const SpectralScalar& u, const SpectralScalar& v,
                 const SpectralScalar& w) {
  if (u.truncation() != v.truncation() || u.truncation() != w.truncation() ||
      u.truncation() != tr.truncation()) {
    throw Error(Errc::dimension, "trilinear form needs a shared truncation");
  }
  // (u . grad) f = J(psi_u, f) for each Cartesian component f of v; those
  // components are band-limited to degree N, so analysis is exact.
  const auto v_cart = cartesian_velocity(tr, v);
  const auto w_cart = cartesian_velocity(tr, w);
  GridScalar integrand(tr.grid());
  for (int c = 0; c < 3; ++c) {
    const SpectralScalar component = tr.analyze(v_cart[std::size_t(c)]);
    const GridScalar advected = tr.jacobian_grid(u, component);
    const auto wc = w_cart[std::size_t(c)].values();
    const auto ac = advected.values();
    auto out = integrand.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += wc[i] * ac[i];
  }
  return tr.integrate(integrand);
}

double coriolis_form(const SphericalTransform& tr, double omega, const SpectralScalar& u, const SpectralScalar& w) {
  if (omega == 0.0) return 0.0;
  const GaussGrid& g = tr.grid();
  const GridVector vu = tr.velocity(u);
  const GridVector vw = tr.velocity(w);
  GridScalar integrand(g);
  for (int i = 0; i < g.nlat; ++i) {
    const double l = 2.0 * omega * g.mu[std::size_t(i)];
    for (int k = 0; k < g.nlon; ++k) {
      // n x (a east + b north) = a north - b east
      const double rot_e = -vu.north(i, k);
      const double rot_n = vu.east(i, k);
      integrand(i, k) = l * (rot_e * vw.east(i, k) + rot_n * vw.north(i, k));
    }
  }
  return tr.integrate(integrand);
}

double coriolis_inner(const SphericalTransform& tr, double omega, const SpectralScalar& u, int r) {
  if (r < 0) throw Error(Errc::argument, "r must be >= 0");
  SpectralScalar w = u;
  for (int i = 0; i < r; ++i) w = stokes_operator(w);
  return coriolis_form(tr, omega, u, w);
}

std::pair<double, double> zonal_trilinear_checks(const SphericalTransform& tr, const SpectralScalar& u_zonal,
                                                 const SpectralScalar& v) {
  double scale = 1.0;
  for (const auto& c : u_zonal.coeffs()) scale = std::max(scale, std::abs(c));
  if (!is_zonal(u_zonal, 1e-14 * scale)) {
    throw Error(Errc::precondition, "u_zonal has m != 0 content");
  }
  const SpectralScalar av = stokes_operator(v);
  return {trilinear(tr, u_zonal, v, av), trilinear(tr, v, u_zonal, av)};
}

}  // namespace spherekick
