#include "spherekick/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "spherekick/parallel.hpp"

namespace spherekick {

namespace {

double h_distance(const FlowState& a, const FlowState& b) {
  return spectral_norm(invert_laplacian(a.vorticity - b.vorticity), Norm::H);
}

double norm_of(const FlowState& s, Norm order) { return spectral_norm(s.streamfunction(), order); }

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const auto idx = std::size_t(std::llround(p * double(sorted.size() - 1)));
  return sorted[idx];
}

/// Runs chains [0, n) from u0 and calls record(chain, k, state) for
/// k = 0..steps. record must only touch per-chain storage.
template <class Record>
void for_each_chain(const NavierStokesSolver& solver, const FlowState& u0, const ForcingSpec& f,
                    const KickSpec& kick, int n_chains, int steps, std::uint64_t stream_offset, int workers,
                    Record&& record) {
  parallel_for(std::size_t(n_chains), workers, [&](std::size_t i) {
    ChainState c = make_chain(u0, kick, stream_offset + i);
    record(i, 0, c.state);
    for (int k = 1; k <= steps; ++k) {
      c = chain_step(solver, std::move(c), f, kick);
      record(i, k, c.state);
    }
  });
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

double std_error_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / double(v.size() - 1) / double(v.size()));
}

}  // namespace

//---------------------------------------------------------------------------//
// Observables
//---------------------------------------------------------------------------//

Observable Observable::bounded_rational(SpectralScalar w) {
  Observable o;
  o.kind = ObservableKind::bounded_rational;
  o.probe = std::move(w);
  return o;
}

Observable Observable::clipped_norm(double r0) {
  if (!(r0 > 0.0)) throw Error(Errc::argument, "clipped-norm observable needs R0 > 0");
  Observable o;
  o.kind = ObservableKind::clipped_norm;
  o.scale = r0;
  return o;
}

Observable Observable::coordinate(int j, double c) {
  if (j < 1) throw Error(Errc::index, "coordinate observable needs j >= 1");
  if (!(c > 0.0)) throw Error(Errc::argument, "coordinate observable needs c > 0");
  Observable o;
  o.kind = ObservableKind::coordinate;
  o.mode = j;
  o.scale = c;
  return o;
}

double Observable::operator()(const SpectralScalar& psi) const {
  switch (kind) {
    case ObservableKind::bounded_rational: {
      const double d = probe.size() == 0 ? spectral_norm(psi, Norm::H) : spectral_norm(psi - probe, Norm::H);
      return 1.0 / (1.0 + d * d);
    }
    case ObservableKind::clipped_norm: return std::min(1.0, spectral_norm(psi, Norm::H) / scale);
    case ObservableKind::coordinate: return std::clamp(mode_coordinate(psi, mode), -scale, scale);
  }
  return 0.0;
}

double Observable::lipschitz() const {
  switch (kind) {
    // sup |d/dx 1/(1+x^2)| is attained at x = 1/sqrt(3)
    case ObservableKind::bounded_rational: return 3.0 * std::sqrt(3.0) / 8.0;
    case ObservableKind::clipped_norm: return 1.0 / scale;
    case ObservableKind::coordinate: return 1.0;
  }
  return 0.0;
}

std::string Observable::id() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case ObservableKind::bounded_rational:
      os << "rational";
      if (probe.size() != 0 && spectral_norm(probe, Norm::H) != 0.0) os << "_w" << spectral_norm(probe, Norm::H);
      break;
    case ObservableKind::clipped_norm: os << "clipnorm_R" << scale; break;
    case ObservableKind::coordinate: os << "coord_j" << mode << "_c" << scale; break;
  }
  return os.str();
}

//---------------------------------------------------------------------------//
// Sampling
//---------------------------------------------------------------------------//

SpectralScalar sample_smooth_field(int truncation, double h_norm, RngStream& rng) {
  SpectralScalar psi(truncation);
  const int modes = mode_count(truncation);
  double norm2 = 0.0;
  std::vector<double> coords(static_cast<std::size_t>(modes));
  for (int j = 1; j <= modes; ++j) {
    const double lambda = ModeOrdering::decode(j).eigenvalue();
    const double g = rng.next_normal() / lambda;
    coords[std::size_t(j - 1)] = g;
    norm2 += g * g;
  }
  if (norm2 == 0.0) return psi;
  const double scale = h_norm / std::sqrt(norm2);
  for (int j = 1; j <= modes; ++j) {
    const HarmonicIndex h = ModeOrdering::decode(j);
    add_real_component(psi, h, scale * coords[std::size_t(j - 1)] / std::sqrt(h.eigenvalue()));
  }
  return psi;
}

SpectralScalar sample_in_ball(int truncation, double radius, RngStream& rng) {
  const double r = radius * rng.next_uniform();
  return sample_smooth_field(truncation, r, rng);
}

//---------------------------------------------------------------------------//
// Fits
//---------------------------------------------------------------------------//

ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw Error(Errc::dimension, "fit_exponential: t and y differ in length");
  std::vector<double> xs, ls;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (y[i] > 0.0 && std::isfinite(y[i])) {
      xs.push_back(t[i]);
      ls.push_back(std::log(y[i]));
    }
  }
  ExponentialFit fit;
  fit.points = int(xs.size());
  if (xs.size() < 2) {
    if (xs.size() == 1) fit.prefactor = std::exp(ls[0]);
    return fit;
  }
  const double mx = mean_of(xs), ml = mean_of(ls);
  double sxx = 0.0, sxl = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxl += (xs[i] - mx) * (ls[i] - ml);
  }
  const double slope = sxx > 0.0 ? sxl / sxx : 0.0;
  const double intercept = ml - slope * mx;
  fit.rate = -slope;
  fit.prefactor = std::exp(intercept);
  const auto [lo, hi] = std::minmax_element(ls.begin(), ls.end());
  fit.log_range = *hi - *lo;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fit.max_log_residual = std::max(fit.max_log_residual, std::abs(ls[i] - (intercept + slope * xs[i])));
  }
  return fit;
}

//---------------------------------------------------------------------------//
// Ensembles
//---------------------------------------------------------------------------//

EnsembleStats run_ensemble(const NavierStokesSolver& solver, const FlowState& u0, const ForcingSpec& f,
                           const KickSpec& kick, const std::vector<Observable>& observables,
                           const EnsembleConfig& cfg) {
  if (cfg.n_chains < 1) throw Error(Errc::argument, "n_chains must be >= 1");
  if (cfg.steps < 0) throw Error(Errc::argument, "K must be >= 0");
  kick.validate(solver.truncation());

  const std::size_t n_obs = observables.size();
  const std::size_t width = n_obs + 1;  // observables then H norm
  const std::size_t per_chain = std::size_t(cfg.steps + 1) * width;
  std::vector<double> values(std::size_t(cfg.n_chains) * per_chain);

  for_each_chain(solver, u0, f, kick, cfg.n_chains, cfg.steps, cfg.stream_offset, cfg.workers,
                 [&](std::size_t i, int k, const FlowState& s) {
                   const SpectralScalar psi = s.streamfunction();
                   double* row = values.data() + i * per_chain + std::size_t(k) * width;
                   for (std::size_t o = 0; o < n_obs; ++o) row[o] = observables[o](psi);
                   row[n_obs] = spectral_norm(psi, Norm::H);
                 });

  EnsembleStats st;
  st.n_chains = cfg.n_chains;
  st.steps = cfg.steps;
  for (const auto& o : observables) st.observable_ids.push_back(o.id());
  std::vector<double> column(std::size_t(cfg.n_chains));
  for (int k = 0; k <= cfg.steps; ++k) {
    std::vector<double> means(n_obs), errs(n_obs);
    for (std::size_t o = 0; o <= n_obs; ++o) {
      for (int i = 0; i < cfg.n_chains; ++i) {
        column[std::size_t(i)] = values[std::size_t(i) * per_chain + std::size_t(k) * width + o];
      }
      const double m = mean_of(column);
      if (o < n_obs) {
        means[o] = m;
        errs[o] = std_error_of(column, m);
      } else {
        std::vector<double> sorted = column;
        std::sort(sorted.begin(), sorted.end());
        st.norm_mean.push_back(m);
        st.norm_min.push_back(sorted.front());
        st.norm_q05.push_back(quantile_sorted(sorted, 0.05));
        st.norm_median.push_back(quantile_sorted(sorted, 0.5));
        st.norm_q95.push_back(quantile_sorted(sorted, 0.95));
        st.norm_max.push_back(sorted.back());
      }
    }
    st.mean.push_back(std::move(means));
    st.std_error.push_back(std::move(errs));
  }
  return st;
}

MixingReport observable_gap_series(const NavierStokesSolver& solver, const FlowState& u0, const FlowState& v0,
                                   const ForcingSpec& f, const KickSpec& kick, const Observable& h,
                                   const MixingConfig& cfg) {
  const std::uint64_t n = std::uint64_t(cfg.ensemble.n_chains);
  EnsembleConfig eu = cfg.ensemble;
  EnsembleConfig ev = cfg.ensemble;
  if (!cfg.common_streams) ev.stream_offset += n;

  const std::vector<Observable> obs{h};
  const EnsembleStats su = run_ensemble(solver, u0, f, kick, obs, eu);
  const EnsembleStats sv = run_ensemble(solver, v0, f, kick, obs, ev);

  MixingReport rep;
  rep.observable_id = h.id();
  const int K = cfg.ensemble.steps;
  for (int k = 0; k <= K; ++k) {
    const auto ku = std::size_t(k);
    rep.gap.push_back(std::abs(su.mean[ku][0] - sv.mean[ku][0]));
    rep.half_width.push_back(3.0 * std::hypot(su.std_error[ku][0], sv.std_error[ku][0]));
  }

  if (cfg.control) {
    EnsembleConfig ec = cfg.ensemble;
    ec.stream_offset += cfg.common_streams ? 0 : 2 * n;
    const EnsembleStats sc = run_ensemble(solver, u0, f, kick, obs, ec);
    double sum2 = 0.0;
    for (int k = 0; k <= K; ++k) {
      const auto ku = std::size_t(k);
      const double g = std::abs(su.mean[ku][0] - sc.mean[ku][0]);
      const double hw = 3.0 * std::hypot(su.std_error[ku][0], sc.std_error[ku][0]);
      rep.control_gap.push_back(g);
      rep.control_half_width.push_back(hw);
      if (g > hw) rep.control_consistent = false;
      if (k >= 1) sum2 += g * g;
    }
    rep.noise_floor = K >= 1 ? std::sqrt(sum2 / K) : 0.0;
  } else {
    // Without a control run use the mean standard error of the gap.
    double s = 0.0;
    for (int k = 1; k <= K; ++k) s += rep.half_width[std::size_t(k)] / 3.0;
    rep.noise_floor = K >= 1 ? s / K : 0.0;
  }

  std::vector<double> t, y;
  for (int k = 0; k <= K; ++k) {
    const double g = rep.gap[std::size_t(k)];
    if (!(g > 3.0 * rep.noise_floor)) break;
    t.push_back(k);
    y.push_back(g);
  }
  rep.fit = fit_exponential(t, y);
  rep.inconclusive = !rep.fit.valid();
  return rep;
}

//---------------------------------------------------------------------------//
// Coupling
//---------------------------------------------------------------------------//

CouplingSeries coupled_distance(const NavierStokesSolver& solver, const FlowState& u0, const FlowState& v0,
                                const ForcingSpec& f, const KickSpec& kick, const CouplingConfig& cfg) {
  kick.validate(solver.truncation());
  ChainState cu = make_chain(u0, kick, cfg.stream);
  ChainState cv = make_chain(v0, kick, cfg.shared ? cfg.stream : cfg.stream + 1);

  CouplingSeries out;
  out.distance.push_back(h_distance(cu.state, cv.state));
  out.pre_kick_distance.push_back(0.0);
  const int N = solver.truncation();
  for (int k = 1; k <= cfg.steps; ++k) {
    if (cfg.stop_below > 0.0 && out.distance.back() <= cfg.stop_below) break;
    cu.state = solver.advance_periods(std::move(cu.state), f, 1);
    cv.state = solver.advance_periods(std::move(cv.state), f, 1);
    out.pre_kick_distance.push_back(h_distance(cu.state, cv.state));
    cu.state = apply_kick(std::move(cu.state), sample_kick(kick, N, cu.rng));
    cv.state = apply_kick(std::move(cv.state), sample_kick(kick, N, cv.rng));
    ++cu.k;
    ++cv.k;
    out.distance.push_back(h_distance(cu.state, cv.state));
    out.steps_run = k;
  }
  std::vector<double> t(out.distance.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = double(k);
  out.fit = fit_exponential(t, out.distance);
  return out;
}

int monotone_from(const std::vector<double>& series) {
  if (series.empty()) return 0;
  int from = int(series.size()) - 1;
  while (from > 0 && series[std::size_t(from)] <= series[std::size_t(from - 1)]) --from;
  return from;
}

//---------------------------------------------------------------------------//
// Contraction constants
//---------------------------------------------------------------------------//

ContractionReport contraction_constants(const NavierStokesSolver& solver, const ForcingSpec& f,
                                        const ContractionConfig& cfg) {
  const double R = cfg.big_radius, r = cfg.small_radius;
  if (!(R > r && r > 0.0)) throw Error(Errc::argument, "contraction constants need R > r > 0");
  if (cfg.n_samples < 1) throw Error(Errc::argument, "n_samples must be >= 1");
  if (cfg.max_periods < 1) throw Error(Errc::argument, "max_periods must be >= 1");

  const int N = solver.truncation();
  const int P = cfg.max_periods;
  ContractionReport rep;
  rep.big_radius = R;
  rep.small_radius = r;
  rep.samples = cfg.n_samples;
  rep.d_theory = absorbing_radius(forcing_sup_norm(f), solver.params().nu);

  // Half the samples on the R sphere, half inside the ball.
  RngStream rng(cfg.seed, sampler_stream_base + 11);
  std::vector<FlowState> starts;
  for (int i = 0; i < cfg.n_samples; ++i) {
    const SpectralScalar psi =
        i % 2 == 0 ? sample_smooth_field(N, R, rng) : sample_in_ball(N, R, rng);
    starts.push_back(FlowState::from_streamfunction(psi));
  }
  std::vector<std::vector<double>> norms(starts.size());
  parallel_for(starts.size(), cfg.workers, [&](std::size_t i) {
    FlowState s = starts[i];
    for (int n = 1; n <= P; ++n) {
      s = solver.advance_periods(std::move(s), f, 1);
      norms[i].push_back(norm_of(s, Norm::H));
    }
  });

  {
    FlowState s = FlowState::zero(N);
    for (int n = 1; n <= P; ++n) {
      s = solver.advance_periods(std::move(s), f, 1);
      rep.d = std::max(rep.d, norm_of(s, Norm::H));
    }
  }

  std::vector<double> initial(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) initial[i] = norm_of(starts[i], Norm::H);

  rep.a_by_n.assign(std::size_t(P), 0.0);
  for (int n = 1; n <= P; ++n) {
    for (std::size_t i = 0; i < starts.size(); ++i) {
      if (initial[i] > r) {
        const double a = (norms[i][std::size_t(n - 1)] - rep.d) / initial[i];
        rep.a_by_n[std::size_t(n - 1)] = std::max(rep.a_by_n[std::size_t(n - 1)], a);
      }
    }
  }
  // Smallest n0 such that a = max_{n >= n0} a(n) < 1.
  double tail = 0.0;
  std::vector<double> tail_max(static_cast<std::size_t>(P));
  for (int n = P; n >= 1; --n) {
    tail = std::max(tail, rep.a_by_n[std::size_t(n - 1)]);
    tail_max[std::size_t(n - 1)] = tail;
  }
  for (int n = 1; n <= P; ++n) {
    if (tail_max[std::size_t(n - 1)] < 1.0) {
      rep.n0 = n;
      rep.a = tail_max[std::size_t(n - 1)];
      break;
    }
  }
  if (rep.n0 > 0) {
    rep.worst_excess = -std::numeric_limits<double>::infinity();
    for (int n = rep.n0; n <= P; ++n) {
      for (std::size_t i = 0; i < starts.size(); ++i) {
        const double bound = std::max(rep.a * initial[i] + rep.d, r + rep.d);
        rep.worst_excess = std::max(rep.worst_excess, norms[i][std::size_t(n - 1)] - bound);
      }
    }
  }

  // One-step Lipschitz ratio over pairs (consecutive samples, both in B(R)).
  std::vector<double> ratios(starts.size() / 2, 0.0);
  parallel_for(ratios.size(), cfg.workers, [&](std::size_t p) {
    ratios[p] = one_step_ratio(solver, starts[2 * p], starts[2 * p + 1], f);
  });
  for (double q : ratios) rep.lipschitz = std::max(rep.lipschitz, q);
  return rep;
}

double one_step_ratio(const NavierStokesSolver& solver, const FlowState& u0, const FlowState& v0,
                      const ForcingSpec& f) {
  const double d0 = h_distance(u0, v0);
  if (d0 == 0.0) throw Error(Errc::argument, "one-step ratio needs u0 != v0");
  const FlowState su = solver.advance_periods(u0, f, 1);
  const FlowState sv = solver.advance_periods(v0, f, 1);
  return h_distance(su, sv) / d0;
}

//---------------------------------------------------------------------------//
// Gamma_N
//---------------------------------------------------------------------------//

GammaReport gamma_n(const NavierStokesSolver& solver, const ForcingSpec& f, const GammaConfig& cfg) {
  const int N = solver.truncation();
  const int J = mode_count(N);
  for (std::size_t i = 0; i < cfg.cutoffs.size(); ++i) {
    if (cfg.cutoffs[i] < 0 || cfg.cutoffs[i] > J) {
      throw Error(Errc::index, "cutoff " + std::to_string(cfg.cutoffs[i]) + " outside [0, " + std::to_string(J) + "]");
    }
    if (i > 0 && cfg.cutoffs[i] <= cfg.cutoffs[i - 1]) throw Error(Errc::argument, "cutoffs must be ascending");
  }
  if (!(cfg.radius > 0.0)) throw Error(Errc::argument, "gamma_N needs R > 0");

  RngStream rng(cfg.seed, sampler_stream_base + 12);
  std::vector<std::pair<FlowState, FlowState>> pairs;
  for (int p = 0; p < cfg.n_pairs; ++p) {
    SpectralScalar a = sample_in_ball(N, cfg.radius, rng);
    SpectralScalar b = sample_in_ball(N, cfg.radius, rng);
    if (a == b) continue;
    pairs.emplace_back(FlowState::from_streamfunction(a), FlowState::from_streamfunction(b));
  }
  if (cfg.aligned_pairs) {
    for (int c : cfg.cutoffs) {
      if (c >= J) continue;
      SpectralScalar a = sample_smooth_field(N, 0.5 * cfg.radius, rng);
      SpectralScalar b = a + mode_field(c + 1, N) * (0.25 * cfg.radius);
      pairs.emplace_back(FlowState::from_streamfunction(a), FlowState::from_streamfunction(b));
    }
  }

  // ratios[p][i] for cutoff i
  std::vector<std::vector<double>> ratios(pairs.size());
  parallel_for(pairs.size(), cfg.workers, [&](std::size_t p) {
    const double d0 = h_distance(pairs[p].first, pairs[p].second);
    const FlowState su = solver.advance_periods(pairs[p].first, f, 1);
    const FlowState sv = solver.advance_periods(pairs[p].second, f, 1);
    const SpectralScalar diff = invert_laplacian(su.vorticity - sv.vorticity);
    for (int c : cfg.cutoffs) {
      ratios[p].push_back(spectral_norm(project_modes(diff, c, ModePart::high), Norm::H) / d0);
    }
  });

  GammaReport rep;
  rep.cutoffs = cfg.cutoffs;
  rep.pairs = int(pairs.size());
  for (std::size_t i = 0; i < cfg.cutoffs.size(); ++i) {
    double best = 0.0;
    int arg = -1;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (arg < 0 || ratios[p][i] > best) {
        best = ratios[p][i];
        arg = int(p);
      }
    }
    rep.gamma.push_back(best);
    rep.argmax_pair.push_back(arg);
    if (i > 0 && best > rep.gamma[i - 1]) rep.monotone = false;
  }
  return rep;
}

//---------------------------------------------------------------------------//
// Periodic orbits
//---------------------------------------------------------------------------//

PeriodicOrbit periodic_orbit_find(const NavierStokesSolver& solver, const ForcingSpec& f, const FlowState& u0,
                                  double tol, int k_max, int j_max) {
  if (!(tol > 0.0)) throw Error(Errc::argument, "periodic_orbit_find needs tol > 0");
  if (j_max < 1) throw Error(Errc::argument, "j_max must be >= 1");
  if (k_max < 1) throw Error(Errc::argument, "K_max must be >= 1");

  std::vector<FlowState> hist{u0};
  PeriodicOrbit orbit;
  int found = 0;
  for (int k = 1; k <= k_max && found == 0; ++k) {
    hist.push_back(solver.advance_periods(hist.back(), f, 1));
    for (int j = 1; j <= j_max && 2 * j - 1 <= k; ++j) {
      bool all = true;
      for (int i = 0; i < j && all; ++i) {
        all = h_distance(hist[std::size_t(k - i)], hist[std::size_t(k - i - j)]) < tol;
      }
      if (all) {
        found = j;
        break;
      }
    }
    orbit.iterations = k;
  }

  const int j = found > 0 ? found : 1;
  const int k = orbit.iterations;
  std::vector<double> t;
  for (int i = j; i <= k; ++i) {
    t.push_back(i);
    orbit.increments.push_back(h_distance(hist[std::size_t(i)], hist[std::size_t(i - j)]));
  }
  orbit.rate = fit_exponential(t, orbit.increments).rate;
  orbit.limit = hist.back();
  if (found == 0) return orbit;

  orbit.converged = true;
  orbit.period = found;
  orbit.cycle.push_back(orbit.limit);
  for (int i = 1; i < found; ++i) orbit.cycle.push_back(solver.advance_periods(orbit.cycle.back(), f, 1));
  const FlowState back = solver.advance_periods(orbit.cycle.back(), f, 1);
  orbit.residual = h_distance(back, orbit.limit);
  return orbit;
}

//---------------------------------------------------------------------------//
// Absorbing balls
//---------------------------------------------------------------------------//

BallReport absorbing_ball(const NavierStokesSolver& solver, const FlowState& u0, const ForcingSpec& f,
                          const KickSpec& kick, const BallConfig& cfg) {
  if (cfg.n_chains < 1) throw Error(Errc::argument, "n_chains must be >= 1");
  if (cfg.steps < 1) throw Error(Errc::argument, "K must be >= 1");
  kick.validate(solver.truncation());

  BallReport rep;
  rep.mode = cfg.mode;
  rep.slack = cfg.slack;
  rep.burn_in = cfg.steps / 4;
  const PeriodicOrbit* orbit = cfg.orbit;
  if (cfg.mode == BallMode::attractor) {
    if (orbit == nullptr || !orbit->converged || orbit->cycle.empty()) {
      throw Error(Errc::precondition, "attractor mode needs a converged periodic orbit");
    }
    rep.radius = support_radius_attractor(kick.b0(), orbit->rate);
  } else {
    rep.radius = support_radius_origin(forcing_sup_norm(f), solver.params().nu, kick.b0());
  }

  const long long t0 = std::llround(u0.t);
  auto centre_distance = [&](long long k, const FlowState& s) {
    if (cfg.mode == BallMode::origin) return norm_of(s, Norm::H);
    const long long j = orbit->period;
    const long long phase = (((t0 + k - std::llround(orbit->limit.t)) % j) + j) % j;
    return h_distance(s, orbit->cycle[std::size_t(phase)]);
  };

  const auto width = std::size_t(cfg.steps + 1);
  std::vector<double> dist(std::size_t(cfg.n_chains) * width);
  for_each_chain(solver, u0, f, kick, cfg.n_chains, cfg.steps, 0, cfg.workers,
                 [&](std::size_t i, int k, const FlowState& s) { dist[i * width + std::size_t(k)] = centre_distance(k, s); });

  rep.sup_by_k.assign(width, 0.0);
  for (int i = 0; i < cfg.n_chains; ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      rep.sup_by_k[k] = std::max(rep.sup_by_k[k], dist[std::size_t(i) * width + k]);
    }
  }
  for (std::size_t k = 0; k < width; ++k) {
    rep.max_distance = std::max(rep.max_distance, rep.sup_by_k[k]);
    if (int(k) >= rep.burn_in) rep.empirical_sup = std::max(rep.empirical_sup, rep.sup_by_k[k]);
  }
  const double limit = rep.radius * (1.0 + cfg.slack);
  for (int k = cfg.steps; k >= 0 && rep.sup_by_k[std::size_t(k)] <= limit; --k) rep.entry_step = k;
  return rep;
}

//---------------------------------------------------------------------------//
// Zonal and almost zonal stability
//---------------------------------------------------------------------------//

namespace {

struct SampledRun {
  std::vector<double> t;
  std::vector<FlowState> states;
};

SampledRun sampled_run(const NavierStokesSolver& solver, const ForcingSpec& f, FlowState s, int periods,
                       int samples_per_period) {
  if (samples_per_period < 1 || solver.params().steps_per_period % samples_per_period != 0) {
    throw Error(Errc::alignment, "samples_per_period must divide steps_per_period");
  }
  SampledRun run;
  const double t0 = s.t;
  run.t.push_back(s.t);
  run.states.push_back(s);
  const int total = periods * samples_per_period;
  for (int i = 1; i <= total; ++i) {
    s = solver.advance(std::move(s), f, t0 + double(i) / samples_per_period);
    run.t.push_back(s.t);
    run.states.push_back(s);
  }
  return run;
}

StabilitySeries compare_runs(const SampledRun& a, const SampledRun& b) {
  StabilitySeries out;
  out.t = a.t;
  std::vector<double> ft, fy;
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    const SpectralScalar d = invert_laplacian(a.states[i].vorticity - b.states[i].vorticity);
    out.distance.push_back(spectral_norm(d, Norm::V));
    out.distance_h.push_back(spectral_norm(d, Norm::H));
    if (a.t[i] - a.t.front() >= 0.5) {
      ft.push_back(a.t[i]);
      fy.push_back(out.distance.back() * out.distance.back());
    }
  }
  out.fit = fit_exponential(ft, fy);
  return out;
}

}  // namespace

ZonalReport zonal_stability(const NavierStokesSolver& solver, const ForcingSpec& f_zonal,
                            const FlowState& u_zonal, const std::vector<SpectralScalar>& perturbations,
                            int periods, int samples_per_period) {
  if (!f_zonal.zonal()) throw Error(Errc::precondition, "zonal_stability needs a zonal forcing");
  const SampledRun ref = sampled_run(solver, f_zonal, u_zonal, periods, samples_per_period);

  ZonalReport rep;
  auto track_zonal = [&](const SampledRun& run) {
    for (const auto& s : run.states) {
      rep.max_nonzonal_fraction = std::max(rep.max_nonzonal_fraction, nonzonal_energy_fraction(s.streamfunction()));
    }
  };
  if (is_zonal(u_zonal.vorticity)) track_zonal(ref);

  rep.min_rate = std::numeric_limits<double>::infinity();
  for (const auto& p : perturbations) {
    FlowState start = u_zonal;
    start.vorticity += apply_laplacian(p);
    start.vorticity(0, 0) = 0.0;
    const SampledRun run = sampled_run(solver, f_zonal, start, periods, samples_per_period);
    if (is_zonal(start.vorticity)) track_zonal(run);
    StabilitySeries s = compare_runs(run, ref);
    if (s.fit.valid()) rep.min_rate = std::min(rep.min_rate, s.fit.rate);
    rep.perturbations.push_back(std::move(s));
  }
  if (!std::isfinite(rep.min_rate)) rep.min_rate = 0.0;
  return rep;
}

AlmostZonalReport almost_zonal(const NavierStokesSolver& solver, const ForcingSpec& f_zonal, const ForcingSpec& g,
                               const FlowState& u0, const FlowState& v0, int periods, double threshold,
                               const std::vector<double>& scales) {
  if (!(threshold > 0.0)) throw Error(Errc::argument, "almost_zonal needs threshold > 0");
  auto run_pair = [&](const ForcingSpec& force, StabilitySeries* series) {
    const SampledRun a = sampled_run(solver, force, u0, periods, 1);
    const SampledRun b = sampled_run(solver, force, v0, periods, 1);
    StabilitySeries s = compare_runs(a, b);
    const bool converged = std::any_of(s.distance_h.begin(), s.distance_h.end(),
                                       [&](double d) { return d < threshold; });
    const double final_distance = s.distance_h.back();
    if (series) *series = std::move(s);
    return std::pair{converged, final_distance};
  };

  AlmostZonalReport rep;
  const ForcingSpec diff = forcing_difference(g, f_zonal);
  rep.delta = diff.empty() ? 0.0 : forcing_sup_norm(diff);
  std::tie(rep.converged, rep.final_distance) = run_pair(g, &rep.series);

  std::vector<double> sorted = scales;
  std::sort(sorted.begin(), sorted.end());
  bool prefix = true;
  for (double s : sorted) {
    ForcingSpec gs = f_zonal;
    for (ForcingTerm term : diff.terms) {
      term.amplitude *= s;
      gs.terms.push_back(term);
    }
    AlmostZonalScan row;
    row.scale = s;
    row.delta = std::abs(s) * rep.delta;
    std::tie(row.converged, row.final_distance) = run_pair(gs, nullptr);
    prefix = prefix && row.converged;
    if (prefix) rep.largest_converged_delta = row.delta;
    rep.scan.push_back(row);
  }
  return rep;
}

//---------------------------------------------------------------------------//
// Finite stability probe
//---------------------------------------------------------------------------//

ProbeReport finite_stability_probe(const NavierStokesSolver& solver, const ForcingSpec& f,
                                   const FlowState& u_candidate, const ProbeConfig& cfg) {
  const int N = solver.truncation();
  const int J = mode_count(N);
  if (cfg.m < 1 || cfg.m > J) throw Error(Errc::argument, "probe needs 1 <= M <= J");
  if (cfg.n_samples < 1) throw Error(Errc::argument, "n_samples must be >= 1");
  if (!(cfg.delta >= 0.0) || !(cfg.radius >= 0.0)) throw Error(Errc::argument, "probe needs delta, R >= 0");
  const double d_f = absorbing_radius(f.empty() ? 0.0 : forcing_sup_norm(f), solver.params().nu);
  const double u_norm = norm_of(u_candidate, Norm::H);
  if (u_norm > d_f * (1.0 + 1e-9) + 1e-12) {
    throw Error(Errc::precondition, "candidate lies outside B_H(D(f))");
  }

  const SpectralScalar u_psi = u_candidate.streamfunction();
  const SpectralScalar u_low = project_modes(u_psi, cfg.m, ModePart::low);
  RngStream rng(cfg.seed, sampler_stream_base + 13);
  std::vector<FlowState> starts;
  for (int s = 0; s < cfg.n_samples; ++s) {
    // Low part: uniform radius delta * U^{1/M} in a Gaussian direction.
    std::vector<double> g(static_cast<std::size_t>(cfg.m));
    double g2 = 0.0;
    for (double& x : g) {
      x = rng.next_normal();
      g2 += x * x;
    }
    const double rad = cfg.delta * std::pow(rng.next_uniform(), 1.0 / cfg.m);
    SpectralScalar v = u_low;
    for (int j = 1; j <= cfg.m; ++j) {
      const HarmonicIndex h = ModeOrdering::decode(j);
      const double c = g2 > 0.0 ? rad * g[std::size_t(j - 1)] / std::sqrt(g2) : 0.0;
      add_real_component(v, h, c / std::sqrt(h.eigenvalue()));
    }
    if (cfg.m < J) {
      const double low2 = std::pow(spectral_norm(v, Norm::H), 2);
      const double room = std::sqrt(std::max(0.0, cfg.radius * cfg.radius - low2));
      SpectralScalar high = project_modes(sample_smooth_field(N, 1.0, rng), cfg.m, ModePart::high);
      const double hn = spectral_norm(high, Norm::H);
      if (hn > 0.0) v += high * (room * rng.next_uniform() / hn);
    }
    starts.push_back(FlowState::from_streamfunction(v, u_candidate.t));
  }

  const FlowState target = solver.advance_periods(u_candidate, f, cfg.horizon);
  ProbeReport rep;
  rep.samples = cfg.n_samples;
  rep.terminal.assign(starts.size(), 0.0);
  parallel_for(starts.size(), cfg.workers, [&](std::size_t i) {
    rep.terminal[i] = h_distance(solver.advance_periods(starts[i], f, cfg.horizon), target);
  });
  std::vector<double> sorted = rep.terminal;
  std::sort(sorted.begin(), sorted.end());
  rep.min = sorted.front();
  rep.max = sorted.back();
  rep.median = quantile_sorted(sorted, 0.5);
  const auto hits = std::count_if(sorted.begin(), sorted.end(), [&](double d) { return d <= cfg.tolerance; });
  rep.fraction = double(hits) / double(sorted.size());
  return rep;
}

}  // namespace spherekick
