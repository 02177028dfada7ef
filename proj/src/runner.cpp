#include "spherekick/runner.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "spherekick/checkpoint.hpp"
#include "spherekick/verify.hpp"

namespace spherekick {

using nlohmann::json;

namespace {

constexpr const char* version_string = "spherekick 0.1.0";
constexpr double lambda_1 = 2.0;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error(Errc::io, "cannot write '" + path.string() + "'");
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row_strings(cells);
  }
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

struct Outcome {
  bool passed = true;
  json metrics = json::object();
};

struct Context {
  const ExperimentConfig& cfg;
  const NavierStokesSolver& solver;
  int workers;
  std::filesystem::path dir;
  std::string stem;
  RunResult& result;
  std::ostream* log;

  Csv csv(const std::string& suffix, const std::vector<std::string>& header) {
    const auto path = dir / (stem + suffix + ".csv");
    result.csv.push_back(path);
    return Csv(path, header);
  }
  void note(const std::string& s) const {
    if (log) *log << s << '\n';
  }
};

double forcing_sup(const ForcingSpec& f) { return f.empty() ? 0.0 : forcing_sup_norm(f); }

Observable configured_observable(const ExperimentConfig& cfg) {
  const auto& q = cfg.params;
  if (q.observable == "clipnorm") return Observable::clipped_norm(q.observable_scale);
  if (q.observable == "coordinate") return Observable::coordinate(q.observable_mode, q.observable_scale);
  return Observable::bounded_rational(SpectralScalar(cfg.solver.truncation));
}

/// Energy bound check at every recorded time of a deterministic run.
Outcome run_simulate(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double nu = cfg.solver.nu;
  const double fsup = forcing_sup(cfg.forcing);
  const int every = cfg.params.record_every > 0 ? cfg.params.record_every : cfg.solver.steps_per_period;
  const FlowState u0 = cfg.initial_state(cfg.initial);
  TrajectoryRecord rec;
  const FlowState end = ctx.solver.advance(u0, cfg.forcing, u0.t + cfg.params.periods, &rec, every, false);

  Csv csv = ctx.csv("", {"t", "norm_h", "norm_v", "norm_h2", "bound_h", "bound_v"});
  const double h0 = rec.norm_h.front(), v0 = rec.norm_v.front();
  double worst = 0.0;
  for (std::size_t i = 0; i < rec.t.size(); ++i) {
    const double t = rec.t[i] - u0.t;
    const double decay = std::exp(-nu * lambda_1 * t);
    const double source = fsup * fsup / (nu * nu * lambda_1) * (1.0 - decay);
    const double bh = std::sqrt(h0 * h0 * decay + source), bv = std::sqrt(v0 * v0 * decay + source);
    csv.row({rec.t[i], rec.norm_h[i], rec.norm_v[i], rec.norm_h2[i], bh, bv});
    if (bh > 0) worst = std::max(worst, rec.norm_h[i] * rec.norm_h[i] / (bh * bh));
    if (bv > 0) worst = std::max(worst, rec.norm_v[i] * rec.norm_v[i] / (bv * bv));
  }
  Outcome o;
  o.passed = worst <= 1.0 + 1e-6;
  o.metrics = {{"final_t", end.t},
               {"final_norm_h", rec.norm_h.back()},
               {"max_energy_bound_ratio", worst},
               {"forcing_sup", fsup}};
  return o;
}

Outcome run_chain(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const KickSpec kick = cfg.kick_spec();
  kick.validate(cfg.solver.truncation);
  ChainState c;
  if (!cfg.params.resume.empty()) {
    const Checkpoint cp = load_checkpoint(cfg.params.resume);
    if (cp.meta.truncation != cfg.solver.truncation || cp.meta.nu != cfg.solver.nu ||
        cp.meta.omega != cfg.solver.omega || cp.meta.seed != cfg.seed) {
      throw Error(Errc::config, "checkpoint does not match config (N, nu, omega or seed differ)");
    }
    c = restore_chain(cp);
  } else {
    c = make_chain(cfg.initial_state(cfg.initial), kick, std::uint64_t(cfg.params.chain));
  }

  const double nu = cfg.solver.nu;
  const double fsup = forcing_sup(cfg.forcing);
  const double q = std::exp(-lambda_1 * nu);
  const double source = fsup * fsup / (nu * nu * lambda_1) * (1.0 - q);
  const double sqrt_b0 = std::sqrt(kick.b0());

  Csv csv = ctx.csv("", {"k", "t", "norm_h", "norm_v", "step_bound_h"});
  double prev = spectral_norm(c.state.streamfunction(), Norm::H);
  csv.row({double(c.k), c.state.t, prev, spectral_norm(c.state.streamfunction(), Norm::V),
           std::numeric_limits<double>::quiet_NaN()});
  double worst = 0.0;
  while (c.k < cfg.params.K) {
    c = chain_step(ctx.solver, std::move(c), cfg.forcing, kick);
    const SpectralScalar psi = c.state.streamfunction();
    const double h = spectral_norm(psi, Norm::H);
    // ||S u|| <= sqrt(||u||^2 q + source) and ||eta|| <= sqrt(B0)
    const double bound = std::sqrt(prev * prev * q + source) + sqrt_b0;
    if (bound > 0) worst = std::max(worst, h / bound);
    csv.row({double(c.k), c.state.t, h, spectral_norm(psi, Norm::V), bound});
    prev = h;
    if (cfg.params.checkpoint_every > 0 && c.k % cfg.params.checkpoint_every == 0) {
      const auto path = ctx.dir / (ctx.stem + "_k" + std::to_string(c.k) + ".ckpt");
      save_checkpoint(c, cfg.solver, path);
      ctx.result.checkpoints.push_back(path);
    }
  }
  Outcome o;
  o.passed = worst <= 1.0 + 1e-6;
  o.metrics = {{"final_k", c.k},
               {"final_norm_h", prev},
               {"max_step_bound_ratio", worst},
               {"rng_position", c.rng.position()},
               {"B0", kick.b0()}};
  return o;
}

Outcome run_ensemble_exp(Context& ctx) {
  const auto& cfg = ctx.cfg;
  EnsembleConfig ec{cfg.params.n_chains, cfg.params.K, ctx.workers, 0};
  const Observable h = configured_observable(cfg);
  const EnsembleStats st =
      run_ensemble(ctx.solver, cfg.initial_state(cfg.initial), cfg.forcing, cfg.kick_spec(), {h}, ec);
  Csv csv = ctx.csv("", {"k", "mean", "std_error", "norm_mean", "norm_min", "norm_q05", "norm_median", "norm_q95",
                         "norm_max"});
  bool finite = true;
  for (int k = 0; k <= st.steps; ++k) {
    const auto i = std::size_t(k);
    const std::vector<double> row{double(k),         st.mean[i][0],   st.std_error[i][0], st.norm_mean[i],
                                  st.norm_min[i],    st.norm_q05[i],  st.norm_median[i],  st.norm_q95[i],
                                  st.norm_max[i]};
    for (double v : row) finite = finite && std::isfinite(v);
    csv.row(row);
  }
  Outcome o;
  o.passed = finite;
  o.metrics = {{"observable", h.id()},
               {"final_mean", st.mean.back()[0]},
               {"final_std_error", st.std_error.back()[0]},
               {"final_norm_max", st.norm_max.back()}};
  return o;
}

Outcome run_verify_identities(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const double omega = cfg.solver.omega > 0 ? cfg.solver.omega : 1.0;
  const auto checks = verify_identities(ctx.solver.transform(), cfg.params.n_samples, cfg.seed, omega);
  Csv csv = ctx.csv("", {"check", "max_error", "tolerance", "samples", "passed"});
  Outcome o;
  for (const auto& c : checks) {
    csv.row_strings({c.name, format_double(c.max_error), format_double(c.tolerance), std::to_string(c.samples),
                     c.passed() ? "1" : "0"});
    o.passed = o.passed && c.passed();
    o.metrics[c.name] = c.max_error;
  }
  return o;
}

Outcome run_verify_energy(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto checks = verify_energy(ctx.solver, cfg.params.n_samples, cfg.params.periods, cfg.seed, ctx.workers);
  Csv csv = ctx.csv("", {"config", "max_ratio_h", "max_ratio_v"});
  Outcome o;
  double worst = 0.0;
  for (const auto& c : checks) {
    csv.row({double(c.config), c.max_ratio_h, c.max_ratio_v});
    worst = std::max({worst, c.max_ratio_h, c.max_ratio_v});
  }
  o.passed = worst <= 1.0 + 1e-6;
  o.metrics = {{"max_ratio", worst}, {"configs", checks.size()}};
  return o;
}

Outcome run_contraction(Context& ctx) {
  const auto& cfg = ctx.cfg;
  ContractionConfig cc;
  cc.big_radius = cfg.params.R;
  cc.small_radius = cfg.params.r;
  cc.n_samples = cfg.params.n_samples;
  cc.max_periods = cfg.params.periods;
  cc.seed = cfg.seed;
  cc.workers = ctx.workers;
  const ContractionReport rep = contraction_constants(ctx.solver, cfg.forcing, cc);
  Csv csv = ctx.csv("", {"n", "a_n"});
  for (std::size_t i = 0; i < rep.a_by_n.size(); ++i) csv.row({double(i + 1), rep.a_by_n[i]});
  Outcome o;
  o.passed = rep.passed();
  o.metrics = {{"R", rep.big_radius}, {"r", rep.small_radius}, {"a", rep.a},     {"n0", rep.n0},
               {"D", rep.d},          {"D_theory", rep.d_theory}, {"lipschitz", rep.lipschitz},
               {"worst_excess", rep.worst_excess}, {"samples", rep.samples}};
  return o;
}

Outcome run_gamma(Context& ctx) {
  const auto& cfg = ctx.cfg;
  GammaConfig gc;
  gc.radius = cfg.params.R;
  gc.cutoffs = cfg.params.cutoffs;
  gc.n_pairs = cfg.params.n_pairs;
  gc.seed = cfg.seed;
  gc.workers = ctx.workers;
  const GammaReport rep = gamma_n(ctx.solver, cfg.forcing, gc);
  Csv csv = ctx.csv("", {"cutoff", "gamma", "argmax_pair"});
  bool nonneg = true;
  for (std::size_t i = 0; i < rep.cutoffs.size(); ++i) {
    csv.row({double(rep.cutoffs[i]), rep.gamma[i], double(rep.argmax_pair[i])});
    nonneg = nonneg && rep.gamma[i] >= 0.0;
  }
  Outcome o;
  o.passed = rep.monotone && nonneg;
  o.metrics = {{"monotone", rep.monotone}, {"pairs", rep.pairs}, {"gamma", rep.gamma}};
  return o;
}

Outcome run_periodic_orbit(Context& ctx, PeriodicOrbit* out = nullptr) {
  const auto& cfg = ctx.cfg;
  PeriodicOrbit orbit = periodic_orbit_find(ctx.solver, cfg.forcing, cfg.initial_state(cfg.initial), cfg.params.tol,
                                            cfg.params.K, cfg.params.j_max);
  Csv csv = ctx.csv(out ? "_orbit" : "", {"k", "increment"});
  const int j = orbit.period > 0 ? orbit.period : 1;
  for (std::size_t i = 0; i < orbit.increments.size(); ++i) csv.row({double(int(i) + j), orbit.increments[i]});
  Outcome o;
  o.passed = orbit.converged;
  o.metrics = {{"converged", orbit.converged}, {"period", orbit.period},     {"residual", orbit.residual},
               {"rate", orbit.rate},           {"iterations", orbit.iterations},
               {"limit_norm_h", spectral_norm(orbit.limit.streamfunction(), Norm::H)}};
  if (out) *out = std::move(orbit);
  return o;
}

Outcome run_ball(Context& ctx) {
  const auto& cfg = ctx.cfg;
  BallConfig bc;
  bc.n_chains = cfg.params.n_chains;
  bc.steps = cfg.params.K;
  bc.workers = ctx.workers;
  PeriodicOrbit orbit;
  Outcome orbit_outcome;
  if (cfg.params.ball_mode == "attractor") {
    ExperimentConfig orbit_cfg = cfg;
    orbit_cfg.initial = InitialSpec{};
    orbit_cfg.params.K = std::max(cfg.params.periods, 1) * 10;
    Context octx{orbit_cfg, ctx.solver, ctx.workers, ctx.dir, ctx.stem, ctx.result, ctx.log};
    orbit_outcome = run_periodic_orbit(octx, &orbit);
    if (!orbit.converged) {
      Outcome o;
      o.passed = false;
      o.metrics = {{"error", "periodic orbit did not converge"}, {"orbit", orbit_outcome.metrics}};
      return o;
    }
    bc.mode = BallMode::attractor;
    bc.orbit = &orbit;
  }
  const BallReport rep = absorbing_ball(ctx.solver, cfg.initial_state(cfg.initial), cfg.forcing, cfg.kick_spec(), bc);
  Csv csv = ctx.csv("", {"k", "sup_distance"});
  for (std::size_t k = 0; k < rep.sup_by_k.size(); ++k) csv.row({double(k), rep.sup_by_k[k]});
  Outcome o;
  o.passed = rep.entered() && rep.contained();
  o.metrics = {{"mode", cfg.params.ball_mode}, {"radius", rep.radius},          {"empirical_sup", rep.empirical_sup},
               {"max_distance", rep.max_distance}, {"entry_step", rep.entry_step}, {"burn_in", rep.burn_in}};
  if (bc.mode == BallMode::attractor) o.metrics["orbit"] = orbit_outcome.metrics;
  return o;
}

Outcome run_zonal(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int N = cfg.solver.truncation;
  SpectralScalar base = cfg.initial_state(cfg.initial).streamfunction();
  SpectralScalar zonal(N);
  for (int n = 1; n <= N; ++n) zonal(n, 0) = complex_t(base(n, 0).real(), 0.0);
  const FlowState u_zonal = FlowState::from_streamfunction(zonal);

  RngStream rng(cfg.seed, sampler_stream_base + 31);
  std::vector<SpectralScalar> perturbations;
  for (int i = 0; i < cfg.params.n_samples; ++i) {
    SpectralScalar p = sample_smooth_field(N, cfg.params.perturbation_norm, rng);
    if (i % 2 == 1) {
      SpectralScalar z(N);
      for (int n = 1; n <= N; ++n) z(n, 0) = complex_t(p(n, 0).real(), 0.0);
      const double zn = spectral_norm(z, Norm::H);
      p = zn > 0 ? z * (cfg.params.perturbation_norm / zn) : z;
    }
    perturbations.push_back(std::move(p));
  }
  const ZonalReport rep = zonal_stability(ctx.solver, cfg.forcing, u_zonal, perturbations, cfg.params.periods, 10);

  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < rep.perturbations.size(); ++i) header.push_back("distance_h1_" + std::to_string(i));
  Csv csv = ctx.csv("", header);
  if (!rep.perturbations.empty()) {
    for (std::size_t r = 0; r < rep.perturbations[0].t.size(); ++r) {
      std::vector<double> row{rep.perturbations[0].t[r]};
      for (const auto& s : rep.perturbations) row.push_back(s.distance[r]);
      csv.row(row);
    }
  }

  ExperimentConfig orbit_cfg = cfg;
  orbit_cfg.params.j_max = std::max(1, cfg.params.j_max);
  Context octx{orbit_cfg, ctx.solver, ctx.workers, ctx.dir, ctx.stem, ctx.result, ctx.log};
  PeriodicOrbit orbit;
  run_periodic_orbit(octx, &orbit);

  const double rate_threshold = 0.9 * 2.0 * cfg.solver.nu * lambda_1;
  Outcome o;
  o.passed = rep.max_nonzonal_fraction <= 1e-10 && (perturbations.empty() || rep.min_rate >= rate_threshold) &&
             orbit.converged && orbit.period == 1;
  o.metrics = {{"max_nonzonal_fraction", rep.max_nonzonal_fraction},
               {"min_rate", rep.min_rate},
               {"rate_threshold", rate_threshold},
               {"orbit_period", orbit.period},
               {"orbit_converged", orbit.converged}};
  return o;
}

Outcome run_almost_zonal(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const AlmostZonalReport rep =
      almost_zonal(ctx.solver, cfg.zonal_forcing, cfg.forcing, cfg.initial_state(cfg.initial),
                   cfg.initial_state(cfg.initial_v), cfg.params.periods, cfg.params.threshold, cfg.params.scales);
  {
    Csv csv = ctx.csv("", {"t", "distance_h1", "distance_h"});
    for (std::size_t i = 0; i < rep.series.t.size(); ++i) {
      csv.row({rep.series.t[i], rep.series.distance[i], rep.series.distance_h[i]});
    }
  }
  Csv scan = ctx.csv("_scan", {"scale", "delta", "final_distance", "converged"});
  for (const auto& s : rep.scan) scan.row({s.scale, s.delta, s.final_distance, s.converged ? 1.0 : 0.0});
  Outcome o;
  o.passed = rep.converged;
  o.metrics = {{"delta", rep.delta},
               {"final_distance", rep.final_distance},
               {"converged", rep.converged},
               {"fit_rate", rep.series.fit.rate},
               {"largest_converged_delta", rep.largest_converged_delta}};
  return o;
}

Outcome run_mixing(Context& ctx) {
  const auto& cfg = ctx.cfg;
  MixingConfig mc;
  mc.ensemble = EnsembleConfig{cfg.params.n_chains, cfg.params.K, ctx.workers, 0};
  mc.common_streams = cfg.params.common_streams;
  const Observable h = configured_observable(cfg);
  const MixingReport rep = observable_gap_series(ctx.solver, cfg.initial_state(cfg.initial),
                                                 cfg.initial_state(cfg.initial_v), cfg.forcing, cfg.kick_spec(), h, mc);
  Csv csv = ctx.csv("", {"k", "gap", "half_width", "control_gap", "control_half_width"});
  for (std::size_t k = 0; k < rep.gap.size(); ++k) {
    csv.row({double(k), rep.gap[k], rep.half_width[k], rep.control_gap[k], rep.control_half_width[k]});
  }
  Outcome o;
  o.passed = !rep.inconclusive && rep.fit.rate > 0.0 && rep.fit.residual_fraction() < 0.1 && rep.control_consistent;
  o.metrics = {{"observable", rep.observable_id},
               {"rate", rep.fit.rate},
               {"prefactor", rep.fit.prefactor},
               {"residual_fraction", rep.fit.residual_fraction()},
               {"fit_points", rep.fit.points},
               {"noise_floor", rep.noise_floor},
               {"inconclusive", rep.inconclusive},
               {"control_consistent", rep.control_consistent}};
  return o;
}

Outcome run_probe(Context& ctx) {
  const auto& cfg = ctx.cfg;
  ProbeConfig pc;
  pc.m = cfg.params.M;
  pc.delta = cfg.params.delta;
  pc.radius = cfg.params.R;
  pc.n_samples = cfg.params.n_samples;
  pc.horizon = cfg.params.horizon;
  pc.tolerance = cfg.params.tol;
  pc.seed = cfg.seed;
  pc.workers = ctx.workers;
  const ProbeReport rep = finite_stability_probe(ctx.solver, cfg.forcing, cfg.initial_state(cfg.initial), pc);
  Csv csv = ctx.csv("", {"sample", "terminal_distance"});
  for (std::size_t i = 0; i < rep.terminal.size(); ++i) csv.row({double(i), rep.terminal[i]});
  Outcome o;
  o.metrics = {{"fraction", rep.fraction}, {"min", rep.min}, {"median", rep.median}, {"max", rep.max},
               {"samples", rep.samples}};
  return o;
}

Outcome dispatch(Context& ctx) {
  const std::string& e = ctx.cfg.experiment;
  if (e == "simulate") return run_simulate(ctx);
  if (e == "chain") return run_chain(ctx);
  if (e == "ensemble") return run_ensemble_exp(ctx);
  if (e == "verify-identities") return run_verify_identities(ctx);
  if (e == "verify-energy") return run_verify_energy(ctx);
  if (e == "contraction") return run_contraction(ctx);
  if (e == "gamma") return run_gamma(ctx);
  if (e == "ball") return run_ball(ctx);
  if (e == "zonal") return run_zonal(ctx);
  if (e == "almost-zonal") return run_almost_zonal(ctx);
  if (e == "periodic-orbit") return run_periodic_orbit(ctx);
  if (e == "mixing") return run_mixing(ctx);
  if (e == "probe-stability") return run_probe(ctx);
  throw Error(Errc::config, "unknown experiment '" + e + "'");
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace

std::string artifact_stem(const ExperimentConfig& cfg) {
  return cfg.experiment + "_" + config_hash(cfg) + "_s" + std::to_string(cfg.seed);
}

RunResult run(const ExperimentConfig& cfg, const RunOptions& options) {
  RunResult result;
  const std::filesystem::path dir = options.out_dir.value_or(std::filesystem::path(cfg.output_dir));
  const std::string stem = artifact_stem(cfg);
  const std::string hash = config_hash(cfg);
  const int workers = std::max(1, options.threads);

  auto fail = [&](const std::string& what) {
    result.exit_code = exit_error;
    result.message = what;
    try {
      std::filesystem::create_directories(dir);
      result.diagnostics = dir / (stem + ".diagnostics.txt");
      std::ofstream d(result.diagnostics);
      d << "experiment: " << cfg.experiment << "\nconfig_hash: " << hash << "\nseed: " << cfg.seed
        << "\nerror: " << what << '\n';
    } catch (...) {
    }
    if (options.log) *options.log << "error: " << what << '\n';
  };

  try {
    if (!is_experiment(cfg.experiment)) throw Error(Errc::config, "unknown experiment '" + cfg.experiment + "'");
    std::filesystem::create_directories(dir);
    cfg.solver.validate();
    cfg.forcing.validate(cfg.solver.truncation);
    const NavierStokesSolver solver(cfg.solver);
    Context ctx{cfg, solver, workers, dir, stem, result, options.log};
    const Outcome outcome = dispatch(ctx);

    result.exit_code = outcome.passed ? exit_pass : exit_verification_failed;
    result.message = outcome.passed ? "pass" : "verification failed";
    result.summary = dir / (stem + ".summary.json");
    write_json(result.summary, {{"experiment", cfg.experiment},
                                {"config_hash", hash},
                                {"seed", cfg.seed},
                                {"passed", outcome.passed},
                                {"exit_code", result.exit_code},
                                {"metrics", outcome.metrics}});
    result.manifest = dir / (stem + ".manifest.json");
    json files = json::array();
    for (const auto& p : result.csv) files.push_back(p.filename().string());
    for (const auto& p : result.checkpoints) files.push_back(p.filename().string());
    files.push_back(result.summary.filename().string());
    write_json(result.manifest, {{"config", to_json(cfg)},
                                 {"config_hash", hash},
                                 {"seed", cfg.seed},
                                 {"version", version_string},
                                 {"fftw", std::string(fftw_version)},
                                 {"threads", workers},
                                 {"files", files}});
    if (options.log) *options.log << cfg.experiment << ": " << result.message << " (" << stem << ")\n";
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return result;
}

}  // namespace spherekick
