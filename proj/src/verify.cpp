#include "spherekick/verify.hpp"

#include <algorithm>
#include <cmath>

#include "spherekick/measure.hpp"
#include "spherekick/parallel.hpp"

namespace spherekick {

namespace {

double coeff_norm(const SpectralScalar& s) { return std::sqrt(std::max(0.0, l2_inner(s, s))); }

double grid_speed_max(const SphericalTransform& tr, const SpectralScalar& psi) {
  const GridVector u = tr.velocity(psi);
  double m = 0.0;
  for (std::size_t i = 0; i < u.east.values().size(); ++i) {
    m = std::max(m, std::hypot(u.east.values()[i], u.north.values()[i]));
  }
  return m;
}

SpectralScalar zonal_part(const SpectralScalar& s) {
  SpectralScalar z(s.truncation());
  for (int n = 0; n <= s.truncation(); ++n) z(n, 0) = complex_t(s(n, 0).real(), 0.0);
  return z;
}

}  // namespace

std::vector<IdentityCheck> verify_identities(const SphericalTransform& tr, int n_fields, std::uint64_t seed,
                                             double omega) {
  const int N = tr.truncation();
  RngStream rng(seed, sampler_stream_base + 21);
  std::vector<IdentityCheck> checks = {
      {"transform_roundtrip", 0, 1e-10, 0}, {"parseval", 0, 1e-10, 0},
      {"laplacian_eigenvalue", 0, 1e-10, 0}, {"green_identity", 0, 1e-10, 0},
      {"jacobian_antisymmetry", 0, 1e-10, 0}, {"jacobian_zero_mean", 0, 1e-10, 0},
      {"b(u,v,v)", 0, 1e-9, 0},               {"b(u,v,w)+b(u,w,v)", 0, 1e-9, 0},
      {"b(v,v,Av)", 0, 1e-9, 0},              {"zonal b(u,v,Av)", 0, 1e-9, 0},
      {"zonal b(v,u,Av)", 0, 1e-9, 0},        {"coriolis r=0", 0, 1e-9, 0},
      {"coriolis r=1", 0, 1e-9, 0},           {"poincare", 0, 0.0, 0},
      {"poincare_equality_n1", 0, 1e-12, 0},
      {"zonal n=1 b(u,v,Av)", 0, 1e-9, 0},   {"zonal n=1 b(v,u,Av)", 0, 1e-9, 0},
      {"zonal sum vs vorticity form", 0, 1e-9, 0},
  };
  auto update = [&](std::size_t i, double e) {
    checks[i].max_error = std::max(checks[i].max_error, e);
    ++checks[i].samples;
  };

  // Laplacian eigenvalues on every single coefficient.
  for (int m = 0; m <= N; ++m) {
    for (int n = std::max(m, 1); n <= N; ++n) {
      SpectralScalar e(N);
      e(n, m) = complex_t(1.0, m > 0 ? -0.5 : 0.0);
      const SpectralScalar le = apply_laplacian(e);
      update(2, std::abs(le(n, m) + degree_eigenvalue(n) * e(n, m)) / degree_eigenvalue(n));
    }
  }

  for (int f = 0; f < n_fields; ++f) {
    const SpectralScalar a = sample_smooth_field(N, 1.0, rng);
    const SpectralScalar b = sample_smooth_field(N, 1.0, rng);
    const SpectralScalar c = sample_smooth_field(N, 1.0, rng);

    const GridScalar ga = tr.synthesize(a);
    update(0, coeff_norm(tr.analyze(ga) - a) / coeff_norm(a));
    GridScalar sq(tr.grid());
    for (std::size_t i = 0; i < sq.values().size(); ++i) sq.values()[i] = ga.values()[i] * ga.values()[i];
    update(1, std::abs(tr.integrate(sq) - l2_inner(a, a)) / l2_inner(a, a));

    const GridVector ua = tr.velocity(a);
    GridScalar ke(tr.grid());
    for (std::size_t i = 0; i < ke.values().size(); ++i) {
      ke.values()[i] = ua.east.values()[i] * ua.east.values()[i] + ua.north.values()[i] * ua.north.values()[i];
    }
    const double ha = std::pow(spectral_norm(a, Norm::H), 2);
    update(3, std::abs(tr.integrate(ke) - ha) / ha);

    const SpectralScalar jab = tr.jacobian(a, b);
    const SpectralScalar jba = tr.jacobian(b, a);
    const double jn = coeff_norm(jab);
    update(4, coeff_norm(jab + jba) / jn);
    update(5, std::abs(jab(0, 0)) / jn);

    const double sup_a = grid_speed_max(tr, a);
    const double sup_b = grid_speed_max(tr, b);
    const double vb = spectral_norm(b, Norm::V), hb = spectral_norm(b, Norm::H), hc = spectral_norm(c, Norm::H);
    const double h2b = spectral_norm(b, Norm::H2);
    update(6, std::abs(trilinear(tr, a, b, b)) / (sup_a * vb * hb));
    update(7, std::abs(trilinear(tr, a, b, c) + trilinear(tr, a, c, b)) / (sup_a * vb * hc));
    update(8, std::abs(trilinear(tr, b, b, stokes_operator(b))) / (sup_b * vb * h2b));

    const SpectralScalar z = zonal_part(a);
    const auto [bz1, bz2] = zonal_trilinear_checks(tr, z, b);
    update(9, std::abs(bz1) / (grid_speed_max(tr, z) * vb * h2b));
    update(10, std::abs(bz2) / (sup_b * spectral_norm(z, Norm::V) * h2b));
    // b(u,v,Av) + b(v,u,Av) = <J(psi_v, lap psi_u), lap psi_v> for zonal u.
    const double jform = l2_inner(tr.jacobian(b, apply_laplacian(z)), apply_laplacian(b));
    update(17, std::abs(bz1 + bz2 - jform) / (grid_speed_max(tr, z) * vb * h2b));

    SpectralScalar z1(N);
    z1(1, 0) = complex_t(rng.next_normal(), 0.0);
    const auto [s1, s2] = zonal_trilinear_checks(tr, z1, b);
    update(15, std::abs(s1) / (grid_speed_max(tr, z1) * vb * h2b));
    update(16, std::abs(s2) / (sup_b * spectral_norm(z1, Norm::V) * h2b));

    const double ha_n = spectral_norm(a, Norm::H);
    update(11, std::abs(coriolis_inner(tr, omega, a, 0)) / (2.0 * omega * ha_n * ha_n));
    update(12, std::abs(coriolis_inner(tr, omega, a, 1)) / (2.0 * omega * ha_n * spectral_norm(a, Norm::H2)));

    const double ratio = std::pow(spectral_norm(a, Norm::V) / ha_n, 2);
    update(13, std::max(0.0, 2.0 - ratio));

    SpectralScalar e1(N);
    e1(1, 0) = rng.next_normal();
    e1(1, 1) = complex_t(rng.next_normal(), rng.next_normal());
    update(14, std::abs(std::pow(spectral_norm(e1, Norm::V) / spectral_norm(e1, Norm::H), 2) - 2.0) / 2.0);
  }
  return checks;
}

std::vector<EnergyCheck> verify_energy(const NavierStokesSolver& solver, int n_configs, int periods,
                                       std::uint64_t seed, int workers) {
  const int N = solver.truncation();
  const double nu = solver.params().nu;
  const int J = mode_count(N);
  RngStream rng(seed, sampler_stream_base + 22);

  std::vector<FlowState> starts;
  std::vector<ForcingSpec> forces;
  for (int c = 0; c < n_configs; ++c) {
    starts.push_back(FlowState::from_streamfunction(sample_in_ball(N, 2.0, rng)));
    ForcingSpec f;
    const int terms = 1 + int(rng.next_uniform() * 3.0);
    for (int t = 0; t < terms; ++t) {
      ForcingTerm term;
      term.mode = 1 + int(rng.next_uniform() * std::min(J, 35));
      term.amplitude = rng.next_uniform() - 0.5;
      term.profile = Profile(int(rng.next_uniform() * 3.0));
      term.q = 1 + int(rng.next_uniform() * 2.0);
      term.phase = 2.0 * pi * rng.next_uniform();
      f.terms.push_back(term);
    }
    forces.push_back(f);
  }

  std::vector<EnergyCheck> out(static_cast<std::size_t>(n_configs));
  parallel_for(out.size(), workers, [&](std::size_t c) {
    const double fsup = forcing_sup_norm(forces[c]);
    const double lam1 = 2.0;
    TrajectoryRecord rec;
    solver.advance(starts[c], forces[c], starts[c].t + periods, &rec, 1, false);
    const double h0 = rec.norm_h.front() * rec.norm_h.front();
    const double v0 = rec.norm_v.front() * rec.norm_v.front();
    EnergyCheck chk;
    chk.config = int(c);
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
      const double t = rec.t[i] - rec.t.front();
      const double decay = std::exp(-nu * lam1 * t);
      const double source = fsup * fsup / (nu * nu * lam1) * (1.0 - decay);
      const double bh = h0 * decay + source, bv = v0 * decay + source;
      if (bh > 0.0) chk.max_ratio_h = std::max(chk.max_ratio_h, rec.norm_h[i] * rec.norm_h[i] / bh);
      if (bv > 0.0) chk.max_ratio_v = std::max(chk.max_ratio_v, rec.norm_v[i] * rec.norm_v[i] / bv);
    }
    out[c] = chk;
  });
  return out;
}

}  // namespace spherekick
