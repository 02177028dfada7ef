#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "spherekick/measure.hpp"
#include "spherekick/parallel.hpp"
#include "support.hpp"

using namespace spherekick;
using spherekick::testing::random_field;

namespace {

SolverParams params(double nu, int N, int spp) {
  SolverParams p;
  p.nu = nu;
  p.truncation = N;
  p.steps_per_period = spp;
  return p;
}

double h_dist(const FlowState& a, const FlowState& b) {
  return spectral_norm(invert_laplacian(a.vorticity - b.vorticity), Norm::H);
}

ForcingSpec constant_force(int mode, double amp) { return ForcingSpec{{ForcingTerm{mode, amp}}}; }

}  // namespace

//---------------------------------------------------------------------------//
// Observables
//---------------------------------------------------------------------------//

TEST(Observable, ValuesAtKnownFields) {
  const int N = 4;
  const SpectralScalar zero(N);
  const SpectralScalar e1 = mode_field(1, N) * 2.0;  // ||.||_H = 2
  EXPECT_DOUBLE_EQ(Observable::bounded_rational({})(zero), 1.0);
  EXPECT_NEAR(Observable::bounded_rational({})(e1), 1.0 / 5.0, 1e-14);
  EXPECT_NEAR(Observable::bounded_rational(e1)(e1), 1.0, 1e-14);
  EXPECT_NEAR(Observable::clipped_norm(4.0)(e1), 0.5, 1e-14);
  EXPECT_DOUBLE_EQ(Observable::clipped_norm(1.0)(e1), 1.0);
  EXPECT_NEAR(Observable::coordinate(1, 5.0)(e1), 2.0, 1e-14);
  EXPECT_DOUBLE_EQ(Observable::coordinate(1, 0.5)(e1), 0.5);
  EXPECT_NEAR(Observable::coordinate(2, 5.0)(e1), 0.0, 1e-14);
}

TEST(Observable, IdsAndValidation) {
  EXPECT_EQ(Observable::bounded_rational({}).id(), "rational");
  EXPECT_EQ(Observable::clipped_norm(2.0).id(), "clipnorm_R2");
  EXPECT_EQ(Observable::coordinate(3, 0.5).id(), "coord_j3_c0.5");
  EXPECT_THROW(Observable::clipped_norm(0.0), Error);
  EXPECT_THROW(Observable::coordinate(0, 1.0), Error);
  EXPECT_THROW(Observable::coordinate(1, -1.0), Error);
}

TEST(Observable, BoundedAndLipschitz) {
  const int N = 5;
  const std::vector<Observable> obs{Observable::bounded_rational({}),
                                    Observable::bounded_rational(random_field(N, 3, 0, 0.7)),
                                    Observable::clipped_norm(0.8), Observable::coordinate(4, 0.3)};
  for (const auto& h : obs) {
    for (std::uint64_t i = 0; i < 40; ++i) {
      const SpectralScalar u = random_field(N, 11, 2 * i, 0.05 * double(i));
      const SpectralScalar v = random_field(N, 11, 2 * i + 1, 0.03 * double(i));
      const double hu = h(u), hv = h(v);
      EXPECT_LE(std::abs(hu), 1.0) << h.id();
      EXPECT_LE(std::abs(hu - hv), h.lipschitz() * spectral_norm(u - v, Norm::H) * (1 + 1e-12) + 1e-15) << h.id();
    }
  }
}

TEST(Observable, RationalLipschitzConstantIsSharp) {
  // d/dx 1/(1+x^2) peaks at x = 1/sqrt(3).
  const double x = 1.0 / std::sqrt(3.0), eps = 1e-6;
  const double slope = (1.0 / (1.0 + (x - eps) * (x - eps)) - 1.0 / (1.0 + (x + eps) * (x + eps))) / (2 * eps);
  EXPECT_NEAR(slope, Observable::bounded_rational({}).lipschitz(), 1e-9);
}

//---------------------------------------------------------------------------//
// Sampling and fits
//---------------------------------------------------------------------------//

TEST(Sampling, SmoothFieldHasRequestedNorm) {
  RngStream rng(5, sampler_stream_base);
  for (double r : {0.1, 1.0, 7.5}) {
    EXPECT_NEAR(spectral_norm(sample_smooth_field(6, r, rng), Norm::H), r, 1e-12 * r);
  }
  EXPECT_EQ(spectral_norm(sample_smooth_field(6, 0.0, rng), Norm::H), 0.0);
  for (int i = 0; i < 50; ++i) EXPECT_LT(spectral_norm(sample_in_ball(6, 2.0, rng), Norm::H), 2.0);
}

TEST(Fit, RecoversExactExponential) {
  std::vector<double> t, y;
  for (int k = 0; k < 12; ++k) {
    t.push_back(k);
    y.push_back(3.0 * std::exp(-0.7 * k));
  }
  const ExponentialFit fit = fit_exponential(t, y);
  EXPECT_TRUE(fit.valid());
  EXPECT_NEAR(fit.rate, 0.7, 1e-12);
  EXPECT_NEAR(fit.prefactor, 3.0, 1e-11);
  EXPECT_LT(fit.residual_fraction(), 1e-12);
}

TEST(Fit, SkipsNonPositiveAndChecksLengths) {
  const ExponentialFit fit = fit_exponential({0, 1, 2, 3}, {1.0, 0.0, std::exp(-2.0), -1.0});
  EXPECT_EQ(fit.points, 2);
  EXPECT_NEAR(fit.rate, 1.0, 1e-12);
  EXPECT_FALSE(fit_exponential({0}, {1.0}).valid());
  EXPECT_THROW(fit_exponential({0, 1}, {1.0}), Error);
}

//---------------------------------------------------------------------------//
// Ensembles
//---------------------------------------------------------------------------//

TEST(Ensemble, SingleUnkickedChainIsTheDeterministicTrajectory) {
  const NavierStokesSolver solver(params(0.3, 6, 40));
  const ForcingSpec f{{ForcingTerm{3, 0.4, Profile::cosine}}};
  const FlowState u0 = FlowState::from_streamfunction(random_field(6, 8, 0, 1.5));
  const Observable h = Observable::coordinate(2, 10.0);
  EnsembleConfig cfg;
  cfg.n_chains = 1;
  cfg.steps = 4;
  const EnsembleStats st = run_ensemble(solver, u0, f, KickSpec{}, {h}, cfg);
  FlowState s = u0;
  for (int k = 0; k <= 4; ++k) {
    EXPECT_EQ(st.mean[std::size_t(k)][0], h(s.streamfunction()));
    EXPECT_EQ(st.norm_mean[std::size_t(k)], spectral_norm(s.streamfunction(), Norm::H));
    EXPECT_EQ(st.std_error[std::size_t(k)][0], 0.0);
    s = solver.advance_periods(s, f, 1);
  }
  EXPECT_EQ(st.observable_ids, std::vector<std::string>{h.id()});
}

TEST(Ensemble, CoordinateMeanIsZeroAndErrorScales) {
  // From rest with f = 0 the first state is the kick itself, whose coordinates are centred.
  const NavierStokesSolver solver(params(0.5, 2, 1));
  const KickSpec kick{{0.8, 0.4, 0.2}, NoiseLaw::uniform, 17};
  const Observable h = Observable::coordinate(1, 10.0);
  auto run = [&](int n) {
    EnsembleConfig cfg;
    cfg.n_chains = n;
    cfg.steps = 1;
    return run_ensemble(solver, FlowState::zero(2), ForcingSpec{}, kick, {h}, cfg);
  };
  const EnsembleStats s1 = run(1000), s2 = run(2000), s4 = run(4000);
  EXPECT_LE(std::abs(s4.mean[1][0]), 3.0 * s4.std_error[1][0]);
  // Uniform on [-0.8, 0.8]: standard deviation 0.8 / sqrt(3).
  EXPECT_NEAR(s4.std_error[1][0], 0.8 / std::sqrt(3.0) / std::sqrt(4000.0), 0.05 * s4.std_error[1][0]);
  EXPECT_NEAR(s1.std_error[1][0] / s4.std_error[1][0], 2.0, 0.4);
  EXPECT_NEAR(s1.std_error[1][0] / s2.std_error[1][0], std::sqrt(2.0), 0.2 * std::sqrt(2.0));
}

TEST(Ensemble, IndependentOfWorkerCount) {
  const NavierStokesSolver solver(params(0.2, 5, 20));
  const ForcingSpec f = constant_force(2, 0.5);
  const KickSpec kick{{0.3, 0.3, 0.2, 0.1}, NoiseLaw::beta, 4};
  const std::vector<Observable> obs{Observable::clipped_norm(2.0), Observable::coordinate(3, 1.0)};
  EnsembleConfig cfg;
  cfg.n_chains = 24;
  cfg.steps = 3;
  cfg.workers = 1;
  const EnsembleStats a = run_ensemble(solver, FlowState::zero(5), f, kick, obs, cfg);
  cfg.workers = 8;
  const EnsembleStats b = run_ensemble(solver, FlowState::zero(5), f, kick, obs, cfg);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
  EXPECT_EQ(a.norm_max, b.norm_max);
  EXPECT_EQ(a.norm_q05, b.norm_q05);
}

TEST(Ensemble, NormQuantilesOrdered) {
  const NavierStokesSolver solver(params(0.2, 4, 10));
  EnsembleConfig cfg;
  cfg.n_chains = 50;
  cfg.steps = 2;
  const EnsembleStats st =
      run_ensemble(solver, FlowState::zero(4), ForcingSpec{}, KickSpec{{0.5, 0.5}, NoiseLaw::uniform, 1}, {}, cfg);
  for (int k = 0; k <= 2; ++k) {
    const auto i = std::size_t(k);
    EXPECT_LE(st.norm_min[i], st.norm_q05[i]);
    EXPECT_LE(st.norm_q05[i], st.norm_median[i]);
    EXPECT_LE(st.norm_median[i], st.norm_q95[i]);
    EXPECT_LE(st.norm_q95[i], st.norm_max[i]);
    EXPECT_LE(st.norm_min[i], st.norm_mean[i]);
    EXPECT_LE(st.norm_mean[i], st.norm_max[i]);
  }
}

TEST(Ensemble, RejectsBadConfig) {
  const NavierStokesSolver solver(params(0.2, 3, 10));
  EnsembleConfig cfg;
  cfg.n_chains = 0;
  EXPECT_THROW(run_ensemble(solver, FlowState::zero(3), {}, KickSpec{}, {}, cfg), Error);
  cfg.n_chains = 1;
  cfg.steps = -1;
  EXPECT_THROW(run_ensemble(solver, FlowState::zero(3), {}, KickSpec{}, {}, cfg), Error);
}

//---------------------------------------------------------------------------//
// Mixing
//---------------------------------------------------------------------------//

class MixingTest : public ::testing::Test {
 protected:
  NavierStokesSolver solver{params(0.3, 4, 20)};
  ForcingSpec f = constant_force(3, 0.3);
  KickSpec kick{{0.4, 0.3, 0.2, 0.2, 0.1}, NoiseLaw::uniform, 9};
  FlowState u0 = FlowState::from_streamfunction(random_field(4, 1, 0, 1.0));
  FlowState v0 = FlowState::from_streamfunction(random_field(4, 1, 1, 0.2));
  Observable h = Observable::bounded_rational({});
};

TEST_F(MixingTest, InitialGapIsExact) {
  MixingConfig cfg;
  cfg.ensemble.n_chains = 16;
  cfg.ensemble.steps = 2;
  const MixingReport rep = observable_gap_series(solver, u0, v0, f, kick, h, cfg);
  EXPECT_NEAR(rep.gap[0], std::abs(h(u0.streamfunction()) - h(v0.streamfunction())), 1e-14);
  EXPECT_LT(rep.half_width[0], 1e-14);
  EXPECT_EQ(rep.observable_id, h.id());
  EXPECT_EQ(rep.gap.size(), 3u);
}

TEST_F(MixingTest, CommonStreamsFromOneStartGiveZeroGap) {
  MixingConfig cfg;
  cfg.ensemble.n_chains = 16;
  cfg.ensemble.steps = 3;
  cfg.common_streams = true;
  const MixingReport rep = observable_gap_series(solver, u0, u0, f, kick, h, cfg);
  for (double g : rep.gap) EXPECT_EQ(g, 0.0);
  for (double g : rep.control_gap) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(rep.noise_floor, 0.0);
  EXPECT_TRUE(rep.inconclusive);
}

TEST_F(MixingTest, ControlIsConsistentAndGapDecays) {
  MixingConfig cfg;
  cfg.ensemble.n_chains = 400;
  cfg.ensemble.steps = 6;
  const MixingReport rep = observable_gap_series(solver, u0, v0, f, kick, h, cfg);
  EXPECT_TRUE(rep.control_consistent);
  EXPECT_GT(rep.noise_floor, 0.0);
  EXPECT_EQ(rep.control_gap[0], 0.0);
  EXPECT_LT(rep.gap.back(), rep.gap[0]);
  ASSERT_TRUE(rep.fit.valid());
  EXPECT_GT(rep.fit.rate, 0.0);
}

//---------------------------------------------------------------------------//
// Coupling
//---------------------------------------------------------------------------//

TEST(Coupling, IdenticalStartsStayTogether) {
  const NavierStokesSolver solver(params(0.3, 4, 20));
  const FlowState u0 = FlowState::from_streamfunction(random_field(4, 2));
  CouplingConfig cfg;
  cfg.steps = 5;
  const CouplingSeries s =
      coupled_distance(solver, u0, u0, constant_force(2, 0.5), KickSpec{{0.5, 0.5}, NoiseLaw::uniform, 3}, cfg);
  for (double d : s.distance) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(s.steps_run, 5);
}

TEST(Coupling, SharedSeriesMatchesDirectChains) {
  const NavierStokesSolver solver(params(0.2, 5, 20));
  const ForcingSpec f = constant_force(4, 0.7);
  const KickSpec kick{{0.5, 0.4, 0.3, 0.2}, NoiseLaw::triangular, 31};
  const FlowState u0 = FlowState::from_streamfunction(random_field(5, 4, 0, 1.2));
  const FlowState v0 = FlowState::from_streamfunction(random_field(5, 4, 1, 0.4));
  CouplingConfig cfg;
  cfg.steps = 6;
  cfg.stream = 12;
  const CouplingSeries s = coupled_distance(solver, u0, v0, f, kick, cfg);
  ChainState a = make_chain(u0, kick, 12), b = make_chain(v0, kick, 12);
  ASSERT_EQ(s.distance.size(), 7u);
  EXPECT_NEAR(s.distance[0], h_dist(u0, v0), 1e-14);
  for (int k = 1; k <= 6; ++k) {
    a = chain_step(solver, std::move(a), f, kick);
    b = chain_step(solver, std::move(b), f, kick);
    EXPECT_NEAR(s.distance[std::size_t(k)], h_dist(a.state, b.state), 1e-12);
  }
}

TEST(Coupling, SharedKicksContractIndependentKicksDoNot) {
  const NavierStokesSolver solver(params(0.5, 4, 20));
  const KickSpec kick{{1.0, 0.5, 0.5}, NoiseLaw::uniform, 8};
  const FlowState u0 = FlowState::from_streamfunction(random_field(4, 6, 0, 0.5));
  const FlowState v0 = FlowState::from_streamfunction(random_field(4, 6, 1, 0.5));
  CouplingConfig cfg;
  cfg.steps = 20;
  const CouplingSeries shared = coupled_distance(solver, u0, v0, {}, kick, cfg);
  EXPECT_LT(shared.distance.back(), 1e-6 * shared.distance.front());
  EXPECT_GT(shared.fit.rate, 0.5);
  cfg.shared = false;
  const CouplingSeries indep = coupled_distance(solver, u0, v0, {}, kick, cfg);
  EXPECT_GT(indep.distance.back(), 1e-2);
}

TEST(Coupling, StopBelowEndsEarly) {
  const NavierStokesSolver solver(params(0.5, 3, 10));
  CouplingConfig cfg;
  cfg.steps = 100;
  cfg.stop_below = 1e-3;
  const CouplingSeries s =
      coupled_distance(solver, FlowState::from_streamfunction(random_field(3, 1)), FlowState::zero(3), {},
                       KickSpec{}, cfg);
  EXPECT_LT(s.steps_run, 100);
  EXPECT_LE(s.distance.back(), 1e-3);
  EXPECT_GT(s.distance[s.distance.size() - 2], 1e-3);
}

TEST(Coupling, MonotoneFrom) {
  EXPECT_EQ(monotone_from({}), 0);
  EXPECT_EQ(monotone_from({3, 2, 1}), 0);
  EXPECT_EQ(monotone_from({1, 2, 1, 1}), 1);
  EXPECT_EQ(monotone_from({1, 2, 1, 3}), 3);
}

//---------------------------------------------------------------------------//
// Contraction constants
//---------------------------------------------------------------------------//

TEST(Contraction, UnforcedFlowContractsAtTheViscousRate) {
  const double nu = 0.3;
  const NavierStokesSolver solver(params(nu, 5, 40));
  ContractionConfig cfg;
  cfg.big_radius = 2.0;
  cfg.small_radius = 0.1;
  cfg.n_samples = 8;
  cfg.max_periods = 4;
  const ContractionReport rep = contraction_constants(solver, {}, cfg);
  EXPECT_LE(rep.d, 1e-6);
  EXPECT_EQ(rep.d_theory, 0.0);
  ASSERT_TRUE(rep.passed());
  EXPECT_EQ(rep.n0, 1);
  // Energy decays at least as fast as the first eigenvalue allows.
  for (int n = 1; n <= 4; ++n) {
    EXPECT_LE(rep.a_by_n[std::size_t(n - 1)], std::exp(-nu * 2.0 * n) * (1 + 1e-3));
  }
  EXPECT_GT(rep.lipschitz, 0.0);
}

TEST(Contraction, RejectsBadRadii) {
  const NavierStokesSolver solver(params(0.3, 3, 10));
  ContractionConfig cfg;
  cfg.big_radius = 0.5;
  cfg.small_radius = 1.0;
  EXPECT_THROW(contraction_constants(solver, {}, cfg), Error);
}

TEST(Contraction, OneStepRatioForNearbyStarts) {
  const double nu = 0.5;
  const NavierStokesSolver solver(params(nu, 5, 40));
  const FlowState u0 = FlowState::from_streamfunction(random_field(5, 3));
  FlowState v0 = u0;
  v0.vorticity += apply_laplacian(mode_field(1, 5) * 1e-6);
  const double q = one_step_ratio(solver, u0, v0, constant_force(5, 0.5));
  EXPECT_GE(q, std::exp(-2.0 * nu) * 0.5);
  EXPECT_LE(q, 10.0);
  EXPECT_THROW(one_step_ratio(solver, u0, u0, {}), Error);
}

//---------------------------------------------------------------------------//
// Gamma_N
//---------------------------------------------------------------------------//

TEST(Gamma, LinearFlowMatchesTheNextEigenvalue) {
  const double nu = 0.1;
  const int N = 5;
  SolverParams p = params(nu, N, 20);
  p.nonlinear = false;
  const NavierStokesSolver solver(p);
  GammaConfig cfg;
  cfg.cutoffs = {0, 3, 8, 15, 24, mode_count(N)};
  cfg.n_pairs = 6;
  const GammaReport rep = gamma_n(solver, {}, cfg);
  EXPECT_TRUE(rep.monotone);
  for (std::size_t i = 0; i + 1 < cfg.cutoffs.size(); ++i) {
    const double expected = std::exp(-nu * ModeOrdering::decode(cfg.cutoffs[i] + 1).eigenvalue());
    EXPECT_NEAR(rep.gamma[i], expected, 1e-8 * expected) << "cutoff " << cfg.cutoffs[i];
  }
  EXPECT_EQ(rep.gamma.back(), 0.0);
}

TEST(Gamma, NonlinearIsNonNegativeAndDecreasing) {
  const NavierStokesSolver solver(params(0.2, 6, 40));
  GammaConfig cfg;
  cfg.radius = 1.0;
  cfg.cutoffs = {3, 8, 15, 24};
  cfg.n_pairs = 8;
  const GammaReport rep = gamma_n(solver, constant_force(2, 0.3), cfg);
  for (double g : rep.gamma) EXPECT_GE(g, 0.0);
  EXPECT_LT(rep.gamma.back(), rep.gamma.front() / 2);
  EXPECT_EQ(rep.pairs, 8 + 4);
}

TEST(Gamma, RejectsBadCutoffs) {
  const NavierStokesSolver solver(params(0.2, 3, 10));
  GammaConfig cfg;
  cfg.cutoffs = {4, 2};
  EXPECT_THROW(gamma_n(solver, {}, cfg), Error);
  cfg.cutoffs = {mode_count(3) + 1};
  EXPECT_THROW(gamma_n(solver, {}, cfg), Error);
}

//---------------------------------------------------------------------------//
// Periodic orbits and absorbing balls
//---------------------------------------------------------------------------//

TEST(PeriodicOrbit, UnforcedFlowFindsRest) {
  const NavierStokesSolver solver(params(0.5, 4, 20));
  const PeriodicOrbit orb =
      periodic_orbit_find(solver, {}, FlowState::from_streamfunction(random_field(4, 2)), 1e-10, 100, 3);
  ASSERT_TRUE(orb.converged);
  EXPECT_EQ(orb.period, 1);
  EXPECT_LT(spectral_norm(orb.limit.streamfunction(), Norm::H), 1e-9);
  EXPECT_LT(orb.residual, 1e-10);
  EXPECT_GT(orb.rate, 0.5);
}

TEST(PeriodicOrbit, SteadyForceStaysInsideTheDeterministicBall) {
  const double nu = 0.5;
  const NavierStokesSolver solver(params(nu, 4, 20));
  const ForcingSpec f = constant_force(2, 0.1);
  const PeriodicOrbit orb = periodic_orbit_find(solver, f, FlowState::zero(4), 1e-12, 200, 2);
  ASSERT_TRUE(orb.converged);
  EXPECT_EQ(orb.period, 1);
  EXPECT_LE(spectral_norm(orb.limit.streamfunction(), Norm::H),
            forcing_sup_norm(f) / (nu * std::sqrt(2.0)) * (1 + 1e-3));
  EXPECT_EQ(orb.cycle.size(), 1u);
}

TEST(PeriodicOrbit, Validation) {
  const NavierStokesSolver solver(params(0.5, 3, 10));
  EXPECT_THROW(periodic_orbit_find(solver, {}, FlowState::zero(3), 0.0, 10, 1), Error);
  EXPECT_THROW(periodic_orbit_find(solver, {}, FlowState::zero(3), 1e-6, 10, 0), Error);
}

TEST(AbsorbingBall, UnkickedUnforcedSupDecreases) {
  const NavierStokesSolver solver(params(0.3, 4, 20));
  BallConfig cfg;
  cfg.n_chains = 4;
  cfg.steps = 8;
  const BallReport rep =
      absorbing_ball(solver, FlowState::from_streamfunction(random_field(4, 5)), {}, KickSpec{}, cfg);
  for (std::size_t k = 2; k < rep.sup_by_k.size(); ++k) EXPECT_LE(rep.sup_by_k[k], rep.sup_by_k[k - 1]);
  EXPECT_EQ(rep.radius, 0.0);
  EXPECT_NEAR(rep.max_distance, 1.0, 1e-12);
  EXPECT_EQ(rep.burn_in, 2);
  EXPECT_FALSE(rep.entered());
}

TEST(AbsorbingBall, AttractorModeNeedsAnOrbit) {
  const NavierStokesSolver solver(params(0.3, 3, 10));
  BallConfig cfg;
  cfg.mode = BallMode::attractor;
  EXPECT_THROW(absorbing_ball(solver, FlowState::zero(3), {}, KickSpec{}, cfg), Error);
}

TEST(AbsorbingBall, KickedChainsStayInTheOriginBall) {
  const double nu = 0.5;
  const NavierStokesSolver solver(params(nu, 4, 20));
  const ForcingSpec f = constant_force(3, 0.2);
  const KickSpec kick{{0.1, 0.1, 0.1}, NoiseLaw::uniform, 6};
  BallConfig cfg;
  cfg.n_chains = 32;
  cfg.steps = 20;
  const BallReport rep = absorbing_ball(solver, FlowState::zero(4), f, kick, cfg);
  EXPECT_NEAR(rep.radius, support_radius_origin(forcing_sup_norm(f), nu, kick.b0()), 1e-14);
  EXPECT_TRUE(rep.contained());
  EXPECT_TRUE(rep.entered());
}

//---------------------------------------------------------------------------//
// Zonal and almost zonal stability
//---------------------------------------------------------------------------//

TEST(Zonal, ZeroPerturbationGivesZeroSeries) {
  const NavierStokesSolver solver(params(0.5, 6, 20));
  const ForcingSpec f{{ForcingTerm{9, 1.0, Profile::cosine}}};
  const FlowState u = FlowState::from_streamfunction(mode_field(4, 6) * 0.5);
  const ZonalReport rep = zonal_stability(solver, f, u, {SpectralScalar(6)}, 2, 4);
  ASSERT_EQ(rep.perturbations.size(), 1u);
  for (double d : rep.perturbations[0].distance) EXPECT_EQ(d, 0.0);
  EXPECT_EQ(rep.perturbations[0].t.size(), 9u);
  EXPECT_LT(rep.max_nonzonal_fraction, 1e-20);
}

TEST(Zonal, PerturbationsDecay) {
  const NavierStokesSolver solver(params(0.5, 6, 50));
  const ForcingSpec f{{ForcingTerm{9, 1.0, Profile::cosine}, ForcingTerm{4, 0.5}}};
  const ZonalReport rep = zonal_stability(solver, f, FlowState::zero(6),
                                          {random_field(6, 1, 0, 0.1), random_field(6, 1, 1, 0.1)}, 3, 5);
  EXPECT_GT(rep.min_rate, 1.0);
  EXPECT_LT(rep.max_nonzonal_fraction, 1e-20);
}

TEST(Zonal, NonzonalForcingIsRejected) {
  const NavierStokesSolver solver(params(0.5, 3, 10));
  EXPECT_THROW(zonal_stability(solver, constant_force(2, 1.0), FlowState::zero(3), {}, 1), Error);
  EXPECT_THROW(zonal_stability(solver, constant_force(1, 1.0), FlowState::zero(3), {}, 1, 3), Error);
}

TEST(AlmostZonal, EqualForcingConverges) {
  const NavierStokesSolver solver(params(0.5, 5, 20));
  const ForcingSpec f{{ForcingTerm{4, 1.0, Profile::cosine}}};
  const FlowState u0 = FlowState::from_streamfunction(random_field(5, 2, 0, 0.5));
  const FlowState v0 = FlowState::from_streamfunction(random_field(5, 2, 1, 0.5));
  const AlmostZonalReport rep = almost_zonal(solver, f, f, u0, v0, 20, 1e-4);
  EXPECT_EQ(rep.delta, 0.0);
  EXPECT_TRUE(rep.converged);
  EXPECT_LT(rep.final_distance, 1e-4);
  EXPECT_EQ(rep.series.t.size(), 21u);
}

TEST(AlmostZonal, SmallDeviationConvergesAndScanReportsDelta) {
  const NavierStokesSolver solver(params(0.5, 5, 20));
  const ForcingSpec f{{ForcingTerm{4, 1.0, Profile::cosine}}};
  ForcingSpec g = f;
  g.terms.push_back(ForcingTerm{7, 0.01, Profile::sine});
  const FlowState u0 = FlowState::from_streamfunction(random_field(5, 3, 0, 0.5));
  const FlowState v0 = FlowState::zero(5);
  const AlmostZonalReport rep = almost_zonal(solver, f, g, u0, v0, 20, 1e-4, {1.0, 0.0, 0.5});
  EXPECT_NEAR(rep.delta, 0.01, 1e-8);
  EXPECT_TRUE(rep.converged);
  ASSERT_EQ(rep.scan.size(), 3u);
  EXPECT_EQ(rep.scan[0].scale, 0.0);
  EXPECT_NEAR(rep.largest_converged_delta, 0.01, 1e-8);
  EXPECT_THROW(almost_zonal(solver, f, g, u0, v0, 2, 0.0), Error);
}

//---------------------------------------------------------------------------//
// Stability probe
//---------------------------------------------------------------------------//

TEST(Probe, RestIsStableWithoutForcing) {
  const NavierStokesSolver solver(params(0.5, 4, 20));
  ProbeConfig cfg;
  cfg.m = 3;
  cfg.delta = 0.1;
  cfg.radius = 0.2;
  cfg.n_samples = 8;
  cfg.horizon = 30;
  const ProbeReport rep = finite_stability_probe(solver, {}, FlowState::zero(4), cfg);
  EXPECT_EQ(rep.fraction, 1.0);
  EXPECT_LE(rep.min, rep.median);
  EXPECT_LE(rep.median, rep.max);
  EXPECT_EQ(rep.terminal.size(), 8u);
}

TEST(Probe, CandidateOutsideTheBallIsRejected) {
  const NavierStokesSolver solver(params(0.5, 4, 20));
  ProbeConfig cfg;
  EXPECT_THROW(finite_stability_probe(solver, {}, FlowState::from_streamfunction(random_field(4, 1)), cfg), Error);
  cfg.m = 0;
  EXPECT_THROW(finite_stability_probe(solver, {}, FlowState::zero(4), cfg), Error);
}

//---------------------------------------------------------------------------//
// Parallel helpers
//---------------------------------------------------------------------------//

TEST(Parallel, RethrowsLowestIndex) {
  for (int workers : {1, 4}) {
    try {
      parallel_for(20, workers, [](std::size_t i) {
        if (i == 7 || i == 13) throw std::runtime_error(std::to_string(i));
      });
      FAIL() << "no exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "7");
    }
  }
}

TEST(Parallel, VisitsEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 6, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Parallel, WorkerCountFromEnvironment) {
  const char* old = std::getenv("SPHEREKICK_THREADS");
  const std::string saved = old ? old : "";
  setenv("SPHEREKICK_THREADS", "5", 1);
  EXPECT_EQ(resolve_worker_count(2), 5);
  setenv("SPHEREKICK_THREADS", "0", 1);
  EXPECT_EQ(resolve_worker_count(2), 2);
  unsetenv("SPHEREKICK_THREADS");
  EXPECT_EQ(resolve_worker_count(3), 3);
  if (old) setenv("SPHEREKICK_THREADS", saved.c_str(), 1);
}
