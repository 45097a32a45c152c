#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "klaus/diagnostics.hpp"

using namespace klaus;

namespace {

SolverConfig solver_for(double dt, double T) {
  SolverConfig s;
  s.dt = dt;
  s.T = T;
  return s;
}

Field bump(const Grid& g, double c, double w, double amp, double base = 0.0) {
  Field f(g, base);
  for (int i = 0; i < g.n; ++i) {
    const double r = std::abs(g.coordinate(i) - c) / w;
    if (r < 1.0) f[i] += amp * std::exp(1.0 - 1.0 / (1.0 - r * r));
  }
  return f;
}

Scenario small_scenario(const SpectralBasis& basis, double sigma) {
  Scenario sc;
  sc.basis = &basis;
  sc.solver = solver_for(5e-3, 0.05);
  sc.noise.modes = 4;
  sc.model.sigma1 = sc.model.sigma2 = sigma;
  sc.u0 = bump(basis.grid(), 0.4, 0.3, 1.0, 0.1);
  sc.v0 = bump(basis.grid(), 0.6, 0.3, 1.0, 0.1);
  return sc;
}

Trajectory run(const SpectralBasis& basis, const ModelConfig& m, const Field& u0, const Field& v0, double dt,
               double T) {
  Stepper st(basis, m, solver_for(dt, T));
  NoiseSpec n;
  n.modes = 4;
  const NoisePath path(n, basis, dt);
  return simulate_path(u0, v0, st, path, PathMode::coupled, {});
}

}  // namespace

TEST_CASE("validator accepts the documented d = 1 set") {
  const auto r = validate_hypotheses(HypothesisParams{});
  CHECK(r.existence_ok);
  CHECK(r.uniqueness_ok);
  CHECK(r.uniqueness_dimension_ok);
  CHECK(r.failing().empty());
  CHECK(r.clause("interpolation").slack == doctest::Approx(2.0 / 6.0 + 1.0 / 12.0 - 0.1));
  CHECK(r.clause("m0_p0_star").slack == doctest::Approx(0.75 - 2.0 / 12.0 - 1.0 / 8.0));
  CHECK(r.clause("l").slack == doctest::Approx(1.0));
  CHECK(r.clause("delta0_m0").slack == doctest::Approx(1.0 / 12.0 - 0.05));
  CHECK(r.clause("delta0_range").slack == doctest::Approx(0.05));
  CHECK(r.clause("rho_lower").slack == doctest::Approx(0.4));
  CHECK(r.clause("rho_upper").group == "existence");
  CHECK(r.clause("rho_lower").group == "uniqueness");
  CHECK_THROWS_AS(r.clause("nope"), std::out_of_range);
}

TEST_CASE("single-clause perturbations fail their clause") {
  struct Case {
    const char* name;
    void (*apply)(HypothesisParams&);
    std::vector<std::string> expect;
  };
  const std::vector<Case> cases = {
      {"gamma=2", [](HypothesisParams& p) { p.gamma = 2.0; }, {"gamma"}},
      {"rho=0.05", [](HypothesisParams& p) { p.rho = 0.05; }, {"interpolation"}},
      {"rho=0.6", [](HypothesisParams& p) { p.rho = 0.6; }, {"rho_upper"}},
      {"p*=1.8", [](HypothesisParams& p) { p.p_star = 1.8; }, {"p_star"}},
      {"p0*=1.9", [](HypothesisParams& p) { p.p0_star = 1.9; }, {"p0_star"}},
      {"m=2.2", [](HypothesisParams& p) { p.m = 2.2; }, {"p_star_m"}},
      {"m0=3", [](HypothesisParams& p) { p.m0 = 3.0; }, {"m0_p0_star"}},
      {"l=10", [](HypothesisParams& p) { p.l = 10.0; }, {"l"}},
      {"delta0=0.1", [](HypothesisParams& p) { p.delta0 = 0.1; }, {"delta0_m0"}},
      {"delta0=0", [](HypothesisParams& p) { p.delta0 = 0.0; }, {"delta0_range"}},
      {"rho=-0.1,m=3", [](HypothesisParams& p) { p.rho = -0.1; p.m = 3.0; }, {"rho_lower"}},
      // m > 2 and m0 > 2(g+1)/g are implied by p_star_m and m0_p0_star.
      {"m=1.9", [](HypothesisParams& p) { p.m = 1.9; }, {"m", "p_star_m"}},
      {"m0=2.5", [](HypothesisParams& p) { p.m0 = 2.5; }, {"m0", "m0_p0_star"}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    HypothesisParams p;
    c.apply(p);
    const auto r = validate_hypotheses(p);
    CHECK(r.failing() == c.expect);
  }
}

TEST_CASE("dimensions 2 and 3 have no uniqueness-compatible rho") {
  for (int d : {2, 3}) {
    for (double rho = -2.0; rho <= 2.0; rho += 0.01) {
      HypothesisParams p;
      p.d = d;
      p.rho = rho;
      const auto r = validate_hypotheses(p);
      REQUIRE_FALSE(r.uniqueness_ok);
      REQUIRE_FALSE(r.uniqueness_dimension_ok);
      REQUIRE_FALSE(r.note.empty());
    }
  }
  HypothesisParams p;
  p.d = 4;
  CHECK_FALSE(validate_hypotheses(p).clause("d").pass);
}

TEST_CASE("energy ledger examples") {
  const auto basis = SpectralBasis::full(Grid{1, 32, Boundary::neumann});
  const Grid& g = basis.grid();
  ModelConfig m;
  m.chi = m.sigma1 = m.sigma2 = 0.0;

  const auto zero = energy_monitor(run(basis, m, Field(g), Field(g), 1e-3, 0.02), 1.0, m);
  CHECK(zero.finite());
  CHECK(zero.sup_term.back() == 0.0);
  CHECK(zero.dissipation.back() == 0.0);
  CHECK(zero.coupling.back() == 0.0);

  const auto flat = energy_monitor(run(basis, m, Field(g, 0.8), Field(g), 1e-3, 0.02), 2.0, m);
  CHECK(flat.dissipation.back() == 0.0);
  CHECK(flat.sup_term.back() == doctest::Approx(std::pow(0.8, 3.0)));

  const auto tr = run(basis, m, bump(g, 0.4, 0.3, 2.0, 0.05), Field(g), 1e-3, 0.1);
  const auto led = energy_monitor(tr, 1.0, m);
  CHECK(led.finite());
  CHECK(led.dissipation.back() > 0.0);
  for (std::size_t i = 1; i < tr.snapshots.size(); ++i)
    REQUIRE(lp_norm_pow(tr.snapshots[i].u, 2.0) <= lp_norm_pow(tr.snapshots[i - 1].u, 2.0) + 1e-8);
  CHECK(led.sup_term.back() <= led.sup_term.front() + 1e-8);

  ModelConfig full;
  full.sigma1 = full.sigma2 = 0.0;
  const auto coupled = energy_monitor(run(basis, full, bump(g, 0.4, 0.3, 1.0), bump(g, 0.5, 0.3, 1.0), 1e-3, 0.05),
                                      1.0, full);
  CHECK(coupled.coupling.back() > 0.0);
  for (std::size_t i = 1; i < coupled.t.size(); ++i) {
    REQUIRE(coupled.sup_term[i] >= coupled.sup_term[i - 1]);
    REQUIRE(coupled.dissipation[i] >= coupled.dissipation[i - 1]);
    REQUIRE(coupled.coupling[i] >= coupled.coupling[i - 1]);
  }
  CHECK(coupled.combined(1.0, 3.0, 1.0) ==
        doctest::Approx(coupled.sup_term.back() + 6.0 * coupled.dissipation.back() + 2.0 * coupled.coupling.back()));

  Trajectory strided = tr;
  strided.stride = 2;
  CHECK_THROWS_AS(energy_monitor(strided, 1.0, m), std::invalid_argument);
  CHECK_THROWS_AS(energy_monitor(tr, 0.5, m), std::invalid_argument);
  CHECK_THROWS_AS(energy_monitor(Trajectory{}, 1.0, m), std::invalid_argument);
}

TEST_CASE("nonneg_monitor") {
  const auto basis = SpectralBasis::full(Grid{1, 64, Boundary::periodic});
  const Grid& g = basis.grid();
  ModelConfig m;
  m.chi = m.sigma1 = m.sigma2 = 0.0;
  const auto zero = nonneg_monitor(run(basis, m, Field(g), Field(g), 1e-3, 0.01));
  CHECK(zero.ok());
  CHECK(zero.worst_u == 0.0);
  CHECK(zero.worst_v == 0.0);

  const Field u0 = bump(g, 0.3, 0.2, 1.0) - bump(g, 0.7, 0.15, 0.5);
  const auto r = nonneg_monitor(run(basis, m, u0, Field(g), 1e-3, 0.1));
  CHECK_FALSE(r.ok());
  CHECK(r.worst_u == u0.min());
  CHECK(r.min_u.back() >= r.min_u.front() - 1e-8);
  CHECK(r.min_u.back() > r.min_u.front());
}

TEST_CASE("noise-free ensembles have zero variance") {
  const auto basis = SpectralBasis::full(Grid{1, 8, Boundary::periodic});
  const Scenario sc = small_scenario(basis, 0.0);
  const auto rep = ensemble_moments(sc, 1.0, 100, 1);
  CHECK(rep.all_finite);
  // Every path is the same computation; only the averaging rounds.
  CHECK(rep.energy.se <= 1e-15 * rep.energy.mean);
  CHECK(rep.sup_u.se <= 1e-15 * rep.sup_u.mean);
  const auto paths = ensemble_paths(sc, 1.0, 3, 1);
  CHECK(paths[0].energy == paths[1].energy);
  CHECK(paths[0].sup_v == paths[2].sup_v);
  CHECK(rep.energy.n == 100);

  Stepper st = sc.make_stepper();
  const NoisePath path(sc.noise, basis, sc.solver.dt);
  const auto led = energy_monitor(simulate_path(sc.u0, sc.v0, st, path, PathMode::coupled, sc.monitor), 1.0, sc.model);
  CHECK(rep.energy.mean == doctest::Approx(led.combined(1.0, 3.0, 1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(ensemble_moments(sc, 1.0, 99), std::invalid_argument);
}

TEST_CASE("ensemble standard errors and path-order invariance") {
  const auto basis = SpectralBasis::full(Grid{1, 8, Boundary::periodic});
  Scenario sc = small_scenario(basis, 1.0);
  sc.noise.channels[0].amplitude = sc.noise.channels[1].amplitude = 1.0;
  const auto paths = ensemble_paths(sc, 1.0, 800, 1);
  const auto half = reduce_moments(sc, paths, 400, 1.0, 12.0);
  const auto all = reduce_moments(sc, paths, 800, 1.0, 12.0);
  CHECK(half.energy.se / all.energy.se == doctest::Approx(std::sqrt(2.0)).epsilon(0.25));
  CHECK(half.sup_u.se / all.sup_u.se == doctest::Approx(std::sqrt(2.0)).epsilon(0.25));

  auto reversed = paths;
  std::reverse(reversed.begin(), reversed.end());
  const auto rev = reduce_moments(sc, reversed, 800, 1.0, 12.0);
  CHECK(rev.energy.mean == doctest::Approx(all.energy.mean).epsilon(1e-12));
  CHECK(rev.sup_v.mean == doctest::Approx(all.sup_v.mean).epsilon(1e-12));
  CHECK_THROWS_AS(reduce_moments(sc, paths, 0, 1.0, 12.0), std::invalid_argument);
}

TEST_CASE("uniqueness distance and refusal") {
  const auto basis = SpectralBasis::full(Grid{1, 16, Boundary::periodic});
  const Grid& g = basis.grid();
  ModelConfig m;
  const auto a = run(basis, m, bump(g, 0.4, 0.3, 1.0), bump(g, 0.6, 0.3, 1.0), 1e-3, 0.01);
  const auto b = run(basis, m, bump(g, 0.4, 0.3, 1.1), bump(g, 0.6, 0.3, 1.0), 1e-3, 0.01);
  CHECK(uniqueness_distance(basis, a, a, 0.05) == 0.0);
  double du = 0.0, dv = 0.0;
  const double dab = uniqueness_distance(basis, a, b, 0.05, &du, &dv);
  CHECK(dab > 0.0);
  CHECK(dab == du + dv);
  CHECK(uniqueness_distance(basis, b, a, 0.05) == dab);

  const Scenario sc = small_scenario(basis, 0.5);
  HypothesisParams p;
  p.d = 2;
  CHECK_THROWS_AS(uniqueness_experiment(sc, p, 1.0), std::invalid_argument);
  p.d = 1;
  p.delta0 = 0.0;
  CHECK_THROWS_AS(uniqueness_experiment(sc, p, 1.0), std::invalid_argument);
}

TEST_CASE("estimate") {
  const auto e = estimate({1.0, 2.0, 3.0, 4.0});
  CHECK(e.mean == 2.5);
  CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(estimate({}).n == 0);
}
