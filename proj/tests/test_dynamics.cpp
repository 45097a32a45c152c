#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "klaus/dynamics.hpp"

using namespace klaus;

namespace {

ModelConfig quiet_model() {
  ModelConfig m;
  m.sigma1 = 0.0;
  m.sigma2 = 0.0;
  return m;
}

SolverConfig solver_for(double dt, double T) {
  SolverConfig s;
  s.dt = dt;
  s.T = T;
  return s;
}

NoiseSpec small_noise(std::size_t modes = 8) {
  NoiseSpec n;
  n.modes = modes;
  return n;
}

Field bump(const Grid& g, double c, double w, double amp, double base = 0.0) {
  Field f(g, base);
  for (int i = 0; i < g.n; ++i) {
    const double r = std::abs(g.coordinate(i) - c) / w;
    if (r < 1.0) f[i] += amp * std::exp(1.0 - 1.0 / (1.0 - r * r));
  }
  return f;
}

double sup_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Nonlinear Gauss-Seidel for w - a Lap_h(w^[g]) = b, each node by bisection.
Field gauss_seidel_oracle(const Field& b, double a, double gamma) {
  const Grid& g = b.grid();
  const int n = g.n;
  const double c = a / (g.spacing() * g.spacing());
  Field w = b;
  for (int sweep = 0; sweep < 5000; ++sweep) {
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      const double nb = power_gamma(w[(i + n - 1) % n], gamma) + power_gamma(w[(i + 1) % n], gamma);
      auto f = [&](double x) { return x - c * (nb - 2.0 * power_gamma(x, gamma)) - b[i]; };
      double lo = -10.0, hi = 10.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? hi : lo) = mid;
      }
      change = std::max(change, std::abs(0.5 * (lo + hi) - w[i]));
      w[i] = 0.5 * (lo + hi);
    }
    if (change < 1e-14) break;
  }
  return w;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig m;
  m.gamma = 1.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.gamma = 2.0;
  CHECK(m.outside_existence_range());
  m.gamma = 3.0;
  CHECK_FALSE(m.outside_existence_range());
  m.k = -1.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);

  CHECK(solver_for(1e-3, 0.1).steps() == 100);
  CHECK(solver_for(0.1, 0.0).steps() == 0);
  CHECK_THROWS_AS(solver_for(0.3, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(solver_for(2.0, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(solver_for(-1.0, 1.0).validate(), std::invalid_argument);

  const auto partial = SpectralBasis::build(1, Boundary::periodic, 16, 8);
  CHECK_THROWS_AS(Stepper(partial, quiet_model(), solver_for(1e-3, 0.1)), std::invalid_argument);
}

TEST_CASE("pm_implicit_step trivial cases") {
  const auto basis = SpectralBasis::full(Grid{1, 32, Boundary::neumann});
  const Grid& g = basis.grid();
  const Field zero(g);

  ModelConfig m = quiet_model();
  m.r_u = 0.0;
  Stepper identity(basis, m, solver_for(1e-2, 1.0));
  const Field u = bump(g, 0.4, 0.3, 1.0, 0.1);
  CHECK(identity.pm_implicit_step(u, zero, zero, 1e-2) == u);

  Stepper st(basis, quiet_model(), solver_for(1e-2, 1.0));
  const Field c(g, 0.7);
  CHECK(sup_diff(st.pm_implicit_step(c, zero, zero, 1e-2), c) <= 1e-14);
  CHECK(sup_diff(st.pm_implicit_step(zero, zero, zero, 1e-2), zero) == 0.0);
}

TEST_CASE("pm_implicit_step matches a nonlinear Gauss-Seidel oracle") {
  const auto basis = SpectralBasis::full(Grid{1, 8, Boundary::periodic});
  ModelConfig m = quiet_model();
  m.gamma = 2.0;
  m.r_u = 1.0;
  const double dt = 0.01;
  Stepper st(basis, m, solver_for(dt, 1.0));
  const Field u = Field(basis.grid(), 1.0) + 0.1 * basis.mode(1);
  const Field zero(basis.grid());
  const Field w = st.pm_implicit_step(u, zero, zero, dt);
  const Field oracle = gauss_seidel_oracle(u, dt * m.r_u, m.gamma);
  CHECK(sup_diff(w, oracle) <= 1e-6);
  CHECK(st.last_newton().iterations >= 1);

  m.gamma = 3.0;
  Stepper st3(basis, m, solver_for(dt, 1.0));
  const Field b = bump(basis.grid(), 0.5, 0.4, 2.0);
  CHECK(sup_diff(st3.pm_implicit_step(b, zero, zero, dt), gauss_seidel_oracle(b, dt, 3.0)) <= 1e-6);
}

TEST_CASE("pm_implicit_step residual meets the Newton tolerance") {
  const auto basis = SpectralBasis::full(Grid{2, 16, Boundary::periodic});
  const Grid& g = basis.grid();
  Stepper st(basis, quiet_model(), solver_for(1e-2, 1.0));
  Field u(g);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::fmod(0.37 * static_cast<double>(i), 1.0);
  const Field zero(g);
  const Field w = st.pm_implicit_step(u, zero, zero, 1e-2);
  const Field res = w - 1e-2 * stencil_laplacian(power_gamma(w, 3.0)) - u;
  CHECK(lp_norm(res, 2.0) <= 1e-10 * (1.0 + lp_norm(w, 2.0)));
}

TEST_CASE("heat_step examples") {
  const auto basis = SpectralBasis::full(Grid{1, 64, Boundary::periodic});
  const Grid& g = basis.grid();
  const Field zero(g);
  ModelConfig m = quiet_model();
  m.r_v = 0.3;
  const Stepper st(basis, m, solver_for(1e-3, 1.0));
  for (std::size_t k : {1u, 5u, 20u}) {
    const Field psi = basis.mode(k);
    const Field out = st.heat_step(psi, zero, zero, 1e-3, 0.0);
    CHECK(sup_diff(out, std::exp(-0.3 * basis.eigenvalue(k) * 1e-3) * psi) <= 1e-12);
  }

  m.r_v = 0.0;
  const Stepper flat(basis, m, solver_for(1e-3, 1.0));
  const Field v = bump(g, 0.5, 0.3, 1.0);
  const Field s = bump(g, 0.2, 0.1, 3.0);
  CHECK(sup_diff(flat.heat_step(v, s, zero, 0.01, 0.0), v + 0.01 * s) <= 1e-13);

  m.r_v = 1.0;
  const Stepper unit(basis, m, solver_for(1e-3, 1.0));
  Field w = basis.mode(1);
  for (int n = 0; n < 1000; ++n) w = unit.heat_step(w, zero, zero, 1e-3, 0.0);
  CHECK(sup_diff(w, std::exp(-basis.eigenvalue(1)) * basis.mode(1)) <= 1e-10);
  CHECK_THROWS_AS(unit.heat_step(w, zero, zero, 1e-3, -1.0), std::invalid_argument);
}

TEST_CASE("step_coupled equilibria and the decoupled deterministic limit") {
  const auto basis = SpectralBasis::full(Grid{1, 32, Boundary::periodic});
  const Grid& g = basis.grid();
  const Field zero(g);
  Stepper st(basis, quiet_model(), solver_for(1e-3, 0.1));
  const CoupledState rest{zero, zero, 0.0};
  const auto next = st.step_coupled(rest, zero, zero);
  CHECK(next.u.max() == 0.0);
  CHECK(next.v.max() == 0.0);
  CHECK(next.t == doctest::Approx(1e-3));

  ModelConfig m = quiet_model();
  m.chi = 0.0;
  Stepper coupled(basis, m, solver_for(1e-3, 0.1));
  Stepper pm(basis, m, solver_for(1e-3, 0.1));
  CoupledState s{bump(g, 0.5, 0.3, 1.0), basis.mode(1), 0.0};
  Field u_pm = s.u;
  for (int n = 0; n < 100; ++n) {
    s = coupled.step_coupled(s, zero, zero);
    u_pm = pm.pm_implicit_step(u_pm, zero, zero, 1e-3);
  }
  // u v^2 feeds v, but u does not see v when chi = 0.
  CHECK(sup_diff(s.u, u_pm) == 0.0);
}

TEST_CASE("step_frozen examples") {
  const auto basis = SpectralBasis::full(Grid{1, 16, Boundary::periodic});
  const Grid& g = basis.grid();
  const Field zero(g), one(g, 1.0);
  ModelConfig m = quiet_model();
  m.r_u = 0.0;
  m.r_v = 0.0;
  m.chi = 0.7;
  const double dt = 0.01;
  Stepper st(basis, m, solver_for(dt, 1.0));
  const CoupledState s{Field(g, 2.0), Field(g, 0.5), 0.0};
  const auto out = st.step_frozen(s, one, one, 1.0, zero, zero);
  CHECK(sup_diff(out.u, Field(g, 2.0 - dt * 0.7)) <= 1e-14);
  CHECK(sup_diff(out.v, Field(g, 0.5 + dt)) <= 1e-14);

  Stepper full(basis, quiet_model(), solver_for(dt, 1.0));
  const CoupledState b{bump(g, 0.5, 0.3, 1.0), bump(g, 0.3, 0.2, 1.0), 0.0};
  const auto off = full.step_frozen(b, one, one, 0.0, zero, zero);
  const auto nil = full.step_frozen(b, zero, zero, 1.0, zero, zero);
  CHECK(off.u == nil.u);
  CHECK(off.v == nil.v);
  CHECK_THROWS_AS(full.step_frozen(b, one, one, 1.5, zero, zero), std::invalid_argument);
}

TEST_CASE("step_decoupled closed forms") {
  const auto basis = SpectralBasis::full(Grid{1, 64, Boundary::neumann});
  const Grid& g = basis.grid();
  const Field zero(g);
  ModelConfig m = quiet_model();
  m.r_v = 0.5;
  const double dt = 1e-3;
  Stepper st(basis, m, solver_for(dt, 1.0));
  CoupledState s{Field(g, 0.3), basis.mode(1), 0.0};
  for (int n = 0; n < 1000; ++n) s = st.step_decoupled(s, zero, zero);
  CHECK(sup_diff(s.u, Field(g, 0.3)) <= 1e-12);
  CHECK(sup_diff(s.v, std::exp(-(0.5 * basis.eigenvalue(1) + 1.0)) * basis.mode(1)) <= 1e-10);

  m.sigma1 = 1.0;
  Stepper noisy(basis, m, solver_for(dt, 1.0));
  const NoisePath path(small_noise(), basis, dt, 0);
  CoupledState z{zero, zero, 0.0};
  for (std::uint64_t n = 0; n < 50; ++n) {
    const auto [w1, w2] = path.increments(n);
    z = noisy.step_decoupled(z, w1, w2);
  }
  CHECK(z.u.max() == 0.0);
  CHECK(z.u.min() == 0.0);
}

TEST_CASE("simulate_path bookkeeping") {
  const auto basis = SpectralBasis::full(Grid{1, 32, Boundary::periodic});
  const Grid& g = basis.grid();
  Stepper st(basis, ModelConfig{}, solver_for(1e-2, 0.0));
  const NoisePath path(small_noise(), basis, 1e-2);
  const auto t0 = simulate_path(bump(g, 0.5, 0.2, 1.0), bump(g, 0.5, 0.2, 1.0), st, path, PathMode::coupled, {});
  CHECK(t0.snapshots.size() == 1);
  CHECK(t0.records.size() == 1);
  CHECK(t0.records[0].h == 0.0);

  SolverConfig sc = solver_for(1e-2, 0.25);
  sc.snapshot_stride = 10;
  Stepper strided(basis, ModelConfig{}, sc);
  const auto tr = simulate_path(bump(g, 0.5, 0.2, 1.0), bump(g, 0.4, 0.2, 1.0), strided, path, PathMode::coupled, {});
  REQUIRE(tr.snapshots.size() == 4);
  CHECK(tr.snapshots[1].t == doctest::Approx(0.1));
  CHECK(tr.snapshots[3].t == doctest::Approx(0.25));
  for (std::size_t i = 1; i < tr.records.size(); ++i) {
    CHECK(tr.records[i].t > tr.records[i - 1].t);
    CHECK(tr.records[i].h >= tr.records[i - 1].h);
  }

  Stepper again(basis, ModelConfig{}, sc);
  const auto tr2 = simulate_path(bump(g, 0.5, 0.2, 1.0), bump(g, 0.4, 0.2, 1.0), again, path, PathMode::coupled, {});
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    CHECK(tr.records[i].u_l2 == tr2.records[i].u_l2);
    CHECK(tr.records[i].v_hrho == tr2.records[i].v_hrho);
  }

  const NoisePath wrong(small_noise(), basis, 2e-2);
  CHECK_THROWS_AS(simulate_path(Field(g), Field(g), st, wrong, PathMode::coupled, {}), std::invalid_argument);
}

TEST_CASE("simulate_path reports the failing step") {
  const auto basis = SpectralBasis::full(Grid{1, 32, Boundary::periodic});
  const Grid& g = basis.grid();
  SolverConfig sc = solver_for(0.1, 1.0);
  sc.newton_max_iter = 1;
  sc.newton_tol = 1e-15;
  ModelConfig m = quiet_model();
  m.r_u = 10.0;
  Stepper st(basis, m, sc);
  const NoisePath path(small_noise(), basis, 0.1);
  try {
    simulate_path(bump(g, 0.5, 0.1, 5.0), Field(g), st, path, PathMode::coupled, {});
    FAIL("expected a solver failure");
  } catch (const SolverError& e) {
    REQUIRE(e.step.has_value());
    CHECK(*e.step == 0);
    CHECK(e.iterations == 1);
    CHECK(e.residual > 0.0);
  }
}

TEST_CASE("mass conservation without reaction") {
  for (Boundary bc : {Boundary::periodic, Boundary::neumann}) {
    const auto basis = SpectralBasis::full(Grid{1, 64, bc});
    const Grid& g = basis.grid();
    ModelConfig m = quiet_model();
    m.chi = 0.0;
    Stepper st(basis, m, solver_for(1e-3, 0.2));
    const Field zero(g);
    Field u = bump(g, 0.3, 0.25, 2.0, 0.1);
    const double mass0 = u.integral();
    for (int n = 0; n < 200; ++n) u = st.pm_implicit_step(u, zero, zero, 1e-3);
    CHECK(std::abs(u.integral() - mass0) <= 1e-10 * mass0);
  }
}

TEST_CASE("comparison principle for the porous-medium step") {
  const auto basis = SpectralBasis::full(Grid{1, 64, Boundary::neumann});
  const Grid& g = basis.grid();
  ModelConfig m = quiet_model();
  m.chi = 0.0;
  Stepper a(basis, m, solver_for(1e-3, 0.1)), b(basis, m, solver_for(1e-3, 0.1));
  const Field zero(g);
  Field lo = bump(g, 0.4, 0.3, 1.0);
  Field hi = lo + bump(g, 0.6, 0.2, 0.5) + Field(g, 0.01);
  for (int n = 0; n < 100; ++n) {
    lo = a.pm_implicit_step(lo, zero, zero, 1e-3);
    hi = b.pm_implicit_step(hi, zero, zero, 1e-3);
  }
  double worst = -INFINITY;
  for (std::size_t i = 0; i < lo.size(); ++i) worst = std::max(worst, lo[i] - hi[i]);
  CHECK(worst <= 1e-8);
}

TEST_CASE("Stratonovich mode equals Ito with the correction drift") {
  const auto basis = SpectralBasis::full(Grid{1, 32, Boundary::periodic});
  const Grid& g = basis.grid();
  NoiseSpec noise = small_noise(16);
  noise.channels[0].amplitude = 0.5;
  noise.channels[1].amplitude = 0.4;
  ModelConfig m;
  m.sigma1 = 0.8;
  m.sigma2 = 0.6;
  m.calculus = Calculus::stratonovich;
  Stepper strat(basis, m, solver_for(1e-3, 0.05), noise);
  m.calculus = Calculus::ito;
  Stepper ito(basis, m, solver_for(1e-3, 0.05), noise);
  ito.add_linear_drift(stratonovich_correction(noise, basis, 0, 0.8), stratonovich_correction(noise, basis, 1, 0.6));
  const NoisePath path(noise, basis, 1e-3, 4);
  const auto a = simulate_path(bump(g, 0.5, 0.3, 1.0), bump(g, 0.4, 0.3, 1.0), strat, path, PathMode::coupled, {});
  const auto b = simulate_path(bump(g, 0.5, 0.3, 1.0), bump(g, 0.4, 0.3, 1.0), ito, path, PathMode::coupled, {});
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    REQUIRE(a.snapshots[i].u == b.snapshots[i].u);
    REQUIRE(a.snapshots[i].v == b.snapshots[i].v);
  }
  Stepper plain(basis, m, solver_for(1e-3, 0.05), noise);
  const auto c = simulate_path(bump(g, 0.5, 0.3, 1.0), bump(g, 0.4, 0.3, 1.0), plain, path, PathMode::coupled, {});
  CHECK_FALSE(c.snapshots.back().u == a.snapshots.back().u);
}

TEST_CASE("projection policy clips negative values") {
  const auto basis = SpectralBasis::full(Grid{1, 32, Boundary::periodic});
  const Grid& g = basis.grid();
  SolverConfig sc = solver_for(1e-2, 1.0);
  sc.nonneg_policy = NonnegPolicy::project;
  ModelConfig m = quiet_model();
  m.r_u = 0.0;
  Stepper st(basis, m, sc);
  const Field zero(g);
  const CoupledState s{Field(g, -1.0), Field(g, -1.0), 0.0};
  const auto out = st.step_coupled(s, zero, zero);
  CHECK(out.u.min() == 0.0);
  CHECK(out.v.min() == 0.0);
}

TEST_CASE("deterministic Klausmeier regression") {
  // Homogeneous state (u*, v*) = ((3 - sqrt5)/2, (3 + sqrt5)/2) for k = 3, f = g = chi = 1.
  const auto basis = SpectralBasis::full(Grid{1, 64, Boundary::periodic});
  const Grid& g = basis.grid();
  ModelConfig m = quiet_model();
  m.k = 3.0;
  m.f = 1.0;
  m.g = 1.0;
  m.r_u = 1.0;
  m.r_v = 0.01;
  Stepper st(basis, m, solver_for(1e-3, 1.0));
  const double vs = (3.0 + std::sqrt(5.0)) / 2.0, us = 1.0 / vs;
  const Field zero(g);
  const NoisePath path(small_noise(), basis, 1e-3);
  const auto tr = simulate_path(Field(g, us) + 1e-3 * basis.mode(1), Field(g, vs) + 1e-3 * basis.mode(2), st, path,
                                PathMode::coupled, {});
  const auto& last = tr.records.back();
  CHECK(std::isfinite(last.v_max));
  CHECK(last.v_max < 10.0);
  CHECK(last.u_min > 0.0);
  CHECK(last.v_max == doctest::Approx(2.61962825178338).epsilon(1e-9));
}
