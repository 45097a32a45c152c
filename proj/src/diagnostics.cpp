#include "klaus/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "klaus/parallel.hpp"

namespace klaus {

std::vector<std::string> HypothesisReport::failing() const {
  std::vector<std::string> out;
  for (const auto& c : clauses)
    if (!c.pass) out.push_back(c.id);
  return out;
}

const Clause& HypothesisReport::clause(const std::string& id) const {
  for (const auto& c : clauses)
    if (c.id == id) return c;
  throw std::out_of_range("no hypothesis clause named " + id);
}

HypothesisReport validate_hypotheses(const HypothesisParams& q) {
  HypothesisReport r;
  const double d = q.d;
  auto add = [&](const char* id, const char* statement, const char* group, double slack, bool strict) {
    const bool pass = std::isfinite(slack) && (strict ? slack > 0.0 : slack >= 0.0);
    r.clauses.push_back({id, statement, group, pass, slack});
  };
  const char* ex = "existence";
  const char* un = "uniqueness";

  add("d", "d in {1, 2, 3}", ex, (q.d >= 1 && q.d <= 3) ? 0.0 : -1.0, false);
  add("gamma", "gamma > 2", ex, q.gamma - 2.0, true);
  add("m", "m > 2", ex, q.m - 2.0, true);
  add("m0", "m0 > 2 (gamma + 1) / gamma", ex, q.m0 - 2.0 * (q.gamma + 1.0) / q.gamma, true);
  add("interpolation", "d/2 - rho <= 2/m + d/m0", ex, 2.0 / q.m + d / q.m0 - (d / 2.0 - q.rho), false);
  add("rho_upper", "rho < 1 - d/2", ex, 1.0 - d / 2.0 - q.rho, true);
  add("p_star", "p* >= 2", ex, q.p_star - 2.0, false);
  add("p0_star", "p0* >= 2", ex, q.p0_star - 2.0, false);
  add("p_star_m", "1/p* + 2/m < 1", ex, 1.0 - 1.0 / q.p_star - 2.0 / q.m, true);
  add("m0_p0_star", "2/m0 + 1/p0* < gamma/(gamma + 1)", ex,
      q.gamma / (q.gamma + 1.0) - 2.0 / q.m0 - 1.0 / q.p0_star, true);
  {
    const double gap = 1.0 - d / 2.0 - q.rho;
    // Evaluated as written; a nonpositive gap is already reported by rho_upper.
    const double slack = gap == 0.0 ? -std::numeric_limits<double>::infinity() : q.l - 1.0 - 1.0 / gap;
    add("l", "l > 1 + (1 - d/2 - rho)^-1", ex, slack, true);
  }
  add("delta0_m0", "delta0 < 1/m0", ex, 1.0 / q.m0 - q.delta0, true);
  add("delta0_range", "delta0 in (0, 1/gamma)", un, std::min(q.delta0, 1.0 / q.gamma - q.delta0), true);
  add("rho_lower", "rho >= d/2 - 1/2", un, q.rho - (d / 2.0 - 0.5), false);

  r.existence_ok = std::all_of(r.clauses.begin(), r.clauses.end(),
                               [](const Clause& c) { return c.group != "existence" || c.pass; });
  r.uniqueness_ok = r.existence_ok && std::all_of(r.clauses.begin(), r.clauses.end(), [](const Clause& c) {
                      return c.group != "uniqueness" || c.pass;
                    });
  r.uniqueness_dimension_ok = q.d == 1;
  if (!r.uniqueness_dimension_ok) {
    std::ostringstream s;
    s << "d = " << q.d << ": uniqueness needs rho >= " << d / 2.0 - 0.5
      << " but existence needs rho < " << 1.0 - d / 2.0 << "; pathwise uniqueness is not available";
    r.note = s.str();
  }
  return r;
}

bool EnergyLedger::finite() const {
  auto ok = [](const std::vector<double>& x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
  };
  return ok(sup_term) && ok(dissipation) && ok(coupling);
}

double EnergyLedger::combined(double p, double gamma, double r_u) const {
  if (sup_term.empty()) return 0.0;
  return sup_term.back() + gamma * p * (p + 1.0) * r_u * dissipation.back() + (p + 1.0) * coupling.back();
}

EnergyLedger energy_monitor(const Trajectory& traj, double p, const ModelConfig& model) {
  if (traj.snapshots.empty()) throw std::invalid_argument("energy_monitor: trajectory has no snapshots");
  if (traj.stride != 1) throw std::invalid_argument("energy_monitor needs every step of the trajectory");
  if (!(p >= 1.0)) throw std::invalid_argument("energy_monitor requires p >= 1");
  EnergyLedger led;
  double sup = 0.0, diss = 0.0, coup = 0.0;
  const double dt = traj.dt;
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const CoupledState& s = traj.snapshots[i];
    if (i > 0) {
      const CoupledState& prev = traj.snapshots[i - 1];
      const Field grad2 = gradient_squared(prev.u);
      const double vol = prev.u.grid().cell_volume();
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < prev.u.size(); ++k) {
        const double au = std::abs(prev.u[k]);
        a += std::pow(au, p + model.gamma - 2.0) * grad2[k];
        b += std::pow(au, p + 1.0) * prev.v[k] * prev.v[k];
      }
      diss += dt * vol * a;
      coup += dt * vol * model.chi * b;
    }
    sup = std::max(sup, lp_norm_pow(s.u, p + 1.0));
    led.t.push_back(s.t);
    led.sup_term.push_back(sup);
    led.dissipation.push_back(diss);
    led.coupling.push_back(coup);
  }
  return led;
}

Estimate estimate(const std::vector<double>& x) {
  Estimate e;
  e.n = x.size();
  if (x.empty()) return e;
  for (double v : x) e.mean += v;
  e.mean /= static_cast<double>(x.size());
  if (x.size() > 1) {
    double var = 0.0;
    for (double v : x) var += (v - e.mean) * (v - e.mean);
    var /= static_cast<double>(x.size() - 1);
    e.se = std::sqrt(var / static_cast<double>(x.size()));
  }
  return e;
}

std::vector<PathMoments> ensemble_paths(const Scenario& sc, double p, std::size_t n_paths,
                                        unsigned workers, std::uint32_t noise_refinement) {
  if (noise_refinement == 0) throw std::invalid_argument("noise refinement must be positive");
  SolverConfig solver = sc.solver;
  solver.snapshot_stride = 1;
  const double rho = sc.monitor.rho;
  const double m0 = sc.monitor.cutoff.m0;
  std::vector<PathMoments> out(n_paths);
  parallel_for(n_paths, workers, [&](std::size_t path) {
    Stepper stepper(*sc.basis, sc.model, solver, sc.noise);
    NoisePath noise(sc.noise, *sc.basis, solver.dt / noise_refinement, path, 0, noise_refinement);
    const Trajectory traj = simulate_path(sc.u0, sc.v0, stepper, noise, PathMode::coupled, sc.monitor);
    const EnergyLedger led = energy_monitor(traj, p, sc.model);
    PathMoments pm;
    pm.sup_u = led.sup_term.back();
    pm.dissipation = led.dissipation.back();
    pm.coupling = led.coupling.back();
    pm.energy = led.combined(p, sc.model.gamma, sc.model.r_u);
    double grad_int = 0.0;
    pm.min_u = std::numeric_limits<double>::infinity();
    pm.min_v = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
      const CoupledState& s = traj.snapshots[i];
      pm.sup_v = std::max(pm.sup_v, std::pow(sobolev_norm(*sc.basis, s.v, rho), m0));
      if (i + 1 < traj.snapshots.size())
        grad_int += traj.dt * std::pow(sobolev_norm(*sc.basis, s.v, rho + 1.0), 2.0);
      pm.min_u = std::min(pm.min_u, s.u.min());
      pm.min_v = std::min(pm.min_v, s.v.min());
    }
    pm.v_gradient = std::pow(grad_int, m0 / 2.0);
    for (double v : {pm.sup_u, pm.dissipation, pm.coupling, pm.energy, pm.sup_v, pm.v_gradient}) {
      if (!std::isfinite(v))
        throw std::runtime_error("non-finite moment statistic on path " + std::to_string(path) +
                                 " (seed " + std::to_string(sc.noise.seed) + ")");
    }
    out[path] = pm;
  });
  return out;
}

EnsembleReport reduce_moments(const Scenario& sc, const std::vector<PathMoments>& paths,
                              std::size_t count, double p, double l) {
  if (count == 0 || count > paths.size()) throw std::invalid_argument("reduce_moments: bad path count");
  std::vector<double> a, b, c, e, f, g;
  EnsembleReport r;
  r.worst_min_u = std::numeric_limits<double>::infinity();
  r.worst_min_v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    const PathMoments& pm = paths[i];
    a.push_back(pm.sup_u);
    b.push_back(pm.dissipation);
    c.push_back(pm.coupling);
    e.push_back(pm.energy);
    f.push_back(pm.sup_v);
    g.push_back(pm.v_gradient);
    r.worst_min_u = std::min(r.worst_min_u, pm.min_u);
    r.worst_min_v = std::min(r.worst_min_v, pm.min_v);
  }
  r.sup_u = estimate(a);
  r.dissipation = estimate(b);
  r.coupling = estimate(c);
  r.energy = estimate(e);
  r.sup_v = estimate(f);
  r.v_gradient = estimate(g);
  for (const Estimate* s : {&r.sup_u, &r.dissipation, &r.coupling, &r.energy, &r.sup_v, &r.v_gradient})
    r.all_finite = r.all_finite && std::isfinite(s->mean) && std::isfinite(s->se);
  r.c0_ratio = r.energy.mean / (lp_norm_pow(sc.u0, p + 1.0) + 1.0);
  const double m0 = sc.monitor.cutoff.m0;
  r.c2_ratio = (r.sup_v.mean + r.v_gradient.mean) /
               (1.0 + std::pow(sobolev_norm(*sc.basis, sc.v0, sc.monitor.rho), m0) +
                std::pow(lp_norm(sc.u0, 2.0), l));
  return r;
}

EnsembleReport ensemble_moments(const Scenario& sc, double p, std::size_t n_paths, unsigned workers,
                                double l) {
  if (n_paths < 100) throw std::invalid_argument("ensemble_moments needs at least 100 paths");
  const auto paths = ensemble_paths(sc, p, n_paths, workers);
  return reduce_moments(sc, paths, n_paths, p, l);
}

double uniqueness_distance(const SpectralBasis& basis, const Trajectory& a, const Trajectory& b,
                           double delta0, double* d_u, double* d_v) {
  if (a.snapshots.size() != b.snapshots.size())
    throw std::invalid_argument("uniqueness_distance: trajectories have different lengths");
  double su = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    su = std::max(su, sobolev_norm(basis, a.snapshots[i].u - b.snapshots[i].u, -1.0));
    sv = std::max(sv, sobolev_norm(basis, a.snapshots[i].v - b.snapshots[i].v, -delta0));
  }
  if (d_u) *d_u = su;
  if (d_v) *d_v = sv;
  return su + sv;
}

UniquenessReport uniqueness_experiment(const Scenario& sc, const HypothesisParams& params, double kappa) {
  if (params.d != 1 || sc.basis->grid().dim != 1)
    throw std::invalid_argument("pathwise uniqueness is only available in dimension 1");
  const HypothesisReport hyp = validate_hypotheses(params);
  if (!hyp.uniqueness_ok) {
    std::string failed;
    for (const auto& id : hyp.failing()) failed += (failed.empty() ? "" : ", ") + id;
    throw std::invalid_argument("uniqueness hypotheses violated: " + failed);
  }
  const double dt = sc.solver.dt;
  UniquenessReport r;

  Stepper stepper = sc.make_stepper();
  NoisePath noise(sc.noise, *sc.basis, dt);
  const PicardResult a = picard_solve(sc.u0, sc.v0, kappa, noise, stepper, sc.monitor, sc.picard);
  const FrozenPair zero = FrozenPair::zeros(sc.u0.grid(), sc.solver.steps());
  const PicardResult b =
      picard_solve(sc.u0, sc.v0, kappa, noise, stepper, sc.monitor, sc.picard, 0.0, std::nullopt, &zero);
  r.iterations_a = a.iterations;
  r.iterations_b = b.iterations;
  r.residual_a = a.residuals.back();
  r.residual_b = b.residuals.back();
  r.D = uniqueness_distance(*sc.basis, a.trajectory, b.trajectory, params.delta0, &r.D_u, &r.D_v);

  NoiseSpec other = sc.noise;
  other.seed += 1;
  Stepper stepper_c(*sc.basis, sc.model, sc.solver, other);
  NoisePath noise_c(other, *sc.basis, dt);
  const PicardResult c = picard_solve(sc.u0, sc.v0, kappa, noise_c, stepper_c, sc.monitor, sc.picard);
  r.D_control = uniqueness_distance(*sc.basis, a.trajectory, c.trajectory, params.delta0);
  return r;
}

NonnegReport nonneg_monitor(const Trajectory& traj, double threshold) {
  NonnegReport r;
  r.threshold = threshold;
  r.worst_u = std::numeric_limits<double>::infinity();
  r.worst_v = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.snapshots) {
    r.min_u.push_back(s.u.min());
    r.min_v.push_back(s.v.min());
    r.worst_u = std::min(r.worst_u, r.min_u.back());
    r.worst_v = std::min(r.worst_v, r.min_v.back());
    for (double x : s.u.values()) r.below += x < -threshold;
    for (double x : s.v.values()) r.below += x < -threshold;
  }
  if (traj.snapshots.empty()) r.worst_u = r.worst_v = 0.0;
  return r;
}

}  // namespace klaus
