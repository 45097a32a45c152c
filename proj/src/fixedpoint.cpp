#include "klaus/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "klaus/parallel.hpp"

namespace klaus {

namespace {

using Increments = std::vector<std::pair<Field, Field>>;

Increments precompute(const NoisePath& noise, std::size_t steps) {
  Increments out;
  out.reserve(steps);
  for (std::size_t n = 0; n < steps; ++n) out.push_back(noise.increments(n));
  return out;
}

void check_noise_dt(const NoisePath& noise, const Stepper& stepper) {
  const double dt = stepper.solver().dt;
  if (std::abs(noise.dt() - dt) > 1e-12 * dt)
    throw std::invalid_argument("noise path time step differs from the solver's");
}

Trajectory apply_V_impl(const FrozenPair& pair, const Field& u0, const Field& v0, double kappa,
                        const Increments& dw, Stepper& stepper, const Monitor& monitor, double t0) {
  if (pair.eta.size() != pair.xi.size())
    throw std::invalid_argument("frozen pair: eta and xi cover different time grids");
  const std::size_t steps = pair.steps();
  const double dt = stepper.solver().dt;
  const auto h_pair = h_series(pair, dt, monitor.cutoff);

  Trajectory traj;
  traj.dt = dt;
  traj.stride = 1;
  traj.snapshots.reserve(steps + 1);
  traj.records.reserve(steps + 1);
  HAccumulator h_out(monitor.cutoff);
  const double gamma = stepper.model().gamma;
  CoupledState state{u0, v0, t0};
  traj.snapshots.push_back(state);
  traj.records.push_back(make_record(stepper.basis(), state, gamma, monitor.rho, 0.0));
  for (std::size_t n = 0; n < steps; ++n) {
    const double phi = cutoff_phi(h_pair[n], kappa);
    h_out.add(state.u, state.v, dt);
    try {
      state = stepper.step_frozen(state, pair.eta[n], pair.xi[n], phi, dw[n].first, dw[n].second);
    } catch (SolverError& e) {
      e.step = n;
      throw;
    }
    state.t = t0 + static_cast<double>(n + 1) * dt;
    traj.snapshots.push_back(state);
    traj.records.push_back(make_record(stepper.basis(), state, gamma, monitor.rho, h_out.value()));
  }
  return traj;
}

double pair_distance(const FrozenPair& a, const FrozenPair& b, double dt, const CutoffParams& p) {
  if (a.eta.size() != b.eta.size())
    throw std::invalid_argument("m_distance: trajectories have different lengths");
  double su = 0.0, sv = 0.0;
  for (std::size_t n = 1; n < a.eta.size(); ++n) {
    su += dt * lp_norm_pow(a.eta[n] - b.eta[n], p.gamma + 1.0);
    sv += dt * std::pow(lp_norm(a.xi[n] - b.xi[n], p.m), p.m0);
  }
  return std::pow(su, 1.0 / (p.gamma + 1.0)) + std::pow(sv, 1.0 / p.m0);
}

}  // namespace

FrozenPair FrozenPair::zeros(const Grid& grid, std::size_t steps) {
  FrozenPair p;
  p.eta.assign(steps + 1, Field(grid));
  p.xi.assign(steps + 1, Field(grid));
  return p;
}

FrozenPair FrozenPair::from(const Trajectory& traj) {
  if (traj.stride != 1) throw std::invalid_argument("frozen pair needs a trajectory with every step");
  FrozenPair p;
  p.eta.reserve(traj.snapshots.size());
  p.xi.reserve(traj.snapshots.size());
  for (const auto& s : traj.snapshots) {
    p.eta.push_back(s.u);
    p.xi.push_back(s.v);
  }
  return p;
}

std::vector<double> h_series(const FrozenPair& pair, double dt, const CutoffParams& params) {
  HAccumulator h(params);
  std::vector<double> out;
  out.reserve(pair.eta.size());
  for (std::size_t n = 0; n < pair.eta.size(); ++n) {
    out.push_back(h.value());
    h.add(pair.eta[n], pair.xi[n], dt);
  }
  return out;
}

Trajectory apply_V(const FrozenPair& pair, const Field& u0, const Field& v0, double kappa,
                   const NoisePath& noise, Stepper& stepper, const Monitor& monitor, double t0) {
  check_noise_dt(noise, stepper);
  return apply_V_impl(pair, u0, v0, kappa, precompute(noise, pair.steps()), stepper, monitor, t0);
}

double m_distance(const Trajectory& a, const Trajectory& b, const CutoffParams& params) {
  return pair_distance(FrozenPair::from(a), FrozenPair::from(b), a.dt, params);
}

PicardResult picard_solve(const Field& u0, const Field& v0, double kappa, const NoisePath& noise,
                          Stepper& stepper, const Monitor& monitor, const PicardSettings& settings,
                          double t0, std::optional<std::size_t> steps, const FrozenPair* initial) {
  if (!(settings.tol > 0.0)) throw std::invalid_argument("Picard tolerance must be positive");
  if (settings.max_iter < 1) throw std::invalid_argument("Picard iteration cap must be positive");
  check_noise_dt(noise, stepper);
  const std::size_t n_steps = steps.value_or(stepper.solver().steps());
  const double dt = stepper.solver().dt;
  const Increments dw = precompute(noise, n_steps);

  FrozenPair current;
  if (initial != nullptr) {
    if (initial->steps() != n_steps || initial->xi.size() != initial->eta.size())
      throw std::invalid_argument("initial iterate does not match the time grid");
    current = *initial;
  } else {
    current = FrozenPair::from(apply_V_impl(FrozenPair::zeros(u0.grid(), n_steps), u0, v0, kappa,
                                            dw, stepper, monitor, t0));
  }

  PicardResult result;
  for (int it = 1; it <= settings.max_iter; ++it) {
    Trajectory next = apply_V_impl(current, u0, v0, kappa, dw, stepper, monitor, t0);
    FrozenPair next_pair = FrozenPair::from(next);
    const double r = pair_distance(next_pair, current, dt, monitor.cutoff);
    result.residuals.push_back(r);
    result.iterations = it;
    if (!std::isfinite(r)) break;
    if (r <= settings.tol) {
      result.trajectory = std::move(next);
      result.converged = true;
      return result;
    }
    current = std::move(next_pair);
  }
  std::ostringstream msg;
  msg << "Picard iteration did not reach tolerance " << settings.tol << " in " << result.iterations
      << " iterations (last residual " << result.residuals.back() << ")";
  throw PicardError(msg.str(), result.residuals);
}

std::optional<std::size_t> first_exit_index(const Trajectory& traj, double kappa) {
  if (traj.records.empty()) throw std::invalid_argument("first_exit_time: trajectory has no h records");
  for (std::size_t i = 0; i < traj.records.size(); ++i)
    if (traj.records[i].h >= kappa) return i;
  return std::nullopt;
}

std::optional<double> first_exit_time(const Trajectory& traj, double kappa) {
  const auto i = first_exit_index(traj, kappa);
  if (!i) return std::nullopt;
  return traj.records[*i].t;
}

GlueResult glue_simulate(const Field& u0, const Field& v0, const std::vector<double>& ladder,
                         Stepper& stepper, const NoiseSpec& noise, const Monitor& monitor,
                         const PicardSettings& settings, std::uint64_t path) {
  if (ladder.empty()) throw std::invalid_argument("cutoff ladder is empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0)) throw std::invalid_argument("cutoff levels must be positive");
    if (i > 0 && !(ladder[i] > ladder[i - 1]))
      throw std::invalid_argument("cutoff ladder must be strictly increasing");
  }
  const SolverConfig& solver = stepper.solver();
  const SpectralBasis& basis = stepper.basis();
  const std::size_t total = solver.steps();
  const double dt = solver.dt;

  GlueResult out;
  Trajectory& glued = out.trajectory;
  glued.dt = dt;
  glued.stride = 1;
  CoupledState state{u0, v0, 0.0};
  glued.snapshots.push_back(state);

  auto append = [&](const Trajectory& seg) {
    for (std::size_t i = 1; i < seg.snapshots.size(); ++i) glued.snapshots.push_back(seg.snapshots[i]);
  };

  std::size_t pos = 0;
  bool finished = total == 0;
  for (std::size_t r = 0; r < ladder.size() && !finished; ++r) {
    NoisePath np(noise, basis, dt, path, r);
    PicardResult pr = picard_solve(state.u, state.v, ladder[r], np, stepper, monitor, settings,
                                   static_cast<double>(pos) * dt, total - pos);
    RungReport rep;
    rep.rung = r + 1;
    rep.kappa = ladder[r];
    rep.picard_iterations = pr.iterations;
    rep.residual = pr.residuals.back();
    Trajectory seg = std::move(pr.trajectory);
    const auto e = first_exit_index(seg, ladder[r]);
    if (e) {
      rep.exit_time = seg.records[*e].t;
      seg.snapshots.resize(*e + 1);
      seg.records.resize(*e + 1);
      pos += *e;
      state = seg.snapshots.back();
    } else {
      pos = total;
    }
    append(seg);
    out.segments.push_back(std::move(seg));
    out.ladder.push_back(rep);
    finished = pos == total;
  }

  if (!finished) {
    NoisePath np(noise, basis, dt, path, ladder.size());
    Trajectory tail = simulate_path(state.u, state.v, stepper, np, PathMode::decoupled, monitor,
                                    static_cast<double>(pos) * dt, total - pos);
    append(tail);
    out.segments.push_back(std::move(tail));
    out.decoupled_tail = true;
  }

  HAccumulator h(monitor.cutoff);
  const double gamma = stepper.model().gamma;
  glued.records.reserve(glued.snapshots.size());
  for (std::size_t i = 0; i < glued.snapshots.size(); ++i) {
    if (i > 0) h.add(glued.snapshots[i - 1].u, glued.snapshots[i - 1].v, dt);
    glued.records.push_back(make_record(basis, glued.snapshots[i], gamma, monitor.rho, h.value()));
  }
  return out;
}

ExitEstimate exit_prob_estimate(const Scenario& scenario, const std::vector<double>& kappas,
                                std::size_t n_paths, unsigned workers) {
  if (n_paths < 100) throw std::invalid_argument("exit probability estimate needs at least 100 paths");
  if (kappas.empty()) throw std::invalid_argument("no cutoff levels given");
  std::size_t top = 0;
  for (double k : kappas) {
    if (!(k >= 1.0) || k != std::floor(k))
      throw std::invalid_argument("cutoff levels for the exit estimate must be positive integers");
    top = std::max(top, static_cast<std::size_t>(k));
  }
  std::vector<double> ladder(top);
  for (std::size_t i = 0; i < top; ++i) ladder[i] = static_cast<double>(i + 1);

  const double T = scenario.solver.T;
  const double dt = scenario.solver.dt;
  std::vector<std::vector<char>> exited(n_paths);
  std::vector<double> h_final(n_paths);
  parallel_for(n_paths, workers, [&](std::size_t p) {
    Stepper stepper = scenario.make_stepper();
    const GlueResult g = glue_simulate(scenario.u0, scenario.v0, ladder, stepper, scenario.noise,
                                       scenario.monitor, scenario.picard, p);
    std::vector<char> e(top, 0);
    for (const auto& rep : g.ladder)
      if (rep.exit_time && *rep.exit_time < T - 0.5 * dt) e[rep.rung - 1] = 1;
    exited[p] = std::move(e);
    h_final[p] = g.trajectory.records.back().h;
  });

  ExitEstimate est;
  est.kappas = kappas;
  est.paths = n_paths;
  const double n = static_cast<double>(n_paths);
  double num = 0.0, den = 0.0;
  for (double k : kappas) {
    const auto r = static_cast<std::size_t>(k) - 1;
    double count = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) count += exited[p][r];
    const double ph = count / n;
    est.p_hat.push_back(ph);
    est.se.push_back(std::sqrt(ph * (1.0 - ph) / n));
    num += ph / k;
    den += 1.0 / (k * k);
  }
  est.fit_constant = num / den;
  double mean = 0.0;
  for (double h : h_final) mean += h;
  mean /= n;
  double var = 0.0;
  for (double h : h_final) var += (h - mean) * (h - mean);
  var /= n - 1.0;
  est.markov_constant = mean;
  est.markov_constant_se = std::sqrt(var / n);
  return est;
}

}  // namespace klaus
