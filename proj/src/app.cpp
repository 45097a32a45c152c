#include "klaus/app.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "klaus/basis.hpp"
#include "klaus/diagnostics.hpp"
#include "klaus/fixedpoint.hpp"
#include "klaus/io.hpp"

namespace klaus {

namespace fs = std::filesystem;

namespace {

constexpr double kNonnegThreshold = 1e-6;

struct Run {
  const RunConfig& cfg;
  Metadata meta;
  RunOutcome outcome;

  std::string file(const std::string& name) {
    const std::string p = (fs::path(cfg.output_dir) / name).string();
    outcome.files.push_back(p);
    return p;
  }

  void fail(int status, const std::string& kind, const std::string& message, Metadata extra = {}) {
    outcome.status = status;
    Metadata body{{"status", "failed"}, {"kind", kind}, {"message", message}};
    body.insert(body.end(), extra.begin(), extra.end());
    write_report(file("failure.txt"), meta, body);
    outcome.summary = kind + ": " + message;
  }
};

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : " ") + format_double(x);
  return s;
}

std::string yes(bool b) { return b ? "yes" : "no"; }

bool nonnegative(const Field& f) { return f.min() >= 0.0; }

Metadata nonneg_body(const NonnegReport& r) {
  return {{"worst_min_u", format_double(r.worst_u)},
          {"worst_min_v", format_double(r.worst_v)},
          {"values_below_threshold", std::to_string(r.below)},
          {"nonneg_threshold", format_double(r.threshold)}};
}

bool all_finite(const Trajectory& traj) {
  for (const auto& s : traj.snapshots)
    if (!s.u.all_finite() || !s.v.all_finite()) return false;
  return true;
}

Trajectory subsample(const Trajectory& traj, int stride) {
  if (stride <= 1) return traj;
  Trajectory out;
  out.dt = traj.dt;
  out.stride = stride * traj.stride;
  const std::size_t n = traj.snapshots.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i % static_cast<std::size_t>(stride) == 0 || i + 1 == n) {
      out.snapshots.push_back(traj.snapshots[i]);
      out.records.push_back(traj.records[i]);
    }
  }
  return out;
}

void write_trajectory(Run& run, const Trajectory& traj) {
  const Trajectory out = subsample(traj, traj.stride == 1 ? run.cfg.solver.snapshot_stride : 1);
  write_snapshots(run.file("snapshots.bin"), run.meta, out);
  write_norms(run.file("norms.csv"), run.meta, out.records);
}

void run_path(Run& run, const SpectralBasis& basis, bool demo) {
  const RunConfig& cfg = run.cfg;
  const Scenario sc = make_scenario(cfg, basis);
  Stepper stepper = sc.make_stepper();
  NoisePath noise(cfg.noise, basis, cfg.solver.dt);
  const PathMode mode = cfg.run.mode == "decoupled" ? PathMode::decoupled : PathMode::coupled;
  const Trajectory traj = simulate_path(sc.u0, sc.v0, stepper, noise, mode, sc.monitor);
  write_snapshots(run.file("snapshots.bin"), run.meta, traj);
  write_norms(run.file("norms.csv"), run.meta, traj.records);
  const NonnegReport nn = nonneg_monitor(traj, kNonnegThreshold);
  Metadata body{{"experiment", cfg.experiment},
                {"mode", cfg.run.mode},
                {"snapshots", std::to_string(traj.snapshots.size())},
                {"final_time", format_double(traj.snapshots.back().t)},
                {"final_u_l2", format_double(traj.records.back().u_l2)},
                {"final_v_max", format_double(traj.records.back().v_max)},
                {"final_v_min", format_double(traj.records.back().v_min)},
                {"finite", yes(all_finite(traj))},
                {"outside_existence_range", yes(cfg.model.outside_existence_range())}};
  const Metadata nb = nonneg_body(nn);
  body.insert(body.end(), nb.begin(), nb.end());
  if (demo) body.push_back({"v_contrast", format_double(traj.records.back().v_max - traj.records.back().v_min)});
  write_report(run.file("report.txt"), run.meta, body);
  if (!all_finite(traj)) return run.fail(1, "non-finite", "trajectory left the finite range");
  const bool check = nonnegative(sc.u0) && nonnegative(sc.v0) && cfg.solver.nonneg_policy == NonnegPolicy::monitor;
  if (check && !nn.ok())
    return run.fail(1, "nonnegativity", std::to_string(nn.below) + " values below -" + format_double(kNonnegThreshold),
                    nb);
  run.outcome.summary = "final |u|_L2 " + format_double(traj.records.back().u_l2);
}

void run_picard(Run& run, const SpectralBasis& basis) {
  const RunConfig& cfg = run.cfg;
  const Scenario sc = make_scenario(cfg, basis);
  Stepper stepper = sc.make_stepper();
  NoisePath noise(cfg.noise, basis, cfg.solver.dt);
  sc.monitor.cutoff.validate();
  const PicardResult pr = picard_solve(sc.u0, sc.v0, cfg.cutoff.kappa, noise, stepper, sc.monitor, sc.picard);
  const Trajectory again = apply_V(FrozenPair::from(pr.trajectory), sc.u0, sc.v0, cfg.cutoff.kappa, noise,
                                   stepper, sc.monitor);
  const double reapply = m_distance(again, pr.trajectory, sc.monitor.cutoff);
  write_trajectory(run, pr.trajectory);
  const auto exit = first_exit_time(pr.trajectory, cfg.cutoff.kappa);
  write_report(run.file("report.txt"), run.meta,
               {{"experiment", "picard"},
                {"kappa", format_double(cfg.cutoff.kappa)},
                {"nu", format_double(sc.monitor.cutoff.effective_nu())},
                {"iterations", std::to_string(pr.iterations)},
                {"converged", yes(pr.converged)},
                {"residuals", join(pr.residuals)},
                {"reapply_change", format_double(reapply)},
                {"exit_time", exit ? format_double(*exit) : "none"},
                {"final_h", format_double(pr.trajectory.records.back().h)}});
  if (reapply > 10.0 * cfg.run.picard_tol)
    return run.fail(1, "picard-consistency", "re-applying V moved the fixed point by " + format_double(reapply));
  run.outcome.summary = "converged in " + std::to_string(pr.iterations) + " iterations";
}

void run_glue(Run& run, const SpectralBasis& basis) {
  const RunConfig& cfg = run.cfg;
  const Scenario sc = make_scenario(cfg, basis);
  Stepper stepper = sc.make_stepper();
  sc.monitor.cutoff.validate();
  const GlueResult g = glue_simulate(sc.u0, sc.v0, cfg.ladder, stepper, cfg.noise, sc.monitor, sc.picard);
  bool continuous = true;
  for (std::size_t i = 1; i < g.segments.size(); ++i) {
    const CoupledState& a = g.segments[i - 1].snapshots.back();
    const CoupledState& b = g.segments[i].snapshots.front();
    continuous = continuous && a.u == b.u && a.v == b.v && a.t == b.t;
  }
  write_trajectory(run, g.trajectory);
  write_ladder(run.file("ladder.csv"), run.meta, g.ladder);
  const NonnegReport nn = nonneg_monitor(g.trajectory, kNonnegThreshold);
  Metadata body{{"experiment", "glue"},
                {"ladder", join(cfg.ladder)},
                {"rungs_used", std::to_string(g.ladder.size())},
                {"segments", std::to_string(g.segments.size())},
                {"decoupled_tail", yes(g.decoupled_tail)},
                {"junctions_exact", yes(continuous)},
                {"final_h", format_double(g.trajectory.records.back().h)}};
  const Metadata nb = nonneg_body(nn);
  body.insert(body.end(), nb.begin(), nb.end());
  write_report(run.file("report.txt"), run.meta, body);
  if (!continuous) return run.fail(1, "glue-continuity", "segment junction states differ");
  run.outcome.summary = std::to_string(g.segments.size()) + " segment(s)";
}

void run_ensemble(Run& run, const SpectralBasis& basis) {
  const RunConfig& cfg = run.cfg;
  const Scenario sc = make_scenario(cfg, basis);
  const EnsembleReport r = ensemble_moments(sc, cfg.run.moment_p, cfg.run.paths, cfg.workers, cfg.hypothesis.l);
  auto est = [](const Estimate& e) { return format_double(e.mean) + " +- " + format_double(e.se); };
  write_report(run.file("report.txt"), run.meta,
               {{"experiment", "ensemble"},
                {"paths", std::to_string(r.energy.n)},
                {"p", format_double(cfg.run.moment_p)},
                {"sup_u_moment", est(r.sup_u)},
                {"dissipation", est(r.dissipation)},
                {"coupling", est(r.coupling)},
                {"energy_lhs", est(r.energy)},
                {"sup_v_moment", est(r.sup_v)},
                {"v_gradient_moment", est(r.v_gradient)},
                {"c0_ratio", format_double(r.c0_ratio)},
                {"c2_ratio", format_double(r.c2_ratio)},
                {"worst_min_u", format_double(r.worst_min_u)},
                {"worst_min_v", format_double(r.worst_min_v)},
                {"all_finite", yes(r.all_finite)}});
  if (!r.all_finite) return run.fail(1, "non-finite", "an ensemble statistic is not finite");
  run.outcome.summary = "empirical C0 " + format_double(r.c0_ratio);
}

void run_uniqueness(Run& run) {
  const RunConfig& cfg = run.cfg;
  const HypothesisReport hyp = validate_hypotheses(cfg.hypothesis);
  if (!hyp.uniqueness_dimension_ok) return run.fail(2, "refused", hyp.note);
  if (!hyp.uniqueness_ok) {
    std::string failed;
    for (const auto& id : hyp.failing()) failed += (failed.empty() ? "" : ", ") + id;
    return run.fail(2, "refused", "uniqueness hypotheses violated: " + failed);
  }
  const SpectralBasis basis = SpectralBasis::full(cfg.grid);
  const Scenario sc = make_scenario(cfg, basis);
  sc.monitor.cutoff.validate();
  const UniquenessReport r = uniqueness_experiment(sc, cfg.hypothesis, cfg.cutoff.kappa);
  write_report(run.file("report.txt"), run.meta,
               {{"experiment", "uniqueness"},
                {"D", format_double(r.D)},
                {"D_u_hminus1", format_double(r.D_u)},
                {"D_v_hminus_delta0", format_double(r.D_v)},
                {"tolerance", format_double(cfg.run.uniqueness_tol)},
                {"negative_control_D", format_double(r.D_control)},
                {"iterations_a", std::to_string(r.iterations_a)},
                {"iterations_b", std::to_string(r.iterations_b)},
                {"residual_a", format_double(r.residual_a)},
                {"residual_b", format_double(r.residual_b)}});
  if (!(r.D <= cfg.run.uniqueness_tol))
    return run.fail(1, "uniqueness", "D = " + format_double(r.D) + " exceeds " + format_double(cfg.run.uniqueness_tol));
  run.outcome.summary = "D " + format_double(r.D);
}

void run_validate(Run& run) {
  const HypothesisReport r = validate_hypotheses(run.cfg.hypothesis);
  Metadata body{{"experiment", "validate"}};
  for (const auto& c : r.clauses)
    body.push_back({c.id, std::string(c.pass ? "pass" : "FAIL") + " slack=" + format_double(c.slack) + " [" + c.group +
                              "] " + c.statement});
  body.push_back({"existence_ok", yes(r.existence_ok)});
  body.push_back({"uniqueness_ok", yes(r.uniqueness_ok)});
  body.push_back({"uniqueness_dimension_ok", yes(r.uniqueness_dimension_ok)});
  if (!r.note.empty()) body.push_back({"note", r.note});
  write_report(run.file("report.txt"), run.meta, body);
  if (!r.existence_ok) {
    std::string failed;
    for (const auto& id : r.failing()) failed += (failed.empty() ? "" : ", ") + id;
    return run.fail(1, "hypothesis", "failing clauses: " + failed);
  }
  run.outcome.summary = r.uniqueness_ok && r.uniqueness_dimension_ok ? "existence and uniqueness hypotheses hold"
                                                                       : "existence hypotheses hold";
}

void run_noise_selftest(Run& run, const SpectralBasis& full) {
  const RunConfig& cfg = run.cfg;
  const NoiseReport nr = validate_noise(cfg.noise, full);
  const std::size_t samples = std::max<std::size_t>(cfg.run.paths, 1000);
  const IncrementStatistics st = increment_statistics(cfg.noise, full, cfg.solver.dt, samples);
  Metadata body{{"experiment", "noise-selftest"}, {"samples", std::to_string(samples)}};
  for (int j = 0; j < 2; ++j) {
    const std::string ch = "channel" + std::to_string(j + 1);
    body.push_back({ch + ".trace", format_double(nr.channels[j].trace)});
    body.push_back({ch + ".truncation_change", format_double(nr.channels[j].truncation_change)});
    body.push_back({ch + ".bound_ok", yes(nr.channels[j].bound_ok)});
    for (const auto& m : st.channels[j])
      body.push_back({ch + ".mode" + std::to_string(m.mode),
                      format_double(m.variance) + " +- " + format_double(m.se) + " expected " + format_double(m.expected)});
  }
  body.push_back({"cross_correlation", format_double(st.cross_correlation) + " +- " + format_double(st.cross_se)});
  body.push_back({"isometry", format_double(st.isometry) + " +- " + format_double(st.isometry_se) + " expected " +
                                  format_double(st.isometry_expected)});
  const bool ok = nr.ok() && st.within(4.0);
  body.push_back({"within_4_se", yes(st.within(4.0))});
  write_report(run.file("report.txt"), run.meta, body);
  if (!ok) return run.fail(1, "noise-statistics", "increment statistics or covariance bounds out of range");
  run.outcome.summary = "noise statistics within 4 standard errors";
}

}  // namespace

Metadata run_metadata(const RunConfig& cfg) {
  return {{"program", "klaus"},
          {"experiment", cfg.experiment},
          {"seed", std::to_string(cfg.seed)},
          {"seed_source", to_string(cfg.seed_source)},
          {"config", emit_config(cfg, false)}};
}

Scenario make_scenario(const RunConfig& cfg, const SpectralBasis& basis) {
  Scenario sc;
  sc.basis = &basis;
  sc.model = cfg.model;
  sc.solver = cfg.solver;
  sc.noise = cfg.noise;
  sc.monitor.rho = cfg.hypothesis.rho;
  sc.monitor.cutoff = cfg.cutoff;
  sc.picard.tol = cfg.run.picard_tol;
  sc.picard.max_iter = cfg.run.picard_max_iter;
  sc.u0 = make_initial(cfg.initial_u, basis);
  sc.v0 = make_initial(cfg.initial_v, basis);
  return sc;
}

RunOutcome run_experiment(const RunConfig& cfg) {
  Run run{cfg, run_metadata(cfg), {}};
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) {
    run.outcome.status = 2;
    run.outcome.summary = "cannot create output directory " + cfg.output_dir + ": " + ec.message();
    return run.outcome;
  }
  try {
    if (cfg.experiment == "validate") {
      run_validate(run);
    } else if (cfg.experiment == "uniqueness") {
      run_uniqueness(run);
    } else {
      const SpectralBasis basis = SpectralBasis::full(cfg.grid);
      if (cfg.experiment == "simulate") run_path(run, basis, false);
      else if (cfg.experiment == "pattern-demo") run_path(run, basis, true);
      else if (cfg.experiment == "picard") run_picard(run, basis);
      else if (cfg.experiment == "glue") run_glue(run, basis);
      else if (cfg.experiment == "ensemble") run_ensemble(run, basis);
      else if (cfg.experiment == "noise-selftest") run_noise_selftest(run, basis);
      else run.fail(2, "config", "unknown experiment " + cfg.experiment);
    }
  } catch (const SolverError& e) {
    Metadata extra{{"iterations", std::to_string(e.iterations)}, {"residual", format_double(e.residual)}};
    if (e.step) extra.push_back({"step", std::to_string(*e.step)});
    run.fail(1, "solver", e.what(), extra);
  } catch (const PicardError& e) {
    run.fail(1, "picard", e.what(), {{"residuals", join(e.residuals)}});
  } catch (const ConfigError& e) {
    run.fail(2, "config", e.what());
  } catch (const std::invalid_argument& e) {
    run.fail(2, "invalid-argument", e.what());
  } catch (const std::exception& e) {
    run.fail(1, "error", e.what());
  }
  return run.outcome;
}

}  // namespace klaus
