#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "klaus/dynamics.hpp"
#include "klaus/fixedpoint.hpp"

namespace klaus {

/// Index set of the existence and uniqueness hypotheses.
struct HypothesisParams {
  int d = 1;
  double gamma = 3.0;
  double m = 6.0;
  double m0 = 12.0;
  double p_star = 8.0;
  double p0_star = 8.0;
  double rho = 0.4;
  double l = 12.0;
  double delta0 = 0.05;

  bool operator==(const HypothesisParams&) const = default;
};

struct Clause {
  std::string id;
  std::string statement;
  std::string group;  // "existence" or "uniqueness"
  bool pass = false;
  double slack = 0.0;  // positive when satisfied with room to spare
};

struct HypothesisReport {
  std::vector<Clause> clauses;
  bool existence_ok = false;
  bool uniqueness_ok = false;
  /// rho >= d/2 - 1/2 and rho < 1 - d/2 can hold together only for d = 1.
  bool uniqueness_dimension_ok = false;
  std::string note;

  std::vector<std::string> failing() const;
  const Clause& clause(const std::string& id) const;
};

/// Evaluates every clause; never throws.
HypothesisReport validate_hypotheses(const HypothesisParams& params);

/// Accumulated energy quantities at each snapshot of a stride-1 trajectory.
struct EnergyLedger {
  std::vector<double> t;
  std::vector<double> sup_term;     // sup_{s<=t} |u|_{L^{p+1}}^{p+1}
  std::vector<double> dissipation;  // int |u|^{p+gamma-2} |grad u|^2
  std::vector<double> coupling;     // chi int |u|^{p+1} v^2
  bool finite() const;
  /// sup + gamma p (p+1) r_u dissipation + (p+1) coupling at the final time.
  double combined(double p, double gamma, double r_u) const;
};

EnergyLedger energy_monitor(const Trajectory& traj, double p, const ModelConfig& model);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

Estimate estimate(const std::vector<double>& samples);

struct EnsembleReport {
  Estimate sup_u;          // E sup |u|_{L^{p+1}}^{p+1}
  Estimate dissipation;    // E int int |u|^{p+gamma-2} |grad u|^2
  Estimate coupling;       // E chi int int |u|^{p+1} v^2
  Estimate energy;         // combined left-hand side
  Estimate sup_v;          // E sup |v|_{H^rho}^{m0}
  Estimate v_gradient;     // E (int |v|_{H^{rho+1}}^2)^{m0/2}
  double c0_ratio = 0.0;   // energy / (|u0|_{L^{p+1}}^{p+1} + 1)
  double c2_ratio = 0.0;   // (sup_v + v_gradient) / (1 + |v0|_{H^rho}^{m0} + |u0|_{L2}^l)
  bool all_finite = true;
  double worst_min_u = 0.0;
  double worst_min_v = 0.0;
};

/// Per-path statistics kept so that ensembles can be re-reduced on prefixes.
struct PathMoments {
  double sup_u = 0.0, dissipation = 0.0, coupling = 0.0, energy = 0.0;
  double sup_v = 0.0, v_gradient = 0.0;
  double min_u = 0.0, min_v = 0.0;
};

/// Coupled Monte-Carlo run over paths 0..n_paths-1 (each its own substream).
/// Throws std::runtime_error naming the path if a statistic is not finite.
std::vector<PathMoments> ensemble_paths(const Scenario& scenario, double p, std::size_t n_paths,
                                        unsigned workers = 0, std::uint32_t noise_refinement = 1);
EnsembleReport reduce_moments(const Scenario& scenario, const std::vector<PathMoments>& paths,
                              std::size_t count, double p, double l);
/// Requires n_paths >= 100.
EnsembleReport ensemble_moments(const Scenario& scenario, double p, std::size_t n_paths,
                                unsigned workers = 0, double l = 12.0);

struct UniquenessReport {
  double D = 0.0;          // sup |du|_{H^-1} + sup |dv|_{H^-delta0}
  double D_u = 0.0;
  double D_v = 0.0;
  double D_control = 0.0;  // same metric against a run with seed + 1
  int iterations_a = 0;
  int iterations_b = 0;
  double residual_a = 0.0;
  double residual_b = 0.0;
};

/// sup-in-time H^-1 x H^-delta0 distance of two trajectories on the same grid.
double uniqueness_distance(const SpectralBasis& basis, const Trajectory& a, const Trajectory& b,
                           double delta0, double* d_u = nullptr, double* d_v = nullptr);

/// Two Picard runs with the same noise: one from the zero-reaction iterate,
/// one from the zero trajectory. Refuses (std::invalid_argument) unless d = 1
/// and the uniqueness hypotheses hold.
UniquenessReport uniqueness_experiment(const Scenario& scenario, const HypothesisParams& params,
                                       double kappa);

struct NonnegReport {
  std::vector<double> min_u, min_v;
  double worst_u = 0.0;
  double worst_v = 0.0;
  std::size_t below = 0;  // grid values below -threshold over all snapshots
  double threshold = 1e-6;
  bool ok() const { return below == 0; }
};

NonnegReport nonneg_monitor(const Trajectory& traj, double threshold = 1e-6);

}  // namespace klaus
