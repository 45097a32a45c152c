#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "klaus/basis.hpp"
#include "klaus/cutoff.hpp"
#include "klaus/dynamics.hpp"
#include "klaus/noise.hpp"

namespace klaus {

/// Frozen inputs (eta, xi) sampled at every grid time t0 + n dt, n = 0..steps.
struct FrozenPair {
  std::vector<Field> eta;
  std::vector<Field> xi;

  std::size_t steps() const { return eta.empty() ? 0 : eta.size() - 1; }
  static FrozenPair zeros(const Grid& grid, std::size_t steps);
  /// Pair made of the u and v snapshots of a stride-1 trajectory.
  static FrozenPair from(const Trajectory& traj);
};

/// h(eta, xi, t_n) for n = 0..steps (left-endpoint quadrature).
std::vector<double> h_series(const FrozenPair& pair, double dt, const CutoffParams& params);

/// Solves the truncated system with the reaction -+ phi_kappa(h(eta, xi, t)) eta xi^2
/// over pair.steps() steps. The returned trajectory holds every step; its
/// records carry the h value of the output itself.
Trajectory apply_V(const FrozenPair& pair, const Field& u0, const Field& v0, double kappa,
                   const NoisePath& noise, Stepper& stepper, const Monitor& monitor, double t0 = 0.0);

struct PicardSettings {
  double tol = 1e-10;
  int max_iter = 60;
};

struct PicardResult {
  Trajectory trajectory;
  std::vector<double> residuals;  // r_n = M-distance between iterates n+1 and n
  int iterations = 0;             // applications of V after the initial iterate
  bool converged = false;
};

class PicardError : public std::runtime_error {
 public:
  PicardError(const std::string& what, std::vector<double> residuals)
      : std::runtime_error(what), residuals(std::move(residuals)) {}
  std::vector<double> residuals;
};

/// Discrete M-norm distance: (sum dt |du|_{L^{g+1}}^{g+1})^{1/(g+1)} +
/// (sum dt |dv|_{L^m}^{m0})^{1/m0}, right-endpoint sums over the steps.
double m_distance(const Trajectory& a, const Trajectory& b, const CutoffParams& params);

/// Picard iteration X_{n+1} = V(X_n). The default initial iterate is the
/// zero-reaction solve V(0, 0). Throws PicardError after max_iter without
/// reaching tol; solver failures propagate.
PicardResult picard_solve(const Field& u0, const Field& v0, double kappa, const NoisePath& noise,
                          Stepper& stepper, const Monitor& monitor, const PicardSettings& settings,
                          double t0 = 0.0, std::optional<std::size_t> steps = std::nullopt,
                          const FrozenPair* initial = nullptr);

/// Index of the first record with h >= kappa.
std::optional<std::size_t> first_exit_index(const Trajectory& traj, double kappa);
/// Time of that record, or none if h stays below kappa.
std::optional<double> first_exit_time(const Trajectory& traj, double kappa);

struct RungReport {
  std::size_t rung = 0;
  double kappa = 0.0;
  std::optional<double> exit_time;
  int picard_iterations = 0;
  double residual = 0.0;
};

struct GlueResult {
  Trajectory trajectory;          // glued, every step; records hold the global h
  std::vector<Trajectory> segments;  // one per rung reached, plus the decoupled tail
  std::vector<RungReport> ladder;
  bool decoupled_tail = false;
};

/// Follows the truncated system at kappa_1 until h >= kappa_1, restarts from
/// the exit state at kappa_2 on a fresh noise substream, and so on; after the
/// last rung the decoupled dynamics take over. Noise paths use substream
/// (path, rung index), the tail rung ladder.size().
GlueResult glue_simulate(const Field& u0, const Field& v0, const std::vector<double>& ladder,
                         Stepper& stepper, const NoiseSpec& noise, const Monitor& monitor,
                         const PicardSettings& settings, std::uint64_t path = 0);

/// Everything needed to run one path of an experiment.
struct Scenario {
  const SpectralBasis* basis = nullptr;
  ModelConfig model;
  SolverConfig solver;
  NoiseSpec noise;
  Monitor monitor;
  PicardSettings picard;
  Field u0;
  Field v0;

  Stepper make_stepper() const { return Stepper(*basis, model, solver, noise); }
};

struct ExitEstimate {
  std::vector<double> kappas;
  std::vector<double> p_hat;
  std::vector<double> se;
  double markov_constant = 0.0;  // E h(T) of the glued path; p_hat <= c/kappa
  double markov_constant_se = 0.0;
  double fit_constant = 0.0;     // least-squares c in p_hat ~ c/kappa
  std::size_t paths = 0;
};

/// Monte-Carlo estimate of P(bar tau_kappa < T) for positive integer kappas.
/// Each path runs one glue with the ladder 1, 2, ..., max kappa; bar tau_kappa < T
/// exactly when rung kappa exits.
ExitEstimate exit_prob_estimate(const Scenario& scenario, const std::vector<double>& kappas,
                                std::size_t n_paths, unsigned workers = 0);

}  // namespace klaus
