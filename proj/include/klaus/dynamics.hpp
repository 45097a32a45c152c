#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "klaus/basis.hpp"
#include "klaus/cutoff.hpp"
#include "klaus/field.hpp"
#include "klaus/noise.hpp"

namespace klaus {

enum class Calculus { ito, stratonovich };
enum class NonnegPolicy { monitor, project };
enum class PathMode { coupled, decoupled };

/// PDE constants. k, f, g are the rain, evaporation and mortality rates of the
/// full Klausmeier kinetics; all zero gives the reduced system.
struct ModelConfig {
  double r_u = 1.0;
  double r_v = 1.0;
  double chi = 1.0;
  double gamma = 3.0;
  double k = 0.0;
  double f = 0.0;
  double g = 0.0;
  double sigma1 = 0.1;
  double sigma2 = 0.1;
  Calculus calculus = Calculus::ito;

  void validate() const;
  /// gamma <= 2 runs but lies outside the range covered by the existence theory.
  bool outside_existence_range() const { return gamma <= 2.0; }

  bool operator==(const ModelConfig&) const = default;
};

struct SolverConfig {
  double dt = 1e-3;
  double T = 0.1;
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  NonnegPolicy nonneg_policy = NonnegPolicy::monitor;
  int snapshot_stride = 1;

  /// Number of steps T/dt; T must be an integer multiple of dt.
  std::size_t steps() const;
  void validate() const;

  bool operator==(const SolverConfig&) const = default;
};

struct CoupledState {
  Field u;
  Field v;
  double t = 0.0;
};

/// Norms recorded at one snapshot.
struct StepRecord {
  double t = 0.0;
  double u_l2 = 0.0;
  double u_lgamma = 0.0;  // |u|_{L^{gamma+1}}
  double v_hrho = 0.0;    // |v|_{H^rho}
  double u_min = 0.0, u_max = 0.0;
  double v_min = 0.0, v_max = 0.0;
  double h = 0.0;         // running h(u, v, t)
};

struct Trajectory {
  std::vector<CoupledState> snapshots;
  std::vector<StepRecord> records;
  double dt = 0.0;
  int stride = 1;
};

/// What a simulated path records besides the states.
struct Monitor {
  double rho = 0.4;
  CutoffParams cutoff{};
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
  std::optional<std::size_t> step;
};

struct NewtonStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Time-stepping kernels on a fixed grid.
///
/// The porous-medium part is backward Euler with the conservative
/// second-difference Laplacian, solved by damped Newton in u with Jacobian
/// I - dt r_u L diag(gamma |u|^(gamma-1) + 1e-12). The heat part is the exact
/// spectral exponential on the (full) basis. Reaction, linear drift and noise
/// are explicit, evaluated at the start of the step.
///
/// Not thread-safe: holds the sparse factorisation workspace. Use one per worker.
class Stepper {
 public:
  Stepper(const SpectralBasis& basis, ModelConfig model, SolverConfig solver,
          const NoiseSpec& noise);
  /// Noise-free construction: no Stratonovich correction is available.
  Stepper(const SpectralBasis& basis, ModelConfig model, SolverConfig solver);
  ~Stepper();
  Stepper(Stepper&&) noexcept;
  Stepper& operator=(Stepper&&) noexcept;

  const SpectralBasis& basis() const { return *basis_; }
  const ModelConfig& model() const { return model_; }
  const SolverConfig& solver() const { return solver_; }

  /// Coefficient fields c_u, c_v of the linear drifts c_u u and c_v v.
  /// Stratonovich calculus starts them at the conversion correction.
  const Field& drift_u() const { return drift_u_; }
  const Field& drift_v() const { return drift_v_; }
  void add_linear_drift(const Field& du, const Field& dv);

  /// Solves w - dt r_u Lap(w^[gamma]) = u + dt source + sigma1 u dW1.
  Field pm_implicit_step(const Field& u, const Field& source, const Field& dW1, double dt);
  /// exp(dt (r_v Lap - extra_decay)) v + dt source + sigma2 v dW2.
  Field heat_step(const Field& v, const Field& source, const Field& dW2, double dt,
                  double extra_decay) const;

  CoupledState step_coupled(const CoupledState& s, const Field& dW1, const Field& dW2);
  /// Reaction uses the frozen pair: -chi phi eta xi^2 for u, +phi eta xi^2 for v.
  CoupledState step_frozen(const CoupledState& s, const Field& eta, const Field& xi, double phi,
                           const Field& dW1, const Field& dW2);
  /// Noisy porous medium for u; noisy heat with unit extra decay for v.
  CoupledState step_decoupled(const CoupledState& s, const Field& dW1, const Field& dW2);

  NewtonStats last_newton() const { return last_newton_; }

 private:
  CoupledState advance(const CoupledState& s, const Field* eta, const Field* xi, double phi,
                       const Field& dW1, const Field& dW2);
  void enforce_policy(CoupledState& s) const;

  class PorousMediumSolver;

  const SpectralBasis* basis_;
  ModelConfig model_;
  SolverConfig solver_;
  Field drift_u_, drift_v_;
  std::unique_ptr<PorousMediumSolver> pm_;
  NewtonStats last_newton_{};
};

/// Norm record of a state; h is supplied by the caller.
StepRecord make_record(const SpectralBasis& basis, const CoupledState& s, double gamma, double rho,
                       double h);

/// Runs [0, T] (or the remaining steps from the noise path's origin) with the
/// given mode. Snapshots are taken every solver.snapshot_stride steps plus the
/// final step. Solver failures are rethrown with the step index set.
Trajectory simulate_path(const Field& u0, const Field& v0, Stepper& stepper,
                         const NoisePath& noise, PathMode mode, const Monitor& monitor,
                         double t0 = 0.0, std::optional<std::size_t> steps = std::nullopt);

}  // namespace klaus
