#include "klaus/dynamics.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace klaus {

void ModelConfig::validate() const {
  if (!(r_u >= 0.0) || !(r_v >= 0.0) || !(chi >= 0.0))
    throw std::invalid_argument("diffusion and coupling rates must be nonnegative");
  if (!(gamma > 1.0)) throw std::invalid_argument("porous-medium exponent gamma must exceed 1");
  if (!(k >= 0.0) || !(f >= 0.0) || !(g >= 0.0))
    throw std::invalid_argument("rain, evaporation and mortality rates must be nonnegative");
  if (!std::isfinite(sigma1) || !std::isfinite(sigma2))
    throw std::invalid_argument("noise amplitudes must be finite");
}

std::size_t SolverConfig::steps() const {
  const double ratio = T / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio))
    throw std::invalid_argument("final time T must be an integer multiple of dt");
  return static_cast<std::size_t>(n);
}

void SolverConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (!(T >= 0.0)) throw std::invalid_argument("final time must be nonnegative");
  if (T > 0.0 && dt > T) throw std::invalid_argument("time step exceeds final time");
  if (!(newton_tol > 0.0) || newton_max_iter < 1)
    throw std::invalid_argument("Newton tolerance and iteration cap must be positive");
  if (snapshot_stride < 1) throw std::invalid_argument("snapshot stride must be at least 1");
  (void)steps();
}

// Backward-Euler porous-medium solve on the conservative stencil Laplacian.
class Stepper::PorousMediumSolver {
 public:
  explicit PorousMediumSolver(const Grid& grid) : grid_(grid) {
    const int n = grid.n;
    const std::size_t size = grid.size();
    const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(size * (2 * grid.dim + 1));
    std::vector<int> idx(grid.dim);
    for (std::size_t c = 0; c < size; ++c) {
      grid.unflatten(c, idx);
      std::size_t stride = size;
      for (int a = 0; a < grid.dim; ++a) {
        stride /= n;
        const int i = idx[a];
        const std::size_t line = c - static_cast<std::size_t>(i) * stride;
        auto at = [&](int j) { return static_cast<int>(line + static_cast<std::size_t>(j) * stride); };
        if (grid.boundary == Boundary::periodic) {
          trip.emplace_back(static_cast<int>(c), at((i + n - 1) % n), inv_h2);
          trip.emplace_back(static_cast<int>(c), at((i + 1) % n), inv_h2);
          trip.emplace_back(static_cast<int>(c), static_cast<int>(c), -2.0 * inv_h2);
        } else {
          if (i > 0) {
            trip.emplace_back(static_cast<int>(c), at(i - 1), inv_h2);
            trip.emplace_back(static_cast<int>(c), static_cast<int>(c), -inv_h2);
          }
          if (i < n - 1) {
            trip.emplace_back(static_cast<int>(c), at(i + 1), inv_h2);
            trip.emplace_back(static_cast<int>(c), static_cast<int>(c), -inv_h2);
          }
        }
      }
    }
    lap_.resize(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
    lap_.setFromTriplets(trip.begin(), trip.end());
    lap_.makeCompressed();
    jac_ = lap_;
  }

  Field solve(const Field& rhs, double a, double gamma, double tol, int max_iter, NewtonStats& stats) {
    const std::size_t size = grid_.size();
    const double vol = grid_.cell_volume();
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(size));
    Eigen::VectorXd w = b;
    Eigen::VectorXd phi(size), r(size), w_try(size), r_try(size);

    auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
      for (std::size_t i = 0; i < size; ++i) phi[i] = power_gamma(x[i], gamma);
      out.noalias() = lap_ * phi;
      out = x - a * out - b;
      return std::sqrt(vol * out.squaredNorm());
    };

    double rn = residual(w, r);
    int it = 0;
    for (;; ++it) {
      if (!std::isfinite(rn)) break;
      if (rn <= tol * (1.0 + std::sqrt(vol * w.squaredNorm()))) {
        stats = {it, rn};
        return Field(grid_, std::vector<double>(w.data(), w.data() + size));
      }
      if (it >= max_iter) break;

      // J = I - a L diag(gamma |w|^(gamma-1) + eps), same sparsity as L.
      for (Eigen::Index col = 0; col < jac_.outerSize(); ++col) {
        const double d = gamma * std::pow(std::abs(w[col]), gamma - 1.0) + 1e-12;
        double* jv = jac_.valuePtr();
        const double* lv = lap_.valuePtr();
        for (Eigen::Index p = jac_.outerIndexPtr()[col]; p < jac_.outerIndexPtr()[col + 1]; ++p) {
          jv[p] = -a * lv[p] * d + (jac_.innerIndexPtr()[p] == col ? 1.0 : 0.0);
        }
      }
      if (!analyzed_) {
        lu_.analyzePattern(jac_);
        analyzed_ = true;
      }
      lu_.factorize(jac_);
      if (lu_.info() != Eigen::Success) break;
      const Eigen::VectorXd delta = lu_.solve(-r);

      double s = 1.0;
      bool accepted = false;
      for (int halving = 0; halving < 40; ++halving, s *= 0.5) {
        w_try = w + s * delta;
        const double rt = residual(w_try, r_try);
        if (std::isfinite(rt) && rt <= (1.0 - 1e-4 * s) * rn) {
          w.swap(w_try);
          r.swap(r_try);
          rn = rt;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    stats = {it, rn};
    std::ostringstream msg;
    msg << "porous-medium Newton failed after " << it << " iterations, residual " << rn;
    throw SolverError(msg.str(), it, rn);
  }

 private:
  Grid grid_;
  Eigen::SparseMatrix<double> lap_;
  Eigen::SparseMatrix<double> jac_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool analyzed_ = false;
};

Stepper::Stepper(const SpectralBasis& basis, ModelConfig model, SolverConfig solver)
    : basis_(&basis),
      model_(model),
      solver_(solver),
      drift_u_(basis.grid()),
      drift_v_(basis.grid()),
      pm_(std::make_unique<PorousMediumSolver>(basis.grid())) {
  if (!basis.is_full())
    throw std::invalid_argument("the stepper needs a basis retaining every resolvable mode");
  model_.validate();
  solver_.validate();
}

Stepper::Stepper(const SpectralBasis& basis, ModelConfig model, SolverConfig solver,
                 const NoiseSpec& noise)
    : Stepper(basis, model, solver) {
  if (model_.calculus == Calculus::stratonovich) {
    drift_u_ += stratonovich_correction(noise, basis, 0, model_.sigma1);
    drift_v_ += stratonovich_correction(noise, basis, 1, model_.sigma2);
  }
}

Stepper::~Stepper() = default;
Stepper::Stepper(Stepper&&) noexcept = default;
Stepper& Stepper::operator=(Stepper&&) noexcept = default;

void Stepper::add_linear_drift(const Field& du, const Field& dv) {
  drift_u_ += du;
  drift_v_ += dv;
}

Field Stepper::pm_implicit_step(const Field& u, const Field& source, const Field& dW1, double dt) {
  require_same_grid(u, source, "pm_implicit_step");
  require_same_grid(u, dW1, "pm_implicit_step");
  if (!(dt > 0.0)) throw std::invalid_argument("pm_implicit_step requires dt > 0");
  Field rhs(u.grid());
  for (std::size_t i = 0; i < u.size(); ++i)
    rhs[i] = u[i] + dt * source[i] + model_.sigma1 * u[i] * dW1[i];
  if (model_.r_u == 0.0) {
    last_newton_ = {};
    return rhs;
  }
  return pm_->solve(rhs, dt * model_.r_u, model_.gamma, solver_.newton_tol, solver_.newton_max_iter,
                    last_newton_);
}

Field Stepper::heat_step(const Field& v, const Field& source, const Field& dW2, double dt,
                         double extra_decay) const {
  require_same_grid(v, source, "heat_step");
  require_same_grid(v, dW2, "heat_step");
  if (!(dt > 0.0)) throw std::invalid_argument("heat_step requires dt > 0");
  if (!(extra_decay >= 0.0)) throw std::invalid_argument("heat_step requires extra_decay >= 0");
  const auto nu = basis_->eigenvalues();
  std::vector<double> decay(nu.size());
  for (std::size_t k = 0; k < nu.size(); ++k)
    decay[k] = std::exp(-(model_.r_v * nu[k] + extra_decay) * dt);
  Field out = basis_->apply_multiplier(v, decay);
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] += dt * source[i] + model_.sigma2 * v[i] * dW2[i];
  return out;
}

CoupledState Stepper::advance(const CoupledState& s, const Field* eta, const Field* xi, double phi,
                              const Field& dW1, const Field& dW2) {
  const std::size_t n = s.u.size();
  Field src_u(s.u.grid()), src_v(s.v.grid());
  for (std::size_t i = 0; i < n; ++i) {
    const double reaction = phi * ((*eta)[i] * (*xi)[i] * (*xi)[i]);
    src_u[i] = -model_.chi * reaction + model_.k - model_.f * s.u[i] + drift_u_[i] * s.u[i];
    src_v[i] = reaction - model_.g * s.v[i] + drift_v_[i] * s.v[i];
  }
  const double dt = solver_.dt;
  CoupledState next{pm_implicit_step(s.u, src_u, dW1, dt), heat_step(s.v, src_v, dW2, dt, 0.0),
                    s.t + dt};
  enforce_policy(next);
  return next;
}

void Stepper::enforce_policy(CoupledState& s) const {
  if (solver_.nonneg_policy != NonnegPolicy::project) return;
  for (double& x : s.u.values()) x = std::max(x, 0.0);
  for (double& x : s.v.values()) x = std::max(x, 0.0);
}

CoupledState Stepper::step_coupled(const CoupledState& s, const Field& dW1, const Field& dW2) {
  return advance(s, &s.u, &s.v, 1.0, dW1, dW2);
}

CoupledState Stepper::step_frozen(const CoupledState& s, const Field& eta, const Field& xi, double phi,
                                  const Field& dW1, const Field& dW2) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("cutoff value must lie in [0, 1]");
  require_same_grid(s.u, eta, "step_frozen");
  require_same_grid(s.v, xi, "step_frozen");
  return advance(s, &eta, &xi, phi, dW1, dW2);
}

CoupledState Stepper::step_decoupled(const CoupledState& s, const Field& dW1, const Field& dW2) {
  Field src_u(s.u.grid()), src_v(s.v.grid());
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    src_u[i] = drift_u_[i] * s.u[i];
    src_v[i] = drift_v_[i] * s.v[i];
  }
  const double dt = solver_.dt;
  CoupledState next{pm_implicit_step(s.u, src_u, dW1, dt), heat_step(s.v, src_v, dW2, dt, 1.0),
                    s.t + dt};
  enforce_policy(next);
  return next;
}

StepRecord make_record(const SpectralBasis& basis, const CoupledState& s, double gamma, double rho,
                       double h) {
  StepRecord r;
  r.t = s.t;
  r.u_l2 = lp_norm(s.u, 2.0);
  r.u_lgamma = lp_norm(s.u, gamma + 1.0);
  r.v_hrho = sobolev_norm(basis, s.v, rho);
  r.u_min = s.u.min();
  r.u_max = s.u.max();
  r.v_min = s.v.min();
  r.v_max = s.v.max();
  r.h = h;
  return r;
}

Trajectory simulate_path(const Field& u0, const Field& v0, Stepper& stepper, const NoisePath& noise,
                         PathMode mode, const Monitor& monitor, double t0,
                         std::optional<std::size_t> steps) {
  const SolverConfig& solver = stepper.solver();
  const SpectralBasis& basis = stepper.basis();
  require_same_grid(u0, v0, "simulate_path");
  if (!(u0.grid() == basis.grid())) throw std::invalid_argument("simulate_path: grid mismatch");
  if (std::abs(noise.dt() - solver.dt) > 1e-12 * solver.dt)
    throw std::invalid_argument("simulate_path: noise path time step differs from the solver's");
  const std::size_t total = steps.value_or(solver.steps());
  const double gamma = stepper.model().gamma;

  Trajectory traj;
  traj.dt = solver.dt;
  traj.stride = solver.snapshot_stride;
  HAccumulator h(monitor.cutoff);
  CoupledState state{u0, v0, t0};
  traj.snapshots.push_back(state);
  traj.records.push_back(make_record(basis, state, gamma, monitor.rho, h.value()));

  for (std::size_t n = 0; n < total; ++n) {
    const auto [dw1, dw2] = noise.increments(n);
    h.add(state.u, state.v, solver.dt);
    try {
      state = mode == PathMode::coupled ? stepper.step_coupled(state, dw1, dw2)
                                        : stepper.step_decoupled(state, dw1, dw2);
    } catch (SolverError& e) {
      e.step = n;
      throw;
    }
    state.t = t0 + static_cast<double>(n + 1) * solver.dt;
    if ((n + 1) % static_cast<std::size_t>(solver.snapshot_stride) == 0 || n + 1 == total) {
      traj.snapshots.push_back(state);
      traj.records.push_back(make_record(basis, state, gamma, monitor.rho, h.value()));
    }
  }
  return traj;
}

}  // namespace klaus
