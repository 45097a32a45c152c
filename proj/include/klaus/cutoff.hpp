#pragma once

#include "klaus/field.hpp"

namespace klaus {

/// Truncation level and the exponents entering the running norm budget
/// h(eta, xi, t) = (int_0^t |eta|_{L^{gamma+1}}^{gamma+1})^nu + (int_0^t |xi|_{L^m}^{m0})^nu.
struct CutoffParams {
  double kappa = 1.0;
  double nu = 0.0;  // 0 selects the largest admissible value
  double gamma = 3.0;
  double m = 6.0;
  double m0 = 12.0;
  double p0_star = 8.0;

  /// Largest nu in (0, 1] with 1/p0* + nu m0/(gamma+1) <= 1 and 1/p0* + nu/m0 <= 1.
  static double max_admissible_nu(double p0_star, double m0, double gamma);
  bool admissible(double candidate) const;
  double effective_nu() const;
  /// Throws std::invalid_argument when kappa <= 0 or nu is not admissible.
  void validate() const;

  bool operator==(const CutoffParams&) const = default;
};

/// Smooth cutoff: 1 on |x| <= kappa, 0 on |x| >= 2 kappa, built from the
/// exp(-1/t) smooth step in between. Lipschitz constant exactly 2/kappa.
double cutoff_phi(double x, double kappa);

/// Left-endpoint accumulation of the two integrals of h.
class HAccumulator {
 public:
  explicit HAccumulator(const CutoffParams& params);

  /// Value at the current time (integrals over all previously added steps).
  double value() const;
  /// Adds dt times the integrands evaluated at (eta, xi).
  void add(const Field& eta, const Field& xi, double dt);

  double eta_integral() const { return eta_integral_; }
  double xi_integral() const { return xi_integral_; }

 private:
  double gamma_, m_, m0_, nu_;
  double eta_integral_ = 0.0;
  double xi_integral_ = 0.0;
};

}  // namespace klaus
