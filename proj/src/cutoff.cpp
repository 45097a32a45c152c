#include "klaus/cutoff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace klaus {

double CutoffParams::max_admissible_nu(double p0_star, double m0, double gamma) {
  const double room = 1.0 - 1.0 / p0_star;
  if (!(room > 0.0) || !(m0 > 0.0) || !(gamma > 1.0)) return 0.0;
  return std::min({1.0, room * (gamma + 1.0) / m0, room * m0});
}

bool CutoffParams::admissible(double candidate) const {
  if (!(candidate > 0.0) || candidate > 1.0) return false;
  const double slack = 1e-12;
  return 1.0 / p0_star + candidate * m0 / (gamma + 1.0) <= 1.0 + slack &&
         1.0 / p0_star + candidate / m0 <= 1.0 + slack;
}

double CutoffParams::effective_nu() const {
  return nu > 0.0 ? nu : max_admissible_nu(p0_star, m0, gamma);
}

void CutoffParams::validate() const {
  if (!(kappa > 0.0)) throw std::invalid_argument("cutoff level kappa must be positive");
  if (!admissible(effective_nu()))
    throw std::invalid_argument("cutoff exponent nu violates 1/p0* + nu m0/(gamma+1) <= 1 or 1/p0* + nu/m0 <= 1");
}

double cutoff_phi(double x, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("cutoff_phi requires kappa > 0");
  const double s = std::abs(x) / kappa - 1.0;
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / (1.0 - s));
  const double b = std::exp(-1.0 / s);
  return a / (a + b);
}

HAccumulator::HAccumulator(const CutoffParams& params)
    : gamma_(params.gamma), m_(params.m), m0_(params.m0), nu_(params.effective_nu()) {}

double HAccumulator::value() const {
  return std::pow(eta_integral_, nu_) + std::pow(xi_integral_, nu_);
}

void HAccumulator::add(const Field& eta, const Field& xi, double dt) {
  eta_integral_ += dt * lp_norm_pow(eta, gamma_ + 1.0);
  xi_integral_ += dt * std::pow(lp_norm(xi, m_), m0_);
}

}  // namespace klaus
