#include "klaus/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>

#include "klaus/rng.hpp"

namespace klaus {

namespace {

double formula_lambda(const ChannelSpec& c, double nu) {
  return c.amplitude * std::pow(1.0 + nu, -c.decay);
}

void check_channel(const ChannelSpec& c, int j) {
  if (!(c.decay > 0.5))
    throw std::invalid_argument("noise channel " + std::to_string(j + 1) +
                                ": decay exponent must exceed 1/2 for a trace-class covariance");
  if (!(c.amplitude >= 0.0))
    throw std::invalid_argument("noise channel " + std::to_string(j + 1) + ": negative amplitude");
}

}  // namespace

std::vector<double> NoiseSpec::spectrum(const SpectralBasis& basis, int channel) const {
  if (modes == 0 || modes > basis.size())
    throw std::invalid_argument("noise mode count " + std::to_string(modes) +
                                " outside the basis range 1.." + std::to_string(basis.size()));
  const ChannelSpec& c = channels.at(channel);
  if (!c.spectrum.empty()) {
    if (c.spectrum.size() < modes)
      throw std::invalid_argument("explicit noise spectrum shorter than the mode count");
    return {c.spectrum.begin(), c.spectrum.begin() + static_cast<std::ptrdiff_t>(modes)};
  }
  std::vector<double> lambda(modes);
  for (std::size_t k = 0; k < modes; ++k) lambda[k] = formula_lambda(c, basis.eigenvalue(k));
  return lambda;
}

bool NoiseReport::ok() const {
  return std::all_of(channels.begin(), channels.end(), [](const ChannelReport& c) {
    return c.decay_ok && c.bound_ok && std::isfinite(c.trace);
  });
}

NoiseReport validate_noise(const NoiseSpec& spec, const SpectralBasis& basis) {
  NoiseReport report;
  for (int j = 0; j < 2; ++j) {
    const ChannelSpec& c = spec.channels[j];
    check_channel(c, j);
    const auto lambda = spec.spectrum(basis, j);
    ChannelReport& r = report.channels[j];
    r.decay_ok = true;
    r.bound_ok = true;
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      if (lambda[k] < 0.0) r.bound_ok = false;
      r.trace += lambda[k] * lambda[k];
      if (k == 0 || basis.eigenvalue(k) == 0.0) continue;
      const double bound = c.amplitude * std::pow(basis.eigenvalue(k), -c.decay);
      const double ratio = bound > 0.0 ? lambda[k] / bound : (lambda[k] > 0.0 ? INFINITY : 0.0);
      r.max_bound_ratio = std::max(r.max_bound_ratio, ratio);
    }
    if (r.max_bound_ratio > 1.0) r.bound_ok = false;
    if (c.spectrum.empty()) {
      const std::size_t doubled = std::min(2 * spec.modes, basis.size());
      for (std::size_t k = 0; k < doubled; ++k) {
        const double l = formula_lambda(c, basis.eigenvalue(k));
        r.trace_doubled += l * l;
      }
    } else {
      r.trace_doubled = r.trace;
    }
    r.truncation_change = r.trace > 0.0 ? (r.trace_doubled - r.trace) / r.trace : 0.0;
  }
  return report;
}

NoisePath::NoisePath(const NoiseSpec& spec, const SpectralBasis& basis, double dt_base,
                     std::uint64_t path, std::uint64_t rung, std::uint32_t refinement)
    : basis_(&basis),
      dt_base_(dt_base),
      key_(stream_key(spec.seed, path, rung)),
      refinement_(refinement) {
  if (!(dt_base > 0.0)) throw std::invalid_argument("noise time step must be positive");
  if (refinement == 0) throw std::invalid_argument("noise refinement must be positive");
  for (int j = 0; j < 2; ++j) {
    check_channel(spec.channels[j], j);
    lambda_[j] = spec.spectrum(basis, j);
  }
}

std::vector<double> NoisePath::coefficients(int channel, std::uint64_t step) const {
  const auto& lambda = lambda_.at(channel);
  const double scale = std::sqrt(dt_base_);
  std::vector<double> c(lambda.size(), 0.0);
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    if (lambda[k] == 0.0) continue;
    double sum = 0.0;
    for (std::uint32_t i = 0; i < refinement_; ++i)
      sum += standard_normal(key_, static_cast<std::uint32_t>(channel), static_cast<std::uint32_t>(k),
                             step * refinement_ + i);
    c[k] = lambda[k] * scale * sum;
  }
  return c;
}

std::pair<Field, Field> NoisePath::increments(std::uint64_t step) const {
  return {basis_->synthesize(coefficients(0, step)), basis_->synthesize(coefficients(1, step))};
}

std::pair<Field, Field> sample_increments(const NoiseSpec& spec, const SpectralBasis& basis,
                                          double dt, std::uint64_t step) {
  return NoisePath(spec, basis, dt).increments(step);
}

Field stratonovich_correction(const NoiseSpec& spec, const SpectralBasis& basis, int channel,
                              double sigma) {
  const auto lambda = spec.spectrum(basis, channel);
  Field c(basis.grid());
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    if (lambda[k] == 0.0) continue;
    const Field psi = basis.mode(k);
    const double w = lambda[k] * lambda[k];
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += w * psi[i] * psi[i];
  }
  c *= 0.5 * sigma * sigma;
  return c;
}

bool BdgReport::stable() const {
  if (degenerate) return true;
  if (!std::isfinite(ratio) || !std::isfinite(ratio_doubled) || ratio == 0.0) return false;
  return std::abs(ratio_doubled - ratio) <= 0.2 * ratio;
}

bool IncrementStatistics::within(double z) const {
  for (const auto& ch : channels)
    for (const auto& m : ch)
      if (std::abs(m.variance - m.expected) > z * m.se) return false;
  return std::abs(cross_correlation) <= z * cross_se &&
         std::abs(isometry - isometry_expected) <= z * isometry_se;
}

IncrementStatistics increment_statistics(const NoiseSpec& spec, const SpectralBasis& basis, double dt,
                                         std::size_t n_samples, std::size_t checked_modes,
                                         std::size_t steps) {
  if (n_samples < 2 || steps == 0 || n_samples < steps)
    throw std::invalid_argument("increment_statistics: too few samples");
  const std::size_t modes = std::min(checked_modes, spec.modes);
  const std::size_t paths = n_samples / steps;
  const std::size_t total = paths * steps;
  IncrementStatistics st;

  std::array<std::vector<double>, 2> sum{}, sum2{}, sum4{};
  for (auto* v : {&sum, &sum2, &sum4})
    for (auto& ch : *v) ch.assign(modes, 0.0);
  double cross = 0.0, cross2 = 0.0, a2 = 0.0, b2 = 0.0;
  std::vector<double> iso(paths, 0.0);

  for (std::size_t p = 0; p < paths; ++p) {
    NoisePath noise(spec, basis, dt, p, 0);
    Field y(basis.grid());
    for (std::size_t s = 0; s < steps; ++s) {
      const auto [dw1, dw2] = noise.increments(s);
      const auto c1 = basis.analyze(dw1);
      const auto c2 = basis.analyze(dw2);
      for (std::size_t k = 0; k < modes; ++k) {
        for (int j = 0; j < 2; ++j) {
          const double x = (j == 0 ? c1 : c2)[k];
          sum[j][k] += x;
          sum2[j][k] += x * x;
          sum4[j][k] += x * x * x * x;
        }
      }
      cross += c1[0] * c2[0];
      cross2 += c1[0] * c1[0] * c2[0] * c2[0];
      a2 += c1[0] * c1[0];
      b2 += c2[0] * c2[0];
      y += dw1;
    }
    iso[p] = lp_norm_pow(y, 2.0);
  }

  const double n = static_cast<double>(total);
  for (int j = 0; j < 2; ++j) {
    const auto lambda = spec.spectrum(basis, j);
    for (std::size_t k = 0; k < modes; ++k) {
      ModeStatistic m;
      m.mode = k;
      const double mean = sum[j][k] / n;
      m.variance = (sum2[j][k] - n * mean * mean) / (n - 1.0);
      // Var of the squared coefficient estimates the spread of the variance estimator.
      const double m2 = sum2[j][k] / n;
      const double m4 = sum4[j][k] / n;
      m.se = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
      m.expected = lambda[k] * lambda[k] * dt;
      st.channels[j].push_back(m);
    }
  }
  const double denom = std::sqrt((a2 / n) * (b2 / n));
  if (denom > 0.0) {
    st.cross_correlation = (cross / n) / denom;
    st.cross_se = std::sqrt(cross2 / n) / denom / std::sqrt(n);
  }
  double iso_mean = 0.0;
  for (double v : iso) iso_mean += v;
  iso_mean /= static_cast<double>(paths);
  double iso_var = 0.0;
  for (double v : iso) iso_var += (v - iso_mean) * (v - iso_mean);
  iso_var /= std::max<double>(1.0, static_cast<double>(paths) - 1.0);
  st.isometry = iso_mean;
  st.isometry_se = std::sqrt(iso_var / static_cast<double>(paths));
  const auto lambda1 = spec.spectrum(basis, 0);
  for (double l : lambda1) st.isometry_expected += static_cast<double>(steps) * dt * l * l;
  return st;
}

BdgReport bdg_selfcheck(const NoiseSpec& spec, const SpectralBasis& basis, const Field& xi,
                        double p, std::size_t n_paths, double T, std::size_t steps) {
  if (!(p >= 2.0)) throw std::invalid_argument("bdg_selfcheck requires p >= 2");
  if (n_paths < 1000) throw std::invalid_argument("bdg_selfcheck needs at least 1000 paths");
  if (steps == 0 || !(T > 0.0)) throw std::invalid_argument("bdg_selfcheck: empty time grid");
  if (!(xi.grid() == basis.grid())) throw std::invalid_argument("bdg_selfcheck: grid mismatch");

  BdgReport r;
  r.p = p;
  r.paths = n_paths;
  const double dt = T / static_cast<double>(steps);
  const double xi_sq = lp_norm_pow(xi, 2.0);
  r.quadratic_budget = std::pow(T * xi_sq, p / 2.0);

  const auto lambda = spec.spectrum(basis, 0);
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    Field weighted = basis.mode(k);
    weighted *= xi;
    r.isometry_target += T * lambda[k] * lambda[k] * lp_norm_pow(weighted, 2.0);
  }

  const std::size_t total = 2 * n_paths;
  std::vector<double> sup_p(total), terminal(total);
  for (std::size_t path = 0; path < total; ++path) {
    NoisePath noise(spec, basis, dt, path, 0);
    Field y(basis.grid());
    double sup = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      Field dw = basis.synthesize(noise.coefficients(0, s));
      dw *= xi;
      y += dw;
      sup = std::max(sup, lp_norm(y, 2.0));
    }
    sup_p[path] = std::pow(sup, p);
    terminal[path] = lp_norm_pow(y, 2.0);
  }

  auto mean_se = [](const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (x[i] - m) * (x[i] - m);
    v /= static_cast<double>(n - 1);
    return std::pair{m, std::sqrt(v / static_cast<double>(n))};
  };

  const auto [m1, se1] = mean_se(sup_p.data(), n_paths);
  const double m2 = mean_se(sup_p.data(), total).first;
  r.sup_moment = m1;
  r.sup_moment_se = se1;
  std::tie(r.terminal_second_moment, r.terminal_second_moment_se) = mean_se(terminal.data(), n_paths);

  if (r.quadratic_budget == 0.0) {
    r.degenerate = true;
    r.ratio = r.ratio_doubled = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.ratio = m1 / r.quadratic_budget;
    r.ratio_doubled = m2 / r.quadratic_budget;
  }
  return r;
}

}  // namespace klaus
