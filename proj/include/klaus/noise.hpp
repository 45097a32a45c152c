#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "klaus/basis.hpp"
#include "klaus/field.hpp"

namespace klaus {

/// Covariance of one Q-Wiener channel: lambda_k = amplitude * (1 + nu_k)^(-decay),
/// unless an explicit spectrum is supplied.
struct ChannelSpec {
  double decay = 1.0;
  double amplitude = 0.1;
  std::vector<double> spectrum;  // optional override, one entry per retained mode

  bool operator==(const ChannelSpec&) const = default;
};

struct NoiseSpec {
  std::array<ChannelSpec, 2> channels{};
  std::size_t modes = 16;  // retained noise modes, <= basis size
  std::uint64_t seed = 20240613;

  /// lambda_k^(j) for k < modes; channel is 0 or 1.
  std::vector<double> spectrum(const SpectralBasis& basis, int channel) const;

  bool operator==(const NoiseSpec&) const = default;
};

struct ChannelReport {
  double trace = 0.0;               // sum_k lambda_k^2
  double trace_doubled = 0.0;       // same with twice the modes (capped by the basis)
  double truncation_change = 0.0;   // relative change trace -> trace_doubled
  double max_bound_ratio = 0.0;     // max_k>=1 lambda_k / (C nu_k^-decay)
  bool decay_ok = false;
  bool bound_ok = false;
};

struct NoiseReport {
  std::array<ChannelReport, 2> channels{};
  bool ok() const;
};

/// Checks decay > 1/2 (throws std::invalid_argument otherwise), the upper bound
/// lambda_k <= C nu_k^-decay and trace finiteness.
NoiseReport validate_noise(const NoiseSpec& spec, const SpectralBasis& basis);

/// One increment pair dW_j = sum_k lambda_k psi_k sqrt(dt) xi_k, with xi drawn
/// from the stream of spec.seed at coordinate (j, k, step).
std::pair<Field, Field> sample_increments(const NoiseSpec& spec, const SpectralBasis& basis,
                                          double dt, std::uint64_t step);

/// 1/2 sigma^2 sum_k lambda_k^2 psi_k^2: the Ito drift coefficient for
/// Stratonovich linear multiplicative noise on the given channel.
Field stratonovich_correction(const NoiseSpec& spec, const SpectralBasis& basis, int channel,
                              double sigma);

/// Brownian path on a fixed time grid for one (path, rung) substream.
///
/// The path is defined at a base resolution dt_base; a path viewed with
/// refinement r has step dt = r * dt_base and increments equal to the sum of
/// the r underlying base increments, so runs at dt and dt/2 share the same
/// Brownian motion.
class NoisePath {
 public:
  NoisePath(const NoiseSpec& spec, const SpectralBasis& basis, double dt_base,
            std::uint64_t path = 0, std::uint64_t rung = 0, std::uint32_t refinement = 1);

  double dt() const { return dt_base_ * refinement_; }
  std::uint64_t key() const { return key_; }
  std::uint32_t refinement() const { return refinement_; }
  /// Increments over [step*dt, (step+1)*dt].
  std::pair<Field, Field> increments(std::uint64_t step) const;
  /// Spectral coefficients of the channel increment (length modes).
  std::vector<double> coefficients(int channel, std::uint64_t step) const;

  const SpectralBasis& basis() const { return *basis_; }

 private:
  const SpectralBasis* basis_;
  std::array<std::vector<double>, 2> lambda_;
  double dt_base_;
  std::uint64_t key_;
  std::uint32_t refinement_;
};

struct ModeStatistic {
  std::size_t mode = 0;
  double variance = 0.0;  // sample variance of <dW, psi_k>
  double se = 0.0;
  double expected = 0.0;  // lambda_k^2 dt
};

struct IncrementStatistics {
  std::array<std::vector<ModeStatistic>, 2> channels;
  double cross_correlation = 0.0;  // between the mode-0 coefficients of the two channels
  double cross_se = 0.0;
  double isometry = 0.0;           // sample mean of |Y(T)|_{L2}^2, Y = sum of increments
  double isometry_se = 0.0;
  double isometry_expected = 0.0;  // T sum_k lambda_k^2
  /// Every statistic within z standard errors of its target.
  bool within(double z) const;
};

/// Monte-Carlo check of the increment law on n_samples increments of step dt,
/// grouped into paths of `steps` increments for the isometry (T = steps dt).
IncrementStatistics increment_statistics(const NoiseSpec& spec, const SpectralBasis& basis, double dt,
                                         std::size_t n_samples, std::size_t checked_modes = 8,
                                         std::size_t steps = 16);

struct BdgReport {
  double p = 2.0;
  std::size_t paths = 0;
  double sup_moment = 0.0;           // E sup_t |Y|_{L2}^p
  double sup_moment_se = 0.0;
  double quadratic_budget = 0.0;     // (int |xi|^2_{L2} dt)^(p/2)
  double ratio = 0.0;                // NaN when degenerate
  double ratio_doubled = 0.0;        // same statistic with 2x paths
  double terminal_second_moment = 0.0;  // E |Y(T)|^2
  double terminal_second_moment_se = 0.0;
  double isometry_target = 0.0;      // int |xi|^2 weighted by lambda^2 psi^2
  bool degenerate = false;
  bool stable() const;               // ratio within +-20% under doubling
};

/// Simulates Y(t) = int_0^t xi dW_1 for a fixed field xi and reports the
/// empirical Burkholder-Davis-Gundy ratio.
BdgReport bdg_selfcheck(const NoiseSpec& spec, const SpectralBasis& basis, const Field& xi,
                        double p, std::size_t n_paths, double T = 1.0, std::size_t steps = 64);

}  // namespace klaus
