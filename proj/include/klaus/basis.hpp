#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "klaus/field.hpp"

namespace klaus {

/// Eigenpairs of -Laplace on [0,1]^d sampled on a uniform grid.
///
/// Periodic axes use the trigonometric system 1, sqrt2 cos(2 pi k x) (signed
/// index -k), sqrt2 sin(2 pi k x) (index +k) plus the grid Nyquist mode
/// (-1)^i (index -n/2). Neumann axes use 1, sqrt2 cos(pi k x) on cell
/// centres. Multi-dimensional modes are tensor products, ordered by
/// eigenvalue with ties broken lexicographically on the signed multi-index.
///
/// Immutable after construction.
class SpectralBasis {
 public:
  static SpectralBasis build(int dim, Boundary boundary, int n, std::size_t modes);
  /// Basis that retains every grid-resolvable mode (n^d of them).
  static SpectralBasis full(const Grid& grid);
  static std::size_t resolvable_modes(int dim, int n);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return eigenvalues_.size(); }
  bool is_full() const { return size() == grid_.size(); }

  std::span<const double> eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t k) const { return eigenvalues_[k]; }
  /// Signed multi-index of mode k (dim entries).
  std::span<const int> multi_index(std::size_t k) const;

  /// Grid samples of psi_k.
  Field mode(std::size_t k) const;

  /// c_k = <f, psi_k>_grid for every retained k.
  std::vector<double> analyze(const Field& f) const;
  /// sum_k c_k psi_k; accepts at most size() coefficients.
  Field synthesize(std::span<const double> coefficients) const;
  /// Multiplies mode k by -nu_k (projects onto the retained span).
  Field apply_laplacian(const Field& f) const;
  /// Multiplies mode k by multiplier[k]; out-of-span components are dropped.
  Field apply_multiplier(const Field& f, std::span<const double> multiplier) const;

  /// #{k : nu_k <= lambda}.
  std::size_t weyl_count(double lambda) const;
  /// max over distinct eigenvalues lambda >= nu_1 of weyl_count/lambda^(d/2).
  double fitted_weyl_constant() const;
  /// max over k >= 1 of sup|psi_k| / nu_k^((d-1)/2).
  double fitted_sup_norm_constant() const;

 private:
  SpectralBasis() = default;

  void transform(std::vector<double>& tensor, const std::vector<double>& matrix) const;

  Grid grid_;
  std::vector<double> eigenvalues_;
  std::vector<int> indices_;         // size() x dim signed multi-indices
  std::vector<std::size_t> slots_;   // flat position in the n^d coefficient tensor
  std::vector<double> forward_;      // n x n, row = 1d mode, col = node, weight h
  std::vector<double> inverse_;      // n x n, row = node, col = 1d mode
};

}  // namespace klaus
