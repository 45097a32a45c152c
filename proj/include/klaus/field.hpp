#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace klaus {

enum class Boundary { periodic, neumann };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& name);

/// Uniform grid on [0,1]^d with n points per axis.
///
/// Periodic grids use the nodes x_i = i/n, Neumann grids the cell centres
/// x_i = (i + 1/2)/n. Storage is row-major with axis 0 slowest.
struct Grid {
  int dim = 1;
  int n = 64;
  Boundary boundary = Boundary::periodic;

  std::size_t size() const;
  double spacing() const { return 1.0 / n; }
  double cell_volume() const;
  double coordinate(int i) const;
  /// Per-axis indices of a flat index.
  void unflatten(std::size_t flat, std::span<int> idx) const;

  bool operator==(const Grid&) const = default;
};

/// Real-valued grid function; the discrete carrier of u, v and the noise.
class Field {
 public:
  Field() = default;
  explicit Field(const Grid& grid, double fill = 0.0);
  Field(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double min() const;
  double max() const;
  /// Rectangle-rule integral h^d * sum.
  double integral() const;
  bool all_finite() const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);
  /// Pointwise product.
  Field& operator*=(const Field& other);

  bool operator==(const Field&) const = default;

 private:
  Grid grid_;
  std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(Field a, double s);
Field operator*(double s, Field a);

/// Throws std::invalid_argument when the grids differ.
void require_same_grid(const Field& a, const Field& b, const char* what);

/// Signed power |z|^(gamma-1) z.
double power_gamma(double z, double gamma);
Field power_gamma(const Field& f, double gamma);

/// (h^d sum |z_i|^p)^(1/p), p >= 1.
double lp_norm(const Field& f, double p);
/// h^d sum |z_i|^p, i.e. lp_norm^p without the root.
double lp_norm_pow(const Field& f, double p);
/// Discrete L2 inner product h^d sum f_i g_i.
double inner(const Field& f, const Field& g);

/// (x^[g] - y^[g])(x - y) - 2^(1-g)|x - y|^(g+1); never below rounding level.
double pm_inequality_gap(double x, double y, double gamma);

/// Second-difference Laplacian honouring the grid boundary (periodic wrap or
/// cell-centred reflection). Conservative: its column sums vanish.
Field stencil_laplacian(const Field& f);

/// |grad f|^2 by centred differences; one-sided at Neumann walls.
Field gradient_squared(const Field& f);

class SpectralBasis;

/// (sum_k (1 + nu_k)^s |c_k|^2)^(1/2) over the retained modes, s in [-2, 2].
double sobolev_norm(const SpectralBasis& basis, const Field& f, double s);

/// L2 norm of the part of f not captured by the retained modes.
double projection_residual(const SpectralBasis& basis, const Field& f);

}  // namespace klaus
