#include "klaus/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "klaus/basis.hpp"

namespace klaus {

std::string to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "neumann";
}

Boundary boundary_from_string(const std::string& name) {
  if (name == "periodic") return Boundary::periodic;
  if (name == "neumann") return Boundary::neumann;
  throw std::invalid_argument("unknown boundary '" + name + "' (expected periodic or neumann)");
}

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

double Grid::cell_volume() const { return std::pow(spacing(), dim); }

double Grid::coordinate(int i) const {
  const double h = spacing();
  return boundary == Boundary::periodic ? i * h : (i + 0.5) * h;
}

void Grid::unflatten(std::size_t flat, std::span<int> idx) const {
  for (int a = dim - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % n);
    flat /= n;
  }
}

Field::Field(const Grid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

Field::Field(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw std::invalid_argument("field length " + std::to_string(values_.size()) +
                                " does not match grid size " + std::to_string(grid_.size()));
}

double Field::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Field::max() const { return *std::max_element(values_.begin(), values_.end()); }

double Field::integral() const {
  return grid_.cell_volume() * std::accumulate(values_.begin(), values_.end(), 0.0);
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

void require_same_grid(const Field& a, const Field& b, const char* what) {
  if (!(a.grid() == b.grid()) || a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": field shapes differ");
}

Field& Field::operator+=(const Field& other) {
  require_same_grid(*this, other, "operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_grid(*this, other, "operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& x : values_) x *= s;
  return *this;
}

Field& Field::operator*=(const Field& other) {
  require_same_grid(*this, other, "operator*=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= other.values_[i];
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(Field a, double s) { return a *= s; }
Field operator*(double s, Field a) { return a *= s; }

double power_gamma(double z, double gamma) {
  if (!(gamma > 1.0)) throw std::invalid_argument("power_gamma requires gamma > 1");
  if (z == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(z), gamma), z);
}

Field power_gamma(const Field& f, double gamma) {
  if (!(gamma > 1.0)) throw std::invalid_argument("power_gamma requires gamma > 1");
  Field out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double z = f[i];
    out[i] = z == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(z), gamma), z);
  }
  return out;
}

double lp_norm_pow(const Field& f, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm requires p >= 1");
  double s = 0.0;
  if (p == 2.0) {
    for (double z : f.values()) s += z * z;
  } else {
    for (double z : f.values()) s += std::pow(std::abs(z), p);
  }
  return f.grid().cell_volume() * s;
}

double lp_norm(const Field& f, double p) {
  const double s = lp_norm_pow(f, p);
  return p == 2.0 ? std::sqrt(s) : std::pow(s, 1.0 / p);
}

double inner(const Field& f, const Field& g) {
  require_same_grid(f, g, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return f.grid().cell_volume() * s;
}

double pm_inequality_gap(double x, double y, double gamma) {
  if (!(gamma > 1.0)) throw std::invalid_argument("pm_inequality_gap requires gamma > 1");
  const double lhs = (power_gamma(x, gamma) - power_gamma(y, gamma)) * (x - y);
  const double rhs = std::pow(2.0, 1.0 - gamma) * std::pow(std::abs(x - y), gamma + 1.0);
  return lhs - rhs;
}

namespace {

// Visits every (point, neighbour-minus, neighbour-plus) triple along axis a.
template <typename Fn>
void for_each_line(const Grid& g, int axis, Fn&& fn) {
  std::size_t stride = 1;
  for (int a = axis + 1; a < g.dim; ++a) stride *= g.n;
  const std::size_t total = g.size();
  const std::size_t block = stride * g.n;
  for (std::size_t base = 0; base < total; base += block) {
    for (std::size_t off = 0; off < stride; ++off) fn(base + off, stride);
  }
}

}  // namespace

Field stencil_laplacian(const Field& f) {
  const Grid& g = f.grid();
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  const int n = g.n;
  Field out(g);
  for (int axis = 0; axis < g.dim; ++axis) {
    for_each_line(g, axis, [&](std::size_t start, std::size_t stride) {
      for (int i = 0; i < n; ++i) {
        const std::size_t c = start + i * stride;
        double left, right;
        if (g.boundary == Boundary::periodic) {
          left = f[start + ((i + n - 1) % n) * stride];
          right = f[start + ((i + 1) % n) * stride];
        } else {
          left = i > 0 ? f[c - stride] : f[c];
          right = i < n - 1 ? f[c + stride] : f[c];
        }
        out[c] += (left - 2.0 * f[c] + right) * inv_h2;
      }
    });
  }
  return out;
}

Field gradient_squared(const Field& f) {
  const Grid& g = f.grid();
  const double h = g.spacing();
  const int n = g.n;
  Field out(g);
  for (int axis = 0; axis < g.dim; ++axis) {
    for_each_line(g, axis, [&](std::size_t start, std::size_t stride) {
      for (int i = 0; i < n; ++i) {
        const std::size_t c = start + i * stride;
        double d;
        if (g.boundary == Boundary::periodic) {
          d = (f[start + ((i + 1) % n) * stride] - f[start + ((i + n - 1) % n) * stride]) / (2 * h);
        } else if (i == 0) {
          d = (f[c + stride] - f[c]) / h;
        } else if (i == n - 1) {
          d = (f[c] - f[c - stride]) / h;
        } else {
          d = (f[c + stride] - f[c - stride]) / (2 * h);
        }
        out[c] += d * d;
      }
    });
  }
  return out;
}

double sobolev_norm(const SpectralBasis& basis, const Field& f, double s) {
  if (std::abs(s) > 2.0)
    throw std::invalid_argument("sobolev_norm: order outside validated range [-2, 2]");
  if (!(f.grid() == basis.grid())) throw std::invalid_argument("sobolev_norm: grid mismatch");
  const auto c = basis.analyze(f);
  double acc = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k)
    acc += std::pow(1.0 + basis.eigenvalue(k), s) * c[k] * c[k];
  return std::sqrt(acc);
}

double projection_residual(const SpectralBasis& basis, const Field& f) {
  const Field back = basis.synthesize(basis.analyze(f));
  return lp_norm(f - back, 2.0);
}

}  // namespace klaus
