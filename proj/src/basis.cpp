#include "klaus/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace klaus {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Signed 1d index stored at slot j of the 1d coefficient table.
int signed_index(Boundary b, int n, int slot) {
  if (b == Boundary::neumann || slot == 0) return slot;
  if (slot == n - 1) return -n / 2;
  const int k = (slot + 1) / 2;
  return slot % 2 == 1 ? -k : k;
}

// Eigenvalue of the 1d mode in units of pi^2 (exact integer).
long long eigen_units(Boundary b, int s) {
  const long long k = s < 0 ? -s : s;
  return b == Boundary::periodic ? 4 * k * k : k * k;
}

// Arguments are reduced exactly in integers before calling sin/cos.
double mode_value(Boundary b, int n, int s, int i) {
  if (s == 0) return 1.0;
  if (b == Boundary::neumann) {
    // cos(pi s (2i+1) / 2n), period 4n in the integer numerator
    const long long num = (static_cast<long long>(s) * (2 * i + 1)) % (4LL * n);
    return std::numbers::sqrt2 * std::cos(kPi * static_cast<double>(num) / (2.0 * n));
  }
  if (s == -n / 2) return i % 2 == 0 ? 1.0 : -1.0;
  const long long k = s < 0 ? -s : s;
  const double arg = 2.0 * kPi * static_cast<double>((k * i) % n) / n;
  return std::numbers::sqrt2 * (s > 0 ? std::sin(arg) : std::cos(arg));
}

}  // namespace

std::size_t SpectralBasis::resolvable_modes(int dim, int n) {
  std::size_t s = 1;
  for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

SpectralBasis SpectralBasis::full(const Grid& grid) {
  return build(grid.dim, grid.boundary, grid.n, resolvable_modes(grid.dim, grid.n));
}

SpectralBasis SpectralBasis::build(int dim, Boundary boundary, int n, std::size_t modes) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("unsupported dimension " + std::to_string(dim));
  if (n < 8) throw std::invalid_argument("grid needs at least 8 points per axis");
  if (!is_power_of_two(n)) throw std::invalid_argument("grid points per axis must be a power of two");
  const std::size_t total = resolvable_modes(dim, n);
  if (modes == 0 || modes > total)
    throw std::invalid_argument("mode count " + std::to_string(modes) + " exceeds the " +
                                std::to_string(total) + " resolvable modes");

  SpectralBasis basis;
  basis.grid_ = Grid{dim, n, boundary};
  const Grid& g = basis.grid_;

  basis.forward_.assign(static_cast<std::size_t>(n) * n, 0.0);
  basis.inverse_.assign(static_cast<std::size_t>(n) * n, 0.0);
  const double h = g.spacing();
  for (int slot = 0; slot < n; ++slot) {
    const int s = signed_index(boundary, n, slot);
    for (int i = 0; i < n; ++i) {
      const double e = mode_value(boundary, n, s, i);
      basis.forward_[static_cast<std::size_t>(slot) * n + i] = h * e;
      basis.inverse_[static_cast<std::size_t>(i) * n + slot] = e;
    }
  }

  struct Candidate {
    long long units;
    std::vector<int> index;
    std::size_t slot;
  };
  std::vector<Candidate> all;
  all.reserve(total);
  std::vector<int> slot_idx(dim);
  for (std::size_t flat = 0; flat < total; ++flat) {
    g.unflatten(flat, slot_idx);
    Candidate c{0, std::vector<int>(dim), flat};
    for (int a = 0; a < dim; ++a) {
      c.index[a] = signed_index(boundary, n, slot_idx[a]);
      c.units += eigen_units(boundary, c.index[a]);
    }
    all.push_back(std::move(c));
  }
  std::sort(all.begin(), all.end(), [](const Candidate& l, const Candidate& r) {
    if (l.units != r.units) return l.units < r.units;
    return l.index < r.index;
  });

  basis.eigenvalues_.reserve(modes);
  basis.indices_.reserve(modes * dim);
  basis.slots_.reserve(modes);
  for (std::size_t k = 0; k < modes; ++k) {
    basis.eigenvalues_.push_back(kPi * kPi * static_cast<double>(all[k].units));
    basis.indices_.insert(basis.indices_.end(), all[k].index.begin(), all[k].index.end());
    basis.slots_.push_back(all[k].slot);
  }
  return basis;
}

std::span<const int> SpectralBasis::multi_index(std::size_t k) const {
  return {indices_.data() + k * grid_.dim, static_cast<std::size_t>(grid_.dim)};
}

void SpectralBasis::transform(std::vector<double>& tensor, const std::vector<double>& matrix) const {
  const int n = grid_.n;
  const std::size_t total = tensor.size();
  std::vector<double> line(n), out(n);
  for (int axis = 0; axis < grid_.dim; ++axis) {
    std::size_t stride = 1;
    for (int a = axis + 1; a < grid_.dim; ++a) stride *= n;
    const std::size_t block = stride * n;
    for (std::size_t base = 0; base < total; base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        for (int i = 0; i < n; ++i) line[i] = tensor[base + off + i * stride];
        for (int r = 0; r < n; ++r) {
          const double* row = matrix.data() + static_cast<std::size_t>(r) * n;
          double acc = 0.0;
          for (int c = 0; c < n; ++c) acc += row[c] * line[c];
          out[r] = acc;
        }
        for (int i = 0; i < n; ++i) tensor[base + off + i * stride] = out[i];
      }
    }
  }
}

Field SpectralBasis::mode(std::size_t k) const {
  if (k >= size()) throw std::out_of_range("mode index out of range");
  std::vector<double> c(k + 1, 0.0);
  c[k] = 1.0;
  return synthesize(c);
}

std::vector<double> SpectralBasis::analyze(const Field& f) const {
  if (!(f.grid() == grid_)) throw std::invalid_argument("analyze: field does not match basis grid");
  std::vector<double> tensor(f.values().begin(), f.values().end());
  transform(tensor, forward_);
  std::vector<double> c(size());
  for (std::size_t k = 0; k < size(); ++k) c[k] = tensor[slots_[k]];
  return c;
}

Field SpectralBasis::synthesize(std::span<const double> coefficients) const {
  if (coefficients.size() > size())
    throw std::invalid_argument("synthesize: " + std::to_string(coefficients.size()) +
                                " coefficients for a basis of " + std::to_string(size()) + " modes");
  std::vector<double> tensor(grid_.size(), 0.0);
  for (std::size_t k = 0; k < coefficients.size(); ++k) tensor[slots_[k]] = coefficients[k];
  transform(tensor, inverse_);
  return Field(grid_, std::move(tensor));
}

Field SpectralBasis::apply_multiplier(const Field& f, std::span<const double> multiplier) const {
  if (multiplier.size() != size()) throw std::invalid_argument("apply_multiplier: length mismatch");
  auto c = analyze(f);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] *= multiplier[k];
  return synthesize(c);
}

Field SpectralBasis::apply_laplacian(const Field& f) const {
  std::vector<double> m(size());
  for (std::size_t k = 0; k < size(); ++k) m[k] = -eigenvalues_[k];
  return apply_multiplier(f, m);
}

std::size_t SpectralBasis::weyl_count(double lambda) const {
  const double bound = lambda + 1e-12 * std::abs(lambda);
  return static_cast<std::size_t>(
      std::upper_bound(eigenvalues_.begin(), eigenvalues_.end(), bound) - eigenvalues_.begin());
}

double SpectralBasis::fitted_weyl_constant() const {
  double best = 0.0;
  for (std::size_t k = 1; k < size(); ++k) {
    if (k + 1 < size() && eigenvalues_[k + 1] == eigenvalues_[k]) continue;
    const double lambda = eigenvalues_[k];
    best = std::max(best, static_cast<double>(k + 1) / std::pow(lambda, grid_.dim / 2.0));
  }
  return best;
}

double SpectralBasis::fitted_sup_norm_constant() const {
  const int n = grid_.n;
  std::vector<double> sup1d(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int slot = 0; slot < n; ++slot)
      sup1d[slot] = std::max(sup1d[slot], std::abs(inverse_[static_cast<std::size_t>(i) * n + slot]));
  std::vector<int> idx(grid_.dim);
  double best = 0.0;
  for (std::size_t k = 1; k < size(); ++k) {
    grid_.unflatten(slots_[k], idx);
    double sup = 1.0;
    for (int a = 0; a < grid_.dim; ++a) sup *= sup1d[idx[a]];
    best = std::max(best, sup / std::pow(eigenvalues_[k], (grid_.dim - 1) / 2.0));
  }
  return best;
}

}  // namespace klaus
