#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fisherflow/error.hpp"
#include "fisherflow/fft.hpp"

namespace fisherflow {

struct AxisSpec {
  double extent = 0.0;
  std::size_t points = 0;
};

struct GridSpec {
  std::vector<AxisSpec> axes;
};

/// Configuration-space bookkeeping: N particles in d dimensions, flattened to
/// N*d axes. The metric is diagonal with entry 1/m_(a) on axis a, where axis a
/// belongs to particle floor(a/d).
struct Metric {
  std::size_t particles = 1;
  std::size_t dimensions = 1;
  std::vector<double> masses;

  std::size_t axis_count() const { return particles * dimensions; }
  double mass_of_axis(std::size_t axis) const { return masses.at(axis / dimensions); }
  double inv_mass(std::size_t axis) const { return 1.0 / mass_of_axis(axis); }

  void validate() const {
    require(particles >= 1 && dimensions >= 1, errc::validation,
            "Metric: particles and dimensions must be positive");
    require(masses.size() == particles, errc::validation,
            "Metric: need one mass per particle, got " + std::to_string(masses.size()) +
                " for " + std::to_string(particles) + " particles");
    for (double m : masses)
      require(m > 0.0, errc::validation, "Metric: masses must be positive");
  }

  bool operator==(const Metric&) const = default;
};

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Uniform periodic lattice over flattened configuration space. Coordinates on
/// axis a run from -extent/2 to extent/2 - h; the origin sits on a lattice
/// site. Owns the cached FFT plans and spectral wavenumbers for every axis.
class Grid {
public:
  Grid(GridSpec spec, Metric metric) : spec_(std::move(spec)), metric_(std::move(metric)) {
    metric_.validate();
    require(!spec_.axes.empty(), errc::validation, "Grid: no axes");
    require(spec_.axes.size() == metric_.axis_count(), errc::validation,
            "Grid: axis count " + std::to_string(spec_.axes.size()) +
                " does not match metric N*d = " + std::to_string(metric_.axis_count()));
    const std::size_t d = spec_.axes.size();
    n_.resize(d);
    h_.resize(d);
    cell_volume_ = 1.0;
    total_ = 1;
    for (std::size_t a = 0; a < d; ++a) {
      const auto& ax = spec_.axes[a];
      require(ax.points >= 8 && ax.points % 2 == 0, errc::validation,
              "Grid: axis " + std::to_string(a) + " needs an even point count >= 8");
      require(ax.extent > 0.0 && std::isfinite(ax.extent), errc::validation,
              "Grid: axis " + std::to_string(a) + " needs a positive extent");
      n_[a] = ax.points;
      h_[a] = ax.extent / static_cast<double>(ax.points);
      cell_volume_ *= h_[a];
      total_ *= ax.points;
    }
    stride_.assign(d, 1);
    std::size_t s = 1;
    for (std::size_t a = d; a-- > 0;) {
      stride_[a] = s;
      s *= n_[a];
    }
    wavenumber_.resize(d);
    coord_.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t n = n_[a];
      wavenumber_[a].resize(n);
      coord_[a].resize(n);
      const double dk = 2.0 * std::numbers::pi / spec_.axes[a].extent;
      for (std::size_t j = 0; j < n; ++j) {
        const auto half = static_cast<std::ptrdiff_t>(n / 2);
        const auto sj = static_cast<std::ptrdiff_t>(j);
        // FFT ordering: 0, 1, ..., n/2-1, -n/2, ..., -1.
        wavenumber_[a][j] = dk * static_cast<double>(sj < half ? sj : sj - static_cast<std::ptrdiff_t>(n));
        coord_[a][j] = -0.5 * spec_.axes[a].extent + h_[a] * static_cast<double>(j);
      }
    }
    plans_ = std::make_unique<FftPlans>(n_);
  }

  const GridSpec& spec() const { return spec_; }
  const Metric& metric() const { return metric_; }
  std::size_t ndim() const { return n_.size(); }
  std::size_t size() const { return total_; }
  std::size_t points(std::size_t axis) const { return n_.at(axis); }
  double extent(std::size_t axis) const { return spec_.axes.at(axis).extent; }
  double spacing(std::size_t axis) const { return h_.at(axis); }
  double cell_volume() const { return cell_volume_; }
  std::size_t stride(std::size_t axis) const { return stride_.at(axis); }
  const std::vector<double>& wavenumbers(std::size_t axis) const { return wavenumber_.at(axis); }
  const std::vector<double>& coords(std::size_t axis) const { return coord_.at(axis); }
  const FftPlans& fft() const { return *plans_; }

  std::size_t axis_index(std::size_t site, std::size_t axis) const {
    return (site / stride_[axis]) % n_[axis];
  }
  double coord_of_site(std::size_t site, std::size_t axis) const {
    return coord_[axis][axis_index(site, axis)];
  }

  bool same_shape(const Grid& other) const {
    if (n_ != other.n_ || metric_ != other.metric_) return false;
    for (std::size_t a = 0; a < ndim(); ++a)
      if (extent(a) != other.extent(a)) return false;
    return true;
  }

  /// FNV-1a hash of the exact axis/metric layout; used to pair checkpoints
  /// with the grid they were written from.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t len) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
      }
    };
    for (std::size_t a = 0; a < ndim(); ++a) {
      const double e = extent(a);
      const std::uint64_t n = n_[a];
      mix(&e, sizeof e);
      mix(&n, sizeof n);
    }
    const std::uint64_t np = metric_.particles, nd = metric_.dimensions;
    mix(&np, sizeof np);
    mix(&nd, sizeof nd);
    for (double m : metric_.masses) mix(&m, sizeof m);
    return h;
  }

private:
  GridSpec spec_;
  Metric metric_;
  std::vector<std::size_t> n_;
  std::vector<double> h_;
  std::vector<std::size_t> stride_;
  std::vector<std::vector<double>> wavenumber_;
  std::vector<std::vector<double>> coord_;
  double cell_volume_ = 0.0;
  std::size_t total_ = 0;
  std::unique_ptr<FftPlans> plans_;
};

inline GridPtr make_grid(GridSpec spec, Metric metric) {
  return std::make_shared<Grid>(std::move(spec), std::move(metric));
}

/// Sampled scalar field over a Grid. Values are stored row-major, axis 0
/// slowest. Fields are value types; operations below are pure functions.
template <class T>
class Field {
public:
  Field() = default;
  explicit Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), T{}) {}
  Field(GridPtr grid, std::vector<T> values) : grid_(std::move(grid)), values_(std::move(values)) {
    require(values_.size() == grid_->size(), errc::validation,
            "Field: value count does not match grid size");
  }

  const GridPtr& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }
  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

private:
  GridPtr grid_;
  std::vector<T> values_;
};

using RealField = Field<double>;
using ComplexField = Field<std::complex<double>>;

namespace detail {

// Neumaier compensated summation; keeps integrals deterministic and accurate.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0, comp_ = 0.0;
};

} // namespace detail

/// Riemann sum times cell volume; on a uniform periodic lattice this is the
/// trapezoid rule and is spectrally accurate for smooth periodic fields.
inline double integrate(const RealField& f) {
  detail::CompensatedSum s;
  for (double v : f) s.add(v);
  return s.value() * f.grid()->cell_volume();
}

inline std::complex<double> integrate(const ComplexField& f) {
  detail::CompensatedSum re, im;
  for (const auto& v : f) {
    re.add(v.real());
    im.add(v.imag());
  }
  return {re.value() * f.grid()->cell_volume(), im.value() * f.grid()->cell_volume()};
}

enum class DiffMethod { spectral, central4 };

namespace detail {

inline void to_complex(const RealField& f, std::vector<std::complex<double>>& out) {
  out.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i];
}

// Multiply an axis spectrum by (i k)^order, with the usual real-output
// convention at the Nyquist frequency: odd orders zero it, even orders keep
// the real factor (-k_N^2)^(order/2).
inline void apply_ik_power(const Grid& g, std::size_t axis, int order,
                           std::vector<std::complex<double>>& spec) {
  const auto& ks = g.wavenumbers(axis);
  const std::size_t n = g.points(axis);
  std::vector<std::complex<double>> factor(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == n / 2 && order % 2 != 0) {
      factor[j] = 0.0;
    } else {
      factor[j] = std::pow(std::complex<double>(0.0, ks[j]), order);
    }
  }
  const std::size_t total = g.size();
  for (std::size_t i = 0; i < total; ++i) spec[i] *= factor[g.axis_index(i, axis)];
}

// 4th-order central difference stencils, periodic indexing.
template <class T>
void central4_axis(const Grid& g, std::size_t axis, int order, std::vector<T>& v) {
  const std::size_t n = g.points(axis);
  const std::size_t stride = g.stride(axis);
  const std::size_t total = g.size();
  const double h = g.spacing(axis);
  std::vector<T> out(total);
  auto site_at = [&](std::size_t i, std::ptrdiff_t shift) {
    const auto j = static_cast<std::ptrdiff_t>(g.axis_index(i, axis));
    const auto nn = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t wrapped = ((j + shift) % nn + nn) % nn;
    return i + stride * static_cast<std::size_t>(wrapped) - stride * static_cast<std::size_t>(j);
  };
  if (order == 1) {
    const double c1 = 8.0 / (12.0 * h), c2 = 1.0 / (12.0 * h);
    for (std::size_t i = 0; i < total; ++i)
      out[i] = c1 * (v[site_at(i, 1)] - v[site_at(i, -1)]) -
               c2 * (v[site_at(i, 2)] - v[site_at(i, -2)]);
  } else {
    const double c0 = -30.0 / (12.0 * h * h), c1 = 16.0 / (12.0 * h * h),
                 c2 = -1.0 / (12.0 * h * h);
    for (std::size_t i = 0; i < total; ++i)
      out[i] = c0 * v[i] + c1 * (v[site_at(i, 1)] + v[site_at(i, -1)]) +
               c2 * (v[site_at(i, 2)] + v[site_at(i, -2)]);
  }
  v = std::move(out);
}

} // namespace detail

/// Sampled partial derivative along a multi-index of axes (repeats raise the
/// order, e.g. {0,0} is the second x-derivative). Total order at most 4.
/// The spectral method is exact for band-limited fields; central4 is an
/// independent 4th-order finite-difference route kept as a cross-check.
template <class T>
Field<T> derivative(const Field<T>& f, std::span<const std::size_t> axes,
                    DiffMethod method = DiffMethod::spectral) {
  const Grid& g = *f.grid();
  require(axes.size() >= 1 && axes.size() <= 4, errc::validation,
          "derivative: multi-index order must be between 1 and 4");
  std::vector<int> order(g.ndim(), 0);
  for (std::size_t a : axes) {
    require(a < g.ndim(), errc::validation,
            "derivative: axis index " + std::to_string(a) + " out of range");
    ++order[a];
  }
  if (method == DiffMethod::spectral) {
    std::vector<std::complex<double>> buf, spec(g.size());
    if constexpr (std::is_same_v<T, double>)
      detail::to_complex(f, buf);
    else
      buf = f.values();
    for (std::size_t a = 0; a < g.ndim(); ++a) {
      if (order[a] == 0) continue;
      g.fft().forward_axis(a, buf.data(), spec.data());
      detail::apply_ik_power(g, a, order[a], spec);
      g.fft().backward_axis(a, spec.data(), buf.data());
    }
    Field<T> out(f.grid());
    if constexpr (std::is_same_v<T, double>) {
      for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
    } else {
      out.values() = std::move(buf);
    }
    return out;
  }
  // central4: compose one second-order stencil per pair plus one first-order
  // stencil for an odd remainder, per axis.
  Field<T> out = f;
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    int o = order[a];
    while (o >= 2) {
      detail::central4_axis(g, a, 2, out.values());
      o -= 2;
    }
    if (o == 1) detail::central4_axis(g, a, 1, out.values());
  }
  return out;
}

template <class T>
Field<T> derivative(const Field<T>& f, std::initializer_list<std::size_t> axes,
                    DiffMethod method = DiffMethod::spectral) {
  return derivative(f, std::span<const std::size_t>(axes.begin(), axes.size()), method);
}

/// First and second derivative along one axis sharing a single forward
/// transform; the workhorse for log-density derivative assembly.
inline std::pair<RealField, RealField> derivative12(const RealField& f, std::size_t axis) {
  const Grid& g = *f.grid();
  require(axis < g.ndim(), errc::validation, "derivative12: axis out of range");
  std::vector<std::complex<double>> buf, spec(g.size()), work(g.size());
  detail::to_complex(f, buf);
  g.fft().forward_axis(axis, buf.data(), spec.data());
  RealField d1(f.grid()), d2(f.grid());
  work = spec;
  detail::apply_ik_power(g, axis, 1, work);
  g.fft().backward_axis(axis, work.data(), buf.data());
  for (std::size_t i = 0; i < buf.size(); ++i) d1[i] = buf[i].real();
  work = spec;
  detail::apply_ik_power(g, axis, 2, work);
  g.fft().backward_axis(axis, work.data(), buf.data());
  for (std::size_t i = 0; i < buf.size(); ++i) d2[i] = buf[i].real();
  return {std::move(d1), std::move(d2)};
}

/// Translate a field by a constant offset per axis via spectral phase shifts;
/// exact for band-limited periodic fields. The Nyquist bin takes the
/// real-preserving cos(k_N delta) factor.
template <class T>
Field<T> spectral_shift(const Field<T>& f, std::span<const double> delta) {
  const Grid& g = *f.grid();
  require(delta.size() == g.ndim(), errc::validation, "spectral_shift: need one offset per axis");
  std::vector<std::complex<double>> buf, spec(g.size());
  if constexpr (std::is_same_v<T, double>)
    detail::to_complex(f, buf);
  else
    buf = f.values();
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    if (delta[a] == 0.0) continue;
    g.fft().forward_axis(a, buf.data(), spec.data());
    const auto& ks = g.wavenumbers(a);
    const std::size_t n = g.points(a);
    std::vector<std::complex<double>> phase(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == n / 2)
        phase[j] = std::cos(ks[j] * delta[a]);
      else
        phase[j] = std::exp(std::complex<double>(0.0, -ks[j] * delta[a]));
    }
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= phase[g.axis_index(i, a)];
    g.fft().backward_axis(a, spec.data(), buf.data());
  }
  Field<T> out(f.grid());
  if constexpr (std::is_same_v<T, double>) {
    for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
  } else {
    out.values() = std::move(buf);
  }
  return out;
}

namespace detail {

// Shear along `axis` with per-line offset alpha * (coordinate along `other`):
// f'(x) = f(x - alpha*y, y) for axis=0, other=1. Spectral per-line shifts.
template <class T>
void shear(const Grid& g, std::size_t axis, std::size_t other, double alpha,
           std::vector<std::complex<double>>& buf) {
  if (alpha == 0.0) return;
  std::vector<std::complex<double>> spec(g.size());
  g.fft().forward_axis(axis, buf.data(), spec.data());
  const auto& ks = g.wavenumbers(axis);
  const auto& ys = g.coords(other);
  const std::size_t n = g.points(axis);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const std::size_t j = g.axis_index(i, axis);
    const double shift = alpha * ys[g.axis_index(i, other)];
    if (j == n / 2)
      spec[i] *= std::cos(ks[j] * shift);
    else
      spec[i] *= std::exp(std::complex<double>(0.0, -ks[j] * shift));
  }
  g.fft().backward_axis(axis, spec.data(), buf.data());
}

// Exact quarter-turn: f'(ix, iy) = f(iy, (n - ix) mod n), a pure permutation.
template <class T>
void quarter_turn(const Grid& g, std::vector<T>& v) {
  const std::size_t n = g.points(0);
  std::vector<T> out(v.size());
  for (std::size_t ix = 0; ix < n; ++ix)
    for (std::size_t iy = 0; iy < n; ++iy)
      out[ix * n + iy] = v[iy * n + ((n - ix) % n)];
  v = std::move(out);
}

template <class T>
Field<T> rotate_impl(const Field<T>& f, double angle) {
  const Grid& g = *f.grid();
  require(g.ndim() == 2, errc::validation, "rotate_field: grid must have exactly 2 axes");
  require(g.points(0) == g.points(1) && g.extent(0) == g.extent(1), errc::validation,
          "rotate_field: grid must be square");
  // Reduce to |angle| <= pi/4 with exact quarter turns, then apply the
  // three-shear decomposition R(t) = Sx(-tan(t/2)) Sy(sin t) Sx(-tan(t/2)).
  const double quarter = std::numbers::pi / 2.0;
  long q = std::lround(angle / quarter);
  double rest = angle - static_cast<double>(q) * quarter;
  q = ((q % 4) + 4) % 4;

  std::vector<std::complex<double>> buf;
  if constexpr (std::is_same_v<T, double>)
    to_complex(f, buf);
  else
    buf = f.values();
  for (long i = 0; i < q; ++i) quarter_turn(g, buf);
  if (rest != 0.0) {
    const double a = -std::tan(rest / 2.0);
    const double b = std::sin(rest);
    // Rotating the field samples means composing with the inverse rotation,
    // i.e. applying the inverse shears in reverse order.
    shear<T>(g, 0, 1, a, buf);
    shear<T>(g, 1, 0, b, buf);
    shear<T>(g, 0, 1, a, buf);
  }
  Field<T> out(f.grid());
  if constexpr (std::is_same_v<T, double>) {
    for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i].real();
  } else {
    out.values() = std::move(buf);
  }
  return out;
}

} // namespace detail

/// Rotate a 2D field about the lattice origin by `angle` radians
/// (counterclockwise). Multiples of pi/2 are exact index permutations; other
/// angles use spectrally interpolated shears.
inline RealField rotate_field(const RealField& f, double angle) {
  return detail::rotate_impl(f, angle);
}
inline ComplexField rotate_field(const ComplexField& f, double angle) {
  return detail::rotate_impl(f, angle);
}

} // namespace fisherflow
