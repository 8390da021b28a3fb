#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fisherflow/grid.hpp"

namespace fisherflow {

/// Densities are rejected when min(p) falls below this fraction of max(p):
/// information measures divide by p, and values this small are node territory.
inline constexpr double density_floor_ratio = 1e-12;

inline void check_density_floor(const RealField& p, const std::string& who) {
  double pmax = 0.0;
  for (double v : p) pmax = std::max(pmax, v);
  require(pmax > 0.0 && std::isfinite(pmax), errc::node_breach, who + ": density is not positive");
  const double floor = density_floor_ratio * pmax;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= floor))
      fail(errc::node_breach, who + ": density below floor at site " + std::to_string(i) +
                                  " (value " + std::to_string(p[i]) + ", floor ~" +
                                  std::to_string(floor) + ")");
  }
}

/// Small dense symmetric matrix over configuration-space axes.
struct SymMatrix {
  std::size_t dim = 0;
  std::vector<double> v; // row-major, dim*dim

  static SymMatrix diagonal(std::vector<double> d) {
    SymMatrix m;
    m.dim = d.size();
    m.v.assign(m.dim * m.dim, 0.0);
    for (std::size_t i = 0; i < m.dim; ++i) m.v[i * m.dim + i] = d[i];
    return m;
  }
  static SymMatrix from_metric(const Metric& g) {
    std::vector<double> d(g.axis_count());
    for (std::size_t a = 0; a < d.size(); ++a) d[a] = g.inv_mass(a);
    return diagonal(std::move(d));
  }
  double operator()(std::size_t i, std::size_t j) const { return v[i * dim + j]; }
  double& at(std::size_t i, std::size_t j) { return v[i * dim + j]; }

  void validate() const {
    require(dim >= 1 && v.size() == dim * dim, errc::validation, "SymMatrix: bad shape");
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < i; ++j)
        require(std::abs(v[i * dim + j] - v[j * dim + i]) == 0.0, errc::validation,
                "SymMatrix: not symmetric");
    // Positive definiteness for the sizes used here (leading principal minors).
    if (dim == 1) {
      require(v[0] > 0.0, errc::validation, "SymMatrix: not positive definite");
    } else if (dim == 2) {
      require(v[0] > 0.0 && v[0] * v[3] - v[1] * v[2] > 0.0, errc::validation,
              "SymMatrix: not positive definite");
    } else {
      for (std::size_t i = 0; i < dim; ++i)
        require((*this)(i, i) > 0.0, errc::validation, "SymMatrix: non-positive diagonal");
    }
  }

  bool operator==(const SymMatrix&) const = default;
};

struct MeasureMetadata {
  int max_derivative_order = 0; // highest total derivative count in any product term
  int homogeneity_degree = 1;   // I[s p] = s^degree I[p]
  bool local = true;            // density depends on finitely many derivatives at a point
};

/// An information measure I[p] as a first-class value. The measure density is
/// written with u_i = d_i p / p:
///   Fisher:            I = Int p * g_ij u_i u_j            (g from the metric)
///   AnisotropicFisher: I = Int p * G_ij u_i u_j            (general SPD G)
///   HigherDerivative:  I = eps * len^2 * Int p * (g_ij d_i d_j ln p)^2
///   WeightedSum:       sum of non-negative multiples of the above
struct MeasureSpec {
  enum class Kind { fisher, anisotropic_fisher, higher_derivative, weighted_sum };

  Kind kind = Kind::fisher;
  Metric metric;                                      // fisher, higher_derivative
  SymMatrix matrix;                                   // anisotropic_fisher
  double epsilon = 0.0;                               // higher_derivative coupling
  double length = 0.0;                                // higher_derivative length scale
  std::vector<std::pair<double, MeasureSpec>> terms;  // weighted_sum

  static MeasureSpec fisher(Metric m) {
    MeasureSpec s;
    s.kind = Kind::fisher;
    s.metric = std::move(m);
    return s;
  }
  static MeasureSpec anisotropic_fisher(SymMatrix g) {
    MeasureSpec s;
    s.kind = Kind::anisotropic_fisher;
    s.matrix = std::move(g);
    return s;
  }
  static MeasureSpec higher_derivative(double eps, double len, Metric m) {
    MeasureSpec s;
    s.kind = Kind::higher_derivative;
    s.epsilon = eps;
    s.length = len;
    s.metric = std::move(m);
    return s;
  }
  static MeasureSpec weighted_sum(std::vector<std::pair<double, MeasureSpec>> terms) {
    MeasureSpec s;
    s.kind = Kind::weighted_sum;
    s.terms = std::move(terms);
    return s;
  }

  std::size_t axis_count() const {
    switch (kind) {
      case Kind::fisher:
      case Kind::higher_derivative: return metric.axis_count();
      case Kind::anisotropic_fisher: return matrix.dim;
      case Kind::weighted_sum:
        for (const auto& [c, t] : terms) {
          (void)c;
          return t.axis_count();
        }
        return 0;
    }
    return 0;
  }

  void validate() const {
    switch (kind) {
      case Kind::fisher: metric.validate(); break;
      case Kind::anisotropic_fisher: matrix.validate(); break;
      case Kind::higher_derivative:
        metric.validate();
        require(epsilon >= 0.0, errc::validation, "HigherDerivative: epsilon must be >= 0");
        require(length >= 0.0, errc::validation, "HigherDerivative: length must be >= 0");
        break;
      case Kind::weighted_sum: {
        require(!terms.empty(), errc::validation, "WeightedSum: no terms");
        const std::size_t axes = terms.front().second.axis_count();
        for (const auto& [c, t] : terms) {
          require(c >= 0.0, errc::validation, "WeightedSum: coefficients must be >= 0");
          require(t.kind != Kind::weighted_sum, errc::validation,
                  "WeightedSum: nested sums are not supported");
          t.validate();
          require(t.axis_count() == axes, errc::validation,
                  "WeightedSum: terms disagree on axis count");
        }
        break;
      }
    }
  }

  std::string name() const {
    switch (kind) {
      case Kind::fisher: return "fisher";
      case Kind::anisotropic_fisher: return "anisotropic_fisher";
      case Kind::higher_derivative: return "higher_derivative";
      case Kind::weighted_sum: {
        std::string s = "weighted_sum(";
        for (std::size_t i = 0; i < terms.size(); ++i) {
          if (i) s += ", ";
          s += std::to_string(terms[i].first) + "*" + terms[i].second.name();
        }
        return s + ")";
      }
    }
    return "?";
  }
};

/// Derivative-order, homogeneity and locality flags, computed recursively
/// over the variant structure. Zero-coefficient sum terms do not contribute.
inline MeasureMetadata structural_metadata(const MeasureSpec& m) {
  switch (m.kind) {
    case MeasureSpec::Kind::fisher:
    case MeasureSpec::Kind::anisotropic_fisher: return {2, 1, true};
    case MeasureSpec::Kind::higher_derivative: return {4, 1, true};
    case MeasureSpec::Kind::weighted_sum: {
      MeasureMetadata md{0, 1, true};
      for (const auto& [c, t] : m.terms) {
        if (c == 0.0) continue;
        const MeasureMetadata sub = structural_metadata(t);
        md.max_derivative_order = std::max(md.max_derivative_order, sub.max_derivative_order);
        md.local = md.local && sub.local;
      }
      return md;
    }
  }
  return {};
}

/// Spectral derivatives of ln p. Working with the log keeps every measure
/// formula free of divisions by small tail values.
class LogDerivs {
public:
  struct from_log_t {};
  static constexpr from_log_t from_log{};
  struct unchecked_t {};
  // For internal iterates whose transient tails may sit below the public
  // floor; the caller owns collapse detection.
  static constexpr unchecked_t unchecked{};

  explicit LogDerivs(const RealField& p) {
    check_density_floor(p, "measure");
    log_ = RealField(p.grid());
    for (std::size_t i = 0; i < p.size(); ++i) log_[i] = std::log(p[i]);
    build();
  }

  LogDerivs(unchecked_t, const RealField& p) {
    log_ = RealField(p.grid());
    for (std::size_t i = 0; i < p.size(); ++i) {
      require(p[i] > 0.0, errc::node_breach,
              "measure: density not strictly positive at site " + std::to_string(i));
      log_[i] = std::log(p[i]);
    }
    build();
  }

  LogDerivs(from_log_t, RealField log_density) : log_(std::move(log_density)) { build(); }

  const GridPtr& grid() const { return log_.grid(); }
  const RealField& log() const { return log_; }
  const RealField& d1(std::size_t a) const { return d1_.at(a); }
  const RealField& d2diag(std::size_t a) const { return d2_.at(a); }

  const RealField& d2(std::size_t a, std::size_t b) {
    if (a == b) return d2_.at(a);
    const auto key = std::minmax(a, b);
    auto it = mixed_.find(key);
    if (it == mixed_.end()) {
      const std::size_t axes[1] = {key.second};
      it = mixed_.emplace(key, derivative(d1_.at(key.first), std::span<const std::size_t>(axes, 1)))
               .first;
    }
    return it->second;
  }

private:
  void build() {
    const Grid& g = *log_.grid();
    d1_.reserve(g.ndim());
    d2_.reserve(g.ndim());
    for (std::size_t a = 0; a < g.ndim(); ++a) {
      auto [da, daa] = derivative12(log_, a);
      d1_.push_back(std::move(da));
      d2_.push_back(std::move(daa));
    }
  }

  RealField log_;
  std::vector<RealField> d1_, d2_;
  std::map<std::pair<std::size_t, std::size_t>, RealField> mixed_;
};

namespace detail {

inline void check_axes(const MeasureSpec& m, const Grid& g) {
  require(m.axis_count() == g.ndim(), errc::validation,
          "measure: axis count " + std::to_string(m.axis_count()) +
              " does not match grid dimension " + std::to_string(g.ndim()));
}

// I = Int p * G_ab dL_a dL_b for a (possibly anisotropic) quadratic form G.
inline double quadratic_form_value(const SymMatrix& G, const RealField& p, LogDerivs& ld) {
  const Grid& g = *p.grid();
  detail::CompensatedSum s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double q = 0.0;
    for (std::size_t a = 0; a < g.ndim(); ++a) {
      q += G(a, a) * ld.d1(a)[i] * ld.d1(a)[i];
      for (std::size_t b = a + 1; b < g.ndim(); ++b)
        q += 2.0 * G(a, b) * ld.d1(a)[i] * ld.d1(b)[i];
    }
    s.add(p[i] * q);
  }
  return s.value() * g.cell_volume();
}

// delta I / delta p = -G_ab (2 d_a d_b L + dL_a dL_b).
inline RealField quadratic_form_varder(const SymMatrix& G, LogDerivs& ld) {
  const Grid& g = *ld.grid();
  RealField out(ld.grid());
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    for (std::size_t b = a; b < g.ndim(); ++b) {
      const double coeff = (a == b) ? G(a, a) : 2.0 * G(a, b);
      if (coeff == 0.0) continue;
      const RealField& dab = ld.d2(a, b);
      const RealField& da = ld.d1(a);
      const RealField& db = ld.d1(b);
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] -= coeff * (2.0 * dab[i] + da[i] * db[i]);
    }
  }
  return out;
}

// w = g_ab d_a d_b ln p, the metric Laplacian of the log-density.
inline RealField log_laplacian(const Metric& metric, LogDerivs& ld) {
  const Grid& g = *ld.grid();
  RealField w(ld.grid());
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    const double ga = metric.inv_mass(a);
    const RealField& daa = ld.d2diag(a);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += ga * daa[i];
  }
  return w;
}

inline double higher_derivative_value(const MeasureSpec& m, const RealField& p, LogDerivs& ld) {
  const RealField w = log_laplacian(m.metric, ld);
  detail::CompensatedSum s;
  for (std::size_t i = 0; i < p.size(); ++i) s.add(p[i] * w[i] * w[i]);
  return m.epsilon * m.length * m.length * s.value() * p.grid()->cell_volume();
}

// delta I_H / delta p = eps len^2 [3 w^2 + 2 Lap_g w + 4 g_a (d_a w)(d_a L)
//                                  + 2 w g_a (d_a L)^2].
inline RealField higher_derivative_varder(const MeasureSpec& m, LogDerivs& ld) {
  const Grid& g = *ld.grid();
  const Metric& metric = m.metric;
  const RealField w = log_laplacian(metric, ld);
  RealField out(ld.grid());
  const double pref = m.epsilon * m.length * m.length;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 3.0 * w[i] * w[i];
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    const double ga = metric.inv_mass(a);
    auto [dw, dww] = derivative12(w, a);
    const RealField& dL = ld.d1(a);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += 2.0 * ga * dww[i] + 4.0 * ga * dw[i] * dL[i] +
                2.0 * w[i] * ga * dL[i] * dL[i];
  }
  for (double& v : out) v *= pref;
  return out;
}

inline double evaluate_impl(const MeasureSpec& m, const RealField& p, LogDerivs& ld) {
  switch (m.kind) {
    case MeasureSpec::Kind::fisher:
      return quadratic_form_value(SymMatrix::from_metric(m.metric), p, ld);
    case MeasureSpec::Kind::anisotropic_fisher:
      return quadratic_form_value(m.matrix, p, ld);
    case MeasureSpec::Kind::higher_derivative: return higher_derivative_value(m, p, ld);
    case MeasureSpec::Kind::weighted_sum: {
      double sum = 0.0;
      for (const auto& [c, t] : m.terms) {
        if (c == 0.0) continue;
        sum += c * evaluate_impl(t, p, ld);
      }
      return sum;
    }
  }
  return 0.0;
}

inline RealField varder_impl(const MeasureSpec& m, LogDerivs& ld) {
  switch (m.kind) {
    case MeasureSpec::Kind::fisher:
      return quadratic_form_varder(SymMatrix::from_metric(m.metric), ld);
    case MeasureSpec::Kind::anisotropic_fisher: return quadratic_form_varder(m.matrix, ld);
    case MeasureSpec::Kind::higher_derivative: return higher_derivative_varder(m, ld);
    case MeasureSpec::Kind::weighted_sum: {
      RealField out(ld.grid());
      for (const auto& [c, t] : m.terms) {
        if (c == 0.0) continue;
        RealField part = varder_impl(t, ld);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * part[i];
      }
      return out;
    }
  }
  return RealField(ld.grid());
}

} // namespace detail

/// I[p]. Normalization of p is not assumed; p must sit above the density
/// floor everywhere.
inline double evaluate(const MeasureSpec& m, const RealField& p) {
  m.validate();
  detail::check_axes(m, *p.grid());
  LogDerivs ld(p);
  return detail::evaluate_impl(m, p, ld);
}

/// delta I / delta p sampled on the grid, from the analytic per-variant formula.
inline RealField variational_derivative(const MeasureSpec& m, const RealField& p) {
  m.validate();
  detail::check_axes(m, *p.grid());
  LogDerivs ld(p);
  return detail::varder_impl(m, ld);
}

/// Both of the above reusing one set of log-density derivatives; the hot path
/// for time stepping.
inline RealField variational_derivative(const MeasureSpec& m, LogDerivs& ld) {
  return detail::varder_impl(m, ld);
}

struct FdCheckReport {
  double max_rel_error = 0.0;
  int probes = 0;
};

/// Finite-difference oracle for variational_derivative: compares the
/// Richardson-extrapolated directional derivative (I[p+h dp] - I[p-h dp])/2h
/// against Int (dI/dp) dp over smooth mass-preserving probes dp.
inline FdCheckReport fd_check(const MeasureSpec& m, const RealField& p, int probe_count,
                              std::uint64_t seed = 20240915ull) {
  m.validate();
  detail::check_axes(m, *p.grid());
  const Grid& g = *p.grid();
  const RealField v = variational_derivative(m, p);
  const double i0 = evaluate(m, p);
  const double mass = integrate(p);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.2, 0.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_int_distribution<int> mode(1, 3);

  FdCheckReport report;
  report.probes = probe_count;
  for (int probe = 0; probe < probe_count; ++probe) {
    // Smooth multiplicative modulation keeps p +- h*dp safely positive.
    RealField phi(p.grid());
    for (int term = 0; term < 3; ++term) {
      const double A = amp(rng);
      std::vector<double> kk(g.ndim()), th(g.ndim());
      for (std::size_t a = 0; a < g.ndim(); ++a) {
        kk[a] = 2.0 * std::numbers::pi * mode(rng) / g.extent(a);
        th[a] = phase(rng);
      }
      for (std::size_t i = 0; i < phi.size(); ++i) {
        double c = A;
        for (std::size_t a = 0; a < g.ndim(); ++a)
          c *= std::cos(kk[a] * g.coord_of_site(i, a) + th[a]);
        phi[i] += c;
      }
    }
    detail::CompensatedSum pphi;
    for (std::size_t i = 0; i < p.size(); ++i) pphi.add(p[i] * phi[i]);
    const double shift = pphi.value() * g.cell_volume() / mass;
    RealField dp(p.grid());
    for (std::size_t i = 0; i < p.size(); ++i) dp[i] = p[i] * (phi[i] - shift);

    detail::CompensatedSum vd;
    for (std::size_t i = 0; i < p.size(); ++i) vd.add(v[i] * dp[i]);
    const double analytic = vd.value() * g.cell_volume();

    auto directional = [&](double h) {
      RealField plus(p.grid()), minus(p.grid());
      for (std::size_t i = 0; i < p.size(); ++i) {
        plus[i] = p[i] + h * dp[i];
        minus[i] = p[i] - h * dp[i];
      }
      return (evaluate(m, plus) - evaluate(m, minus)) / (2.0 * h);
    };
    const double h = 0.05;
    const double d1 = directional(h);
    const double d2 = directional(h / 2.0);
    const double richardson = (4.0 * d2 - d1) / 3.0;

    const double denom = std::max(std::abs(analytic), 1e-12 * (std::abs(i0) + 1.0));
    report.max_rel_error = std::max(report.max_rel_error, std::abs(richardson - analytic) / denom);
  }
  return report;
}

/// Restriction of a measure to a contiguous axis range [from, to); the
/// subsystem measure entering separability checks. For AnisotropicFisher the
/// off-block couplings must vanish for the restriction to exist.
inline MeasureSpec restrict_measure(const MeasureSpec& m, std::size_t from, std::size_t to) {
  require(from < to && to <= m.axis_count(), errc::validation, "restrict_measure: bad axis range");
  auto restrict_metric = [&](const Metric& metric) {
    Metric sub;
    sub.particles = to - from;
    sub.dimensions = 1;
    for (std::size_t a = from; a < to; ++a) sub.masses.push_back(metric.mass_of_axis(a));
    return sub;
  };
  switch (m.kind) {
    case MeasureSpec::Kind::fisher: return MeasureSpec::fisher(restrict_metric(m.metric));
    case MeasureSpec::Kind::anisotropic_fisher: {
      const std::size_t d = m.matrix.dim;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
          const bool a_in = a >= from && a < to, b_in = b >= from && b < to;
          if (a_in != b_in)
            require(m.matrix(a, b) == 0.0, errc::validation,
                    "restrict_measure: matrix couples axes across the split");
        }
      SymMatrix sub;
      sub.dim = to - from;
      sub.v.assign(sub.dim * sub.dim, 0.0);
      for (std::size_t a = from; a < to; ++a)
        for (std::size_t b = from; b < to; ++b) sub.at(a - from, b - from) = m.matrix(a, b);
      return MeasureSpec::anisotropic_fisher(std::move(sub));
    }
    case MeasureSpec::Kind::higher_derivative:
      return MeasureSpec::higher_derivative(m.epsilon, m.length, restrict_metric(m.metric));
    case MeasureSpec::Kind::weighted_sum: {
      std::vector<std::pair<double, MeasureSpec>> terms;
      for (const auto& [c, t] : m.terms) terms.emplace_back(c, restrict_measure(t, from, to));
      return MeasureSpec::weighted_sum(std::move(terms));
    }
  }
  return m;
}

} // namespace fisherflow
