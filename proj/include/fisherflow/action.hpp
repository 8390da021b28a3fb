#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fisherflow/grid.hpp"
#include "fisherflow/measures.hpp"

namespace fisherflow {

struct Potential {
  enum class Kind { zero, harmonic, double_well, sampled };

  Kind kind = Kind::zero;
  std::vector<double> omega;                    // harmonic: one frequency per axis
  double well_a = 0.0, well_b = 0.0;            // double well: a * sum_a (x_a^2 - b^2)^2
  std::shared_ptr<const RealField> samples;     // sampled

  static Potential zero() { return {}; }
  static Potential harmonic(std::vector<double> omega_per_axis) {
    Potential p;
    p.kind = Kind::harmonic;
    p.omega = std::move(omega_per_axis);
    return p;
  }
  static Potential double_well(double a, double b) {
    Potential p;
    p.kind = Kind::double_well;
    p.well_a = a;
    p.well_b = b;
    return p;
  }
  static Potential sampled(RealField values) {
    Potential p;
    p.kind = Kind::sampled;
    p.samples = std::make_shared<const RealField>(std::move(values));
    return p;
  }

  RealField sample(const GridPtr& grid) const {
    const Grid& g = *grid;
    RealField v(grid);
    switch (kind) {
      case Kind::zero: break;
      case Kind::harmonic: {
        require(omega.size() == g.ndim(), errc::validation,
                "Potential: need one harmonic frequency per axis");
        for (std::size_t i = 0; i < v.size(); ++i) {
          double sum = 0.0;
          for (std::size_t a = 0; a < g.ndim(); ++a) {
            const double x = g.coord_of_site(i, a);
            sum += 0.5 * g.metric().mass_of_axis(a) * omega[a] * omega[a] * x * x;
          }
          v[i] = sum;
        }
        break;
      }
      case Kind::double_well: {
        for (std::size_t i = 0; i < v.size(); ++i) {
          double sum = 0.0;
          for (std::size_t a = 0; a < g.ndim(); ++a) {
            const double x = g.coord_of_site(i, a);
            const double q = x * x - well_b * well_b;
            sum += well_a * q * q;
          }
          v[i] = sum;
        }
        break;
      }
      case Kind::sampled: {
        require(samples && samples->size() == g.size(), errc::validation,
                "Potential: sampled values do not match the grid");
        for (double s : *samples)
          require(std::isfinite(s), errc::validation, "Potential: sampled value not finite");
        v.values() = samples->values();
        break;
      }
    }
    return v;
  }

  bool is_free() const { return kind == Kind::zero; }
};

/// The constrained action's parameters: Phi = Int p [Sdot + K + V] + lambda*I.
/// lambda defaults to hbar^2/8, the multiplier that turns the Fisher term
/// into the standard quantum potential.
struct ActionConfig {
  double hbar = 1.0;
  std::optional<double> lambda; // empty -> hbar^2/8
  MeasureSpec measure;
  Potential potential;

  double lambda_value() const { return lambda ? *lambda : hbar * hbar / 8.0; }

  void validate() const {
    require(hbar > 0.0, errc::validation, "ActionConfig: hbar must be positive");
    require(lambda_value() >= 0.0, errc::validation, "ActionConfig: lambda must be >= 0");
    measure.validate();
  }
};

/// Hydrodynamic state (p, S). S is stored as a periodic field plus an
/// explicit linear part per axis, S_total(x) = s(x) + sum_a s_linear[a]*x_a,
/// so phase winding and drifting phases stay spectrally clean.
struct HydroState {
  RealField p;
  RealField s;
  std::vector<double> s_linear;

  double s_total(std::size_t site) const {
    double val = s[site];
    const Grid& g = *p.grid();
    for (std::size_t a = 0; a < s_linear.size(); ++a)
      val += s_linear[a] * g.coord_of_site(site, a);
    return val;
  }
};

inline HydroState make_hydro_state(RealField p, RealField s, std::vector<double> s_linear = {}) {
  require(p.grid() == s.grid() || p.grid()->same_shape(*s.grid()), errc::validation,
          "HydroState: p and S live on different grids");
  if (s_linear.empty()) s_linear.assign(p.grid()->ndim(), 0.0);
  require(s_linear.size() == p.grid()->ndim(), errc::validation,
          "HydroState: need one linear coefficient per axis");
  for (double v : p) require(v >= 0.0, errc::validation, "HydroState: density must be >= 0");
  const double mass = integrate(p);
  require(std::abs(mass - 1.0) <= 1e-8, errc::validation,
          "HydroState: density must integrate to 1 (got " + std::to_string(mass) + ")");
  return HydroState{std::move(p), std::move(s), std::move(s_linear)};
}

/// Gradient of the total phase action S, one field per axis.
inline std::vector<RealField> grad_s(const HydroState& st) {
  const Grid& g = *st.p.grid();
  std::vector<RealField> out;
  out.reserve(g.ndim());
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    RealField da = derivative(st.s, {a});
    const double lin = st.s_linear.empty() ? 0.0 : st.s_linear[a];
    if (lin != 0.0)
      for (double& v : da) v += lin;
    out.push_back(std::move(da));
  }
  return out;
}

/// Q = -(hbar^2/2) g_ab (d_a d_b sqrt p)/sqrt p, computed directly from the
/// square-root amplitude. Deliberately a different route from
/// variational_derivative(Fisher), so the two can cross-check each other.
inline RealField quantum_potential(const RealField& p, const Metric& metric, double hbar) {
  require(metric.axis_count() == p.grid()->ndim(), errc::validation,
          "quantum_potential: metric does not match grid");
  check_density_floor(p, "quantum_potential");
  const Grid& g = *p.grid();
  RealField amp(p.grid());
  for (std::size_t i = 0; i < p.size(); ++i) amp[i] = std::sqrt(p[i]);
  RealField q(p.grid());
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    const RealField d2 = derivative(amp, {a, a});
    const double ga = metric.inv_mass(a);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += ga * d2[i];
  }
  const double pref = -0.5 * hbar * hbar;
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = pref * q[i] / amp[i];
  return q;
}

/// Hamilton-Jacobi residual: Sdot + (1/2) g_ab d_aS d_bS + V + delta(lambda I)/delta p.
/// Vanishes along solutions; with the Fisher measure at lambda = hbar^2/8 the
/// last term is exactly the quantum potential.
inline RealField hj_residual(const HydroState& st, const RealField& s_dot,
                             const ActionConfig& cfg) {
  cfg.validate();
  const Grid& g = *st.p.grid();
  const double lambda = cfg.lambda_value();
  RealField res = s_dot;
  const std::vector<RealField> ds = grad_s(st);
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    const double ga = g.metric().inv_mass(a);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] += 0.5 * ga * ds[a][i] * ds[a][i];
  }
  const RealField v = cfg.potential.sample(st.p.grid());
  for (std::size_t i = 0; i < res.size(); ++i) res[i] += v[i];
  if (lambda != 0.0) {
    const RealField dI = variational_derivative(cfg.measure, st.p);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] += lambda * dI[i];
  }
  return res;
}

/// Continuity residual: pdot + g_ab d_a (p d_bS). Vanishes when probability
/// is conserved.
inline RealField continuity_residual(const HydroState& st, const RealField& p_dot,
                                     const Metric& metric) {
  const Grid& g = *st.p.grid();
  require(metric.axis_count() == g.ndim(), errc::validation,
          "continuity_residual: metric does not match grid");
  RealField res = p_dot;
  const std::vector<RealField> ds = grad_s(st);
  for (std::size_t a = 0; a < g.ndim(); ++a) {
    RealField flux(st.p.grid());
    for (std::size_t i = 0; i < flux.size(); ++i) flux[i] = st.p[i] * ds[a][i];
    const RealField dflux = derivative(flux, {a});
    const double ga = metric.inv_mass(a);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] += ga * dflux[i];
  }
  return res;
}

/// The action Phi over a uniformly sampled trajectory of hydro states.
/// Time derivatives are centered differences; the two end samples only feed
/// those derivatives.
inline double evaluate_action(const std::vector<HydroState>& history, double dt,
                              const ActionConfig& cfg) {
  cfg.validate();
  require(history.size() >= 3, errc::validation,
          "evaluate_action: need at least 3 time samples");
  require(dt > 0.0, errc::validation, "evaluate_action: dt must be positive");
  const Grid& g = *history.front().p.grid();
  const RealField v = cfg.potential.sample(history.front().p.grid());
  const double lambda = cfg.lambda_value();

  detail::CompensatedSum phi;
  for (std::size_t t = 1; t + 1 < history.size(); ++t) {
    const HydroState& st = history[t];
    const HydroState& prev = history[t - 1];
    const HydroState& next = history[t + 1];
    const std::vector<RealField> ds = grad_s(st);

    detail::CompensatedSum inner;
    for (std::size_t i = 0; i < st.p.size(); ++i) {
      double s_dot = (next.s[i] - prev.s[i]) / (2.0 * dt);
      for (std::size_t a = 0; a < g.ndim(); ++a)
        s_dot += (next.s_linear[a] - prev.s_linear[a]) / (2.0 * dt) * g.coord_of_site(i, a);
      double kin = 0.0;
      for (std::size_t a = 0; a < g.ndim(); ++a)
        kin += 0.5 * g.metric().inv_mass(a) * ds[a][i] * ds[a][i];
      inner.add(st.p[i] * (s_dot + kin + v[i]));
    }
    double slice = inner.value() * g.cell_volume();
    if (lambda != 0.0) slice += lambda * evaluate(cfg.measure, st.p);
    phi.add(slice * dt);
  }
  return phi.value();
}

} // namespace fisherflow
