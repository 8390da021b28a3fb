#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fisherflow/action.hpp"
#include "fisherflow/axioms.hpp"
#include "fisherflow/dynamics.hpp"
#include "fisherflow/observables.hpp"

namespace fisherflow::runner {

using json = nlohmann::ordered_json;

struct OutputConfig {
  std::string directory = "out";
  bool csv = true;
  bool summary = true;
  long checkpoint_every = 0; // steps between checkpoints; 0 disables
};

struct InitialStateConfig {
  enum class Family { gaussian, coherent, ground_state, plane_wave, mixture, checkpoint };
  Family family = Family::gaussian;
  std::vector<double> center, sigma_sq, momentum; // gaussian
  double uniform_weight = 0.0;                    // gaussian: flat density floor
  double x0 = 0.0;                                // coherent
  std::vector<long> winding;                      // plane_wave
  int components = 3;                             // mixture
  double tolerance = 1e-7;                        // ground_state
  std::string path;                               // checkpoint
};

struct SuperpositionLeg {
  std::string label;   // unique key in the summary
  std::string group;   // legs sharing a group get a defect-vs-coupling slope
  MeasureSpec measure;
  double coupling = 0.0;
};

struct GalileanLeg {
  std::string label;
  MeasureSpec measure;
  std::vector<double> velocity;
  double angle = 0.0;
};

struct ScanTask {
  enum class Kind {
    superposition,
    galilean,
    orientation,
    coupling,
    trap_level,
    measure_family,
    identity_suite
  };
  Kind kind = Kind::identity_suite;

  // superposition
  std::vector<SuperpositionLeg> superposition_legs;
  std::vector<double> center_1, center_2, sigma_sq;
  double uniform_weight = 0.0;
  double amp_1 = 1.0 / std::numbers::sqrt2, amp_2 = 1.0 / std::numbers::sqrt2;

  // galilean
  std::vector<GalileanLeg> galilean_legs;

  // orientation / coupling / trap_level (forwarded to symmetry_shift_scan)
  SymmetryScanSpec symmetry;

  // measure_family
  std::vector<double> a_values, b_values, c_values;
  double family_delta = 0.5, family_epsilon = 1e-2, family_length = 0.1;

  // identity_suite
  int suite_size = 5;
};

struct TaskConfig {
  enum class Kind { evolve, ground_state, axioms, scan };
  enum class Picture { wave, hydro, both };
  Kind kind = Kind::evolve;
  Picture picture = Picture::wave;
  bool fit_dispersion = false;
  double tolerance = 1e-6;                 // ground_state
  std::vector<MeasureSpec> axiom_measures; // empty -> the action's measure
  bool axioms_with_dynamics = true;
  ScanTask scan;
};

struct CheckConfig {
  std::string name;
  std::string kind;   // less_than | greater_than | within | within_rel | flag_true |
                      // expect_verdict | determinism | resume
  std::string target; // dot path into the summary JSON
  double value = 0.0;
  double tolerance = 0.0;
  // expect_verdict
  long measure_index = 0;
  std::string axiom;
  std::string expect;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  GridSpec grid_spec;
  Metric metric;
  ActionConfig action;
  InitialStateConfig initial_state;
  TaskConfig task;
  EvolveConfig evolve;
  OutputConfig output;
  std::vector<CheckConfig> checks;
};

namespace detail {

/// Typed JSON reader that records every error it meets (instead of stopping
/// at the first) and, in strict mode, rejects unknown keys.
class Reader {
public:
  Reader(const json& j, std::string path, std::vector<std::string>& errors, bool strict)
      : j_(j), path_(std::move(path)), errors_(errors), strict_(strict) {
    if (!j_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  ~Reader() {
    if (!strict_ || !j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        errors_.push_back(path_ + ": unknown key '" + it.key() + "' (strict mode)");
  }

  bool has(const std::string& key) { return j_.is_object() && j_.contains(key); }

  const json* child(const std::string& key, bool required = true) {
    used_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) {
      if (required) errors_.push_back(path_ + ": missing required key '" + key + "'");
      return nullptr;
    }
    return &j_.at(key);
  }

  template <class T>
  T get(const std::string& key, const T& fallback, bool required = false) {
    const json* c = child(key, required);
    if (!c) return fallback;
    try {
      return c->get<T>();
    } catch (const json::exception&) {
      errors_.push_back(path_ + "." + key + ": wrong type");
      return fallback;
    }
  }

  std::string subpath(const std::string& key) const { return path_ + "." + key; }
  std::vector<std::string>& errors() { return errors_; }
  bool strict() const { return strict_; }

private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
  bool strict_;
  std::set<std::string> used_;
};

inline MeasureSpec parse_measure(const json& j, const Metric& metric,
                                 std::vector<std::string>& errors, bool strict,
                                 const std::string& path) {
  Reader r(j, path, errors, strict);
  const std::string type = r.get<std::string>("type", "fisher", true);
  if (type == "fisher") return MeasureSpec::fisher(metric);
  if (type == "anisotropic_fisher") {
    auto rows = r.get<std::vector<std::vector<double>>>("matrix", {}, true);
    SymMatrix m;
    m.dim = rows.size();
    for (const auto& row : rows) {
      if (row.size() != rows.size())
        errors.push_back(path + ".matrix: must be square");
      for (double v : row) m.v.push_back(v);
    }
    if (m.v.size() != m.dim * m.dim) m = SymMatrix::from_metric(metric);
    return MeasureSpec::anisotropic_fisher(std::move(m));
  }
  if (type == "higher_derivative") {
    const double eps = r.get<double>("epsilon", 0.0, true);
    const double len = r.get<double>("length", 0.0, true);
    return MeasureSpec::higher_derivative(eps, len, metric);
  }
  if (type == "weighted_sum") {
    const json* terms = r.child("terms");
    std::vector<std::pair<double, MeasureSpec>> parsed;
    if (terms && terms->is_array()) {
      int i = 0;
      for (const auto& t : *terms) {
        const std::string tpath = path + ".terms[" + std::to_string(i++) + "]";
        Reader tr(t, tpath, errors, strict);
        const double c = tr.get<double>("coefficient", 0.0, true);
        const json* mj = tr.child("measure");
        if (mj) parsed.emplace_back(c, parse_measure(*mj, metric, errors, strict, tpath + ".measure"));
      }
    } else {
      errors.push_back(path + ".terms: expected an array");
    }
    if (parsed.empty()) return MeasureSpec::fisher(metric);
    return MeasureSpec::weighted_sum(std::move(parsed));
  }
  errors.push_back(path + ".type: unknown measure type '" + type + "'");
  return MeasureSpec::fisher(metric);
}

inline json measure_to_json(const MeasureSpec& m) {
  json j;
  switch (m.kind) {
    case MeasureSpec::Kind::fisher: j["type"] = "fisher"; break;
    case MeasureSpec::Kind::anisotropic_fisher: {
      j["type"] = "anisotropic_fisher";
      json rows = json::array();
      for (std::size_t i = 0; i < m.matrix.dim; ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < m.matrix.dim; ++k) row.push_back(m.matrix(i, k));
        rows.push_back(row);
      }
      j["matrix"] = rows;
      break;
    }
    case MeasureSpec::Kind::higher_derivative:
      j["type"] = "higher_derivative";
      j["epsilon"] = m.epsilon;
      j["length"] = m.length;
      break;
    case MeasureSpec::Kind::weighted_sum: {
      j["type"] = "weighted_sum";
      json terms = json::array();
      for (const auto& [c, t] : m.terms) {
        json tj;
        tj["coefficient"] = c;
        tj["measure"] = measure_to_json(t);
        terms.push_back(tj);
      }
      j["terms"] = terms;
      break;
    }
  }
  return j;
}

inline Potential parse_potential(const json& j, std::vector<std::string>& errors, bool strict,
                                 const std::string& path) {
  Reader r(j, path, errors, strict);
  const std::string type = r.get<std::string>("type", "zero", true);
  if (type == "zero") return Potential::zero();
  if (type == "harmonic")
    return Potential::harmonic(r.get<std::vector<double>>("omega", {}, true));
  if (type == "double_well")
    return Potential::double_well(r.get<double>("a", 0.0, true), r.get<double>("b", 0.0, true));
  if (type == "sampled") {
    errors.push_back(path + ": sampled potentials are loaded via 'values' at run time");
    return Potential::zero();
  }
  errors.push_back(path + ".type: unknown potential type '" + type + "'");
  return Potential::zero();
}

inline json potential_to_json(const Potential& p) {
  json j;
  switch (p.kind) {
    case Potential::Kind::zero: j["type"] = "zero"; break;
    case Potential::Kind::harmonic:
      j["type"] = "harmonic";
      j["omega"] = p.omega;
      break;
    case Potential::Kind::double_well:
      j["type"] = "double_well";
      j["a"] = p.well_a;
      j["b"] = p.well_b;
      break;
    case Potential::Kind::sampled: j["type"] = "sampled"; break;
  }
  return j;
}

} // namespace detail

/// Parses and validates a scenario document, collecting every validation
/// error rather than stopping at the first.
inline std::optional<Scenario> parse_scenario_collect(const std::string& text,
                                                      std::vector<std::string>& errors,
                                                      bool strict = true) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    errors.push_back(std::string("scenario: not valid JSON: ") + e.what());
    return std::nullopt;
  }
  Scenario sc;
  {
    detail::Reader r(doc, "scenario", errors, strict);
    sc.name = r.get<std::string>("name", "unnamed", true);
    sc.seed = r.get<std::uint64_t>("seed", 0);

    if (const json* gj = r.child("grid")) {
      detail::Reader gr(*gj, "scenario.grid", errors, strict);
      if (const json* axes = gr.child("axes")) {
        if (axes->is_array()) {
          int i = 0;
          for (const auto& ax : *axes) {
            detail::Reader ar(ax, "scenario.grid.axes[" + std::to_string(i++) + "]", errors,
                              strict);
            AxisSpec spec;
            spec.extent = ar.get<double>("extent", 0.0, true);
            spec.points = ar.get<std::size_t>("points", 0, true);
            sc.grid_spec.axes.push_back(spec);
          }
        } else {
          errors.push_back("scenario.grid.axes: expected an array");
        }
      }
    }
    if (const json* mj = r.child("metric")) {
      detail::Reader mr(*mj, "scenario.metric", errors, strict);
      sc.metric.particles = mr.get<std::size_t>("particles", 1, true);
      sc.metric.dimensions = mr.get<std::size_t>("dimensions", 1, true);
      sc.metric.masses = mr.get<std::vector<double>>("masses", {1.0}, true);
    }
    if (const json* aj = r.child("action", false)) {
      detail::Reader ar(*aj, "scenario.action", errors, strict);
      sc.action.hbar = ar.get<double>("hbar", 1.0);
      if (ar.has("lambda")) sc.action.lambda = ar.get<double>("lambda", 0.0);
      if (const json* mj = ar.child("measure", false))
        sc.action.measure = detail::parse_measure(*mj, sc.metric, errors, strict,
                                                  "scenario.action.measure");
      else
        sc.action.measure = MeasureSpec::fisher(sc.metric);
      if (const json* pj = ar.child("potential", false))
        sc.action.potential =
            detail::parse_potential(*pj, errors, strict, "scenario.action.potential");
    } else {
      sc.action.measure = MeasureSpec::fisher(sc.metric);
    }

    if (const json* ij = r.child("initial_state", false)) {
      detail::Reader ir(*ij, "scenario.initial_state", errors, strict);
      const std::string fam = ir.get<std::string>("family", "gaussian", true);
      auto& st = sc.initial_state;
      if (fam == "gaussian") {
        st.family = InitialStateConfig::Family::gaussian;
        st.center = ir.get<std::vector<double>>("center", {}, true);
        st.sigma_sq = ir.get<std::vector<double>>("sigma_sq", {}, true);
        st.momentum = ir.get<std::vector<double>>("momentum", {});
        st.uniform_weight = ir.get<double>("uniform_weight", 0.0);
      } else if (fam == "coherent") {
        st.family = InitialStateConfig::Family::coherent;
        st.x0 = ir.get<double>("x0", 0.0, true);
      } else if (fam == "ground_state") {
        st.family = InitialStateConfig::Family::ground_state;
        st.tolerance = ir.get<double>("tolerance", 1e-7);
      } else if (fam == "plane_wave") {
        st.family = InitialStateConfig::Family::plane_wave;
        st.winding = ir.get<std::vector<long>>("winding", {}, true);
      } else if (fam == "mixture") {
        st.family = InitialStateConfig::Family::mixture;
        st.components = ir.get<int>("components", 3);
      } else if (fam == "checkpoint") {
        st.family = InitialStateConfig::Family::checkpoint;
        st.path = ir.get<std::string>("path", "", true);
      } else {
        errors.push_back("scenario.initial_state.family: unknown family '" + fam + "'");
      }
    }

    if (const json* tj = r.child("task")) {
      detail::Reader tr(*tj, "scenario.task", errors, strict);
      const std::string type = tr.get<std::string>("type", "evolve", true);
      if (type == "evolve") {
        sc.task.kind = TaskConfig::Kind::evolve;
        const std::string pic = tr.get<std::string>("picture", "wave");
        if (pic == "wave")
          sc.task.picture = TaskConfig::Picture::wave;
        else if (pic == "hydro")
          sc.task.picture = TaskConfig::Picture::hydro;
        else if (pic == "both")
          sc.task.picture = TaskConfig::Picture::both;
        else
          errors.push_back("scenario.task.picture: unknown picture '" + pic + "'");
        sc.task.fit_dispersion = tr.get<bool>("fit_dispersion", false);
      } else if (type == "ground_state") {
        sc.task.kind = TaskConfig::Kind::ground_state;
        sc.task.tolerance = tr.get<double>("tolerance", 1e-6);
      } else if (type == "axioms") {
        sc.task.kind = TaskConfig::Kind::axioms;
        sc.task.axioms_with_dynamics = tr.get<bool>("with_dynamics", true);
        if (const json* ms = tr.child("measures", false)) {
          if (ms->is_array()) {
            int i = 0;
            for (const auto& m : *ms)
              sc.task.axiom_measures.push_back(detail::parse_measure(
                  m, sc.metric, errors, strict,
                  "scenario.task.measures[" + std::to_string(i++) + "]"));
          } else {
            errors.push_back("scenario.task.measures: expected an array");
          }
        }
      } else if (type == "scan") {
        sc.task.kind = TaskConfig::Kind::scan;
        const std::string kind = tr.get<std::string>("kind", "", true);
        auto& scan = sc.task.scan;
        if (kind == "superposition") {
          scan.kind = ScanTask::Kind::superposition;
          scan.center_1 = tr.get<std::vector<double>>("center_1", {}, true);
          scan.center_2 = tr.get<std::vector<double>>("center_2", {}, true);
          scan.sigma_sq = tr.get<std::vector<double>>("sigma_sq", {}, true);
          scan.uniform_weight = tr.get<double>("uniform_weight", 0.0);
          scan.amp_1 = tr.get<double>("amp_1", scan.amp_1);
          scan.amp_2 = tr.get<double>("amp_2", scan.amp_2);
          if (const json* legs = tr.child("legs")) {
            int i = 0;
            for (const auto& leg : *legs) {
              const std::string lpath = "scenario.task.legs[" + std::to_string(i++) + "]";
              detail::Reader lr(leg, lpath, errors, strict);
              SuperpositionLeg out;
              out.label = lr.get<std::string>("label", "leg", true);
              out.group = lr.get<std::string>("group", "");
              out.coupling = lr.get<double>("coupling", 0.0);
              if (const json* mj = lr.child("measure"))
                out.measure =
                    detail::parse_measure(*mj, sc.metric, errors, strict, lpath + ".measure");
              scan.superposition_legs.push_back(std::move(out));
            }
          }
        } else if (kind == "galilean") {
          scan.kind = ScanTask::Kind::galilean;
          if (const json* legs = tr.child("legs")) {
            int i = 0;
            for (const auto& leg : *legs) {
              const std::string lpath = "scenario.task.legs[" + std::to_string(i++) + "]";
              detail::Reader lr(leg, lpath, errors, strict);
              GalileanLeg out;
              out.label = lr.get<std::string>("label", "leg", true);
              out.velocity = lr.get<std::vector<double>>("velocity", {}, true);
              out.angle = lr.get<double>("angle", 0.0);
              if (const json* mj = lr.child("measure"))
                out.measure =
                    detail::parse_measure(*mj, sc.metric, errors, strict, lpath + ".measure");
              scan.galilean_legs.push_back(std::move(out));
            }
          }
        } else if (kind == "orientation" || kind == "coupling" || kind == "trap_level") {
          scan.kind = kind == "orientation" ? ScanTask::Kind::orientation
                      : kind == "coupling"  ? ScanTask::Kind::coupling
                                            : ScanTask::Kind::trap_level;
          scan.symmetry.kind = kind == "orientation" ? SymmetryScanSpec::Kind::orientation
                               : kind == "coupling"  ? SymmetryScanSpec::Kind::coupling
                                                     : SymmetryScanSpec::Kind::trap_level;
          scan.symmetry.values = tr.get<std::vector<double>>("values", {}, true);
          scan.symmetry.sigma_major_sq = tr.get<double>("sigma_major_sq", 1.0);
          scan.symmetry.sigma_minor_sq = tr.get<double>("sigma_minor_sq", 0.5);
          const std::string fam = tr.get<std::string>("family", "higher_derivative");
          scan.symmetry.family = fam == "anisotropic" ? SymmetryScanSpec::Family::anisotropic
                                                      : SymmetryScanSpec::Family::higher_derivative;
          scan.symmetry.hd_length = tr.get<double>("length", 0.1);
          scan.symmetry.lengths = tr.get<std::vector<double>>("lengths", {});
          scan.symmetry.gs_tol = tr.get<double>("tolerance", 1e-7);
        } else if (kind == "measure_family") {
          scan.kind = ScanTask::Kind::measure_family;
          scan.a_values = tr.get<std::vector<double>>("a_values", {}, true);
          scan.b_values = tr.get<std::vector<double>>("b_values", {}, true);
          scan.c_values = tr.get<std::vector<double>>("c_values", {}, true);
          scan.family_delta = tr.get<double>("delta", 0.5);
          scan.family_epsilon = tr.get<double>("epsilon", 1e-2);
          scan.family_length = tr.get<double>("length", 0.1);
        } else if (kind == "identity_suite") {
          scan.kind = ScanTask::Kind::identity_suite;
          scan.suite_size = tr.get<int>("suite_size", 5);
        } else {
          errors.push_back("scenario.task.kind: unknown scan kind '" + kind + "'");
        }
      } else {
        errors.push_back("scenario.task.type: unknown task '" + type + "'");
      }
    }

    if (const json* ej = r.child("evolve", false)) {
      detail::Reader er(*ej, "scenario.evolve", errors, strict);
      sc.evolve.dt = er.get<double>("dt", 1e-3);
      sc.evolve.steps = er.get<long>("steps", 0);
      sc.evolve.record_every = er.get<long>("record_every", 1);
      const std::string integ = er.get<std::string>("integrator", "split_step");
      if (integ == "split_step")
        sc.evolve.integrator = Integrator::split_step;
      else if (integ == "rk4")
        sc.evolve.integrator = Integrator::rk4;
      else
        errors.push_back("scenario.evolve.integrator: unknown integrator '" + integ + "'");
    }

    if (const json* oj = r.child("output", false)) {
      detail::Reader orr(*oj, "scenario.output", errors, strict);
      sc.output.directory = orr.get<std::string>("directory", "out");
      sc.output.csv = orr.get<bool>("csv", true);
      sc.output.summary = orr.get<bool>("summary", true);
      sc.output.checkpoint_every = orr.get<long>("checkpoint_every", 0);
    }

    if (const json* cj = r.child("checks", false)) {
      if (cj->is_array()) {
        int i = 0;
        for (const auto& c : *cj) {
          detail::Reader cr(c, "scenario.checks[" + std::to_string(i++) + "]", errors, strict);
          CheckConfig out;
          out.name = cr.get<std::string>("name", "check", true);
          out.kind = cr.get<std::string>("kind", "", true);
          out.target = cr.get<std::string>("target", "");
          out.value = cr.get<double>("value", 0.0);
          out.tolerance = cr.get<double>("tolerance", 0.0);
          out.measure_index = cr.get<long>("measure_index", 0);
          out.axiom = cr.get<std::string>("axiom", "");
          out.expect = cr.get<std::string>("expect", "");
          sc.checks.push_back(std::move(out));
        }
      } else {
        errors.push_back("scenario.checks: expected an array");
      }
    }
  }

  // structural validation beyond types; each item reports independently so
  // the caller sees every problem at once
  if (errors.empty()) {
    auto guarded = [&errors](auto&& fn) {
      try {
        fn();
      } catch (const error& e) {
        errors.push_back(std::string("scenario: ") + e.what());
      }
    };
    guarded([&] { sc.metric.validate(); });
    guarded([&] {
      require(sc.grid_spec.axes.size() == sc.metric.axis_count(), errc::validation,
              "grid axis count " + std::to_string(sc.grid_spec.axes.size()) +
                  " does not match metric N*d = " + std::to_string(sc.metric.axis_count()));
    });
    guarded([&] { sc.action.validate(); });
    guarded([&] {
      if (sc.evolve.steps > 0) sc.evolve.validate();
    });
  }
  if (!errors.empty()) return std::nullopt;
  return sc;
}

/// Throwing wrapper: the full error list rides in the exception message.
inline Scenario parse_scenario(const std::string& text, bool strict = true) {
  std::vector<std::string> errors;
  auto sc = parse_scenario_collect(text, errors, strict);
  if (!sc) {
    std::string msg = "scenario validation failed:";
    for (const auto& e : errors) msg += "\n  - " + e;
    fail(errc::validation, msg);
  }
  return *sc;
}

/// Canonical re-serialization of a parsed scenario; the round-trip identity
/// and the scenario hash both ride on this.
inline json scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["seed"] = sc.seed;
  {
    json axes = json::array();
    for (const auto& ax : sc.grid_spec.axes) {
      json a;
      a["extent"] = ax.extent;
      a["points"] = ax.points;
      axes.push_back(a);
    }
    j["grid"]["axes"] = axes;
  }
  j["metric"]["particles"] = sc.metric.particles;
  j["metric"]["dimensions"] = sc.metric.dimensions;
  j["metric"]["masses"] = sc.metric.masses;
  j["action"]["hbar"] = sc.action.hbar;
  if (sc.action.lambda) j["action"]["lambda"] = *sc.action.lambda;
  j["action"]["measure"] = detail::measure_to_json(sc.action.measure);
  j["action"]["potential"] = detail::potential_to_json(sc.action.potential);
  j["evolve"]["dt"] = sc.evolve.dt;
  j["evolve"]["steps"] = sc.evolve.steps;
  j["evolve"]["record_every"] = sc.evolve.record_every;
  j["evolve"]["integrator"] =
      sc.evolve.integrator == Integrator::split_step ? "split_step" : "rk4";
  return j;
}

inline std::uint64_t scenario_hash(const Scenario& sc) {
  const std::string dump = scenario_to_json(sc).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

} // namespace fisherflow::runner
