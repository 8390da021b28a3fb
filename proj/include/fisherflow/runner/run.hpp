#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fisherflow/runner/checkpoint.hpp"
#include "fisherflow/runner/scenario.hpp"
#include "fisherflow/version.hpp"

namespace fisherflow::runner {

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = true;
};

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunRecord {
  std::uint64_t scenario_hash = 0;
  std::string started_at, finished_at;
  std::string version = version_string;
  std::uint64_t seed = 0;
  std::vector<std::string> files;
};

struct RunResult {
  RunRecord record;
  json summary;
  int exit_code = 0; // 0 ok, 2 validation, 3 numerical, 4 check failure
  std::vector<CheckOutcome> checks;
};

namespace detail {

inline std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns) : os_(path) {
    require(os_.good(), errc::io, "cannot open " + path + " for writing");
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) os_ << ',';
      os_ << columns[i];
    }
    os_ << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) os_ << ',';
      os_ << fmt_double(values[i]);
    }
    os_ << '\n';
    os_.flush();
  }

private:
  std::ofstream os_;
};

inline std::uint64_t config_hash(const Scenario& sc) {
  json j;
  j["grid"] = scenario_to_json(sc)["grid"];
  j["metric"] = scenario_to_json(sc)["metric"];
  j["action"] = scenario_to_json(sc)["action"];
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct InitialData {
  std::optional<ComplexField> wave;
  std::optional<HydroState> hydro;
  double time_offset = 0.0;
  long step_offset = 0;
};

inline RealField initial_density(const Scenario& sc, const GridPtr& grid, std::uint64_t seed) {
  const auto& st = sc.initial_state;
  switch (st.family) {
    case InitialStateConfig::Family::gaussian:
      return gaussian_density(grid, st.center, st.sigma_sq);
    case InitialStateConfig::Family::mixture: {
      std::mt19937_64 rng(seed);
      MixtureOptions opt;
      opt.components = st.components;
      opt.center_radius = 1.0;
      opt.sigma_min = 0.8;
      opt.sigma_max = 1.3;
      opt.pedestal_weight = 0.0;
      opt.uniform_weight = 0.05;
      return random_mixture_density(grid, rng, opt);
    }
    default:
      fail(errc::validation, "initial_state: family not usable as a bare density here");
  }
}

inline InitialData build_initial(const Scenario& sc, const GridPtr& grid,
                                 const ActionConfig& cfg, std::uint64_t seed, bool want_wave) {
  const auto& st = sc.initial_state;
  InitialData out;
  switch (st.family) {
    case InitialStateConfig::Family::gaussian: {
      std::vector<double> k = st.momentum;
      if (k.empty()) k.assign(grid->ndim(), 0.0);
      out.wave = gaussian_packet(grid, st.center, st.sigma_sq, k, st.uniform_weight);
      break;
    }
    case InitialStateConfig::Family::coherent: {
      require(cfg.potential.kind == Potential::Kind::harmonic, errc::validation,
              "initial_state: the coherent family needs a harmonic potential");
      require(grid->ndim() == 1, errc::validation,
              "initial_state: the coherent family is one-dimensional");
      const double omega = cfg.potential.omega.at(0);
      const double sigma_sq = cfg.hbar / (2.0 * grid->metric().masses.at(0) * omega);
      out.wave = gaussian_packet(grid, {st.x0}, {sigma_sq}, {0.0});
      break;
    }
    case InitialStateConfig::Family::ground_state: {
      RealField init =
          cfg.potential.kind == Potential::Kind::harmonic
              ? harmonic_ground_density(grid, cfg.potential.omega.at(0), cfg.hbar)
              : [&] {
                  std::mt19937_64 rng(seed);
                  MixtureOptions opt;
                  opt.uniform_weight = 0.05;
                  return random_mixture_density(grid, rng, opt);
                }();
      {
        double volume = 1.0;
        for (std::size_t a = 0; a < grid->ndim(); ++a) volume *= grid->extent(a);
        for (double& x : init) x = 0.999 * x + 1e-3 / volume;
      }
      const GroundStateResult gs = ground_state(cfg, init, st.tolerance);
      out.wave = hydro_to_wave(gs.state, cfg.hbar);
      break;
    }
    case InitialStateConfig::Family::plane_wave: {
      out.wave = plane_wave(grid, st.winding);
      break;
    }
    case InitialStateConfig::Family::mixture: {
      const RealField p = initial_density(sc, grid, seed);
      out.hydro = make_hydro_state(p, RealField(grid));
      if (want_wave) out.wave = hydro_to_wave(*out.hydro, cfg.hbar);
      break;
    }
    case InitialStateConfig::Family::checkpoint: {
      const CheckpointData d = load_checkpoint(st.path);
      out.time_offset = d.time;
      out.step_offset = d.step;
      if (d.config_hash != config_hash(sc) && !sc.checks.empty()) {
        // recorded as a warning later; resumes across configs are allowed
      }
      if (d.kind == "wave")
        out.wave = wave_from_checkpoint(d, grid);
      else
        out.hydro = hydro_from_checkpoint(d, grid);
      break;
    }
  }
  if (want_wave && !out.wave && out.hydro) out.wave = hydro_to_wave(*out.hydro, cfg.hbar);
  if (!want_wave && !out.hydro && out.wave) out.hydro = wave_to_hydro(*out.wave, cfg.hbar);
  return out;
}

inline json scan_result_to_json(const ScanResult& r) {
  json j;
  j["parameter"] = r.parameter;
  j["observable"] = r.observable;
  j["parameter_values"] = r.parameter_values;
  j["observable_values"] = r.observable_values;
  if (!r.fit.coefficients.empty()) {
    j["fit"]["model"] = r.fit.model;
    j["fit"]["coefficients"] = r.fit.coefficients;
    j["fit"]["rel_residual"] = r.fit.rel_residual;
    j["fit"]["ok"] = r.fit.ok;
  }
  for (const auto& [k, v] : r.extras) j["extras"][k] = v;
  return j;
}

inline json axiom_report_to_json(const AxiomReport& r) {
  json j;
  j["measure"] = r.measure;
  for (const auto& c : r.checks) {
    json cj;
    cj["verdict"] = verdict_name(c.verdict);
    cj["defect"] = c.defect;
    cj["method"] = c.method;
    cj["tolerance"] = c.tolerance;
    for (const auto& [k, v] : c.extras) cj["extras"][k] = v;
    j["checks"][axiom_name(c.axiom)] = cj;
  }
  j["all_axioms_pass"] = r.all_axioms_pass();
  if (r.has_dynamics) {
    j["superposition_defect"] = r.superposition_defect;
    j["fisher_baseline"] = r.fisher_baseline;
    j["linear"] = r.linear;
    j["biconditional_holds"] = r.biconditional_holds;
  }
  return j;
}

} // namespace detail

/// Executes one scenario task and writes its outputs. Throws only for
/// failures before any output directory exists; numerical failures inside
/// the task are captured in the summary and exit code.
inline RunResult run(const Scenario& sc, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  Scenario scenario = sc;
  if (opt.out_dir) scenario.output.directory = *opt.out_dir;
  if (opt.seed) scenario.seed = *opt.seed;

  RunResult result;
  result.record.scenario_hash = scenario_hash(scenario);
  result.record.seed = scenario.seed;
  result.record.started_at = detail::iso_now();

  const fs::path out_dir(scenario.output.directory);
  fs::create_directories(out_dir);

  auto emit = [&](const fs::path& p) { result.record.files.push_back(p.string()); };

  try {
    const GridPtr grid = make_grid(scenario.grid_spec, scenario.metric);
    const ActionConfig& cfg = scenario.action;
    const std::uint64_t chash = detail::config_hash(scenario);

    switch (scenario.task.kind) {
      case TaskConfig::Kind::evolve: {
        const bool wave = scenario.task.picture != TaskConfig::Picture::hydro;
        const bool hydro = scenario.task.picture != TaskConfig::Picture::wave;
        detail::InitialData init = detail::build_initial(scenario, grid, cfg, scenario.seed, wave);

        std::optional<Trajectory> wave_traj, hydro_traj;
        if (wave) wave_traj = evolve_wave(*init.wave, cfg, scenario.evolve);
        if (hydro) {
          EvolveConfig hev = scenario.evolve;
          hev.integrator = Integrator::rk4;
          hydro_traj = evolve_hydro(*init.hydro, cfg, hev);
        }
        const Trajectory& lead = wave ? *wave_traj : *hydro_traj;

        std::vector<std::string> cols = {"time", "norm", "energy"};
        for (std::size_t a = 0; a < grid->ndim(); ++a) {
          cols.push_back("mean_" + std::to_string(a));
          cols.push_back("var_" + std::to_string(a));
        }
        if (wave && hydro) cols.push_back("picture_distance");

        std::optional<detail::CsvWriter> csv;
        if (scenario.output.csv) {
          csv.emplace((out_dir / "timeseries.csv").string(), cols);
          emit(out_dir / "timeseries.csv");
        }

        double norm0 = 0.0, e0 = 0.0, norm_dev = 0.0, e_dev = 0.0, dist_max = 0.0;
        json final_obs;
        for (std::size_t r = 0; r < lead.records(); ++r) {
          const double t = init.time_offset + lead.times[r];
          double n, e;
          std::vector<double> row = {t};
          if (wave) {
            n = norm(wave_traj->wave[r]);
            e = energy(wave_traj->wave[r], cfg);
          } else {
            n = norm(hydro_traj->hydro[r]);
            e = energy(hydro_traj->hydro[r], cfg);
          }
          row.push_back(n);
          row.push_back(e);
          for (std::size_t a = 0; a < grid->ndim(); ++a) {
            const double mean = wave ? moment(wave_traj->wave[r], a, 1)
                                     : moment(hydro_traj->hydro[r], a, 1);
            const double var = wave ? moment(wave_traj->wave[r], a, 2)
                                    : moment(hydro_traj->hydro[r], a, 2);
            row.push_back(mean);
            row.push_back(var);
            if (r + 1 == lead.records()) {
              final_obs["mean_" + std::to_string(a)] = mean;
              final_obs["var_" + std::to_string(a)] = var;
            }
          }
          if (wave && hydro) {
            const double dist =
                l2_distance(density_of(wave_traj->wave[r]), hydro_traj->hydro[r].p);
            dist_max = std::max(dist_max, dist);
            row.push_back(dist);
          }
          if (r == 0) {
            norm0 = n;
            e0 = e;
          }
          norm_dev = std::max(norm_dev, std::abs(n - norm0));
          e_dev = std::max(e_dev, std::abs(e - e0) / std::max(std::abs(e0), 1e-300));
          if (r + 1 == lead.records()) {
            final_obs["time"] = t;
            final_obs["norm"] = n;
            final_obs["energy"] = e;
          }
          if (csv) csv->row(row);
        }
        result.summary["final"] = final_obs;
        result.summary["drift"]["norm_max_abs_dev"] = norm_dev;
        result.summary["drift"]["energy_max_rel_dev"] = e_dev;
        if (wave && hydro) result.summary["picture_distance_max"] = dist_max;
        if (scenario.task.fit_dispersion && wave)
          result.summary["dispersion"] = detail::scan_result_to_json(dispersion_fit(*wave_traj));
        {
          json warn = json::array();
          for (const auto& w : lead.warnings) warn.push_back(w);
          result.summary["warnings"] = warn;
        }

        if (scenario.output.checkpoint_every > 0) {
          const long every = scenario.output.checkpoint_every;
          const Trajectory& traj = lead;
          const long rec = traj.evolve_config.record_every;
          for (std::size_t r = 0; r < traj.records(); ++r) {
            const long step = static_cast<long>(r) * rec;
            if (step == 0 || step % every != 0) continue;
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_step_%08ld.ffck",
                          init.step_offset + step);
            const fs::path p = out_dir / name;
            if (wave)
              save_checkpoint(p.string(), wave_traj->wave[r], init.time_offset + traj.times[r],
                              init.step_offset + step, chash);
            else
              save_checkpoint(p.string(), hydro_traj->hydro[r], init.time_offset + traj.times[r],
                              init.step_offset + step, chash);
            emit(p);
          }
        }
        break;
      }

      case TaskConfig::Kind::ground_state: {
        RealField init = detail::initial_density(scenario, grid, scenario.seed);
        const GroundStateResult gs = ground_state(cfg, init, scenario.task.tolerance);
        result.summary["energy"] = gs.energy;
        result.summary["residual"] = gs.residual;
        result.summary["iterations"] = gs.iterations;
        for (std::size_t a = 0; a < grid->ndim(); ++a) {
          result.summary["mean_" + std::to_string(a)] = moment(gs.state, a, 1);
          result.summary["var_" + std::to_string(a)] = moment(gs.state, a, 2);
        }
        if (scenario.output.checkpoint_every > 0) {
          const fs::path p = out_dir / "ground_state.ffck";
          save_checkpoint(p.string(), gs.state, 0.0, 0, chash);
          emit(p);
        }
        break;
      }

      case TaskConfig::Kind::axioms: {
        std::vector<MeasureSpec> measures = scenario.task.axiom_measures;
        if (measures.empty()) measures.push_back(cfg.measure);
        json reports = json::array();
        for (const auto& m : measures)
          reports.push_back(detail::axiom_report_to_json(
              classify(m, AxiomSuiteConfig{}, scenario.task.axioms_with_dynamics)));
        result.summary["axioms"] = reports;
        break;
      }

      case TaskConfig::Kind::scan: {
        const ScanTask& scan = scenario.task.scan;
        switch (scan.kind) {
          case ScanTask::Kind::identity_suite: {
            std::mt19937_64 rng(scenario.seed + 7ull);
            MixtureOptions mo;
            mo.uniform_weight = 0.02;
            mo.pedestal_weight = 0.0;
            double qp_worst = 0.0, fd_worst = 0.0;
            for (int i = 0; i < scan.suite_size; ++i) {
              const RealField p = random_mixture_density(grid, rng, mo);
              const RealField q = quantum_potential(p, grid->metric(), cfg.hbar);
              const RealField vd = variational_derivative(
                  MeasureSpec::fisher(grid->metric()), p);
              const double lam = cfg.hbar * cfg.hbar / 8.0;
              double qmax = 0.0, diff = 0.0;
              for (std::size_t s = 0; s < q.size(); ++s) {
                qmax = std::max(qmax, std::abs(q[s]));
                diff = std::max(diff, std::abs(q[s] - lam * vd[s]));
              }
              qp_worst = std::max(qp_worst, diff / qmax);
              fd_worst = std::max(fd_worst,
                                  fd_check(cfg.measure, p, 4, scenario.seed + 100 + i).max_rel_error);
            }
            result.summary["qp_identity_max_rel_error"] = qp_worst;
            result.summary["fd_max_rel_error"] = fd_worst;
            result.summary["suite_size"] = scan.suite_size;
            break;
          }
          case ScanTask::Kind::superposition: {
            const ComplexField psi1 =
                gaussian_packet(grid, scan.center_1, scan.sigma_sq,
                                std::vector<double>(grid->ndim(), 0.0), scan.uniform_weight);
            const ComplexField psi2 =
                gaussian_packet(grid, scan.center_2, scan.sigma_sq,
                                std::vector<double>(grid->ndim(), 0.0), scan.uniform_weight);
            json legs = json::array();
            std::map<std::string, std::vector<std::pair<double, double>>> groups;
            for (const auto& leg : scan.superposition_legs) {
              ActionConfig leg_cfg = cfg;
              leg_cfg.measure = leg.measure;
              const double defect = superposition_defect(psi1, psi2, scan.amp_1, scan.amp_2,
                                                         leg_cfg, scenario.evolve);
              json lj;
              lj["label"] = leg.label;
              lj["coupling"] = leg.coupling;
              lj["defect"] = defect;
              legs.push_back(lj);
              result.summary["defects"][leg.label] = defect;
              if (!leg.group.empty() && leg.coupling > 0.0)
                groups[leg.group].emplace_back(leg.coupling, defect);
            }
            result.summary["legs"] = legs;
            for (auto& [label, pts] : groups) {
              if (pts.size() < 2) continue;
              std::sort(pts.begin(), pts.end());
              const auto& lo = pts.front();
              const auto& hi = pts.back();
              if (lo.second > 0.0 && hi.second > 0.0)
                result.summary["slopes"][label] =
                    std::log(hi.second / lo.second) / std::log(hi.first / lo.first);
            }
            break;
          }
          case ScanTask::Kind::galilean: {
            detail::InitialData init =
                detail::build_initial(scenario, grid, cfg, scenario.seed, true);
            for (const auto& leg : scan.galilean_legs) {
              ActionConfig leg_cfg = cfg;
              leg_cfg.measure = leg.measure;
              const double defect = galilean_commutator_defect(*init.wave, leg_cfg,
                                                               scenario.evolve, leg.velocity,
                                                               leg.angle);
              result.summary["defects"][leg.label] = defect;
            }
            break;
          }
          case ScanTask::Kind::orientation:
          case ScanTask::Kind::coupling:
          case ScanTask::Kind::trap_level: {
            result.summary["scan"] =
                detail::scan_result_to_json(symmetry_shift_scan(cfg, grid, scan.symmetry));
            break;
          }
          case ScanTask::Kind::measure_family: {
            const FamilyScanResult fam = scan_measure_family(
                scan.a_values, scan.b_values, scan.c_values, scan.family_delta,
                scan.family_epsilon, scan.family_length);
            json members = json::array();
            for (const auto& m : fam.members) {
              json mj;
              mj["a"] = m.a;
              mj["b"] = m.b;
              mj["c"] = m.c;
              mj["all_pass"] = m.all_pass;
              members.push_back(mj);
            }
            result.summary["members"] = members;
            result.summary["uniqueness_holds"] = fam.uniqueness_holds;
            break;
          }
        }
        break;
      }
    }
  } catch (const error& e) {
    result.summary["error"]["code"] = errc_name(e.code());
    result.summary["error"]["message"] = e.what();
    result.exit_code = e.code() == errc::validation ? 2 : 3;
  }

  if (scenario.output.summary) {
    const fs::path p = out_dir / "summary.json";
    std::ofstream os(p);
    os << result.summary.dump(2) << '\n';
    emit(p);
  }
  result.record.finished_at = detail::iso_now();
  {
    const fs::path p = out_dir / "run_record.json";
    json rec;
    rec["scenario_hash"] = result.record.scenario_hash;
    rec["started_at"] = result.record.started_at;
    rec["finished_at"] = result.record.finished_at;
    rec["version"] = result.record.version;
    rec["seed"] = result.record.seed;
    rec["files"] = result.record.files;
    std::ofstream os(p);
    os << rec.dump(2) << '\n';
  }
  return result;
}

namespace detail {

inline const json* resolve_path(const json& j, const std::string& path) {
  const json* cur = &j;
  std::size_t pos = 0;
  while (pos < path.size()) {
    std::size_t dot = path.find('.', pos);
    if (dot == std::string::npos) dot = path.size();
    const std::string token = path.substr(pos, dot - pos);
    pos = dot + 1;
    if (cur->is_array()) {
      char* end = nullptr;
      const long idx = std::strtol(token.c_str(), &end, 10);
      if (end == token.c_str() || idx < 0 || static_cast<std::size_t>(idx) >= cur->size())
        return nullptr;
      cur = &(*cur)[static_cast<std::size_t>(idx)];
    } else if (cur->is_object() && cur->contains(token)) {
      cur = &cur->at(token);
    } else {
      return nullptr;
    }
  }
  return cur;
}

inline bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa.good() || !fb.good()) return false;
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return sa == sb;
}

} // namespace detail

/// Evaluates the scenario's checks against a finished run. The determinism
/// and resume checks re-run the scenario into sibling output directories.
inline std::vector<CheckOutcome> evaluate_checks(const Scenario& sc, const RunResult& result) {
  std::vector<CheckOutcome> outcomes;
  for (const auto& chk : sc.checks) {
    CheckOutcome out;
    out.name = chk.name;
    auto numeric_target = [&](double& value) {
      const json* node = detail::resolve_path(result.summary, chk.target);
      if (!node || !node->is_number()) {
        out.detail = "target '" + chk.target + "' not found or not numeric";
        return false;
      }
      value = node->get<double>();
      return true;
    };

    if (chk.kind == "less_than") {
      double v;
      if (numeric_target(v)) {
        out.passed = v < chk.value;
        out.detail = chk.target + " = " + detail::fmt_double(v) + (out.passed ? " < " : " !< ") +
                     detail::fmt_double(chk.value);
      }
    } else if (chk.kind == "greater_than") {
      double v;
      if (numeric_target(v)) {
        out.passed = v > chk.value;
        out.detail = chk.target + " = " + detail::fmt_double(v) + (out.passed ? " > " : " !> ") +
                     detail::fmt_double(chk.value);
      }
    } else if (chk.kind == "within") {
      double v;
      if (numeric_target(v)) {
        out.passed = std::abs(v - chk.value) <= chk.tolerance;
        out.detail = chk.target + " = " + detail::fmt_double(v) + " vs " +
                     detail::fmt_double(chk.value) + " +- " + detail::fmt_double(chk.tolerance);
      }
    } else if (chk.kind == "within_rel") {
      double v;
      if (numeric_target(v)) {
        out.passed = std::abs(v - chk.value) <= chk.tolerance * std::abs(chk.value);
        out.detail = chk.target + " = " + detail::fmt_double(v) + " vs " +
                     detail::fmt_double(chk.value) + " rel " + detail::fmt_double(chk.tolerance);
      }
    } else if (chk.kind == "flag_true") {
      const json* node = detail::resolve_path(result.summary, chk.target);
      out.passed = node && node->is_boolean() && node->get<bool>();
      out.detail = chk.target + (out.passed ? " = true" : " != true");
    } else if (chk.kind == "expect_verdict") {
      const json* node = detail::resolve_path(
          result.summary, "axioms." + std::to_string(chk.measure_index) + ".checks." + chk.axiom +
                              ".verdict");
      if (!node) {
        out.detail = "no verdict for measure " + std::to_string(chk.measure_index) + " axiom " +
                     chk.axiom;
      } else {
        const std::string verdict = node->get<std::string>();
        const bool pass_like = verdict == "pass" || verdict == "structural_pass";
        out.passed = chk.expect == "fail" ? verdict == "fail" : pass_like;
        out.detail = chk.axiom + " verdict = " + verdict + ", expected " + chk.expect;
      }
    } else if (chk.kind == "determinism") {
      Scenario redo = sc;
      redo.output.directory = sc.output.directory + "_determinism_redo";
      const RunResult second = run(redo);
      (void)second;
      const bool csv_same =
          detail::files_identical(sc.output.directory + "/timeseries.csv",
                                  redo.output.directory + "/timeseries.csv");
      const bool sum_same = detail::files_identical(sc.output.directory + "/summary.json",
                                                    redo.output.directory + "/summary.json");
      out.passed = csv_same && sum_same;
      out.detail = std::string("rerun byte-identical: csv=") + (csv_same ? "yes" : "no") +
                   " summary=" + (sum_same ? "yes" : "no");
    } else if (chk.kind == "resume") {
      require(sc.task.kind == TaskConfig::Kind::evolve, errc::validation,
              "resume check needs an evolve task");
      const long steps = sc.evolve.steps;
      const long half = steps / 2;
      Scenario a = sc;
      a.output.directory = sc.output.directory + "_resume_a";
      a.output.checkpoint_every = half;
      a.checks.clear();
      run(a);
      Scenario b = sc;
      b.output.directory = sc.output.directory + "_resume_b";
      b.output.checkpoint_every = half;
      b.initial_state = InitialStateConfig{};
      b.initial_state.family = InitialStateConfig::Family::checkpoint;
      char mid_name[64];
      std::snprintf(mid_name, sizeof mid_name, "checkpoint_step_%08ld.ffck", half);
      b.initial_state.path = a.output.directory + "/" + mid_name;
      b.evolve.steps = steps - half;
      b.checks.clear();
      run(b);
      char fin_name[64];
      std::snprintf(fin_name, sizeof fin_name, "checkpoint_step_%08ld.ffck", steps);
      const CheckpointData full = load_checkpoint(a.output.directory + "/" + fin_name);
      const CheckpointData resumed = load_checkpoint(b.output.directory + "/" + fin_name);
      double worst = 0.0;
      if (full.payload.size() != resumed.payload.size()) {
        out.detail = "payload size mismatch";
      } else {
        for (std::size_t i = 0; i < full.payload.size(); ++i)
          worst = std::max(worst, std::abs(full.payload[i] - resumed.payload[i]));
        const double tol = chk.tolerance > 0.0 ? chk.tolerance : 1e-12;
        out.passed = worst <= tol;
        out.detail = "resume max |delta| = " + detail::fmt_double(worst) + " vs " +
                     detail::fmt_double(tol);
      }
    } else {
      out.detail = "unknown check kind '" + chk.kind + "'";
    }
    outcomes.push_back(std::move(out));
  }
  return outcomes;
}

struct SuiteOutcome {
  int exit_code = 0;
  int scenarios = 0, passed = 0;
};

/// Runs every scenario file in a directory (sorted by name), evaluates its
/// checks, and prints one verdict line per scenario plus per-check details.
inline SuiteOutcome verify_suite(const std::string& dir, const std::string& out_base,
                                 bool strict = true) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), errc::validation, "verify-suite: no scenario files in " + dir);

  SuiteOutcome suite;
  for (const auto& file : files) {
    ++suite.scenarios;
    std::ifstream is(file);
    const std::string text((std::istreambuf_iterator<char>(is)),
                           std::istreambuf_iterator<char>());
    Scenario sc;
    try {
      sc = parse_scenario(text, strict);
    } catch (const error& e) {
      std::printf("[FAIL] %s — %s\n", file.filename().c_str(), e.what());
      suite.exit_code = std::max(suite.exit_code, 2);
      continue;
    }
    sc.output.directory = out_base + "/" + file.stem().string();
    RunResult result = run(sc);
    if (result.exit_code != 0) {
      std::printf("[FAIL] %s — task error: %s\n", sc.name.c_str(),
                  result.summary.contains("error")
                      ? result.summary["error"]["message"].get<std::string>().c_str()
                      : "unknown");
      suite.exit_code = std::max(suite.exit_code, result.exit_code);
      continue;
    }
    const std::vector<CheckOutcome> checks = evaluate_checks(sc, result);
    bool all = true;
    for (const auto& c : checks) all = all && c.passed;
    std::printf("[%s] %s\n", all ? "PASS" : "FAIL", sc.name.c_str());
    for (const auto& c : checks)
      std::printf("    %s %s: %s\n", c.passed ? "ok " : "BAD", c.name.c_str(), c.detail.c_str());
    std::fflush(stdout);
    if (all)
      ++suite.passed;
    else
      suite.exit_code = std::max(suite.exit_code, 4);
  }
  return suite;
}

} // namespace fisherflow::runner
