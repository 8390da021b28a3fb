#include <doctest.h>

#include "fisherflow/axioms.hpp"

using namespace fisherflow;

namespace {

Metric metric_2d() { return Metric{1, 2, {1.0}}; }

} // namespace

TEST_CASE("Fisher passes all six constraints with tiny numerical defects") {
  auto report = classify(MeasureSpec::fisher(metric_2d()), {}, /*with_dynamics=*/false);
  CHECK(report.all_axioms_pass());
  for (const auto& c : report.checks) {
    if (c.method == "numerical") CHECK(c.defect < 1e-6);
  }
  CHECK(report.check(Axiom::locality).verdict == Verdict::structural_pass);
  CHECK(report.check(Axiom::ahd).verdict == Verdict::structural_pass);
}

TEST_CASE("anisotropic measure fails exactly rotation invariance among numerical axioms") {
  auto m = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({1.0, 2.0}));
  auto report = classify(m, {}, false);
  CHECK(report.check(Axiom::rotation_invariance).verdict == Verdict::fail);
  CHECK(report.check(Axiom::rotation_invariance).defect > 1e-2);
  CHECK(report.check(Axiom::positivity).verdict == Verdict::pass);
  CHECK(report.check(Axiom::homogeneity).verdict == Verdict::pass);
  CHECK(report.check(Axiom::separability).verdict == Verdict::pass);
  CHECK(report.check(Axiom::ahd).verdict == Verdict::structural_pass);
  CHECK(report.check(Axiom::locality).verdict == Verdict::structural_pass);
}

TEST_CASE("higher-derivative measure fails AHD structurally and separability numerically") {
  auto m = MeasureSpec::higher_derivative(1e-2, 0.1, metric_2d());
  auto report = classify(m, {}, false);
  const auto& ahd = report.check(Axiom::ahd);
  CHECK(ahd.verdict == Verdict::fail);
  CHECK(ahd.extras.at("max_derivative_order") == 4);

  const auto& sep = report.check(Axiom::separability);
  CHECK(sep.verdict == Verdict::fail);
  CHECK(sep.extras.at("cross_term_mean") > 0.0); // predicted sign: +2 eps L^2 I_F I_F
  CHECK(sep.extras.at("cross_term_rel_mismatch") < 1e-2);

  CHECK(report.check(Axiom::rotation_invariance).verdict == Verdict::pass);
  CHECK(report.check(Axiom::positivity).verdict == Verdict::pass);
}

TEST_CASE("a weighted sum with a zero coefficient reports exactly like Fisher") {
  auto fisher = MeasureSpec::fisher(metric_2d());
  auto ws = MeasureSpec::weighted_sum(
      {{1.0, fisher}, {0.0, MeasureSpec::higher_derivative(1e-2, 0.1, metric_2d())}});
  auto a = classify(fisher, {}, false);
  auto b = classify(ws, {}, false);
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    CHECK(a.checks[i].verdict == b.checks[i].verdict);
    CHECK(a.checks[i].defect == b.checks[i].defect);
  }
}

TEST_CASE("reports are deterministic for a fixed suite seed") {
  auto m = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({1.0, 1.5}));
  auto a = classify(m, {}, false);
  auto b = classify(m, {}, false);
  for (std::size_t i = 0; i < a.checks.size(); ++i) CHECK(a.checks[i].defect == b.checks[i].defect);

  AxiomSuiteConfig other;
  other.seed = 777;
  auto c = classify(m, other, false);
  CHECK(c.check(Axiom::rotation_invariance).verdict == Verdict::fail); // verdicts robust to seed
}

TEST_CASE("axioms needing two axes reject one-axis measures") {
  auto m1 = MeasureSpec::fisher(Metric{1, 1, {1.0}});
  CHECK_THROWS_AS(check_axiom(m1, Axiom::rotation_invariance), error);
  CHECK_THROWS_AS(check_axiom(m1, Axiom::separability), error);
  CHECK(check_axiom(m1, Axiom::positivity).verdict == Verdict::pass);
}

TEST_CASE("classify runs the dynamical linearity probe") {
  auto m = MeasureSpec::anisotropic_fisher(SymMatrix::diagonal({1.0, 1.5}));
  auto report = classify(m);
  CHECK(report.has_dynamics);
  CHECK(!report.linear);
  CHECK(report.superposition_defect > 10.0 * report.fisher_baseline);
  CHECK(report.biconditional_holds);
}

TEST_CASE("family scan: all axioms pass exactly when the non-Fisher weights vanish") {
  auto fam = scan_measure_family({1.0}, {0.0, 0.5}, {0.0, 0.5}, 0.5, 1e-2, 0.1);
  CHECK(fam.uniqueness_holds);
  for (const auto& member : fam.members)
    CHECK(member.all_pass == (member.b == 0.0 && member.c == 0.0));
}
