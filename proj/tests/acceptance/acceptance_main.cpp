// Acceptance gate: runs the bundled verification suite (one scenario per
// criterion, tolerances pinned inside the scenario files) and prints one
// verdict line per criterion.

#include <cstdio>

#include "fisherflow/runner/run.hpp"

#ifndef FISHERFLOW_SUITE_DIR
#define FISHERFLOW_SUITE_DIR "scenarios/paper_suite"
#endif

int main() {
  try {
    const auto outcome =
        fisherflow::runner::verify_suite(FISHERFLOW_SUITE_DIR, "acceptance_out");
    std::printf("%d/%d criteria passed\n", outcome.passed, outcome.scenarios);
    return outcome.exit_code;
  } catch (const fisherflow::error& e) {
    std::fprintf(stderr, "acceptance suite failed to run: %s\n", e.what());
    return 3;
  }
}
