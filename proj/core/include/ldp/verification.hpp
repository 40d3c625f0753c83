#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ldp {

// One row of the `check` report. `value` is the measured error (or margin)
// compared against `tolerance`.
struct CheckResult {
    std::string name;
    bool pass        = false;
    double value     = 0.0;
    double tolerance = 0.0;
    std::string detail;
    double ms = 0.0;
};

enum class CheckLevel { Quick, Full };

// Gradient checks, invariant suites and (at Full) oracle convergence and
// determinism runs. Mock backends only; no external state.
std::vector<CheckResult> run_verification(CheckLevel level);

void print_check_table(std::ostream& out, const std::vector<CheckResult>& results);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace ldp
