#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stoshield {

enum class Suite { Fast, Full };

Suite parse_suite(const std::string& name);

struct CheckResult {
  std::string module;
  std::string invariant;
  bool passed = false;
  std::string detail;
};

/// Invariant checks across all modules. The fast suite sticks to analytic
/// results and short simulations; the full suite adds the ensemble fits and
/// the Monte Carlo reproductions.
std::vector<CheckResult> run_suite(Suite suite, std::size_t threads = 0);

/// One "PASS|FAIL module/invariant: detail" line per check plus a summary.
/// Returns true when every check passed.
bool print_report(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace stoshield
