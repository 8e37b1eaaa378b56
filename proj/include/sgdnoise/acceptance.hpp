#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace sgdnoise {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // measured value against its pinned tolerance
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const;
};

struct AcceptanceOptions {
  std::size_t threads = 1;
};

inline constexpr int kCriterionCount = 9;

/// Runs one acceptance criterion (1..9). Never throws for a failed check;
/// an exception inside a criterion is reported as a failed check.
CriterionResult run_criterion(int id, const AcceptanceOptions& options = {});

/// One line per criterion ("criterion N PASS|FAIL title ..."), followed by
/// indented lines for each check.
void print_criterion(std::ostream& os, const CriterionResult& result);

/// Runs the requested criteria (all when empty), printing as it goes.
/// Returns true when every criterion passed.
bool run_acceptance(std::ostream& os, const std::vector<int>& ids = {}, const AcceptanceOptions& options = {});

}  // namespace sgdnoise
