#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace polopt {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Suites: identities | rates | fa-errors | all. Throws InvalidInput for an
// unknown suite.
std::vector<CheckResult> verify(const std::string& suite);

// One line per check; returns true when every check passed.
bool print_report(std::ostream& out, const std::vector<CheckResult>& checks);

}  // namespace polopt
