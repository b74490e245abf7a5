#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adaptfeat::tools {

struct CheckResult {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct SuiteReport {
  std::string suite;
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool passed() const;
  std::string to_json() const;
};

const std::vector<std::string>& suite_names();

/// Throws std::invalid_argument for an unknown suite.
SuiteReport run_suite(const std::string& suite, int trials, std::uint64_t seed);

}  // namespace adaptfeat::tools
