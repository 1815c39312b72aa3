#ifndef SAFERL_VERIFY_HPP_
#define SAFERL_VERIFY_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace saferl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// estq, scores, maxrect, invariance, normalization.
const std::vector<std::string>& verify_suite_names();

// Runs one oracle suite. Throws ConfigError for an unknown name.
std::vector<CheckResult> run_verify_suite(const std::string& name,
                                          std::uint64_t seed = 2024);

std::string format_check_table(const std::vector<CheckResult>& results);

}  // namespace saferl

#endif  // SAFERL_VERIFY_HPP_
