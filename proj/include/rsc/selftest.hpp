#pragma once

// Statistical and structural checks that need no dataset and finish in
// seconds. Shared by `rsc selftest` and the acceptance binary.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rsc {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

CheckResult check_dither_bound(std::uint64_t seed = 1);
CheckResult check_uniform_error(std::uint64_t seed = 2);
CheckResult check_common_randomness(std::uint64_t seed = 3);
CheckResult check_drop_law(std::uint64_t seed = 4);
CheckResult check_channel_calibration(std::uint64_t seed = 5);
CheckResult check_gradients(std::uint64_t seed = 6);
CheckResult check_rate_expectation(std::uint64_t seed = 7);
CheckResult check_rateless_consistency(std::uint64_t seed = 8);
CheckResult check_baseline_reduction(std::uint64_t seed = 11);

// Every check above, in id order.
std::vector<CheckResult> run_selftest();

// "PASS [id] name (detail, 1.23 s)".
std::string format_result(const CheckResult& r);

}  // namespace rsc
