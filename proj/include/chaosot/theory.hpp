#pragma once

// Numerical checks of the summary-space Wasserstein bounds, the noise
// decompositions and the optimal linear summary.

#include <cstdint>
#include <string>
#include <vector>

namespace chaosot {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;

  double margin() const { return bound - measured; }
};

struct TheoryReport {
  std::vector<CheckResult> checks;

  bool all_pass() const;
  const CheckResult* find(const std::string& name) const;
  /// check,measured,bound,margin,pass
  std::string csv() const;
};

// Each check returns measured / bound pairs; `measured <= bound` passes.
CheckResult check_p1_one_step_bound(std::uint64_t seed);      // worst (lhs - rhs)
CheckResult check_p2_kstep_bound(std::uint64_t seed);         // worst (lhs - rhs), k <= 3
CheckResult check_p3_general_bound(std::uint64_t seed);       // worst (lhs - rhs)
CheckResult check_p4_general_reduction(std::uint64_t seed);   // worst |lhs - L^p rhs|
CheckResult check_p5_mse_noise(std::uint64_t seed);           // relative decomposition error
CheckResult check_p5_slope(std::uint64_t seed);               // |slope - 4|
CheckResult check_p6_wasserstein_noise(std::uint64_t seed);   // worst W2 / (sigma sqrt d) - 1
CheckResult check_p7_forgetting(std::uint64_t seed);          // |rate - 0.5| / 0.5
CheckResult check_p8_summary_forgetting(std::uint64_t seed);  // worst (lhs - L rhs)
CheckResult check_p9_linear_summary(std::uint64_t seed);      // worst (lhs - L^2 sigma_1(C_T))
CheckResult check_p9_trace_identity(std::uint64_t seed);      // worst |tr(C_T) - exact OT|
CheckResult check_m1_histogram_range(std::uint64_t seed);     // distance outside [0, 2]
CheckResult check_m2_metric_determinism(std::uint64_t seed);  // non-reproducible or negative count

TheoryReport theory_suite(std::uint64_t seed);

}  // namespace chaosot
