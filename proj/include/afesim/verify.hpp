// Property suites shared by the CLI and the acceptance runner.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afesim/rdac.hpp"
#include "afesim/sar_adc.hpp"

namespace afesim {

struct AdcVerifyReport {
  int grid_points = 0;
  int grid_mismatches = 0;
  int random_cases = 0;
  int random_mismatches = 0;
  int monotone_points = 0;
  int monotone_violations = 0;
  int cm_cases = 0;
  int cm_changes = 0;
  std::string first_failure;

  bool ok() const { return grid_mismatches == 0 && random_mismatches == 0 && monotone_violations == 0 && cm_changes == 0; }
};

/// convert() against ideal_quantize() on a mid-bin grid and on random inputs,
/// plus monotonicity and common-mode insensitivity (+/- cm_shift volts).
AdcVerifyReport verify_adc(const AdcConfig& cfg, int grid_points = 4096, int random_cases = 100000,
                           uint64_t seed = 1, double cm_shift = 0.1);

struct RdacCornerSummary {
  CornerName corner = CornerName::Typical;
  int seeds = 0;
  int failures = 0;
  double min_step = 0.0;
  double max_step = 0.0;
  double min_span = 0.0;
  double max_span = 0.0;
  double fine_mean_step = 0.0;  // mean over seeds of the mean step 159..254
  std::string first_failure;
};

struct RdacVerifyReport {
  std::vector<RdacCornerSummary> corners;
  bool ok() const;
};

/// Builds transfers for seeds first_seed .. first_seed+n_seeds-1 on each corner
/// and checks every invariant.
RdacVerifyReport verify_rdac(const std::vector<CornerName>& corners, int n_seeds, uint64_t first_seed = 1);

}  // namespace afesim
