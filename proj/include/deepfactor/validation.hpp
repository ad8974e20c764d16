#pragma once

// Agreement checks between the closed forms and the oracles. Shared by the
// `validate` subcommand and the acceptance suite.

#include <cstdint>
#include <string>
#include <vector>

namespace deepfactor::validation {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct ValidationOptions {
  std::uint64_t seed = 20130901;
  /// Test hook: added to the closed-form spike probability before comparing.
  double closed_form_perturbation = 0.0;
};

std::vector<CheckResult> check_mask_marginal_normalization();
std::vector<CheckResult> check_ibp_law(std::uint64_t seed);
CheckResult check_spike_closed_form(double perturbation = 0.0);
CheckResult check_slab_closed_form();
CheckResult check_weight_kernel(std::uint64_t seed);
CheckResult check_factor_kernel(std::uint64_t seed);
std::vector<CheckResult> check_geweke(std::uint64_t seed);
std::vector<CheckResult> check_add_delete_reciprocity(std::uint64_t seed);

std::vector<CheckResult> run_all(const ValidationOptions& options);

std::string format_report(const std::vector<CheckResult>& results);

}  // namespace deepfactor::validation
