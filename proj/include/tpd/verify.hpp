#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace tpd {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int boundary_trials = 1000;   // per schedule kind
  int quadrature_trials = 100;  // per schedule kind
  int assignment_trials = 1000;
  int alignment_batches = 100;
  int mc_draws = 100000;
  /// Multiplies the renoise scale; 1 leaves the sampler untouched.
  double renoise_scale_factor = 1.0;
};

SuiteResult verify_boundary_identities(const VerifyOptions& options);
SuiteResult verify_quadrature(const VerifyOptions& options);
SuiteResult verify_assignment(const VerifyOptions& options);
SuiteResult verify_gradients(const VerifyOptions& options);
SuiteResult verify_renoise_covariance(const VerifyOptions& options);

/// All five suites in order, one log line each.
std::vector<SuiteResult> run_verify_suites(const VerifyOptions& options, std::ostream& log);

}  // namespace tpd
