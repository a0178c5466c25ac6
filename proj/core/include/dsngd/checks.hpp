// Copyright 2026 The DSNGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DSNGD_CHECKS_HPP_
#define DSNGD_CHECKS_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace dsngd::checks {

enum class Scale { kQuick, kFull };

/// One named identity evaluated over randomized instances. For negative
/// controls (deliberate mutations), pass means the mutation was detected.
struct CheckResult {
  std::string name;
  double max_err = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::string note;
};

/// Runs the invariant suite. The quick scale evaluates a strict subset of
/// the full-scale checks (same identities, smaller instance counts, minus
/// the long-running consistency and Monte-Carlo checks).
std::vector<CheckResult> run_checks(Scale scale, std::uint64_t seed = 2026);

bool all_passed(const std::vector<CheckResult>& results);

/// Fixed-width text report, one row per check with measured max error
/// against its tolerance.
std::string render_report(const std::vector<CheckResult>& results);

}  // namespace dsngd::checks

#endif  // DSNGD_CHECKS_HPP_
