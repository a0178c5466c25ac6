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

#ifndef DSNGD_ERRORS_HPP_
#define DSNGD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dsngd {

enum class ErrorCode {
  kDomainViolation,      // input outside the domain of a potential or model
  kConvexityViolation,   // a divergence came out negative beyond slack
  kNotPositiveDefinite,  // Cholesky failed on a metric / Fisher matrix
  kInversionFailure,     // gradient-map inversion did not converge
  kSpecInvariant,        // a model spec invariant does not hold
  kInteriority,          // expectation parameters on or outside the boundary
  kDivergence,           // optimizer state blew up
  kConfig,               // bad experiment configuration
  kIo,                   // file read/write failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dsngd

#endif  // DSNGD_ERRORS_HPP_
