#pragma once

#include <stdexcept>
#include <string>

namespace qfcov {

// Input violates a documented precondition (bad shapes, too few subjects,
// malformed files, unknown options).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input is well formed but the statistic is undefined on it, e.g. the SSE
// surface vanishes everywhere or the fourth-moment diagonal is not positive.
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qfcov
