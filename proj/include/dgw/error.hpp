#pragma once

#include <stdexcept>
#include <string>

namespace dgw {

// A module precondition does not hold for the given inputs (e.g. survival to
// the requested horizon is impossible, or a fixed-point bracket is missing).
class precondition_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A configured work, memory or rejection budget was exhausted.
class budget_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dgw
