#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sgnep {

/// NaN/inf in an update or iterate growth past the divergence threshold.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(std::size_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace sgnep
