#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hqclab {

// Raised when an iterative solve fails; carries enough context to locate the failure.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> residual_history = {}, long element = -1)
      : std::runtime_error(what), history_(std::move(residual_history)), element_(element) {}

  const std::vector<double>& residual_history() const noexcept { return history_; }
  // Macro element the failure belongs to, or -1.
  long element() const noexcept { return element_; }

 private:
  std::vector<double> history_;
  long element_;
};

}  // namespace hqclab
