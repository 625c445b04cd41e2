#pragma once

#include <stdexcept>
#include <string>

namespace entropic {

// Malformed or inadmissible input. The CLI maps this to exit code 1.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative solve that did not reach tolerance. The CLI maps this to exit code 2.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double residual, int iterations)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + " after " +
                           std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace entropic
