#pragma once

#include <stdexcept>
#include <string>

namespace spnodal {

/// Fields or operators built on different grids were combined.
class DomainMismatch : public std::invalid_argument {
 public:
  DomainMismatch() : std::invalid_argument("fields live on different grid domains") {}
};

/// An iterative method hit its iteration cap before reaching tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
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

/// A field expected to change sign has an empty positive or negative part.
class OneSignedField : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A field handed to a certificate is not on the nodal Nehari set.
class NotOnNodalSet : public std::runtime_error {
 public:
  NotOnNodalSet(double residual)
      : std::runtime_error("field is not on the nodal Nehari set (residual " +
                           std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace spnodal
