#pragma once

#include <stdexcept>
#include <string>

namespace qmx {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an input was violated (bad shape, non-positive
/// temperature, non-real field, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The phase e^{i f} with f' = u0 is not single-valued on the torus.
class CirculationError : public InvalidArgument {
 public:
  CirculationError(const std::string& what, double circulation)
      : InvalidArgument(what), circulation_(circulation) {}
  double circulation() const noexcept { return circulation_; }

 private:
  double circulation_;
};

/// Requested global energy lies below the floor m0.
class InfeasibleTarget : public InvalidArgument {
 public:
  InfeasibleTarget(const std::string& what, double m0)
      : InvalidArgument(what), m0_(m0) {}
  double m0() const noexcept { return m0_; }

 private:
  double m0_;
};

/// A matrix expected to be positive semidefinite has an eigenvalue below
/// the clamp tolerance.
class NotPositiveError : public Error {
 public:
  using Error::Error;
};

class EigensolverError : public Error {
 public:
  using Error::Error;
};

/// Iterative solve failed (divergence, stagnation, iteration budget).
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace qmx
