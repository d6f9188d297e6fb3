#pragma once

#include <stdexcept>
#include <string>

namespace setvalued {

/// Base class for all library errors. Each subclass maps onto a process
/// exit code used by the command-line front end.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Malformed data, inconsistent dimensions, values outside a domain.
class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// A configured size budget (enumeration size, operators per lab, ...) would
/// be exceeded.
class BudgetError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Non-termination guards, degenerate posteriors, failed normalizations.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Broken invariant inside the library.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace setvalued
