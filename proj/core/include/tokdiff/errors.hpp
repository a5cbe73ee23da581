#pragma once

#include <stdexcept>
#include <string>

namespace tokdiff {

// Root of every domain error raised by the library. The CLI maps these to
// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition on an argument violated (bad dimension, bad token id, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Cumulative schedule coefficients that cannot come from a valid process.
class ScheduleError : public Error {
 public:
  using Error::Error;
};

// Conditioning on an event with zero probability under the forward process.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

// A collaborator (usually a denoiser) returned something off the simplex.
class ContractError : public Error {
 public:
  using Error::Error;
};

class FittingError : public Error {
 public:
  using Error::Error;
};

// Brute-force oracles refuse instances beyond their size guard.
class RefusalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tokdiff
