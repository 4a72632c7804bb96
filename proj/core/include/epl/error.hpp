#pragma once

#include <stdexcept>
#include <string>

namespace epl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// inputs that disagree with the game dimensions or invariants
class DimensionError : public Error {
 public:
  using Error::Error;
};

// singular systems, non-convergence, non-finite values
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace epl
