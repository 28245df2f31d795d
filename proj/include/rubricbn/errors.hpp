#pragma once

#include <stdexcept>
#include <string>

namespace rubricbn {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed graph or factor structure: unknown ids, cardinality mismatches,
// cycles, dangling references.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A numeric parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Evidence with zero probability under the network.
class InconsistentEvidenceError : public Error {
 public:
  using Error::Error;
};

// Bad input records (answers, fixture files, rubric documents).
class DataError : public Error {
 public:
  using Error::Error;
};

// Brute-force enumeration refused because the joint state space is too large.
class StateSpaceError : public Error {
 public:
  using Error::Error;
};

}  // namespace rubricbn
