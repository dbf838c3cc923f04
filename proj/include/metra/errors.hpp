#pragma once

#include <stdexcept>
#include <string>

namespace metra {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unsupported dimension/degree, bad tolerances, degenerate boxes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed mesh/metric/config files.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Inconsistent connectivity or shared-entity node sets.
class MeshIntegrityError : public Error {
 public:
  using Error::Error;
};

class SingularMetricError : public Error {
 public:
  using Error::Error;
};

class OutOfDomainError : public Error {
 public:
  using Error::Error;
};

// Newton inversion of a background element did not converge.
class LocationError : public Error {
 public:
  using Error::Error;
};

// The input mesh is not numerically valid where validity is required.
class InvalidMeshError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace metra
