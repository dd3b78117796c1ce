#pragma once

#include <stdexcept>
#include <string>

namespace lodom {

// Bad user-facing configuration (unknown key, invalid value, missing input).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unreadable data (pose files, sweep binaries, scene specs).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: empty correspondence sets, degenerate geometry,
// ill-conditioned solves.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Raised by the ICP inner solver when the normal equations cannot pin all six
// degrees of freedom (too few usable pairs or condition number blow-up).
class DegenerateGeometryError : public NumericalError {
public:
  explicit DegenerateGeometryError(const std::string& what) : NumericalError(what) {}
};

}  // namespace lodom
