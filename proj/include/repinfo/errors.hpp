#pragma once

#include <stdexcept>
#include <string>

namespace repinfo {

// Error taxonomy. Each subclass maps onto one CLI exit code (see tools/).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid network/task/plan configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied argument out of its domain (bad label, empty set, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Matrix dimensions disagree with the network or with each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf appeared in activations, losses or parameter updates.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A trace or gradient set does not belong to the state it is applied to.
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace repinfo
