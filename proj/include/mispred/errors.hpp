#pragma once

#include <stdexcept>
#include <string>

namespace mispred {

// Base of every error raised by the library; the CLI maps it to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class UnknownPattern : public Error {
 public:
  using Error::Error;
};

class DimensionTooLarge : public Error {
 public:
  using Error::Error;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class UnboundedSupport : public Error {
 public:
  using Error::Error;
};

class DegenerateTarget : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or input files; the CLI maps it to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mispred
