#pragma once

#include <stdexcept>
#include <string>

namespace airground {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed caller input (unknown node ids, bad CSV rows).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or invalid configuration. The message carries the field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Problem instance exceeds a configured size cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class TrainingFault : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

}  // namespace airground
