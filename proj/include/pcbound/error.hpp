#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcbound {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleError : public Error {
 public:
  using Error::Error;
};

class NameError : public Error {
 public:
  using Error::Error;
};

class RoleError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DistributionError : public Error {
 public:
  using Error::Error;
};

class EmptyDataError : public Error {
 public:
  using Error::Error;
};

class UnknownLabelError : public Error {
 public:
  UnknownLabelError(std::size_t record, const std::string& what)
      : Error("record " + std::to_string(record) + ": " + what), record_(record) {}

  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

class ConfoundingError : public Error {
 public:
  using Error::Error;
};

class CapExceededError : public Error {
 public:
  using Error::Error;
};

class InvalidPathError : public Error {
 public:
  using Error::Error;
};

class ZeroConditionError : public Error {
 public:
  using Error::Error;
};

class MissingEdgeError : public Error {
 public:
  using Error::Error;
};

class EmptyRedliningError : public Error {
 public:
  using Error::Error;
};

class ConditionError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; the message carries file and line context.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcbound
