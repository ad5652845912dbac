#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtl {

// Base for all library errors so callers can catch one type at the CLI edge.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class EmptyBatchError : public Error {
 public:
  using Error::Error;
};

class MissingReferenceError : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradError : public Error {
 public:
  using Error::Error;
};

class SceneTooSmallError : public Error {
 public:
  using Error::Error;
};

class EmptySplitError : public Error {
 public:
  using Error::Error;
};

// IO / format errors map to exit code 2 at the CLI.
class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public IoError {
 public:
  FormatError(const std::string& msg, std::size_t offset)
      : IoError(msg + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mtl
