#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace btlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class AutogradError : public Error {
 public:
  using Error::Error;
};

// Raised when a Cholesky pivot is not strictly positive.
class FactorizationError : public Error {
 public:
  FactorizationError(std::size_t pivot, const std::string& what)
      : Error(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace btlab
