#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sphconv {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Array dimensions or channel counts that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// The (penalized) normal equations of a least-squares fit are singular or
/// numerically indefinite.
class IllPosedFit : public Error {
 public:
  IllPosedFit(std::size_t samples, std::size_t coeffs, double condition);

  std::size_t samples() const noexcept { return samples_; }
  std::size_t coeffs() const noexcept { return coeffs_; }
  double condition() const noexcept { return condition_; }

 private:
  std::size_t samples_;
  std::size_t coeffs_;
  double condition_;
};

/// A file could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class MissingB0 : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. line/column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class NiftiError : public Error {
 public:
  enum class Kind { Io, BadMagic, UnsupportedDatatype, Truncated, Malformed };

  NiftiError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace sphconv
