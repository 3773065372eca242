#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace judgekit {

/// Base class for every error the toolkit raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value outside its mathematical domain (bad strength, positive log-prob, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class VariantMismatch : public Error {
 public:
  using Error::Error;
};

class MissingStrength : public Error {
 public:
  using Error::Error;
};

class EmptyAfterClip : public Error {
 public:
  using Error::Error;
};

class SizeMismatch : public Error {
 public:
  using Error::Error;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class MissingScores : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class CriticNoncompliant : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; the message always names the offending path.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Malformed record. `line()` is 1-based, 0 when the input is not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace judgekit
