#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kc {

/// Root of every error the engine raises. Each subclass names one failure
/// class of the public contract so callers can catch selectively.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 1-based line/column inside some text input. Zero means "unknown".
struct SourcePos {
  std::size_t line = 0;
  std::size_t column = 0;
};

inline std::string format_pos(const SourcePos& pos) {
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

class ConflictingSchema : public Error {
 public:
  using Error::Error;
};

class VocabularyViolation : public Error {
 public:
  using Error::Error;
};

class UnknownFact : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EpochLimitExceeded : public Error {
 public:
  using Error::Error;
};

/// Errors that carry a position inside a text input.
class PositionedError : public Error {
 public:
  PositionedError(const std::string& what, SourcePos pos)
      : Error(format_pos(pos) + ": " + what), pos_(pos) {}

  const SourcePos& pos() const noexcept { return pos_; }
  std::size_t line() const noexcept { return pos_.line; }
  std::size_t column() const noexcept { return pos_.column; }

 private:
  SourcePos pos_;
};

class SyntaxError : public PositionedError {
 public:
  using PositionedError::PositionedError;
};

class RangeRestrictionViolation : public PositionedError {
 public:
  using PositionedError::PositionedError;
};

class UnknownPredicate : public PositionedError {
 public:
  using PositionedError::PositionedError;
};

/// A Snort line that does not follow the fast-alert grammar. column() is the
/// first character where the line diverges from the grammar.
class MalformedLine : public PositionedError {
 public:
  using PositionedError::PositionedError;
};

class MalformedEvent : public Error {
 public:
  using Error::Error;
};

class MalformedDocument : public Error {
 public:
  using Error::Error;
};

class MalformedScenario : public PositionedError {
 public:
  using PositionedError::PositionedError;
};

}  // namespace kc
