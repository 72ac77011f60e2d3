#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oodcrl {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch, non-finite value, out-of-range parameter.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A class index in [0, C) has no training samples.
class EmptyClass : public Error {
 public:
  explicit EmptyClass(std::size_t class_index)
      : Error("class " + std::to_string(class_index) + " has no training samples"),
        class_index_(class_index) {}

  std::size_t class_index() const noexcept { return class_index_; }

 private:
  std::size_t class_index_;
};

/// Gradient descent produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  kIo,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kTrailingBytes,
  kNonFinite,
  kTooFewColumns,
  kEmpty,
  kSizeCap,
  kNegativeLabel,
  kRaggedRow,
  kBadNumber,
  kBadDocument,
};

const char* to_string(ParseErrorKind kind) noexcept;

/// File-format violation. `row`/`column` are 1-based and 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what, std::size_t row = 0,
             std::size_t column = 0);

  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  ParseErrorKind kind_;
  std::size_t row_;
  std::size_t column_;
};

}  // namespace oodcrl
