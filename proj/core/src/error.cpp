#include "oodcrl/error.hpp"

namespace oodcrl {

const char* to_string(ParseErrorKind kind) noexcept {
  switch (kind) {
    case ParseErrorKind::kIo: return "io";
    case ParseErrorKind::kBadMagic: return "bad-magic";
    case ParseErrorKind::kBadVersion: return "bad-version";
    case ParseErrorKind::kTruncated: return "truncated";
    case ParseErrorKind::kTrailingBytes: return "trailing-bytes";
    case ParseErrorKind::kNonFinite: return "non-finite";
    case ParseErrorKind::kTooFewColumns: return "too-few-columns";
    case ParseErrorKind::kEmpty: return "empty";
    case ParseErrorKind::kSizeCap: return "size-cap";
    case ParseErrorKind::kNegativeLabel: return "negative-label";
    case ParseErrorKind::kRaggedRow: return "ragged-row";
    case ParseErrorKind::kBadNumber: return "bad-number";
    case ParseErrorKind::kBadDocument: return "bad-document";
  }
  return "unknown";
}

namespace {

std::string decorate(ParseErrorKind kind, const std::string& what, std::size_t row,
                     std::size_t column) {
  std::string out = std::string("parse error [") + to_string(kind) + "]";
  if (row != 0) {
    out += " at row " + std::to_string(row);
    if (column != 0) out += ", column " + std::to_string(column);
  }
  return out + ": " + what;
}

}  // namespace

ParseError::ParseError(ParseErrorKind kind, const std::string& what, std::size_t row,
                       std::size_t column)
    : Error(decorate(kind, what, row, column)), kind_(kind), row_(row), column_(column) {}

}  // namespace oodcrl
