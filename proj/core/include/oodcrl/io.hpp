#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "oodcrl/metrics.hpp"
#include "oodcrl/types.hpp"

// Binary layouts (all integers and floats little-endian):
//
//   OODL  "OODL" | u32 version=1 | u64 n_rows | u64 n_cols | f32[n_rows*n_cols] row-major
//   OODY  "OODY" | u32 version=1 | u64 n_rows | i32[n_rows]
//
// Trailing bytes, truncation, non-finite floats, negative labels,
// n_rows == 0 and n_cols < 2 are all rejected.

namespace oodcrl::io {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint64_t kDefaultSizeCap = 8ull << 30;  // 8 GiB

struct ReadOptions {
  /// Declared payloads larger than this fail before any allocation.
  std::uint64_t max_payload_bytes = kDefaultSizeCap;
};

LogitsMatrix read_logits(const std::filesystem::path& path, const ReadOptions& options = {});
/// Values are narrowed to f32; throws InvalidInput if a value overflows f32.
void write_logits(const LogitsMatrix& logits, const std::filesystem::path& path);

/// In-memory variants used by the file functions.
LogitsMatrix decode_logits(std::string_view bytes, const ReadOptions& options = {});
std::string encode_logits(const LogitsMatrix& logits);

LabelVector read_labels(const std::filesystem::path& path, const ReadOptions& options = {});
void write_labels(const LabelVector& labels, const std::filesystem::path& path);
LabelVector decode_labels(std::string_view bytes, const ReadOptions& options = {});
std::string encode_labels(const LabelVector& labels);

/// Comma-separated numeric rows of equal length.
LogitsMatrix read_csv_logits(const std::filesystem::path& path, bool has_header);
LogitsMatrix parse_csv_logits(std::string_view text, bool has_header);

/// JSON document: format_version, n_classes, per_class_counts,
/// prototypes_logits, prototypes_prob. Doubles use shortest round-trip form.
void write_crm(const ClassRelevanceMatrix& crm, const std::filesystem::path& path);
ClassRelevanceMatrix read_crm(const std::filesystem::path& path);
std::string crm_to_string(const ClassRelevanceMatrix& crm);
ClassRelevanceMatrix crm_from_string(std::string_view text);

/// Scores CSV. A leading `# method=... alpha=... beta=...` comment carries
/// the ScoreSet metadata, followed by the header `index,score[,pseudo_class]`.
void write_scores_csv(const ScoreSet& scores, const std::filesystem::path& path);
ScoreSet read_scores_csv(const std::filesystem::path& path);
std::string scores_to_csv(const ScoreSet& scores);
ScoreSet scores_from_csv(std::string_view text);

/// JSON form of an EvalReport; parsing it back is lossless.
std::string report_to_json(const EvalReport& report, int indent = 2);
EvalReport report_from_json(std::string_view text);

/// Shortest decimal that round-trips the double.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace oodcrl::io
