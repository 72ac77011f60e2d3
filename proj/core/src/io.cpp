#include "oodcrl/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "oodcrl/error.hpp"

namespace oodcrl::io {

namespace {

using json = nlohmann::ordered_json;

constexpr std::array<char, 4> kLogitsMagic{'O', 'O', 'D', 'L'};
constexpr std::array<char, 4> kLabelsMagic{'O', 'O', 'D', 'Y'};
constexpr std::size_t kLogitsHeader = 4 + 4 + 8 + 8;
constexpr std::size_t kLabelsHeader = 4 + 4 + 8;

template <typename T>
T load_le(const char* p) {
  static_assert(std::is_unsigned_v<T>);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

template <typename T>
void store_le(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

struct Header {
  std::uint64_t rows = 0;
  std::uint64_t cols = 1;
  std::uint64_t payload_bytes = 0;
};

// Validates the fixed-size header; `prefix` must hold at least header_size bytes.
Header parse_header(std::string_view prefix, const std::array<char, 4>& magic, bool has_cols,
                    const ReadOptions& options) {
  const std::size_t header_size = has_cols ? kLogitsHeader : kLabelsHeader;
  if (prefix.size() < 4 || std::memcmp(prefix.data(), magic.data(), 4) != 0) {
    throw ParseError(ParseErrorKind::kBadMagic,
                     "expected magic '" + std::string(magic.data(), 4) + "'");
  }
  if (prefix.size() < header_size) {
    throw ParseError(ParseErrorKind::kTruncated, "file is shorter than its header");
  }
  const auto version = load_le<std::uint32_t>(prefix.data() + 4);
  if (version != kFormatVersion) {
    throw ParseError(ParseErrorKind::kBadVersion, "unsupported version " + std::to_string(version));
  }
  Header h;
  h.rows = load_le<std::uint64_t>(prefix.data() + 8);
  if (has_cols) h.cols = load_le<std::uint64_t>(prefix.data() + 16);
  if (h.rows == 0) throw ParseError(ParseErrorKind::kEmpty, "file declares zero rows");
  if (has_cols && h.cols < 2) {
    throw ParseError(ParseErrorKind::kTooFewColumns,
                     "file declares " + std::to_string(h.cols) + " columns, need at least 2");
  }
  const std::uint64_t cap_elems = options.max_payload_bytes / 4;
  if (h.rows > cap_elems || h.cols > cap_elems / h.rows) {
    throw ParseError(ParseErrorKind::kSizeCap, "declared payload exceeds the size cap of " +
                                                   std::to_string(options.max_payload_bytes) +
                                                   " bytes");
  }
  h.payload_bytes = 4 * h.rows * h.cols;
  return h;
}

void check_total_size(const Header& h, std::size_t header_size, std::uint64_t actual_total) {
  const std::uint64_t actual_payload = actual_total - header_size;
  if (actual_payload < h.payload_bytes) {
    throw ParseError(ParseErrorKind::kTruncated,
                     "payload has " + std::to_string(actual_payload) + " bytes, header declares " +
                         std::to_string(h.payload_bytes));
  }
  if (actual_payload > h.payload_bytes) {
    throw ParseError(ParseErrorKind::kTrailingBytes,
                     std::to_string(actual_payload - h.payload_bytes) + " bytes after the payload");
  }
}

LogitsMatrix decode_logits_payload(const Header& h, const char* p) {
  std::vector<double> data(h.rows * h.cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = std::bit_cast<float>(load_le<std::uint32_t>(p + 4 * i));
    if (!std::isfinite(f)) {
      throw ParseError(ParseErrorKind::kNonFinite, "non-finite logit", i / h.cols + 1,
                       i % h.cols + 1);
    }
    data[i] = f;
  }
  return LogitsMatrix(h.rows, h.cols, std::move(data));
}

LabelVector decode_labels_payload(const Header& h, const char* p) {
  std::vector<std::int32_t> labels(h.rows);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::int32_t>(load_le<std::uint32_t>(p + 4 * i));
    if (labels[i] < 0) {
      throw ParseError(ParseErrorKind::kNegativeLabel, "negative label " + std::to_string(labels[i]),
                       i + 1);
    }
  }
  return LabelVector(std::move(labels));
}

// Reads the header, checks declared sizes against the file size, then reads
// exactly the payload.
template <typename Decode>
auto read_binary(const std::filesystem::path& path, const std::array<char, 4>& magic,
                 bool has_cols, const ReadOptions& options, Decode decode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::kIo, "cannot open " + path.string());
  const std::size_t header_size = has_cols ? kLogitsHeader : kLabelsHeader;
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  header.resize(static_cast<std::size_t>(in.gcount()));
  const Header h = parse_header(header, magic, has_cols, options);
  check_total_size(h, header_size, std::filesystem::file_size(path));
  std::string payload(h.payload_bytes, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != h.payload_bytes) {
    throw ParseError(ParseErrorKind::kTruncated, "short read from " + path.string());
  }
  return decode(h, payload.data());
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

bool parse_double(std::string_view cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

template <typename Int>
bool parse_int(std::string_view cell, Int& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::size_t n, const char* name) {
  if (!j.is_array() || j.size() != n) {
    throw ParseError(ParseErrorKind::kBadDocument,
                     std::string(name) + " must be an array of " + std::to_string(n) + " rows");
  }
  Matrix m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!j[r].is_array() || j[r].size() != n) {
      throw ParseError(ParseErrorKind::kBadDocument,
                       std::string(name) + " row " + std::to_string(r) + " must have " +
                           std::to_string(n) + " entries");
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (!j[r][c].is_number()) {
        throw ParseError(ParseErrorKind::kBadDocument, std::string(name) + " entries must be numbers");
      }
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(ParseErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ParseError(ParseErrorKind::kIo, "failed writing " + path.string());
}

// ---- logits -------------------------------------------------------------

LogitsMatrix decode_logits(std::string_view bytes, const ReadOptions& options) {
  const Header h = parse_header(bytes, kLogitsMagic, true, options);
  check_total_size(h, kLogitsHeader, bytes.size());
  return decode_logits_payload(h, bytes.data() + kLogitsHeader);
}

std::string encode_logits(const LogitsMatrix& logits) {
  std::string out;
  out.reserve(kLogitsHeader + 4 * logits.n_samples() * logits.n_classes());
  out.append(kLogitsMagic.data(), 4);
  store_le<std::uint32_t>(out, kFormatVersion);
  store_le<std::uint64_t>(out, logits.n_samples());
  store_le<std::uint64_t>(out, logits.n_classes());
  for (double v : logits.values().data()) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) throw InvalidInput("logit " + format_double(v) + " overflows float32");
    store_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

LogitsMatrix read_logits(const std::filesystem::path& path, const ReadOptions& options) {
  return read_binary(path, kLogitsMagic, true, options, decode_logits_payload);
}

void write_logits(const LogitsMatrix& logits, const std::filesystem::path& path) {
  write_file(path, encode_logits(logits));
}

// ---- labels -------------------------------------------------------------

LabelVector decode_labels(std::string_view bytes, const ReadOptions& options) {
  const Header h = parse_header(bytes, kLabelsMagic, false, options);
  check_total_size(h, kLabelsHeader, bytes.size());
  return decode_labels_payload(h, bytes.data() + kLabelsHeader);
}

std::string encode_labels(const LabelVector& labels) {
  if (labels.size() == 0) throw InvalidInput("cannot write an empty label vector");
  std::string out;
  out.reserve(kLabelsHeader + 4 * labels.size());
  out.append(kLabelsMagic.data(), 4);
  store_le<std::uint32_t>(out, kFormatVersion);
  store_le<std::uint64_t>(out, labels.size());
  for (auto v : labels.values()) store_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  return out;
}

LabelVector read_labels(const std::filesystem::path& path, const ReadOptions& options) {
  return read_binary(path, kLabelsMagic, false, options, decode_labels_payload);
}

void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
  write_file(path, encode_labels(labels));
}

// ---- CSV logits ---------------------------------------------------------

LogitsMatrix parse_csv_logits(std::string_view text, bool has_header) {
  const auto lines = lines_of(text);
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::vector<double> data;
  for (std::size_t li = has_header ? 1 : 0; li < lines.size(); ++li) {
    const std::size_t row_no = li + 1;
    const auto cells = split(lines[li], ',');
    if (rows == 0) {
      cols = cells.size();
    } else if (cells.size() != cols) {
      throw ParseError(ParseErrorKind::kRaggedRow,
                       "row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(cols),
                       row_no);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw ParseError(ParseErrorKind::kBadNumber, "'" + trim(cells[c]) + "' is not a number",
                         row_no, c + 1);
      }
      if (!std::isfinite(v)) {
        throw ParseError(ParseErrorKind::kNonFinite, "non-finite value", row_no, c + 1);
      }
      data.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(ParseErrorKind::kEmpty, "no data rows");
  if (cols < 2) throw ParseError(ParseErrorKind::kTooFewColumns, "need at least 2 columns");
  return LogitsMatrix(rows, cols, std::move(data));
}

LogitsMatrix read_csv_logits(const std::filesystem::path& path, bool has_header) {
  return parse_csv_logits(read_file(path), has_header);
}

// ---- CRM ----------------------------------------------------------------

std::string crm_to_string(const ClassRelevanceMatrix& crm) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["n_classes"] = crm.n_classes();
  doc["per_class_counts"] =
      std::vector<std::uint64_t>(crm.per_class_counts().begin(), crm.per_class_counts().end());
  doc["prototypes_logits"] = matrix_to_json(crm.prototype_logits());
  doc["prototypes_prob"] = matrix_to_json(crm.prototype_prob());
  return doc.dump(2) + "\n";
}

ClassRelevanceMatrix crm_from_string(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseErrorKind::kBadDocument, e.what());
  }
  try {
    if (doc.at("format_version").get<std::uint32_t>() != kFormatVersion) {
      throw ParseError(ParseErrorKind::kBadVersion, "unsupported CRM format_version");
    }
    const auto n = doc.at("n_classes").get<std::size_t>();
    auto counts = doc.at("per_class_counts").get<std::vector<std::uint64_t>>();
    if (counts.size() != n) {
      throw ParseError(ParseErrorKind::kBadDocument, "per_class_counts must have n_classes entries");
    }
    auto logits = matrix_from_json(doc.at("prototypes_logits"), n, "prototypes_logits");
    auto prob = matrix_from_json(doc.at("prototypes_prob"), n, "prototypes_prob");
    return ClassRelevanceMatrix(std::move(logits), std::move(prob), std::move(counts), 1e-9);
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadDocument, e.what());
  } catch (const InvalidInput& e) {
    throw ParseError(ParseErrorKind::kBadDocument, e.what());
  }
}

void write_crm(const ClassRelevanceMatrix& crm, const std::filesystem::path& path) {
  write_file(path, crm_to_string(crm));
}

ClassRelevanceMatrix read_crm(const std::filesystem::path& path) {
  return crm_from_string(read_file(path));
}

// ---- scores CSV ---------------------------------------------------------

std::string scores_to_csv(const ScoreSet& scores) {
  scores.validate();
  std::string out = "# method=" + std::string(to_string(scores.method));
  if (scores.method == Method::kCrl) {
    out += " alpha=" + format_double(scores.alpha) + " beta=" + format_double(scores.beta);
  }
  out += "\n";
  out += scores.pseudo_classes ? "index,score,pseudo_class\n" : "index,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(scores.scores[i]);
    if (scores.pseudo_classes) {
      out += ',';
      out += std::to_string((*scores.pseudo_classes)[i]);
    }
    out += '\n';
  }
  return out;
}

ScoreSet scores_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  ScoreSet out;
  std::size_t li = 0;
  bool have_method = false;
  if (!lines.empty() && trim(lines[0]).starts_with('#')) {
    const std::string meta = trim(lines[0]).substr(1);
    std::istringstream ss(meta);
    std::string token;
    while (ss >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "method") {
        try {
          out.method = parse_method(value);
        } catch (const InvalidInput& e) {
          throw ParseError(ParseErrorKind::kBadDocument, e.what(), 1);
        }
        have_method = true;
      } else if (key == "alpha" || key == "beta") {
        double v = 0.0;
        if (!parse_double(value, v)) {
          throw ParseError(ParseErrorKind::kBadNumber, "bad " + key + " value '" + value + "'", 1);
        }
        (key == "alpha" ? out.alpha : out.beta) = v;
      }
    }
    ++li;
  }
  if (!have_method) throw ParseError(ParseErrorKind::kBadDocument, "missing '# method=' line", 1);
  if (li >= lines.size()) throw ParseError(ParseErrorKind::kEmpty, "missing header row");

  const std::string header = trim(lines[li]);
  bool with_pseudo = false;
  if (header == "index,score,pseudo_class") {
    with_pseudo = true;
  } else if (header != "index,score") {
    throw ParseError(ParseErrorKind::kBadDocument, "unexpected header '" + header + "'", li + 1);
  }
  ++li;

  std::vector<std::int32_t> pseudo;
  const std::size_t want_cells = with_pseudo ? 3 : 2;
  for (; li < lines.size(); ++li) {
    const std::size_t row_no = li + 1;
    const auto cells = split(lines[li], ',');
    if (cells.size() != want_cells) {
      throw ParseError(ParseErrorKind::kRaggedRow,
                       "expected " + std::to_string(want_cells) + " cells", row_no);
    }
    std::size_t index = 0;
    if (!parse_int(cells[0], index) || index != out.scores.size()) {
      throw ParseError(ParseErrorKind::kBadNumber, "index out of sequence", row_no, 1);
    }
    double score = 0.0;
    if (!parse_double(cells[1], score)) {
      throw ParseError(ParseErrorKind::kBadNumber, "'" + trim(cells[1]) + "' is not a number",
                       row_no, 2);
    }
    if (!std::isfinite(score)) throw ParseError(ParseErrorKind::kNonFinite, "non-finite score", row_no, 2);
    out.scores.push_back(score);
    if (with_pseudo) {
      std::int32_t pc = 0;
      if (!parse_int(cells[2], pc) || pc < 0) {
        throw ParseError(ParseErrorKind::kBadNumber, "bad pseudo class", row_no, 3);
      }
      pseudo.push_back(pc);
    }
  }
  if (out.scores.empty()) throw ParseError(ParseErrorKind::kEmpty, "no score rows");
  if (with_pseudo) out.pseudo_classes = std::move(pseudo);
  try {
    out.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(ParseErrorKind::kBadDocument, e.what());
  }
  return out;
}

void write_scores_csv(const ScoreSet& scores, const std::filesystem::path& path) {
  write_file(path, scores_to_csv(scores));
}

ScoreSet read_scores_csv(const std::filesystem::path& path) {
  return scores_from_csv(read_file(path));
}

// ---- reports ------------------------------------------------------------

std::string report_to_json(const EvalReport& report, int indent) {
  json doc;
  doc["method"] = std::string(to_string(report.method));
  if (report.params) {
    doc["alpha"] = report.params->first;
    doc["beta"] = report.params->second;
  }
  doc["fpr95"] = report.fpr95;
  doc["auroc"] = report.auroc;
  doc["n_id"] = report.n_id;
  doc["n_ood"] = report.n_ood;
  return doc.dump(indent);
}

EvalReport report_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    EvalReport r;
    r.method = parse_method(doc.at("method").get<std::string>());
    if (doc.contains("alpha") || doc.contains("beta")) {
      r.params = std::pair{doc.at("alpha").get<double>(), doc.at("beta").get<double>()};
    }
    r.fpr95 = doc.at("fpr95").get<double>();
    r.auroc = doc.at("auroc").get<double>();
    r.n_id = doc.at("n_id").get<std::size_t>();
    r.n_ood = doc.at("n_ood").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(ParseErrorKind::kBadDocument, e.what());
  } catch (const InvalidInput& e) {
    throw ParseError(ParseErrorKind::kBadDocument, e.what());
  }
}

}  // namespace oodcrl::io
