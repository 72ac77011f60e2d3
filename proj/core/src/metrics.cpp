#include "oodcrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oodcrl/error.hpp"

namespace oodcrl {

namespace {

void check_scores(std::span<const double> scores, const char* name) {
  if (scores.empty()) throw InvalidInput(std::string(name) + " scores are empty");
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidInput(std::string(name) + " scores contain a non-finite value");
  }
}

std::vector<double> sorted_copy(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  check_scores(id_scores, "ID");
  check_scores(ood_scores, "OOD");
  const auto id_sorted = sorted_copy(id_scores);

  // Twice the Mann-Whitney U of the OOD sample: 2 per ID score strictly
  // below, 1 per tie. Integer arithmetic keeps the count exact.
  std::uint64_t twice_u = 0;
  for (double s : ood_scores) {
    const auto [lo, hi] = std::equal_range(id_sorted.begin(), id_sorted.end(), s);
    twice_u += 2 * static_cast<std::uint64_t>(lo - id_sorted.begin()) +
               static_cast<std::uint64_t>(hi - lo);
  }
  const double pairs = 2.0 * static_cast<double>(id_scores.size()) *
                       static_cast<double>(ood_scores.size());
  return static_cast<double>(twice_u) / pairs;
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr_target) {
  check_scores(id_scores, "ID");
  check_scores(ood_scores, "OOD");
  if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
    throw InvalidInput("tpr_target must be in (0, 1]");
  }
  const std::size_t n_id = id_scores.size();
  // The small slack keeps e.g. 0.95 * 100 from rounding up to 96.
  auto needed = static_cast<std::size_t>(std::ceil(tpr_target * static_cast<double>(n_id) - 1e-9));
  needed = std::clamp<std::size_t>(needed, 1, n_id);

  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::nth_element(id.begin(), id.begin() + static_cast<std::ptrdiff_t>(needed - 1), id.end());
  const double threshold = id[needed - 1];

  const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(),
                                      [threshold](double s) { return s <= threshold; });
  return static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
}

EvalReport evaluate(const ScoreSet& id_scores, const ScoreSet& ood_scores) {
  if (id_scores.method != ood_scores.method) {
    throw InvalidInput("method mismatch: ID scores are " + std::string(to_string(id_scores.method)) +
                       ", OOD scores are " + std::string(to_string(ood_scores.method)));
  }
  if (id_scores.method == Method::kCrl &&
      (id_scores.alpha != ood_scores.alpha || id_scores.beta != ood_scores.beta)) {
    throw InvalidInput("ID and OOD crl scores were computed with different alpha/beta");
  }
  EvalReport report;
  report.auroc = auroc(id_scores.scores, ood_scores.scores);
  report.fpr95 = fpr_at_tpr(id_scores.scores, ood_scores.scores, 0.95);
  report.n_id = id_scores.size();
  report.n_ood = ood_scores.size();
  report.method = id_scores.method;
  if (id_scores.method == Method::kCrl) report.params = {id_scores.alpha, id_scores.beta};
  return report;
}

GroupSummary summarize_group(std::span<const EvalReport> reports) {
  if (reports.empty()) throw InvalidInput("cannot summarize an empty group");
  GroupSummary out;
  for (const auto& r : reports) {
    out.auroc += r.auroc;
    out.fpr95 += r.fpr95;
  }
  out.n_sets = reports.size();
  out.auroc /= static_cast<double>(reports.size());
  out.fpr95 /= static_cast<double>(reports.size());
  return out;
}

Histogram histogram(std::span<const std::vector<double>> sets, std::size_t bins) {
  if (bins < 2) throw InvalidInput("histogram needs at least 2 bins");
  if (sets.empty()) throw InvalidInput("histogram needs at least one score set");
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const auto& set : sets) {
    check_scores(set, "histogram");
    const auto [mn, mx] = std::minmax_element(set.begin(), set.end());
    if (first || *mn < lo) lo = *mn;
    if (first || *mx > hi) hi = *mx;
    first = false;
  }
  if (hi == lo) hi = lo + 1.0;

  Histogram out;
  out.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) out.edges[b] = lo + width * static_cast<double>(b);
  out.edges.back() = hi;

  out.counts.assign(sets.size(), std::vector<std::size_t>(bins, 0));
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (double v : sets[s]) {
      // upper_bound on the edges finds the bin exactly, independent of
      // rounding in (v - lo) / width.
      auto it = std::upper_bound(out.edges.begin(), out.edges.end(), v);
      auto bin = static_cast<std::size_t>(it - out.edges.begin());
      bin = bin == 0 ? 0 : bin - 1;
      if (bin >= bins) bin = bins - 1;
      ++out.counts[s][bin];
    }
  }
  return out;
}

double overlap_coefficient(const Histogram& hist, std::size_t set_a, std::size_t set_b) {
  if (set_a >= hist.counts.size() || set_b >= hist.counts.size()) {
    throw InvalidInput("histogram set index out of range");
  }
  const auto& a = hist.counts[set_a];
  const auto& b = hist.counts[set_b];
  double total_a = 0.0;
  double total_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total_a += static_cast<double>(a[i]);
    total_b += static_cast<double>(b[i]);
  }
  double overlap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    overlap += std::min(static_cast<double>(a[i]) / total_a, static_cast<double>(b[i]) / total_b);
  }
  return overlap;
}

}  // namespace oodcrl
