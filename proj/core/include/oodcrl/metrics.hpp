#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oodcrl/types.hpp"

namespace oodcrl {

/// Area under the ROC curve with OOD as the positive class, equal to the
/// Mann-Whitney statistic: P(ood > id) + 0.5 * P(ood == id).
/// O((n_id + n_ood) log n_id). Throws InvalidInput on empty or non-finite input.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// False positive rate at a true positive rate target.
///
/// ID samples are accepted when score <= tau, where tau is the
/// ceil(tpr_target * n_id)-th smallest ID score, so at least `tpr_target` of
/// the ID set is retained. Returns the fraction of OOD samples with
/// score <= tau. No interpolation.
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double tpr_target = 0.95);

struct EvalReport {
  double auroc = 0.0;
  double fpr95 = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  Method method = Method::kMaxLogits;
  /// (alpha, beta) for crl, empty otherwise.
  std::optional<std::pair<double, double>> params;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Throws InvalidInput when the two sets come from different methods or,
/// for crl, different (alpha, beta).
EvalReport evaluate(const ScoreSet& id_scores, const ScoreSet& ood_scores);

/// Arithmetic mean of FPR95 and AUROC across reports (grouped benchmark rows).
struct GroupSummary {
  double auroc = 0.0;
  double fpr95 = 0.0;
  std::size_t n_sets = 0;
};
GroupSummary summarize_group(std::span<const EvalReport> reports);

/// Shared-edge histogram of several score sets.
struct Histogram {
  /// bins + 1 edges spanning the pooled [min, max].
  std::vector<double> edges;
  /// counts[set][bin]
  std::vector<std::vector<std::size_t>> counts;
};

/// Bins every set with equal-width bins over the pooled range; the last bin
/// is closed on the right. Throws InvalidInput when bins < 2 or a set is empty.
Histogram histogram(std::span<const std::vector<double>> sets, std::size_t bins);

/// Overlap coefficient sum_b min(p_a[b], p_b[b]) of two normalized rows of a
/// histogram, in [0, 1].
double overlap_coefficient(const Histogram& hist, std::size_t set_a, std::size_t set_b);

}  // namespace oodcrl
