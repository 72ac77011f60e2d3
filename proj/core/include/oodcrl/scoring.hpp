#pragma once

#include <span>
#include <vector>

#include "oodcrl/types.hpp"

namespace oodcrl {

/// Numerically stable softmax (max-subtracted). Throws InvalidInput on
/// non-finite input or fewer than two entries.
std::vector<double> softmax_row(std::span<const double> logits);

/// Index of the largest entry; lowest index wins ties.
std::size_t argmax(std::span<const double> values);

/// KL(p || q) = sum_i p_i log(max(p_i, eps) / max(q_i, eps)). Not clamped.
double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon_prob);

/// Builds the class relevance matrix: per-class mean logits grouped by the
/// ground-truth label (misclassified samples included), then row-wise softmax.
///
/// Throws EmptyClass when a class in [0, C) has no sample and InvalidInput
/// when labels and logits disagree in length or range.
ClassRelevanceMatrix fit_crm(const LogitsMatrix& train_logits, const LabelVector& train_labels);

/// Per-row intermediate quantities of the CRL score.
struct CrlTerms {
  std::size_t pseudo_class = 0;
  double max_logit = 0.0;
  /// KL divergence before clamping.
  double relevance_raw = 0.0;
  /// KL divergence after flooring at epsilon_kl.
  double relevance = 0.0;
  double score = 0.0;
};

/// Scores one logits row against the matrix. `logits.size()` must equal C.
CrlTerms crl_terms(const ClassRelevanceMatrix& crm, std::span<const double> logits,
                   const CrlParams& params);

/// score = -alpha * max(z) - beta / max(KL(softmax(z) || P_crm[argmax z]), eps_kl)
ScoreSet score_crl(const ClassRelevanceMatrix& crm, const LogitsMatrix& test_logits,
                   const CrlParams& params = {});

/// score = -max(z)
ScoreSet score_maxlogits(const LogitsMatrix& test_logits);

/// score = -max(softmax(z))
ScoreSet score_msp(const LogitsMatrix& test_logits);

}  // namespace oodcrl
