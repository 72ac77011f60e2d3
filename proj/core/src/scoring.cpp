#include "oodcrl/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oodcrl/error.hpp"

namespace oodcrl {

std::vector<double> softmax_row(std::span<const double> logits) {
  if (logits.size() < 2) throw InvalidInput("softmax needs at least two entries");
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInput("softmax input is not finite");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("argmax of an empty vector");
  // max_element returns the first of equal maxima.
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double epsilon_prob) {
  if (p.size() != q.size()) throw InvalidInput("KL divergence of vectors with different lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += p[i] * std::log(std::max(p[i], epsilon_prob) / std::max(q[i], epsilon_prob));
  }
  return sum;
}

ClassRelevanceMatrix fit_crm(const LogitsMatrix& train_logits, const LabelVector& train_labels) {
  train_labels.validate_against(train_logits);
  const std::size_t c = train_logits.n_classes();

  std::vector<long double> sums(c * c, 0.0L);
  std::vector<std::uint64_t> counts(c, 0);
  for (std::size_t i = 0; i < train_logits.n_samples(); ++i) {
    const auto k = static_cast<std::size_t>(train_labels[i]);
    const auto row = train_logits.row(i);
    for (std::size_t j = 0; j < c; ++j) sums[k * c + j] += row[j];
    ++counts[k];
  }

  Matrix prototypes(c, c);
  for (std::size_t k = 0; k < c; ++k) {
    if (counts[k] == 0) throw EmptyClass(k);
    for (std::size_t j = 0; j < c; ++j) {
      prototypes(k, j) = static_cast<double>(sums[k * c + j] / static_cast<long double>(counts[k]));
    }
  }
  return ClassRelevanceMatrix(std::move(prototypes), std::move(counts));
}

CrlTerms crl_terms(const ClassRelevanceMatrix& crm, std::span<const double> logits,
                   const CrlParams& params) {
  if (logits.size() != crm.n_classes()) {
    throw InvalidInput("logits have " + std::to_string(logits.size()) +
                       " columns but the class relevance matrix has " +
                       std::to_string(crm.n_classes()) + " classes");
  }
  const auto p_test = softmax_row(logits);
  CrlTerms t;
  t.pseudo_class = argmax(logits);
  t.max_logit = logits[t.pseudo_class];
  t.relevance_raw = kl_divergence(p_test, crm.prototype_prob().row(t.pseudo_class), params.epsilon_prob);
  t.relevance = std::max(t.relevance_raw, params.epsilon_kl);
  t.score = -t.max_logit * params.alpha - (1.0 / t.relevance) * params.beta;
  return t;
}

ScoreSet score_crl(const ClassRelevanceMatrix& crm, const LogitsMatrix& test_logits,
                   const CrlParams& params) {
  params.validate();
  if (test_logits.n_classes() != crm.n_classes()) {
    throw InvalidInput("logits have " + std::to_string(test_logits.n_classes()) +
                       " columns but the class relevance matrix has " +
                       std::to_string(crm.n_classes()) + " classes");
  }
  ScoreSet out;
  out.method = Method::kCrl;
  out.alpha = params.alpha;
  out.beta = params.beta;
  out.scores.resize(test_logits.n_samples());
  std::vector<std::int32_t> pseudo(test_logits.n_samples());
  for (std::size_t i = 0; i < test_logits.n_samples(); ++i) {
    const auto t = crl_terms(crm, test_logits.row(i), params);
    out.scores[i] = t.score;
    pseudo[i] = static_cast<std::int32_t>(t.pseudo_class);
  }
  out.pseudo_classes = std::move(pseudo);
  return out;
}

ScoreSet score_maxlogits(const LogitsMatrix& test_logits) {
  ScoreSet out;
  out.method = Method::kMaxLogits;
  out.scores.resize(test_logits.n_samples());
  for (std::size_t i = 0; i < test_logits.n_samples(); ++i) {
    const auto row = test_logits.row(i);
    out.scores[i] = -*std::max_element(row.begin(), row.end());
  }
  return out;
}

ScoreSet score_msp(const LogitsMatrix& test_logits) {
  ScoreSet out;
  out.method = Method::kMsp;
  out.scores.resize(test_logits.n_samples());
  for (std::size_t i = 0; i < test_logits.n_samples(); ++i) {
    const auto p = softmax_row(test_logits.row(i));
    out.scores[i] = -*std::max_element(p.begin(), p.end());
  }
  return out;
}

}  // namespace oodcrl
