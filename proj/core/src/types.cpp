#include "oodcrl/types.hpp"

#include <cmath>
#include <string>

#include "oodcrl/error.hpp"
#include "oodcrl/scoring.hpp"

namespace oodcrl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidInput("matrix data has " + std::to_string(data_.size()) + " values, expected " +
                       std::to_string(rows_ * cols_));
  }
}

LogitsMatrix::LogitsMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1) throw InvalidInput("logits matrix needs at least one sample");
  if (values_.cols() < 2) throw InvalidInput("logits matrix needs at least two classes");
  const auto data = values_.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw InvalidInput("non-finite logit at row " + std::to_string(i / values_.cols()) +
                         ", column " + std::to_string(i % values_.cols()));
    }
  }
}

LogitsMatrix::LogitsMatrix(std::size_t n_samples, std::size_t n_classes, std::vector<double> data)
    : LogitsMatrix(Matrix(n_samples, n_classes, std::move(data))) {}

LabelVector::LabelVector(std::vector<std::int32_t> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0) {
      throw InvalidInput("negative label " + std::to_string(labels_[i]) + " at index " +
                         std::to_string(i));
    }
  }
}

void LabelVector::validate_against(const LogitsMatrix& logits) const {
  if (labels_.size() != logits.n_samples()) {
    throw InvalidInput("label count " + std::to_string(labels_.size()) +
                       " does not match logits rows " + std::to_string(logits.n_samples()));
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (static_cast<std::size_t>(labels_[i]) >= logits.n_classes()) {
      throw InvalidInput("label " + std::to_string(labels_[i]) + " at index " + std::to_string(i) +
                         " is out of range for " + std::to_string(logits.n_classes()) +
                         " classes");
    }
  }
}

ClassRelevanceMatrix::ClassRelevanceMatrix(Matrix prototype_logits,
                                           std::vector<std::uint64_t> per_class_counts)
    : prototype_logits_(std::move(prototype_logits)), counts_(std::move(per_class_counts)) {
  const std::size_t c = prototype_logits_.rows();
  prototype_prob_ = Matrix(c, prototype_logits_.cols());
  for (std::size_t k = 0; k < c; ++k) {
    const auto p = softmax_row(prototype_logits_.row(k));
    std::copy(p.begin(), p.end(), prototype_prob_.row(k).begin());
  }
  check_shape();
}

ClassRelevanceMatrix::ClassRelevanceMatrix(Matrix prototype_logits, Matrix prototype_prob,
                                           std::vector<std::uint64_t> per_class_counts,
                                           double tolerance)
    : prototype_logits_(std::move(prototype_logits)),
      prototype_prob_(std::move(prototype_prob)),
      counts_(std::move(per_class_counts)) {
  check_shape();
  for (std::size_t k = 0; k < n_classes(); ++k) {
    const auto expected = softmax_row(prototype_logits_.row(k));
    const auto stored = prototype_prob_.row(k);
    double sum = 0.0;
    for (std::size_t j = 0; j < expected.size(); ++j) {
      if (!(stored[j] >= 0.0 && stored[j] <= 1.0)) {
        throw InvalidInput("prototype probability out of [0, 1] at row " + std::to_string(k));
      }
      if (std::abs(stored[j] - expected[j]) > tolerance) {
        throw InvalidInput("prototype probabilities of row " + std::to_string(k) +
                           " disagree with the softmax of its prototype logits");
      }
      sum += stored[j];
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw InvalidInput("prototype probabilities of row " + std::to_string(k) +
                         " do not sum to 1");
    }
  }
}

void ClassRelevanceMatrix::check_shape() const {
  const std::size_t c = prototype_logits_.rows();
  if (c < 2) throw InvalidInput("class relevance matrix needs at least two classes");
  if (prototype_logits_.cols() != c || prototype_prob_.rows() != c || prototype_prob_.cols() != c) {
    throw InvalidInput("class relevance matrix must be square C x C");
  }
  if (counts_.size() != c) throw InvalidInput("per-class counts must have one entry per class");
  for (std::size_t k = 0; k < c; ++k) {
    if (counts_[k] < 1) throw InvalidInput("class " + std::to_string(k) + " has a zero count");
  }
  for (double v : prototype_logits_.data()) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite prototype logit");
  }
}

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::kCrl: return "crl";
    case Method::kMaxLogits: return "maxlogits";
    case Method::kMsp: return "msp";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "crl") return Method::kCrl;
  if (name == "maxlogits") return Method::kMaxLogits;
  if (name == "msp") return Method::kMsp;
  throw InvalidInput("unknown method '" + std::string(name) + "' (expected crl, maxlogits or msp)");
}

void ScoreSet::validate() const {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw InvalidInput("non-finite score at index " + std::to_string(i));
    }
  }
  const bool want_pseudo = method == Method::kCrl;
  if (want_pseudo != pseudo_classes.has_value()) {
    throw InvalidInput("pseudo classes must be present exactly when the method is crl");
  }
  if (pseudo_classes) {
    if (pseudo_classes->size() != scores.size()) {
      throw InvalidInput("pseudo class count does not match score count");
    }
    for (auto pc : *pseudo_classes) {
      if (pc < 0) throw InvalidInput("negative pseudo class");
    }
  }
}

void CrlParams::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw InvalidInput("alpha and beta must be finite and non-negative");
  }
  if (alpha == 0.0 && beta == 0.0) throw InvalidInput("alpha and beta cannot both be zero");
  if (!(epsilon_prob > 0.0 && epsilon_prob <= 1e-6)) {
    throw InvalidInput("epsilon_prob must be in (0, 1e-6]");
  }
  if (!(epsilon_kl > 0.0 && epsilon_kl <= 1e-6)) {
    throw InvalidInput("epsilon_kl must be in (0, 1e-6]");
  }
}

}  // namespace oodcrl
