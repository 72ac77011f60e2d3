#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oodcrl {

/// Dense row-major matrix of doubles. No invariants beyond shape.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// N x C raw classifier outputs. N >= 1, C >= 2, every entry finite.
class LogitsMatrix {
 public:
  /// Throws InvalidInput when the invariants do not hold.
  explicit LogitsMatrix(Matrix values);
  LogitsMatrix(std::size_t n_samples, std::size_t n_classes, std::vector<double> data);

  std::size_t n_samples() const noexcept { return values_.rows(); }
  std::size_t n_classes() const noexcept { return values_.cols(); }
  std::span<const double> row(std::size_t i) const { return values_.row(i); }
  double operator()(std::size_t i, std::size_t k) const { return values_(i, k); }
  const Matrix& values() const noexcept { return values_; }

  friend bool operator==(const LogitsMatrix&, const LogitsMatrix&) = default;

 private:
  Matrix values_;
};

/// Ground-truth class indices, all >= 0. Upper bound is checked against a
/// paired LogitsMatrix by `validate_against`.
class LabelVector {
 public:
  explicit LabelVector(std::vector<std::int32_t> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  std::int32_t operator[](std::size_t i) const { return labels_[i]; }
  std::span<const std::int32_t> values() const noexcept { return labels_; }

  /// Throws InvalidInput unless size == logits.n_samples() and every label < n_classes.
  void validate_against(const LogitsMatrix& logits) const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<std::int32_t> labels_;
};

/// C x C class relevance matrix. Row k of `prototype_logits` is the mean
/// training logit vector of class k; row k of `prototype_prob` is its softmax.
/// Immutable once constructed; safe to share across threads.
class ClassRelevanceMatrix {
 public:
  /// Recomputes probabilities from the prototype logits.
  ClassRelevanceMatrix(Matrix prototype_logits, std::vector<std::uint64_t> per_class_counts);

  /// Takes stored probabilities as-is after checking them against the
  /// softmax of `prototype_logits` within `tolerance`.
  ClassRelevanceMatrix(Matrix prototype_logits, Matrix prototype_prob,
                       std::vector<std::uint64_t> per_class_counts, double tolerance = 1e-9);

  std::size_t n_classes() const noexcept { return prototype_logits_.rows(); }
  const Matrix& prototype_logits() const noexcept { return prototype_logits_; }
  const Matrix& prototype_prob() const noexcept { return prototype_prob_; }
  std::span<const std::uint64_t> per_class_counts() const noexcept { return counts_; }

  friend bool operator==(const ClassRelevanceMatrix&, const ClassRelevanceMatrix&) = default;

 private:
  void check_shape() const;

  Matrix prototype_logits_;
  Matrix prototype_prob_;
  std::vector<std::uint64_t> counts_;
};

enum class Method { kCrl, kMaxLogits, kMsp };

std::string_view to_string(Method method) noexcept;
/// Throws InvalidInput on an unknown name.
Method parse_method(std::string_view name);

/// Per-sample OOD scores. Higher means more likely out-of-distribution.
struct ScoreSet {
  std::vector<double> scores;
  Method method = Method::kMaxLogits;
  double alpha = 0.0;
  double beta = 0.0;
  /// Predicted class per sample; present iff method == kCrl.
  std::optional<std::vector<std::int32_t>> pseudo_classes;

  std::size_t size() const noexcept { return scores.size(); }
  /// Throws InvalidInput when a score is non-finite or pseudo_classes
  /// presence disagrees with the method.
  void validate() const;

  friend bool operator==(const ScoreSet&, const ScoreSet&) = default;
};

/// Hyperparameters of the combined CRL score.
struct CrlParams {
  double alpha = 5.0;
  double beta = 5.0;
  /// Floor applied to probabilities inside the log.
  double epsilon_prob = 1e-12;
  /// Floor applied to the KL term before taking its reciprocal.
  double epsilon_kl = 1e-12;

  void validate() const;
};

}  // namespace oodcrl
