#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "oodcrl/types.hpp"

namespace oodcrl::synth {

/// SplitMix64 (Steele, Lea & Flood 2014). Deterministic across platforms;
/// the same seed yields the same 64-bit stream everywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform in (0, 1].
  double uniform_open_low() noexcept;
  /// Standard normal via Box-Muller; draws exactly two uniforms per pair of
  /// outputs and caches the second.
  double normal() noexcept;

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct GaussianMixtureSpec {
  std::size_t n_classes = 0;
  std::size_t dim = 0;
  /// n_classes x dim
  Matrix means;
  double stddev = 1.0;
  std::size_t n_per_class = 1;
  std::uint64_t seed = 0;

  /// Throws InvalidInput on shape errors, stddev < 0, duplicate means or
  /// n_per_class == 0. stddev == 0 is the degenerate point-mass case.
  void validate() const;
};

/// Means at `separation * e_k` when dim >= n_classes, otherwise drawn from
/// N(0, separation^2 I) with `seed`.
Matrix default_means(std::size_t n_classes, std::size_t dim, double separation, std::uint64_t seed);

struct Dataset {
  Matrix features;
  LabelVector labels;
};

/// Class-major samples: class k occupies rows [k*n, (k+1)*n).
Dataset generate(const GaussianMixtureSpec& spec);

/// Center of the OOD cluster: the centroid of the means pushed along a
/// seed-derived unit direction. When the direction can be made orthogonal to
/// the span of the means (so it only crosses dimensions that carry no class
/// signal) it is pushed by `offset`; otherwise by
/// offset + max_k |mean_k - centroid|. Either way its distance to every ID
/// mean is >= offset.
std::vector<double> ood_center(const GaussianMixtureSpec& spec, double offset);

/// n samples from N(ood_center, stddev^2 I). Uses a stream distinct from
/// `generate` for the same seed. Throws InvalidInput when offset <= 0.
Matrix make_ood(const GaussianMixtureSpec& spec, double offset, std::size_t n);

/// Linear classifier: logits = weights * x + bias.
struct LinearSoftmaxModel {
  Matrix weights;  // C x d
  std::vector<double> bias;

  std::size_t n_classes() const noexcept { return weights.rows(); }
  std::size_t dim() const noexcept { return weights.cols(); }
};

/// Mean cross-entropy of the model and its gradient with respect to the
/// weights and bias.
struct LossGradient {
  double loss = 0.0;
  Matrix grad_weights;
  std::vector<double> grad_bias;
};
LossGradient loss_and_gradient(const LinearSoftmaxModel& model, const Matrix& features,
                               const LabelVector& labels);

struct TrainResult {
  LinearSoftmaxModel model;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
};

/// Full-batch gradient descent from a zero-initialized model. Throws
/// TrainingDiverged when the loss becomes non-finite.
TrainResult train(const Matrix& features, const LabelVector& labels, std::size_t n_classes,
                  std::size_t epochs, double lr);

LogitsMatrix logits(const LinearSoftmaxModel& model, const Matrix& features);

double accuracy(const LinearSoftmaxModel& model, const Matrix& features, const LabelVector& labels);

/// Everything needed to regenerate a fixture set.
struct FixtureConfig {
  std::size_t n_classes = 5;
  std::size_t dim = 10;
  double stddev = 1.0;
  double separation = 6.0;
  std::size_t n_per_class = 500;
  std::size_t n_test_per_class = 500;
  std::size_t n_ood = 2500;
  /// Distance of the OOD cluster from every ID mean, in units of stddev.
  double ood_offset = 5.0;
  std::uint64_t seed = 20240101;
  std::size_t epochs = 300;
  double lr = 0.5;

  friend bool operator==(const FixtureConfig&, const FixtureConfig&) = default;
};

struct Fixture {
  LogitsMatrix train_logits;
  LabelVector train_labels;
  LogitsMatrix test_id_logits;
  LabelVector test_id_labels;
  LogitsMatrix test_ood_logits;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// generate -> train -> logits for train, held-out ID and OOD sets. The
/// held-out ID set uses seed + 1; OOD uses the make_ood stream of `seed`.
Fixture make_fixture(const FixtureConfig& config);

/// JSON manifest written next to fixture files.
struct Manifest {
  FixtureConfig config;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::string generator = "splitmix64+box-muller";

  friend bool operator==(const Manifest&, const Manifest&) = default;
};
std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(std::string_view text);

}  // namespace oodcrl::synth
