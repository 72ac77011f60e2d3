#include "oodcrl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <json.hpp>

#include "oodcrl/error.hpp"
#include "oodcrl/scoring.hpp"

namespace oodcrl::synth {

namespace {

// Distinct, fixed stream identifiers so ID, OOD and direction draws never
// share a sequence for the same seed.
constexpr std::uint64_t kOodStream = 0x4f4f445f53414d50ull;
constexpr std::uint64_t kDirectionStream = 0x4449524543544e31ull;
constexpr std::uint64_t kMeansStream = 0x4d45414e53303031ull;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 mixer(seed ^ stream);
  return mixer.next();
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> centroid(const Matrix& means) {
  std::vector<double> c(means.cols(), 0.0);
  for (std::size_t k = 0; k < means.rows(); ++k) {
    for (std::size_t j = 0; j < means.cols(); ++j) c[j] += means(k, j);
  }
  for (double& v : c) v /= static_cast<double>(means.rows());
  return c;
}

}  // namespace

// ---- RNG ----------------------------------------------------------------

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SplitMix64::uniform_open_low() noexcept {
  return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
}

double SplitMix64::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open_low();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return radius * std::cos(theta);
}

// ---- data ---------------------------------------------------------------

void GaussianMixtureSpec::validate() const {
  if (n_classes < 2) throw InvalidInput("need at least two classes");
  if (dim < 1) throw InvalidInput("dim must be >= 1");
  if (means.rows() != n_classes || means.cols() != dim) {
    throw InvalidInput("means must be n_classes x dim");
  }
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) throw InvalidInput("stddev must be finite and >= 0");
  if (n_per_class < 1) throw InvalidInput("n_per_class must be >= 1");
  for (double v : means.data()) {
    if (!std::isfinite(v)) throw InvalidInput("means must be finite");
  }
  for (std::size_t a = 0; a < n_classes; ++a) {
    for (std::size_t b = a + 1; b < n_classes; ++b) {
      const auto ra = means.row(a);
      const auto rb = means.row(b);
      if (std::equal(ra.begin(), ra.end(), rb.begin())) {
        throw InvalidInput("means of classes " + std::to_string(a) + " and " + std::to_string(b) +
                           " coincide");
      }
    }
  }
}

Matrix default_means(std::size_t n_classes, std::size_t dim, double separation,
                     std::uint64_t seed) {
  Matrix means(n_classes, dim);
  if (dim >= n_classes) {
    for (std::size_t k = 0; k < n_classes; ++k) means(k, k) = separation;
    return means;
  }
  SplitMix64 rng(derive_seed(seed, kMeansStream));
  for (double& v : means.data()) v = separation * rng.normal();
  return means;
}

Dataset generate(const GaussianMixtureSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const std::size_t n = spec.n_classes * spec.n_per_class;
  Matrix features(n, spec.dim);
  std::vector<std::int32_t> labels(n);
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
      const std::size_t r = k * spec.n_per_class + i;
      labels[r] = static_cast<std::int32_t>(k);
      for (std::size_t j = 0; j < spec.dim; ++j) {
        features(r, j) = spec.means(k, j) + spec.stddev * rng.normal();
      }
    }
  }
  return {std::move(features), LabelVector(std::move(labels))};
}

std::vector<double> ood_center(const GaussianMixtureSpec& spec, double offset) {
  spec.validate();
  if (!(offset > 0.0) || !std::isfinite(offset)) throw InvalidInput("OOD offset must be > 0");
  const auto c = centroid(spec.means);

  // Orthonormal basis of span{mean_k} (which contains every mean_k - centroid)
  // by modified Gram-Schmidt.
  std::vector<std::vector<double>> basis;
  double max_radius = 0.0;
  double max_norm = 0.0;
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    std::vector<double> v(spec.dim);
    double r2 = 0.0;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      v[j] = spec.means(k, j);
      r2 += (v[j] - c[j]) * (v[j] - c[j]);
    }
    max_radius = std::max(max_radius, std::sqrt(r2));
    max_norm = std::max(max_norm, std::sqrt(dot(v, v)));
    for (const auto& b : basis) {
      const double proj = dot(v, b);
      for (std::size_t j = 0; j < spec.dim; ++j) v[j] -= proj * b[j];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm > 1e-10 * std::max(1.0, max_norm)) {
      for (double& x : v) x /= norm;
      basis.push_back(std::move(v));
    }
  }

  SplitMix64 rng(derive_seed(spec.seed, kDirectionStream));
  std::vector<double> raw(spec.dim);
  for (double& x : raw) x = rng.normal();

  std::vector<double> dir = raw;
  for (const auto& b : basis) {
    const double proj = dot(dir, b);
    for (std::size_t j = 0; j < spec.dim; ++j) dir[j] -= proj * b[j];
  }
  double norm = std::sqrt(dot(dir, dir));
  double push = offset;
  if (norm <= 1e-8 * std::sqrt(dot(raw, raw))) {
    // Means span the whole space; fall back to the raw direction.
    dir = raw;
    norm = std::sqrt(dot(dir, dir));
    push = offset + max_radius;
  }
  std::vector<double> center(spec.dim);
  for (std::size_t j = 0; j < spec.dim; ++j) center[j] = c[j] + push * dir[j] / norm;
  return center;
}

Matrix make_ood(const GaussianMixtureSpec& spec, double offset, std::size_t n) {
  const auto center = ood_center(spec, offset);
  SplitMix64 rng(derive_seed(spec.seed, kOodStream));
  Matrix out(n, spec.dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < spec.dim; ++j) out(i, j) = center[j] + spec.stddev * rng.normal();
  }
  return out;
}

// ---- model --------------------------------------------------------------

namespace {

void check_shapes(const LinearSoftmaxModel& model, const Matrix& features) {
  if (model.bias.size() != model.n_classes()) throw InvalidInput("bias must have C entries");
  if (features.cols() != model.dim()) {
    throw InvalidInput("features have " + std::to_string(features.cols()) +
                       " columns, model expects " + std::to_string(model.dim()));
  }
}

void row_logits(const LinearSoftmaxModel& model, std::span<const double> x, std::span<double> out) {
  for (std::size_t k = 0; k < model.n_classes(); ++k) {
    out[k] = model.bias[k] + dot(model.weights.row(k), x);
  }
}

}  // namespace

LossGradient loss_and_gradient(const LinearSoftmaxModel& model, const Matrix& features,
                               const LabelVector& labels) {
  check_shapes(model, features);
  if (labels.size() != features.rows() || features.rows() == 0) {
    throw InvalidInput("features and labels must be non-empty and aligned");
  }
  const std::size_t c = model.n_classes();
  const std::size_t d = model.dim();
  LossGradient out{0.0, Matrix(c, d), std::vector<double>(c, 0.0)};
  std::vector<double> z(c);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto x = features.row(i);
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= c) throw InvalidInput("label out of range for the model");
    row_logits(model, x, z);
    const double top = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - top);
    const double log_norm = top + std::log(denom);
    out.loss += log_norm - z[y];
    for (std::size_t k = 0; k < c; ++k) {
      const double residual = std::exp(z[k] - log_norm) - (k == y ? 1.0 : 0.0);
      out.grad_bias[k] += residual;
      auto g = out.grad_weights.row(k);
      for (std::size_t j = 0; j < d; ++j) g[j] += residual * x[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(features.rows());
  out.loss *= inv_n;
  for (double& v : out.grad_bias) v *= inv_n;
  for (double& v : out.grad_weights.data()) v *= inv_n;
  return out;
}

TrainResult train(const Matrix& features, const LabelVector& labels, std::size_t n_classes,
                  std::size_t epochs, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidInput("learning rate must be > 0");
  if (n_classes < 2) throw InvalidInput("need at least two classes");
  TrainResult result;
  result.model.weights = Matrix(n_classes, features.cols());
  result.model.bias.assign(n_classes, 0.0);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto g = loss_and_gradient(result.model, features, labels);
    if (!std::isfinite(g.loss)) {
      throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch));
    }
    auto w = result.model.weights.data();
    const auto gw = g.grad_weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t k = 0; k < n_classes; ++k) result.model.bias[k] -= lr * g.grad_bias[k];
  }
  result.final_loss = loss_and_gradient(result.model, features, labels).loss;
  if (!std::isfinite(result.final_loss)) throw TrainingDiverged("final loss is non-finite");
  result.train_accuracy = accuracy(result.model, features, labels);
  return result;
}

LogitsMatrix logits(const LinearSoftmaxModel& model, const Matrix& features) {
  check_shapes(model, features);
  Matrix out(features.rows(), model.n_classes());
  for (std::size_t i = 0; i < features.rows(); ++i) row_logits(model, features.row(i), out.row(i));
  return LogitsMatrix(std::move(out));
}

double accuracy(const LinearSoftmaxModel& model, const Matrix& features, const LabelVector& labels) {
  const auto z = logits(model, features);
  if (labels.size() != z.n_samples()) throw InvalidInput("features and labels must be aligned");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < z.n_samples(); ++i) {
    if (argmax(z.row(i)) == static_cast<std::size_t>(labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.n_samples());
}

// ---- fixtures -----------------------------------------------------------

Fixture make_fixture(const FixtureConfig& config) {
  GaussianMixtureSpec spec;
  spec.n_classes = config.n_classes;
  spec.dim = config.dim;
  spec.means = default_means(config.n_classes, config.dim, config.separation, config.seed);
  spec.stddev = config.stddev;
  spec.n_per_class = config.n_per_class;
  spec.seed = config.seed;

  const Dataset train_set = generate(spec);
  GaussianMixtureSpec test_spec = spec;
  test_spec.n_per_class = config.n_test_per_class;
  test_spec.seed = config.seed + 1;
  const Dataset test_set = generate(test_spec);
  const Matrix ood = make_ood(spec, config.ood_offset * config.stddev, config.n_ood);

  const auto trained = train(train_set.features, train_set.labels, config.n_classes, config.epochs,
                             config.lr);
  return Fixture{
      logits(trained.model, train_set.features),
      train_set.labels,
      logits(trained.model, test_set.features),
      test_set.labels,
      logits(trained.model, ood),
      trained.train_accuracy,
      accuracy(trained.model, test_set.features, test_set.labels),
  };
}

std::string manifest_to_json(const Manifest& manifest) {
  nlohmann::ordered_json doc;
  const auto& c = manifest.config;
  doc["generator"] = manifest.generator;
  doc["seed"] = c.seed;
  doc["n_classes"] = c.n_classes;
  doc["dim"] = c.dim;
  doc["stddev"] = c.stddev;
  doc["separation"] = c.separation;
  doc["n_per_class"] = c.n_per_class;
  doc["n_test_per_class"] = c.n_test_per_class;
  doc["n_ood"] = c.n_ood;
  doc["ood_offset"] = c.ood_offset;
  doc["epochs"] = c.epochs;
  doc["lr"] = c.lr;
  doc["train_accuracy"] = manifest.train_accuracy;
  doc["test_accuracy"] = manifest.test_accuracy;
  doc["files"] = {{"train_logits", "train.oodl"},
                  {"train_labels", "train.oody"},
                  {"test_id_logits", "test_id.oodl"},
                  {"test_id_labels", "test_id.oody"},
                  {"test_ood_logits", "test_ood.oodl"}};
  return doc.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    Manifest m;
    auto& c = m.config;
    m.generator = doc.at("generator").get<std::string>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.n_classes = doc.at("n_classes").get<std::size_t>();
    c.dim = doc.at("dim").get<std::size_t>();
    c.stddev = doc.at("stddev").get<double>();
    c.separation = doc.at("separation").get<double>();
    c.n_per_class = doc.at("n_per_class").get<std::size_t>();
    c.n_test_per_class = doc.at("n_test_per_class").get<std::size_t>();
    c.n_ood = doc.at("n_ood").get<std::size_t>();
    c.ood_offset = doc.at("ood_offset").get<double>();
    c.epochs = doc.at("epochs").get<std::size_t>();
    c.lr = doc.at("lr").get<double>();
    m.train_accuracy = doc.at("train_accuracy").get<double>();
    m.test_accuracy = doc.at("test_accuracy").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(ParseErrorKind::kBadDocument, e.what());
  }
}

}  // namespace oodcrl::synth
