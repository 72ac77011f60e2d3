#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oodcrl/error.hpp"
#include "oodcrl/metrics.hpp"
#include "oodcrl/scoring.hpp"
#include "oracles.hpp"

using namespace oodcrl;

using V = std::vector<double>;

TEST_CASE("auroc examples") {
  CHECK(auroc(V{0, 1}, V{2, 3}) == 1.0);
  CHECK(auroc(V{2, 3}, V{0, 1}) == 0.0);
  CHECK(auroc(V{1, 3}, V{2, 4}) == 0.75);
  CHECK(auroc(V{1}, V{1}) == 0.5);
  CHECK_THROWS_AS(auroc(V{}, V{1}), InvalidInput);
  CHECK_THROWS_AS(auroc(V{1}, V{}), InvalidInput);
  CHECK_THROWS_AS(auroc(V{NAN}, V{1}), InvalidInput);
}

TEST_CASE("fpr_at_tpr examples") {
  V id(20);
  V ood(20);
  std::iota(id.begin(), id.end(), 1.0);
  std::iota(ood.begin(), ood.end(), 10.5);
  CHECK(fpr_at_tpr(id, ood, 0.95) == 0.45);
  CHECK(oracle::fpr_at_tpr(id, ood, 0.95) == 0.45);

  CHECK(fpr_at_tpr(V{1, 2, 3}, V{4, 5}) == 0.0);
  CHECK(fpr_at_tpr(V{5, 6, 7}, V{1, 2}) == 1.0);
  CHECK_THROWS_AS(fpr_at_tpr(V{1}, V{1}, 0.0), InvalidInput);
  CHECK_THROWS_AS(fpr_at_tpr(V{1}, V{1}, 1.5), InvalidInput);
  CHECK_THROWS_AS(fpr_at_tpr(V{}, V{1}), InvalidInput);
}

TEST_CASE("fpr_at_tpr uses the ceiling quantile") {
  // 100 ID scores: 0.95 * 100 is exactly 95 and must not become 96.
  V id(100);
  std::iota(id.begin(), id.end(), 0.0);
  CHECK(fpr_at_tpr(id, V{93.5, 94.5}, 0.95) == 0.5);
  // 10 ID scores: ceil(9.5) = 10, so the threshold is the maximum.
  V id10(10);
  std::iota(id10.begin(), id10.end(), 0.0);
  CHECK(fpr_at_tpr(id10, V{8.5, 9.0}, 0.95) == 1.0);
}

TEST_CASE("metrics match brute force on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> size(1, 50);
  for (int trial = 0; trial < 300; ++trial) {
    const bool ties = trial % 2 == 0;
    const auto id = oracle::random_scores(rng, size(rng), ties);
    const auto ood = oracle::random_scores(rng, size(rng), ties);
    CHECK(auroc(id, ood) == oracle::auroc(id, ood));
    CHECK(fpr_at_tpr(id, ood) == oracle::fpr_at_tpr(id, ood, 0.95));
    CHECK(auroc(id, ood) + auroc(ood, id) == 1.0);
  }
}

TEST_CASE("auroc is invariant under increasing transforms") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto id = oracle::random_scores(rng, 30, trial % 2 == 0);
    const auto ood = oracle::random_scores(rng, 25, trial % 2 == 0);
    V tid = id;
    V tood = ood;
    for (auto& v : tid) v = std::exp(v) * 3.0 + 1.0;
    for (auto& v : tood) v = std::exp(v) * 3.0 + 1.0;
    CHECK(auroc(id, ood) == auroc(tid, tood));
  }
}

TEST_CASE("fpr_at_tpr is nondecreasing in the target") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto id = oracle::random_scores(rng, 40, trial % 3 == 0);
    const auto ood = oracle::random_scores(rng, 40, trial % 3 == 0);
    double prev = 0.0;
    for (double t = 0.05; t <= 1.0 + 1e-12; t += 0.05) {
      const double f = fpr_at_tpr(id, ood, std::min(t, 1.0));
      CHECK(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("evaluate") {
  ScoreSet id;
  id.scores = {0, 1};
  ScoreSet ood;
  ood.scores = {2, 3};
  auto r = evaluate(id, ood);
  CHECK(r.auroc == 1.0);
  CHECK(r.fpr95 == 0.0);
  CHECK(r.n_id == 2);
  CHECK(r.n_ood == 2);
  CHECK_FALSE(r.params.has_value());

  ood.scores = {1, 0};
  CHECK(evaluate(id, ood).auroc == 0.5);

  id.scores = {1, 3};
  ood.scores = {2, 4};
  CHECK(evaluate(id, ood).auroc == 0.75);

  ood.method = Method::kMsp;
  CHECK_THROWS_AS(evaluate(id, ood), InvalidInput);

  ScoreSet a;
  a.method = Method::kCrl;
  a.alpha = 5;
  a.beta = 5;
  a.scores = {1};
  a.pseudo_classes = std::vector<std::int32_t>{0};
  ScoreSet b = a;
  b.scores = {2};
  r = evaluate(a, b);
  REQUIRE(r.params.has_value());
  CHECK(r.params->first == 5.0);
  b.beta = 0.5;
  CHECK_THROWS_AS(evaluate(a, b), InvalidInput);
}

TEST_CASE("negated convention round trip") {
  // Raw max logits (higher = more ID), negated by hand, reproduce the
  // report of score_maxlogits.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 3.0);
  auto make = [&](std::size_t n) {
    std::vector<double> v(n * 4);
    for (auto& x : v) x = d(rng);
    return LogitsMatrix(n, 4, v);
  };
  const auto id_logits = make(40);
  const auto ood_logits = make(35);
  auto negated_max = [](const LogitsMatrix& l) {
    ScoreSet s;
    for (std::size_t i = 0; i < l.n_samples(); ++i) {
      double m = l(i, 0);
      for (std::size_t k = 1; k < l.n_classes(); ++k) m = std::max(m, l(i, k));
      s.scores.push_back(-m);
    }
    return s;
  };
  CHECK(evaluate(score_maxlogits(id_logits), score_maxlogits(ood_logits)) ==
        evaluate(negated_max(id_logits), negated_max(ood_logits)));
}

TEST_CASE("summarize_group averages") {
  std::vector<EvalReport> reports(2);
  reports[0].auroc = 0.9;
  reports[0].fpr95 = 0.3;
  reports[1].auroc = 0.8;
  reports[1].fpr95 = 0.5;
  const auto g = summarize_group(reports);
  CHECK(g.auroc == doctest::Approx(0.85));
  CHECK(g.fpr95 == doctest::Approx(0.4));
  CHECK(g.n_sets == 2);
  CHECK_THROWS_AS(summarize_group(std::span<const EvalReport>{}), InvalidInput);
}

TEST_CASE("histogram") {
  SUBCASE("disjoint sets do not share bins") {
    const std::vector<V> sets{{0.0, 0.1, 0.2}, {0.9, 1.0}};
    const auto h = histogram(sets, 4);
    for (std::size_t b = 0; b < 4; ++b) CHECK((h.counts[0][b] == 0 || h.counts[1][b] == 0));
    CHECK(overlap_coefficient(h, 0, 1) == 0.0);
    CHECK(h.edges.front() == 0.0);
    CHECK(h.edges.back() == 1.0);
    CHECK(h.counts[1][3] == 2);
  }
  SUBCASE("counts are conserved") {
    std::mt19937_64 rng(1);
    const std::vector<V> sets{oracle::random_scores(rng, 123, false), oracle::random_scores(rng, 77, true)};
    const auto h = histogram(sets, 13);
    for (std::size_t s = 0; s < 2; ++s) {
      std::size_t total = 0;
      for (auto c : h.counts[s]) total += c;
      CHECK(total == sets[s].size());
    }
    CHECK(overlap_coefficient(h, 0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("uniform scores fill bins evenly") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    V s(1000);
    for (auto& v : s) v = u(rng);
    const std::vector<V> sets{s};
    const auto h = histogram(sets, 10);
    // Binomial(1000, ~0.1): sigma = sqrt(1000 * 0.1 * 0.9) ~ 9.49.
    const double sigma = std::sqrt(1000 * 0.1 * 0.9);
    for (auto c : h.counts[0]) CHECK(std::abs(static_cast<double>(c) - 100.0) < 5 * sigma);
  }
  SUBCASE("errors") {
    const std::vector<V> sets{{1.0}};
    CHECK_THROWS_AS(histogram(sets, 1), InvalidInput);
    const std::vector<V> empty{{}};
    CHECK_THROWS_AS(histogram(empty, 5), InvalidInput);
  }
  SUBCASE("constant scores land in one bin") {
    const std::vector<V> sets{{2.0, 2.0, 2.0}};
    const auto h = histogram(sets, 5);
    CHECK(h.counts[0][0] == 3);
  }
}
