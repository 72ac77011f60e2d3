#include <doctest.h>

#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "oodcrl/io.hpp"
#include "oodcrl/synth.hpp"
#include "temp_dir.hpp"

using namespace oodcrl;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

void write_scores(const fs::path& path, std::vector<double> scores, Method method = Method::kMaxLogits) {
  ScoreSet s;
  s.method = method;
  s.scores = std::move(scores);
  io::write_scores_csv(s, path);
}

// 2-class fixture from the fit_crm worked example plus one test row.
void write_tiny_fixture(const fs::path& dir) {
  io::write_logits(LogitsMatrix(2, 2, {2, 0, 0, 2}), dir / "train.oodl");
  io::write_labels(LabelVector({0, 1}), dir / "train.oody");
  io::write_logits(LogitsMatrix(2, 2, {2, 0, 0.5, 0}), dir / "test.oodl");
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  test::TempDir dir;
  write_tiny_fixture(dir.path());
  CHECK(run({}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  auto r = run({"fit", "--train-logits", p(dir.path() / "train.oodl"), "--out-crm", p(dir.path() / "c.json")});
  CHECK(r.code == 2);
  r = run({"fit", "--train-logits", p(dir.path() / "train.oodl"), "--train-labels",
           p(dir.path() / "missing.oody"), "--out-crm", p(dir.path() / "c.json")});
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir.path() / "c.json"));
  r = run({"score", "--logits", p(dir.path() / "test.oodl"), "--out", p(dir.path() / "s.csv")});
  CHECK(r.code == 2);
  CHECK(r.err.find("--crm") != std::string::npos);
  r = run({"score", "--logits", p(dir.path() / "test.oodl"), "--method", "odin", "--out", p(dir.path() / "s.csv")});
  CHECK(r.code == 2);
}

TEST_CASE("fit") {
  test::TempDir dir;
  write_tiny_fixture(dir.path());
  const auto crm_path = dir.path() / "crm.json";
  auto r = run({"fit", "--train-logits", p(dir.path() / "train.oodl"), "--train-labels",
                p(dir.path() / "train.oody"), "--out-crm", p(crm_path)});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("n_classes: 2") != std::string::npos);
  const auto crm = io::read_crm(crm_path);
  CHECK(std::abs(crm.prototype_prob()(0, 0) - 0.88079707797788244) < 1e-15);
  CHECK(std::abs(crm.prototype_prob()(0, 1) - 0.11920292202211756) < 1e-15);
  CHECK(std::abs(crm.prototype_prob()(1, 1) - 0.88079707797788244) < 1e-15);

  SUBCASE("synthetic three-class fixture") {
    synth::FixtureConfig cfg;
    cfg.n_classes = 3;
    cfg.dim = 4;
    cfg.n_per_class = 50;
    cfg.n_test_per_class = 10;
    cfg.n_ood = 10;
    const auto fx = synth::make_fixture(cfg);
    io::write_logits(fx.train_logits, dir.path() / "t3.oodl");
    io::write_labels(fx.train_labels, dir.path() / "t3.oody");
    r = run({"fit", "--train-logits", p(dir.path() / "t3.oodl"), "--train-labels",
             p(dir.path() / "t3.oody"), "--out-crm", p(dir.path() / "c3.json")});
    REQUIRE(r.code == 0);
    const auto c3 = io::read_crm(dir.path() / "c3.json");
    CHECK(c3.n_classes() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 3; ++j) sum += c3.prototype_prob()(k, j);
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
  SUBCASE("empty class") {
    io::write_logits(LogitsMatrix(2, 3, {1, 0, 0, 0, 1, 0}), dir.path() / "e.oodl");
    io::write_labels(LabelVector({0, 1}), dir.path() / "e.oody");
    r = run({"fit", "--train-logits", p(dir.path() / "e.oodl"), "--train-labels",
             p(dir.path() / "e.oody"), "--out-crm", p(dir.path() / "e.json")});
    CHECK(r.code == 1);
    CHECK(r.err.find("class 2") != std::string::npos);
  }
  SUBCASE("corrupt logits file") {
    io::write_file(dir.path() / "bad.oodl", "OODX");
    r = run({"fit", "--train-logits", p(dir.path() / "bad.oodl"), "--train-labels",
             p(dir.path() / "train.oody"), "--out-crm", p(dir.path() / "b.json")});
    CHECK(r.code == 1);
    CHECK(r.err.find("bad-magic") != std::string::npos);
  }
  SUBCASE("CSV logits with position in the error") {
    io::write_file(dir.path() / "t.csv", "c0,c1\n2,0\n0,oops\n");
    r = run({"--csv-header", "fit", "--train-logits", p(dir.path() / "t.csv"), "--train-labels",
             p(dir.path() / "train.oody"), "--out-crm", p(dir.path() / "b.json")});
    CHECK(r.code == 1);
    CHECK(r.err.find("row 3, column 2") != std::string::npos);
  }
}

TEST_CASE("score") {
  test::TempDir dir;
  write_tiny_fixture(dir.path());
  const auto crm = p(dir.path() / "crm.json");
  REQUIRE(run({"fit", "--train-logits", p(dir.path() / "train.oodl"), "--train-labels",
               p(dir.path() / "train.oody"), "--out-crm", crm})
              .code == 0);

  const auto out = dir.path() / "crl.csv";
  auto r = run({"score", "--crm", crm, "--logits", p(dir.path() / "test.oodl"), "--alpha", "1", "--beta",
                "1", "--out", p(out)});
  REQUIRE(r.code == 0);
  const auto s = io::read_scores_csv(out);
  CHECK(s.method == Method::kCrl);
  // Independent 50-digit evaluation: -0.5 - 1 / 0.219162030060084.
  CHECK(std::abs(s.scores[1] - -5.0628341721686317) < 1e-3);
  CHECK((*s.pseudo_classes)[1] == 0);

  const auto first = io::read_file(out);
  REQUIRE(run({"score", "--crm", crm, "--logits", p(dir.path() / "test.oodl"), "--alpha", "1", "--beta",
               "1", "--out", p(out)})
              .code == 0);
  CHECK(io::read_file(out) == first);

  r = run({"score", "--logits", p(dir.path() / "test.oodl"), "--method", "maxlogits", "--alpha", "3",
           "--out", p(dir.path() / "ml.csv")});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(io::read_scores_csv(dir.path() / "ml.csv").scores == std::vector<double>{-2.0, -0.5});

  r = run({"score", "--logits", p(dir.path() / "test.oodl"), "--method", "msp", "--out",
           p(dir.path() / "msp.csv")});
  CHECK(r.code == 0);
  CHECK(r.err.empty());

  io::write_logits(LogitsMatrix(1, 3, {1, 2, 3}), dir.path() / "wide.oodl");
  r = run({"score", "--crm", crm, "--logits", p(dir.path() / "wide.oodl"), "--out", p(dir.path() / "w.csv")});
  CHECK(r.code == 1);

  r = run({"score", "--crm", crm, "--logits", p(dir.path() / "test.oodl"), "--alpha", "0", "--beta", "0",
           "--out", p(dir.path() / "z.csv")});
  CHECK(r.code == 2);
}

TEST_CASE("eval") {
  test::TempDir dir;
  const auto id = dir.path() / "id.csv";
  const auto ood = dir.path() / "ood.csv";
  const auto report = dir.path() / "r.json";

  write_scores(id, {0, 1});
  write_scores(ood, {2, 3});
  auto r = run({"eval", "--id-scores", p(id), "--ood-scores", p(ood), "--out", p(report)});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("FPR95") != std::string::npos);
  CHECK(r.out.find("100.00") != std::string::npos);
  auto doc = json::parse(io::read_file(report));
  auto parsed = io::report_from_json(doc["reports"][0].dump());
  CHECK(parsed.auroc == 1.0);
  CHECK(parsed.fpr95 == 0.0);

  write_scores(id, {1, 3});
  write_scores(ood, {2, 4});
  REQUIRE(run({"eval", "--id-scores", p(id), "--ood-scores", p(ood), "--out", p(report)}).code == 0);
  CHECK(io::report_from_json(json::parse(io::read_file(report))["reports"][0].dump()).auroc == 0.75);

  std::vector<double> id20(20);
  std::vector<double> ood20(20);
  std::iota(id20.begin(), id20.end(), 1.0);
  std::iota(ood20.begin(), ood20.end(), 10.5);
  write_scores(id, id20);
  write_scores(ood, ood20);
  REQUIRE(run({"eval", "--id-scores", p(id), "--ood-scores", p(ood), "--out", p(report)}).code == 0);
  doc = json::parse(io::read_file(report));
  parsed = io::report_from_json(doc["reports"][0].dump());
  CHECK(parsed.fpr95 == 0.45);
  CHECK(parsed.n_id == 20);
  // Report written by eval parses back and re-serializes identically.
  json fields = doc["reports"][0];
  fields.erase("name");
  CHECK(io::report_to_json(parsed) == fields.dump(2));

  SUBCASE("group mean over several OOD sets") {
    const auto ood2 = dir.path() / "ood2.csv";
    write_scores(ood2, {0.5, 30});
    REQUIRE(run({"eval", "--id-scores", p(id), "--ood-scores", p(ood), p(ood2), "--out", p(report)}).code == 0);
    doc = json::parse(io::read_file(report));
    CHECK(doc["reports"].size() == 2);
    const double a0 = doc["reports"][0]["auroc"].get<double>();
    const double a1 = doc["reports"][1]["auroc"].get<double>();
    CHECK(doc["mean"]["auroc"].get<double>() == doctest::Approx((a0 + a1) / 2));
  }
  SUBCASE("method mismatch") {
    write_scores(ood, {2, 3}, Method::kMsp);
    r = run({"eval", "--id-scores", p(id), "--ood-scores", p(ood)});
    CHECK(r.code == 1);
    CHECK(r.err.find("mismatch") != std::string::npos);
  }
}

TEST_CASE("sweep matches score + eval and flags the best row") {
  test::TempDir dir;
  synth::FixtureConfig cfg;
  cfg.n_per_class = 60;
  cfg.n_test_per_class = 40;
  cfg.n_ood = 150;
  cfg.separation = 3.0;
  REQUIRE(run({"synth", "--out-dir", p(dir.path()), "--n-per-class", "60", "--n-test-per-class", "40",
               "--n-ood", "150", "--separation", "3"})
              .code == 0);
  const auto crm = p(dir.path() / "crm.json");
  REQUIRE(run({"fit", "--train-logits", p(dir.path() / "train.oodl"), "--train-labels",
               p(dir.path() / "train.oody"), "--out-crm", crm})
              .code == 0);

  const std::vector<std::string> common{"--crm", crm, "--alpha", "2", "--beta", "0.7"};
  auto args = common;
  args.insert(args.begin(), "score");
  auto id_args = args;
  id_args.insert(id_args.end(), {"--logits", p(dir.path() / "test_id.oodl"), "--out", p(dir.path() / "id.csv")});
  auto ood_args = args;
  ood_args.insert(ood_args.end(), {"--logits", p(dir.path() / "test_ood.oodl"), "--out", p(dir.path() / "test_ood.csv")});
  REQUIRE(run(id_args).code == 0);
  REQUIRE(run(ood_args).code == 0);
  REQUIRE(run({"eval", "--id-scores", p(dir.path() / "id.csv"), "--ood-scores", p(dir.path() / "test_ood.csv"),
               "--out", p(dir.path() / "eval.json")})
              .code == 0);
  auto r = run({"sweep", "--crm", crm, "--id-logits", p(dir.path() / "test_id.oodl"), "--ood-logits",
                p(dir.path() / "test_ood.oodl"), "--alphas", "2", "--betas", "0.7", "--out",
                p(dir.path() / "sweep.json")});
  REQUIRE(r.code == 0);
  const auto eval_doc = json::parse(io::read_file(dir.path() / "eval.json"));
  const auto sweep_doc = json::parse(io::read_file(dir.path() / "sweep.json"));
  CHECK(sweep_doc["rows"][0]["reports"][0].dump() == eval_doc["reports"][0].dump());

  r = run({"sweep", "--crm", crm, "--id-logits", p(dir.path() / "test_id.oodl"), "--ood-logits",
           p(dir.path() / "test_ood.oodl"), "--alphas", "1,2,5", "--betas", "0.5,0.7,1,3,5", "--out",
           p(dir.path() / "grid.json")});
  REQUIRE(r.code == 0);
  const auto grid = json::parse(io::read_file(dir.path() / "grid.json"));
  REQUIRE(grid["rows"].size() == 15);
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid["rows"].size(); ++i) {
    if (grid["rows"][i]["mean_auroc"].get<double>() > grid["rows"][best]["mean_auroc"].get<double>()) best = i;
  }
  CHECK(grid["best_index"].get<std::size_t>() == best);
  CHECK(std::count(r.out.begin(), r.out.end(), '*') == 2);  // legend + flagged row

  r = run({"sweep", "--crm", crm, "--id-logits", p(dir.path() / "test_id.oodl"), "--ood-logits",
           p(dir.path() / "test_ood.oodl"), "--alphas", "", "--betas", "1"});
  CHECK(r.code == 2);
  r = run({"sweep", "--crm", crm, "--id-logits", p(dir.path() / "test_id.oodl"), "--ood-logits",
           p(dir.path() / "test_ood.oodl"), "--alphas", "1,x", "--betas", "1"});
  CHECK(r.code == 2);
}

TEST_CASE("hist") {
  test::TempDir dir;
  write_scores(dir.path() / "a.csv", {0.0, 0.1, 0.2, 0.15});
  write_scores(dir.path() / "b.csv", {0.9, 1.0});
  auto r = run({"hist", "--scores", p(dir.path() / "a.csv"), p(dir.path() / "b.csv"), "--bins", "4", "--out",
                p(dir.path() / "h.csv")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("overlap(a, b): 0") != std::string::npos);
  const auto text = io::read_file(dir.path() / "h.csv");
  CHECK(text.rfind("bin,lo,hi,a,b\n", 0) == 0);
  std::istringstream ss(text);
  std::string line;
  std::getline(ss, line);
  std::size_t total_a = 0;
  std::size_t total_b = 0;
  int rows = 0;
  while (std::getline(ss, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 5);
    const auto ca = std::stoul(cells[3]);
    const auto cb = std::stoul(cells[4]);
    CHECK((ca == 0 || cb == 0));
    total_a += ca;
    total_b += cb;
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(total_a == 4);
  CHECK(total_b == 2);

  r = run({"hist", "--scores", p(dir.path() / "a.csv"), "--bins", "1", "--out", p(dir.path() / "h.csv")});
  CHECK(r.code == 2);
}

TEST_CASE("synth") {
  test::TempDir a;
  test::TempDir b;
  const std::vector<std::string> flags{"--n-per-class", "40", "--n-test-per-class", "20", "--n-ood", "30",
                                       "--seed", "7"};
  auto args_a = flags;
  args_a.insert(args_a.begin(), {"synth", "--out-dir", p(a.path())});
  auto args_b = flags;
  args_b.insert(args_b.begin(), {"synth", "--out-dir", p(b.path())});
  REQUIRE(run(args_a).code == 0);
  REQUIRE(run(args_b).code == 0);
  for (const char* f : {"train.oodl", "train.oody", "test_id.oodl", "test_id.oody", "test_ood.oodl", "manifest.json"}) {
    CHECK(io::read_file(a.path() / f) == io::read_file(b.path() / f));
  }
  const auto manifest = synth::manifest_from_json(io::read_file(a.path() / "manifest.json"));
  CHECK(manifest.config.seed == 7);
  CHECK(manifest.config.n_per_class == 40);
  CHECK(synth::manifest_to_json(manifest) == io::read_file(a.path() / "manifest.json"));
  CHECK(io::read_logits(a.path() / "test_ood.oodl").n_samples() == 30);
  CHECK(io::read_labels(a.path() / "train.oody").size() == 5 * 40);

  CHECK(run({"synth", "--out-dir", p(a.path()), "--classes", "1"}).code == 2);
  CHECK(run({"synth", "--out-dir", p(a.path()), "--ood-offset", "0"}).code == 2);
}
