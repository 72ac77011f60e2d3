#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "oodcrl/oodcrl.hpp"

namespace oodcrl::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// Raised for flag combinations CLI11 cannot express; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogitsSource {
  std::string path;
  bool has_header = false;
};

LogitsMatrix load_logits(const LogitsSource& src) {
  if (fs::path(src.path).extension() == ".csv") return io::read_csv_logits(src.path, src.has_header);
  return io::read_logits(src.path);
}

std::vector<double> parse_grid(const std::string& text, const char* name) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size() || !std::isfinite(v) || v < 0.0) {
      throw UsageError(std::string("--") + name + ": '" + cell + "' is not a non-negative number");
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError(std::string("--") + name + " grid is empty");
  return values;
}

// File stems, made unique by suffixing duplicates with their position.
std::vector<std::string> set_names(const std::vector<std::string>& paths) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    std::string stem = fs::path(paths[i]).stem().string();
    if (std::find(names.begin(), names.end(), stem) != names.end()) stem += "_" + std::to_string(i);
    names.push_back(std::move(stem));
  }
  return names;
}

json named_report(const std::string& name, const EvalReport& report) {
  json out;
  out["name"] = name;
  const json fields = json::parse(io::report_to_json(report));
  for (const auto& [key, value] : fields.items()) out[key] = value;
  return out;
}

std::string percent(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << 100.0 * v;
  return ss.str();
}

void print_eval_table(std::ostream& out, const std::vector<std::string>& names,
                      const std::vector<EvalReport>& reports) {
  std::size_t width = 8;
  for (const auto& n : names) width = std::max(width, n.size());
  out << std::left << std::setw(static_cast<int>(width) + 2) << "OOD set" << std::right
      << std::setw(10) << "FPR95(-)" << std::setw(10) << "AUROC(+)" << "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << names[i] << std::right
        << std::setw(10) << percent(reports[i].fpr95) << std::setw(10) << percent(reports[i].auroc)
        << "\n";
  }
  if (reports.size() > 1) {
    const auto mean = summarize_group(reports);
    out << std::left << std::setw(static_cast<int>(width) + 2) << "mean" << std::right
        << std::setw(10) << percent(mean.fpr95) << std::setw(10) << percent(mean.auroc) << "\n";
  }
}

// ---- subcommands --------------------------------------------------------

struct FitArgs {
  LogitsSource train_logits;
  std::string train_labels;
  std::string out_crm;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto logits = load_logits(a.train_logits);
  const auto labels = io::read_labels(a.train_labels);
  const auto crm = fit_crm(logits, labels);
  io::write_crm(crm, a.out_crm);
  out << "n_classes: " << crm.n_classes() << "\n";
  for (std::size_t k = 0; k < crm.n_classes(); ++k) {
    out << "class " << k << ": " << crm.per_class_counts()[k] << " samples\n";
  }
  return kExitOk;
}

struct ScoreArgs {
  std::string crm;
  LogitsSource logits;
  std::string method = "crl";
  double alpha = 5.0;
  double beta = 5.0;
  bool alpha_given = false;
  bool beta_given = false;
  std::string out;
};

ScoreSet compute_scores(Method method, const LogitsMatrix& logits, const ClassRelevanceMatrix* crm,
                        const CrlParams& params) {
  switch (method) {
    case Method::kCrl: return score_crl(*crm, logits, params);
    case Method::kMaxLogits: return score_maxlogits(logits);
    case Method::kMsp: return score_msp(logits);
  }
  throw InvalidInput("unknown method");
}

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const Method method = parse_method(a.method);
  CrlParams params;
  params.alpha = a.alpha;
  params.beta = a.beta;
  std::optional<ClassRelevanceMatrix> crm;
  if (method == Method::kCrl) {
    if (a.crm.empty()) throw UsageError("--crm is required for method crl");
    try {
      params.validate();
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    crm = io::read_crm(a.crm);
  } else if (a.alpha_given || a.beta_given) {
    err << "warning: --alpha/--beta are ignored for method " << a.method << "\n";
  }
  const auto logits = load_logits(a.logits);
  const auto scores = compute_scores(method, logits, crm ? &*crm : nullptr, params);
  io::write_scores_csv(scores, a.out);
  out << "wrote " << scores.size() << " " << a.method << " scores to " << a.out << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string id_scores;
  std::vector<std::string> ood_scores;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto id = io::read_scores_csv(a.id_scores);
  const auto names = set_names(a.ood_scores);
  std::vector<EvalReport> reports;
  json doc;
  doc["reports"] = json::array();
  for (std::size_t i = 0; i < a.ood_scores.size(); ++i) {
    reports.push_back(evaluate(id, io::read_scores_csv(a.ood_scores[i])));
    doc["reports"].push_back(named_report(names[i], reports.back()));
  }
  if (reports.size() > 1) {
    const auto mean = summarize_group(reports);
    doc["mean"] = {{"fpr95", mean.fpr95}, {"auroc", mean.auroc}, {"n_sets", mean.n_sets}};
  }
  print_eval_table(out, names, reports);
  if (!a.out.empty()) io::write_file(a.out, doc.dump(2) + "\n");
  return kExitOk;
}

struct SweepArgs {
  std::string crm;
  LogitsSource id_logits;
  std::vector<std::string> ood_logits;
  std::string alphas;
  std::string betas;
  std::string out;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const auto alphas = parse_grid(a.alphas, "alphas");
  const auto betas = parse_grid(a.betas, "betas");
  for (double al : alphas) {
    for (double be : betas) {
      if (al == 0.0 && be == 0.0) throw UsageError("alpha and beta cannot both be zero");
    }
  }
  const auto crm = io::read_crm(a.crm);
  const auto id_logits = load_logits(a.id_logits);
  std::vector<LogitsMatrix> ood;
  for (const auto& p : a.ood_logits) ood.push_back(load_logits({p, a.id_logits.has_header}));
  const auto names = set_names(a.ood_logits);

  struct Row {
    double alpha;
    double beta;
    std::vector<EvalReport> reports;
    double mean_auroc;
  };
  std::vector<Row> rows;
  for (double al : alphas) {
    for (double be : betas) {
      CrlParams params;
      params.alpha = al;
      params.beta = be;
      const auto id_scores = score_crl(crm, id_logits, params);
      Row row{al, be, {}, 0.0};
      for (const auto& o : ood) row.reports.push_back(evaluate(id_scores, score_crl(crm, o, params)));
      row.mean_auroc = summarize_group(row.reports).auroc;
      rows.push_back(std::move(row));
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].mean_auroc > rows[best].mean_auroc) best = i;
  }

  out << std::right << std::setw(8) << "alpha" << std::setw(8) << "beta";
  for (const auto& n : names) out << std::setw(std::max<int>(12, static_cast<int>(n.size()) + 2)) << n;
  if (names.size() > 1) out << std::setw(12) << "mean";
  out << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << std::setw(8) << io::format_double(rows[i].alpha) << std::setw(8)
        << io::format_double(rows[i].beta);
    for (std::size_t s = 0; s < names.size(); ++s) {
      out << std::setw(std::max<int>(12, static_cast<int>(names[s].size()) + 2))
          << percent(rows[i].reports[s].auroc);
    }
    if (names.size() > 1) out << std::setw(12) << percent(rows[i].mean_auroc);
    out << (i == best ? "  *" : "") << "\n";
  }
  out << "AUROC(+) in percent; * marks the best mean AUROC\n";

  if (!a.out.empty()) {
    json doc;
    doc["rows"] = json::array();
    for (const auto& row : rows) {
      json r;
      r["alpha"] = row.alpha;
      r["beta"] = row.beta;
      r["mean_auroc"] = row.mean_auroc;
      r["reports"] = json::array();
      for (std::size_t s = 0; s < names.size(); ++s) {
        r["reports"].push_back(named_report(names[s], row.reports[s]));
      }
      doc["rows"].push_back(std::move(r));
    }
    doc["best_index"] = best;
    io::write_file(a.out, doc.dump(2) + "\n");
  }
  return kExitOk;
}

struct HistArgs {
  std::vector<std::string> scores;
  std::size_t bins = 50;
  std::string out;
};

int cmd_hist(const HistArgs& a, std::ostream& out) {
  if (a.bins < 2) throw UsageError("--bins must be at least 2");
  std::vector<std::vector<double>> sets;
  for (const auto& p : a.scores) sets.push_back(io::read_scores_csv(p).scores);
  const auto names = set_names(a.scores);
  const auto hist = histogram(sets, a.bins);

  std::string csv = "bin,lo,hi";
  for (const auto& n : names) csv += "," + n;
  csv += "\n";
  for (std::size_t b = 0; b < a.bins; ++b) {
    csv += std::to_string(b) + "," + io::format_double(hist.edges[b]) + "," +
           io::format_double(hist.edges[b + 1]);
    for (const auto& counts : hist.counts) csv += "," + std::to_string(counts[b]);
    csv += "\n";
  }
  io::write_file(a.out, csv);
  for (std::size_t s = 0; s < names.size(); ++s) {
    out << names[s] << ": " << sets[s].size() << " scores\n";
  }
  if (sets.size() >= 2) {
    out << "overlap(" << names[0] << ", " << names[1] << "): " << overlap_coefficient(hist, 0, 1)
        << "\n";
  }
  return kExitOk;
}

int cmd_synth(const synth::FixtureConfig& config, const std::string& out_dir, std::ostream& out) {
  const auto fixture = synth::make_fixture(config);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  io::write_logits(fixture.train_logits, dir / "train.oodl");
  io::write_labels(fixture.train_labels, dir / "train.oody");
  io::write_logits(fixture.test_id_logits, dir / "test_id.oodl");
  io::write_labels(fixture.test_id_labels, dir / "test_id.oody");
  io::write_logits(fixture.test_ood_logits, dir / "test_ood.oodl");
  synth::Manifest manifest;
  manifest.config = config;
  manifest.train_accuracy = fixture.train_accuracy;
  manifest.test_accuracy = fixture.test_accuracy;
  io::write_file(dir / "manifest.json", synth::manifest_to_json(manifest));
  out << "train accuracy " << fixture.train_accuracy << ", test accuracy " << fixture.test_accuracy
      << "\nwrote fixtures to " << dir.string() << "\n";
  return kExitOk;
}

void add_logits_option(CLI::App* app, const std::string& flag, LogitsSource& src,
                       const std::string& help) {
  app->add_option(flag, src.path, help + " (.oodl, or .csv)")->required()->check(CLI::ExistingFile);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-hoc OOD detection with class relevance scoring"};
  app.name("oodcrl");
  app.require_subcommand(1);
  app.fallthrough();
  bool csv_header = false;
  app.add_flag("--csv-header", csv_header, "CSV logits inputs start with a header row");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Build the class relevance matrix from training logits");
  add_logits_option(fit_cmd, "--train-logits", fit.train_logits, "Training logits");
  fit_cmd->add_option("--train-labels", fit.train_labels, "Training labels (.oody)")
      ->required()
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--out-crm", fit.out_crm, "Output CRM document")->required();

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score test logits");
  score_cmd->add_option("--crm", score.crm, "CRM document (crl only)")->check(CLI::ExistingFile);
  add_logits_option(score_cmd, "--logits", score.logits, "Test logits");
  score_cmd->add_option("--method", score.method, "crl, maxlogits or msp")
      ->check(CLI::IsMember({"crl", "maxlogits", "msp"}))
      ->capture_default_str();
  auto* alpha_opt = score_cmd->add_option("--alpha", score.alpha, "Weight of the max-logit term")
                        ->capture_default_str();
  auto* beta_opt = score_cmd->add_option("--beta", score.beta, "Weight of the class relevance term")
                       ->capture_default_str();
  score_cmd->add_option("--out", score.out, "Output scores CSV")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "FPR95 and AUROC of ID vs OOD scores");
  eval_cmd->add_option("--id-scores", eval.id_scores, "ID scores CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ood-scores", eval.ood_scores, "One or more OOD scores CSVs")
      ->required()
      ->expected(1, -1)
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out, "Write the JSON report here");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search over alpha and beta");
  sweep_cmd->add_option("--crm", sweep.crm, "CRM document")->required()->check(CLI::ExistingFile);
  add_logits_option(sweep_cmd, "--id-logits", sweep.id_logits, "ID test logits");
  sweep_cmd->add_option("--ood-logits", sweep.ood_logits, "One or more OOD logits files")
      ->required()
      ->expected(1, -1)
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--alphas", sweep.alphas, "Comma-separated alpha values")->required();
  sweep_cmd->add_option("--betas", sweep.betas, "Comma-separated beta values")->required();
  sweep_cmd->add_option("--out", sweep.out, "Write the JSON sweep table here");

  HistArgs hist;
  auto* hist_cmd = app.add_subcommand("hist", "Shared-edge histograms of score sets");
  hist_cmd->add_option("--scores", hist.scores, "One or more scores CSVs")
      ->required()
      ->expected(1, -1)
      ->check(CLI::ExistingFile);
  hist_cmd->add_option("--bins", hist.bins, "Number of bins")->capture_default_str();
  hist_cmd->add_option("--out", hist.out, "Output histogram CSV")->required();

  synth::FixtureConfig synth_cfg;
  std::string synth_dir;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic Gaussian-mixture fixtures");
  synth_cmd->add_option("--classes", synth_cfg.n_classes)->check(CLI::Range(2, 1 << 20))->capture_default_str();
  synth_cmd->add_option("--dim", synth_cfg.dim)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--stddev", synth_cfg.stddev)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--separation", synth_cfg.separation, "Distance of class means from the origin")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--n-per-class", synth_cfg.n_per_class)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--n-test-per-class", synth_cfg.n_test_per_class)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--n-ood", synth_cfg.n_ood)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--ood-offset", synth_cfg.ood_offset, "OOD distance from every mean, in stddevs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_cfg.seed)->capture_default_str();
  synth_cmd->add_option("--epochs", synth_cfg.epochs)->capture_default_str();
  synth_cmd->add_option("--lr", synth_cfg.lr)->check(CLI::PositiveNumber)->capture_default_str();
  synth_cmd->add_option("--out-dir", synth_dir)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  fit.train_logits.has_header = csv_header;
  score.logits.has_header = csv_header;
  sweep.id_logits.has_header = csv_header;
  score.alpha_given = alpha_opt->count() > 0;
  score.beta_given = beta_opt->count() > 0;

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*score_cmd) return cmd_score(score, out, err);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*sweep_cmd) return cmd_sweep(sweep, out);
    if (*hist_cmd) return cmd_hist(hist, out);
    if (*synth_cmd) return cmd_synth(synth_cfg, synth_dir, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitComputation;
  }
  return kExitUsage;
}

}  // namespace oodcrl::cli
