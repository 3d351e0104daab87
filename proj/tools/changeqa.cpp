// Command-line front end: dataset build, lab experiments and the review server.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "changeqa/annotation.hpp"
#include "changeqa/calibrate.hpp"
#include "changeqa/config.hpp"
#include "changeqa/dataset_stats.hpp"
#include "changeqa/error.hpp"
#include "changeqa/pipeline.hpp"
#include "changeqa/preference.hpp"
#include "changeqa/review_server.hpp"
#include "changeqa/synthetic.hpp"

namespace fs = std::filesystem;
using namespace changeqa;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out = "changeqa-out";
};

PipelineConfig load_run_config(const Globals& g) {
  if (g.config.empty()) fail(Errc::config, "--config is required for this command");
  auto cfg = load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.jobs) cfg.jobs = *g.jobs;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(Errc::io, "cannot write " + path.string());
  f << text;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Backends plus the optional gallery and remote generator for one run.
struct Backends {
  std::unique_ptr<EncoderBackend> encoder;
  std::unique_ptr<JudgeBackend> judge;
  std::optional<Gallery> gallery;
  std::optional<RemoteQaGenerator> qa_remote;

  PipelineContext context(const PipelineConfig& cfg) const {
    return {&cfg, encoder.get(), judge.get(), gallery ? &*gallery : nullptr, qa_remote ? &*qa_remote : nullptr};
  }
};

Backends make_backends(const PipelineConfig& cfg) {
  Backends b;
  b.encoder = make_encoder(cfg);
  b.judge = make_judge(cfg);
  if (cfg.gallery_manifest) b.gallery = Gallery::load(*cfg.gallery_manifest, cfg.classes, *b.encoder);
  if (cfg.qa.generator == QaSettings::Generator::remote) b.qa_remote.emplace(cfg.qa);
  return b;
}

int cmd_run(const Globals& g, const std::string& pairs_path) {
  const auto cfg = load_run_config(g);
  const auto pairs = load_pairs_manifest(pairs_path);
  const auto backends = make_backends(cfg);
  const auto result = run_pipeline(pairs, backends.context(cfg));
  write_run_outputs(result, cfg.classes, g.out);
  for (const auto& f : result.failures) std::cerr << "pair " << f.pair_id << " failed: " << f.message << "\n";
  const auto& s = result.stats;
  std::cout << "pairs " << s.pairs_processed << " processed, " << s.pairs_failed << " failed\n"
            << "candidates " << s.extracted_candidates << " extracted, " << s.rejected_patch << " rejected by patch filter\n"
            << "screened " << s.total_candidates << ": " << s.rejected_encoder << " rejected, " << s.directly_accepted
            << " accepted, " << s.forwarded_to_judge << " to judge (" << s.accepted_judge << " accepted, "
            << s.rejected_judge << " rejected)\n"
            << "rows " << s.change_rows << " change, " << s.no_change_rows << " no-change -> "
            << (fs::path(g.out) / "dataset.jsonl").string() << "\n";
  const auto broken = s.identity_violation();
  if (!broken.empty()) {
    std::cerr << "stage statistics inconsistent: " << broken << "\n";
    return 3;
  }
  return result.failures.empty() ? 0 : 2;
}

int cmd_stats(const Globals& g, const std::string& dataset) {
  const auto report = dataset_stats(fs::path(dataset));
  std::cout << format_table(report);
  const fs::path out(g.out);
  write_text(out / "dataset_stats.json", to_json(report).dump(2) + "\n");
  write_text(out / "class_counts.csv", class_csv(report));
  write_text(out / "question_words.csv", histogram_csv(report.question_words));
  write_text(out / "question_chars.csv", histogram_csv(report.question_chars));
  return 0;
}

int cmd_audit(const Globals& g, const std::string& pairs_path, int n_crops) {
  const auto cfg = load_run_config(g);
  const auto pairs = load_pairs_manifest(pairs_path);
  const auto backends = make_backends(cfg);
  const auto audit = random_crop_audit(pairs, n_crops, backends.context(cfg));
  std::cout << "crops " << audit.n_crops << "\n"
            << "rejected by patch filter " << audit.rejected_patch << "\n"
            << "rejected by encoder " << audit.rejected_encoder << "\n"
            << "rejected by judge " << audit.rejected_judge << "\n"
            << "passed " << audit.passed << " (pass rate " << fmt(100.0 * audit.pass_rate(), 2) << "%)\n";
  write_text(fs::path(g.out) / "random_crop_audit.json", to_json(audit).dump(2) + "\n");
  return 0;
}

int cmd_calibrate_iou(const Globals& g, const std::string& scores, const std::string& direction_name) {
  const auto direction = parse_roc_direction(direction_name);
  if (!direction) fail(Errc::config, "--direction must be higher_is_positive or lower_is_positive");
  const auto data = load_labeled_scores(scores);
  const auto roc = roc_sweep(data, *direction);
  std::cout << "samples " << data.size() << " (" << to_string(*direction) << ")\n"
            << "AUC " << fmt(roc.auc) << "\n"
            << "best threshold " << fmt(roc.best_threshold) << "  Youden J " << fmt(roc.youden_j) << "\n\n"
            << "threshold    fpr     tpr\n";
  for (const auto& p : roc.points) {
    std::cout << (std::isfinite(p.threshold) ? fmt(p.threshold) : std::string(p.threshold > 0 ? "+inf" : "-inf"))
              << "  " << fmt(p.fpr) << "  " << fmt(p.tpr) << "\n";
  }
  write_text(fs::path(g.out) / "roc.json", to_json(roc).dump(2) + "\n");
  write_text(fs::path(g.out) / "roc.csv", roc_csv(roc));
  return 0;
}

int cmd_eval_topk(const Globals& g, const std::string& annotations, int k_max) {
  const auto records = load_annotations(annotations);
  const auto flags = rank_flags_from_annotations(records);
  const auto curve = topk_consistency(flags, k_max);
  std::cout << "queries " << flags.size() << "\n" << "k  A(k)\n";
  std::string csv = "x,y\n";
  auto rows = ordered_json::array();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::cout << i + 1 << "  " << fmt(curve[i]) << "\n";
    csv += std::to_string(i + 1) + "," + fmt(curve[i], 17) + "\n";
    rows.push_back(ordered_json{{"k", i + 1}, {"agreement", curve[i]}});
  }
  write_text(fs::path(g.out) / "topk.json", ordered_json{{"queries", flags.size()}, {"curve", rows}}.dump(2) + "\n");
  write_text(fs::path(g.out) / "topk.csv", csv);
  return 0;
}

int cmd_eval_metrics(const Globals& g, const std::string& annotations) {
  const auto records = load_annotations(annotations);
  const auto rows = metric_agreement(approvals_from_annotations(records));
  std::cout << "metric       approved  total  agreement\n";
  auto json_rows = ordered_json::array();
  std::string csv = "metric,approved,total,agreement\n";
  for (const auto& r : rows) {
    const std::string name(to_string(r.metric));
    std::cout << name << std::string(13 - std::min<std::size_t>(12, name.size()), ' ') << r.approved << "  " << r.total
              << "  " << fmt(100.0 * r.rate, 2) << "%\n";
    json_rows.push_back(ordered_json{{"metric", name}, {"approved", r.approved}, {"total", r.total}, {"rate", r.rate}});
    csv += name + "," + std::to_string(r.approved) + "," + std::to_string(r.total) + "," + fmt(r.rate, 17) + "\n";
  }
  write_text(fs::path(g.out) / "metric_agreement.json", json_rows.dump(2) + "\n");
  write_text(fs::path(g.out) / "metric_agreement.csv", csv);
  return 0;
}

int cmd_simulate_bon(const Globals& g, const std::vector<double>& ps, const std::vector<int>& ns, long long trials) {
  const std::uint64_t seed = g.seed.value_or(0);
  std::cout << "p      N   closed form  empirical  SE        z\n";
  auto rows = ordered_json::array();
  std::string csv = "p,n,closed_form,empirical,std_error\n";
  bool within = true;
  for (double p : ps) {
    for (int n : ns) {
      const auto r = simulate_acceptance(p, n, trials, seed);
      const double z = r.std_error > 0 ? (r.empirical - r.closed_form) / r.std_error : 0.0;
      within = within && std::abs(z) <= 4.0;
      std::cout << fmt(p, 3) << "  " << n << "   " << fmt(r.closed_form, 6) << "     " << fmt(r.empirical, 6) << "   "
                << fmt(r.std_error, 6) << "  " << fmt(z, 2) << "\n";
      rows.push_back(ordered_json{{"p", p}, {"n", n}, {"trials", trials}, {"closed_form", r.closed_form},
                                  {"empirical", r.empirical}, {"std_error", r.std_error}});
      csv += fmt(p, 17) + "," + std::to_string(n) + "," + fmt(r.closed_form, 17) + "," + fmt(r.empirical, 17) + "," +
             fmt(r.std_error, 17) + "\n";
    }
  }
  write_text(fs::path(g.out) / "bon_acceptance.json", rows.dump(2) + "\n");
  write_text(fs::path(g.out) / "bon_acceptance.csv", csv);
  std::cout << (within ? "all estimates within 4 SE\n" : "some estimates outside 4 SE\n");
  return 0;
}

int cmd_simulate_convergence(const Globals& g, double epsilon, const std::vector<int>& ns, int trials) {
  const auto curve = simulate_convergence(epsilon, ns, trials, g.seed.value_or(0));
  std::cout << "epsilon " << epsilon << ", " << trials << " trials\n" << "n       mean error  SE\n";
  auto rows = ordered_json::array();
  std::string csv = "x,y\n";
  for (const auto& p : curve) {
    std::cout << p.n << "  " << fmt(p.mean_error, 6) << "  " << fmt(p.std_error, 6) << "\n";
    rows.push_back(ordered_json{{"n", p.n}, {"mean_error", p.mean_error}, {"std_error", p.std_error}});
    csv += std::to_string(p.n) + "," + fmt(p.mean_error, 17) + "\n";
  }
  write_text(fs::path(g.out) / "convergence.json",
             ordered_json{{"epsilon", epsilon}, {"trials", trials}, {"curve", rows}}.dump(2) + "\n");
  write_text(fs::path(g.out) / "convergence.csv", csv);
  return 0;
}

ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_review_serve(const std::string& dataset, const std::string& pairs_path, const std::string& store_path,
                     const std::string& host, int port, const std::string& ui_dir, int panel_size) {
  std::vector<QARecord> rows;
  {
    std::ifstream in(dataset);
    if (!in) fail(Errc::io, "cannot open dataset " + dataset);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) rows.push_back(qa_from_json(nlohmann::json::parse(line)));
    }
  }
  std::vector<PairEntry> pairs;
  if (!pairs_path.empty()) pairs = load_pairs_manifest(pairs_path);
  AnnotationStore store(store_path);
  ReviewService service(std::move(rows), std::move(pairs), store, panel_size);
  ReviewServer server(service, ui_dir.empty() ? std::nullopt : std::optional<fs::path>(ui_dir));
  const int bound = server.bind(host, port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "review server on http://" << host << ":" << bound << "\n" << std::flush;
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curate localized change-QA datasets from bi-temporal image pairs"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  int jobs = 1;
  app.add_option("--config", g.config, "pipeline config (YAML)");
  auto* seed_opt = app.add_option("--seed", seed, "override the random seed");
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  std::string pairs;
  auto* run = app.add_subcommand("run", "build the dataset from a pairs manifest");
  run->add_option("--pairs", pairs, "pairs manifest (JSONL)")->required();

  std::string dataset;
  auto* stats = app.add_subcommand("stats", "class distribution and question-length statistics");
  stats->add_option("--dataset", dataset, "dataset JSONL")->required();

  int n_crops = 1000;
  auto* audit = app.add_subcommand("random-crop-audit", "push random crops through the screen and judge");
  audit->add_option("--pairs", pairs, "pairs manifest (JSONL)")->required();
  audit->add_option("--n-crops", n_crops, "number of crops")->capture_default_str()->check(CLI::PositiveNumber);

  std::string scores;
  std::string direction = "lower_is_positive";
  auto* calib = app.add_subcommand("calibrate-iou", "ROC sweep and Youden threshold over labelled scores");
  calib->add_option("--scores", scores, "CSV sample_id,score,label")->required();
  calib->add_option("--direction", direction, "higher_is_positive or lower_is_positive")->capture_default_str();

  std::string annotations;
  int k_max = 5;
  auto* topk = app.add_subcommand("eval-topk", "top-k retrieval consistency A(k)");
  topk->add_option("--annotations", annotations, "review annotations JSONL")->required();
  topk->add_option("--k-max", k_max, "largest k")->capture_default_str()->check(CLI::PositiveNumber);

  auto* metrics = app.add_subcommand("eval-metrics", "human approval rate per retrieval metric");
  metrics->add_option("--annotations", annotations, "review annotations JSONL")->required();

  std::vector<double> ps{0.05, 0.2, 0.5};
  std::vector<int> ns{1, 2, 5, 10};
  long long trials = 100000;
  auto* bon = app.add_subcommand("simulate-bon", "Monte Carlo check of best-of-N acceptance");
  bon->add_option("--p", ps, "per-draw acceptance probabilities")->capture_default_str();
  bon->add_option("--n", ns, "hypothesis counts")->capture_default_str();
  bon->add_option("--trials", trials, "trials per cell")->capture_default_str();

  double epsilon = 0.3;
  std::vector<int> conv_ns{50, 100, 500, 1000, 2000, 5000};
  int conv_trials = 50;
  auto* conv = app.add_subcommand("simulate-convergence", "threshold ERM under flipped pseudo-labels");
  conv->add_option("--epsilon", epsilon, "label flip probability")->capture_default_str();
  conv->add_option("--n", conv_ns, "sample sizes (ascending)")->capture_default_str();
  conv->add_option("--trials", conv_trials, "trials")->capture_default_str();

  std::string store = "annotations.jsonl";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
  int panel = 3;
  auto* serve = app.add_subcommand("review-serve", "annotation server for human review");
  serve->add_option("--dataset", dataset, "dataset JSONL")->required();
  serve->add_option("--pairs", pairs, "pairs manifest, for serving images");
  serve->add_option("--store", store, "annotation store (JSONL, append-only)")->capture_default_str();
  serve->add_option("--host", host, "bind address")->capture_default_str();
  serve->add_option("--port", port, "port (0 picks one)")->capture_default_str();
  serve->add_option("--ui-dir", ui_dir, "static review UI bundle");
  serve->add_option("--panel-size", panel, "annotators per sample")->capture_default_str();

  auto* demo = app.add_subcommand("make-demo", "write a synthetic demo corpus and config to --out");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;
  if (*jobs_opt) g.jobs = jobs;

  try {
    if (*run) return cmd_run(g, pairs);
    if (*stats) return cmd_stats(g, dataset);
    if (*audit) return cmd_audit(g, pairs, n_crops);
    if (*calib) return cmd_calibrate_iou(g, scores, direction);
    if (*topk) return cmd_eval_topk(g, annotations, k_max);
    if (*metrics) return cmd_eval_metrics(g, annotations);
    if (*bon) return cmd_simulate_bon(g, ps, ns, trials);
    if (*conv) return cmd_simulate_convergence(g, epsilon, conv_ns, conv_trials);
    if (*serve) return cmd_review_serve(dataset, pairs, store, host, port, ui_dir, panel);
    if (*demo) {
      const auto config = write_demo(g.out, g.seed.value_or(7));
      std::cout << "wrote " << config.string() << " and " << (fs::path(g.out) / "pairs.jsonl").string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
