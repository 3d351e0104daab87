#include "changeqa/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "changeqa/error.hpp"
#include "changeqa/hashing.hpp"
#include "changeqa/preference.hpp"

namespace changeqa {

using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<LabeledScore> load_labeled_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::schema, path.string() + ": empty file");
  require(split_csv(line) == std::vector<std::string>{"sample_id", "score", "label"}, Errc::schema,
          path.string() + ": header must be sample_id,score,label");
  std::vector<LabeledScore> out;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto f = split_csv(line);
    require(f.size() == 3, Errc::schema, where + "expected 3 fields");
    LabeledScore s;
    s.sample_id = f[0];
    std::size_t used = 0;
    try {
      s.score = std::stod(f[1], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == f[1].size() && used > 0 && std::isfinite(s.score), Errc::schema, where + "score is not a finite number");
    require(f[2] == "pos" || f[2] == "neg", Errc::schema, where + "label must be pos or neg");
    s.positive = f[2] == "pos";
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view to_string(RocDirection d) {
  return d == RocDirection::higher_is_positive ? "higher_is_positive" : "lower_is_positive";
}

std::optional<RocDirection> parse_roc_direction(std::string_view name) {
  if (name == "higher_is_positive") return RocDirection::higher_is_positive;
  if (name == "lower_is_positive") return RocDirection::lower_is_positive;
  return std::nullopt;
}

RocResult roc_sweep(std::span<const LabeledScore> data, RocDirection direction) {
  long long pos = 0;
  long long neg = 0;
  for (const auto& d : data) {
    require(std::isfinite(d.score), Errc::contract, "scores must be finite");
    (d.positive ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) fail(Errc::degenerate_data, "ROC needs at least one positive and one negative");

  // Walk thresholds from the strictest to the loosest; `key` orders samples
  // so that the first ones are called positive first.
  const bool higher = direction == RocDirection::higher_is_positive;
  std::vector<LabeledScore> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end(), [higher](const LabeledScore& a, const LabeledScore& b) {
    return higher ? a.score > b.score : a.score < b.score;
  });

  RocResult out;
  out.points.push_back({higher ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long long tp = 0;
  long long fp = 0;
  long long area2 = 0;  // 2 * P * N * AUC
  long long best_j = std::numeric_limits<long long>::min();  // (tpr - fpr) * P * N
  for (std::size_t i = 0; i < sorted.size();) {
    const double threshold = sorted[i].score;
    const long long tp0 = tp;
    const long long fp0 = fp;
    for (; i < sorted.size() && sorted[i].score == threshold; ++i) (sorted[i].positive ? tp : fp) += 1;
    area2 += (fp - fp0) * (tp + tp0);
    out.points.push_back({threshold, static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
    const long long j = tp * neg - fp * pos;
    if (j > best_j || (j == best_j && threshold < out.best_threshold)) {
      best_j = j;
      out.best_threshold = threshold;
    }
  }
  const double pn = static_cast<double>(pos) * static_cast<double>(neg);
  out.auc = static_cast<double>(area2) / (2.0 * pn);
  out.youden_j = static_cast<double>(best_j) / pn;
  return out;
}

ordered_json to_json(const RocResult& roc) {
  auto points = ordered_json::array();
  for (const auto& p : roc.points) {
    points.push_back(ordered_json{{"threshold", std::isfinite(p.threshold) ? ordered_json(p.threshold) : ordered_json(nullptr)},
                                  {"fpr", p.fpr},
                                  {"tpr", p.tpr}});
  }
  return ordered_json{
      {"auc", roc.auc}, {"best_threshold", roc.best_threshold}, {"youden_j", roc.youden_j}, {"points", points}};
}

std::string roc_csv(const RocResult& roc) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y\n";
  for (const auto& p : roc.points) out << p.fpr << "," << p.tpr << "\n";
  return out.str();
}

std::vector<double> topk_consistency(std::span<const RankFlags> queries, int k_max) {
  require(k_max >= 1, Errc::contract, "k_max must be >= 1");
  require(!queries.empty(), Errc::incomplete_annotation, "no annotated queries");
  std::vector<long long> first_hit_at(static_cast<std::size_t>(k_max) + 1, 0);
  for (const auto& q : queries) {
    for (int r = 1; r <= k_max; ++r) {
      const auto idx = static_cast<std::size_t>(r - 1);
      require(idx < q.agreed.size() && q.agreed[idx].has_value(), Errc::incomplete_annotation,
              "query '" + q.query_id + "' has no judgement at rank " + std::to_string(r));
    }
    for (int r = 1; r <= k_max; ++r) {
      if (*q.agreed[static_cast<std::size_t>(r - 1)]) {
        ++first_hit_at[static_cast<std::size_t>(r)];
        break;
      }
    }
  }
  std::vector<double> curve;
  long long hits = 0;
  for (int k = 1; k <= k_max; ++k) {
    hits += first_hit_at[static_cast<std::size_t>(k)];
    curve.push_back(static_cast<double>(hits) / static_cast<double>(queries.size()));
  }
  return curve;
}

std::vector<RankFlags> rank_flags_from_annotations(std::span<const AnnotationRecord> records) {
  std::map<std::string, std::map<int, bool>> items;
  for (const auto& r : records) {
    const auto pos = r.sample_id.rfind("#rank");
    if (pos == std::string::npos) continue;
    int rank = 0;
    try {
      std::size_t used = 0;
      rank = std::stoi(r.sample_id.substr(pos + 5), &used);
      if (used != r.sample_id.size() - pos - 5) rank = 0;
    } catch (const std::exception&) {
      rank = 0;
    }
    require(rank >= 1, Errc::schema, "bad rank in annotation id '" + r.sample_id + "'");
    auto& query = items[r.sample_id.substr(0, pos)];
    auto [it, inserted] = query.emplace(rank, true);
    it->second = it->second && r.verdict == Verdict::agree;
  }
  std::vector<RankFlags> out;
  for (const auto& [query, ranks] : items) {
    RankFlags f{query, {}};
    f.agreed.resize(static_cast<std::size_t>(ranks.rbegin()->first));
    for (const auto& [rank, ok] : ranks) f.agreed[static_cast<std::size_t>(rank - 1)] = ok;
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<MetricAgreementRow> metric_agreement(const std::map<Metric, std::map<std::string, bool>>& approvals) {
  std::vector<MetricAgreementRow> rows;
  const std::map<std::string, bool>* reference = nullptr;
  for (const auto& [metric, queries] : approvals) {
    if (reference == nullptr) {
      reference = &queries;
    } else {
      const bool same = queries.size() == reference->size() &&
                        std::equal(queries.begin(), queries.end(), reference->begin(),
                                   [](const auto& a, const auto& b) { return a.first == b.first; });
      require(same, Errc::schema, "metric '" + std::string(to_string(metric)) + "' covers a different query set");
    }
    MetricAgreementRow row;
    row.metric = metric;
    row.total = static_cast<long long>(queries.size());
    for (const auto& [q, ok] : queries) row.approved += ok ? 1 : 0;
    row.rate = row.total == 0 ? 0.0 : static_cast<double>(row.approved) / static_cast<double>(row.total);
    rows.push_back(row);
  }
  return rows;
}

std::map<Metric, std::map<std::string, bool>> approvals_from_annotations(std::span<const AnnotationRecord> records) {
  std::map<Metric, std::map<std::string, bool>> out;
  for (const auto& r : records) {
    const auto pos = r.sample_id.rfind('#');
    if (pos == std::string::npos) continue;
    const auto metric = parse_metric(std::string_view(r.sample_id).substr(pos + 1));
    if (!metric) continue;
    auto [it, inserted] = out[*metric].emplace(r.sample_id.substr(0, pos), true);
    it->second = it->second && r.verdict == Verdict::agree;
  }
  return out;
}

double erm_threshold(std::span<const double> x, std::span<const int> y) {
  require(x.size() == y.size() && !x.empty(), Errc::contract, "ERM needs matching nonempty samples");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  // The walk starts with every point predicted 1. Theta = 0 itself predicts 0
  // at x = 0, so it is scored directly.
  long long errors = 0;
  long long best = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    errors += y[i] == 0;
    best += (x[i] > 0.0 ? 1 : 0) != y[i];
  }
  double theta = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    // Move point i to the predicted-0 side.
    errors += y[order[i]] == 1 ? 1 : -1;
    if (i + 1 < order.size() && x[order[i + 1]] == x[order[i]]) continue;
    if (errors < best) {
      best = errors;
      theta = i + 1 < order.size() ? 0.5 * (x[order[i]] + x[order[i + 1]]) : 1.0;
    }
  }
  return theta;
}

std::vector<ConvergencePoint> simulate_convergence(double epsilon, const std::vector<int>& n_values, int trials,
                                                   std::uint64_t seed) {
  require(epsilon >= 0.0 && epsilon < 0.5, Errc::contract, "epsilon must lie in [0, 0.5)");
  require(trials >= 1, Errc::contract, "trials must be >= 1");
  require(!n_values.empty() && n_values.front() >= 1, Errc::contract, "n_values must be positive");
  for (std::size_t i = 1; i < n_values.size(); ++i) {
    require(n_values[i] > n_values[i - 1], Errc::contract, "n_values must be strictly ascending");
  }
  const auto n_max = static_cast<std::size_t>(n_values.back());
  std::vector<ConvergencePoint> curve(n_values.size());
  for (std::size_t j = 0; j < n_values.size(); ++j) curve[j].n = n_values[j];

  std::vector<double> x(n_max);
  std::vector<int> y(n_max);
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < n_max; ++i) {
      x[i] = unit_double(rng());
      const int truth = x[i] > 0.5 ? 1 : 0;
      y[i] = unit_double(rng()) < epsilon ? 1 - truth : truth;
    }
    for (std::size_t j = 0; j < n_values.size(); ++j) {
      const auto n = static_cast<std::size_t>(n_values[j]);
      const double theta = erm_threshold(std::span(x).first(n), std::span(y).first(n));
      curve[j].trial_errors.push_back(std::abs(theta - 0.5));
    }
  }
  for (auto& point : curve) {
    const double m = std::accumulate(point.trial_errors.begin(), point.trial_errors.end(), 0.0) / trials;
    double ss = 0.0;
    for (double e : point.trial_errors) ss += (e - m) * (e - m);
    point.mean_error = m;
    point.std_error = trials > 1 ? std::sqrt(ss / (trials - 1) / trials) : 0.0;
  }
  return curve;
}

BonSimRow simulate_acceptance(double p, int n, long long trials, std::uint64_t seed) {
  require(trials >= 1, Errc::contract, "trials must be >= 1");
  BonSimRow row;
  row.p = p;
  row.n = n;
  row.trials = trials;
  row.closed_form = acceptance_probability(p, n);
  std::mt19937_64 rng(mix_seed(seed, "bon/" + std::to_string(p) + "/" + std::to_string(n)));
  long long accepted = 0;
  for (long long t = 0; t < trials; ++t) {
    bool any = false;
    for (int j = 0; j < n; ++j) any = (unit_double(rng()) < p) || any;
    accepted += any ? 1 : 0;
  }
  row.empirical = static_cast<double>(accepted) / static_cast<double>(trials);
  row.std_error = std::sqrt(row.closed_form * (1.0 - row.closed_form) / static_cast<double>(trials));
  return row;
}

}  // namespace changeqa
