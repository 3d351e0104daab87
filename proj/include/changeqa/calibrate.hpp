#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "changeqa/annotation.hpp"
#include "changeqa/embedding.hpp"

namespace changeqa {

struct LabeledScore {
  std::string sample_id;
  double score = 0.0;
  bool positive = false;
};

/// CSV with header `sample_id,score,label`, label pos or neg.
std::vector<LabeledScore> load_labeled_scores(const std::filesystem::path& csv);

enum class RocDirection { higher_is_positive, lower_is_positive };

std::string_view to_string(RocDirection direction);
std::optional<RocDirection> parse_roc_direction(std::string_view name);

struct RocPoint {
  double threshold = 0.0;  // infinite for the initial (0, 0) point
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // fpr nondecreasing
  double auc = 0.0;
  double best_threshold = 0.0;
  double youden_j = 0.0;
};

/// A sample is called positive when its score is >= the threshold
/// (higher_is_positive) or <= it (lower_is_positive). Thresholds are the
/// distinct scores; AUC is the trapezoid area, computed from integer counts.
/// Youden ties go to the smaller threshold. Errc::degenerate_data unless
/// both labels occur.
RocResult roc_sweep(std::span<const LabeledScore> data, RocDirection direction);

nlohmann::ordered_json to_json(const RocResult& roc);
std::string roc_csv(const RocResult& roc);  // x=fpr, y=tpr

/// Per query, agreement flag for ranks 1..k (index r-1); empty entries
/// are ranks without a judgement.
struct RankFlags {
  std::string query_id;
  std::vector<std::optional<bool>> agreed;
};

/// A(k) for k = 1..k_max: fraction of queries with an agreed item within
/// the first k ranks. Errc::incomplete_annotation when any query misses a
/// rank <= k_max.
std::vector<double> topk_consistency(std::span<const RankFlags> queries, int k_max);

/// Groups review records whose sample ids look like `<query>#rank<r>`; an
/// item counts as agreed when every annotator of it agreed.
std::vector<RankFlags> rank_flags_from_annotations(std::span<const AnnotationRecord> records);

struct MetricAgreementRow {
  Metric metric = Metric::cosine_sim;
  long long approved = 0;
  long long total = 0;
  double rate = 0.0;
};

/// Per metric, query -> whether its top-5 set was approved. Errc::schema
/// when the metrics do not cover the same query set.
std::vector<MetricAgreementRow> metric_agreement(const std::map<Metric, std::map<std::string, bool>>& approvals);

/// Review records with sample ids `<query>#<metric>` (cosine, l1, l2,
/// wasserstein); unanimous agreement approves the set.
std::map<Metric, std::map<std::string, bool>> approvals_from_annotations(std::span<const AnnotationRecord> records);

struct ConvergencePoint {
  int n = 0;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::vector<double> trial_errors;
};

/// X ~ U(0,1), Y = 1[X > 0.5], labels flipped with probability epsilon.
/// ERM over h(x) = 1[x > theta] with theta scanning 0, the sample
/// midpoints and 1 (smallest minimiser); test error is |theta - 0.5|.
/// Trial t draws one sample from seed + t and uses its first n points for
/// every n, so curves are paired across n. Errc::contract for epsilon
/// outside [0, 0.5) or n_values not ascending.
std::vector<ConvergencePoint> simulate_convergence(double epsilon, const std::vector<int>& n_values, int trials,
                                                   std::uint64_t seed);

/// Threshold minimising empirical error of 1[x > theta] on (x, y).
double erm_threshold(std::span<const double> x, std::span<const int> y);

struct BonSimRow {
  double p = 0.0;
  int n = 1;
  long long trials = 0;
  double empirical = 0.0;
  double std_error = 0.0;
  double closed_form = 0.0;
};

/// Monte Carlo of "at least one of n Bernoulli(p) draws succeeds".
BonSimRow simulate_acceptance(double p, int n, long long trials, std::uint64_t seed);

}  // namespace changeqa
