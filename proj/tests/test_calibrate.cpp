#include <doctest.h>

#include <fstream>

#include "changeqa/calibrate.hpp"
#include "changeqa/preference.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace changeqa;

namespace {

std::vector<LabeledScore> scores(std::initializer_list<std::pair<double, bool>> v) {
  std::vector<LabeledScore> out;
  int i = 0;
  for (auto [s, pos] : v) out.push_back({"s" + std::to_string(i++), s, pos});
  return out;
}

/// Candidates 0, the midpoints of consecutive distinct x, then 1; first
/// minimiser wins.
double erm_oracle(const std::vector<double>& x, const std::vector<int>& y) {
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> candidates{0.0};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  candidates.push_back(1.0);
  double best_theta = 0.0;
  long long best = -1;
  for (double t : candidates) {
    long long errors = 0;
    for (std::size_t i = 0; i < x.size(); ++i) errors += (x[i] > t ? 1 : 0) != y[i];
    if (best < 0 || errors < best) {
      best = errors;
      best_theta = t;
    }
  }
  return best_theta;
}

AnnotationRecord vote(std::string id, std::string who, Verdict v) {
  AnnotationRecord r;
  r.sample_id = std::move(id);
  r.annotator_id = std::move(who);
  r.verdict = v;
  return r;
}

}  // namespace

TEST_CASE("ROC examples") {
  SUBCASE("perfect separation") {
    const auto d = scores({{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}});
    const auto r = roc_sweep(d, RocDirection::higher_is_positive);
    CHECK(r.auc == 1.0);
    CHECK(r.youden_j == 1.0);
    CHECK(r.best_threshold == 0.8);
    REQUIRE(r.points.size() == 5);
    CHECK(std::isinf(r.points[0].threshold));
    CHECK(r.points.back().fpr == 1.0);
    CHECK(r.points.back().tpr == 1.0);
  }
  SUBCASE("inverted") {
    const auto d = scores({{0.9, false}, {0.1, true}});
    CHECK(roc_sweep(d, RocDirection::higher_is_positive).auc == 0.0);
    const auto lower = roc_sweep(d, RocDirection::lower_is_positive);
    CHECK(lower.auc == 1.0);
    CHECK(lower.best_threshold == 0.1);
  }
  SUBCASE("all tied") {
    const auto d = scores({{0.5, true}, {0.5, false}, {0.5, true}});
    const auto r = roc_sweep(d, RocDirection::higher_is_positive);
    CHECK(r.auc == 0.5);
    CHECK(r.youden_j == 0.0);
    CHECK(r.points.size() == 2);
  }
  SUBCASE("hand count") {
    // pos 3, 1; neg 2, 0: pairs won 3>2, 3>0, 1>0; lost 1<2 -> 3/4.
    const auto d = scores({{3, true}, {1, true}, {2, false}, {0, false}});
    const auto r = roc_sweep(d, RocDirection::higher_is_positive);
    CHECK(r.auc == 0.75);
    CHECK(r.youden_j == 0.5);
    CHECK(r.best_threshold == 1.0);  // ties with 3 broken toward the smaller threshold
    CHECK(roc_csv(r) == "x,y\n0,0\n0,0.5\n0.5,0.5\n0.5,1\n1,1\n");
  }
  CHECK(error_code([] { roc_sweep(scores({{1, true}, {2, true}}), RocDirection::higher_is_positive); }) ==
        Errc::degenerate_data);
  CHECK(error_code([] { roc_sweep({}, RocDirection::lower_is_positive); }) == Errc::degenerate_data);
  CHECK(parse_roc_direction("lower_is_positive") == RocDirection::lower_is_positive);
  CHECK_FALSE(parse_roc_direction("up").has_value());
}

TEST_CASE("ROC agrees with pairwise AUC and exhaustive Youden") {
  gen::Rng rng(61);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = gen::uniform_int(rng, 2, 20);
    std::vector<LabeledScore> d;
    for (int i = 0; i < n; ++i) d.push_back({"s" + std::to_string(i), gen::uniform_int(rng, 0, 6) * 0.25, gen::uniform_int(rng, 0, 1) == 1});
    d[0].positive = true;
    d[1].positive = false;
    for (auto dir : {RocDirection::higher_is_positive, RocDirection::lower_is_positive}) {
      const auto r = roc_sweep(d, dir);
      REQUIRE(r.auc == doctest::Approx(oracle::pairwise_auc(d, dir)).epsilon(1e-12));
      const auto y = oracle::exhaustive_youden(d, dir);
      REQUIRE(r.youden_j == doctest::Approx(y.j).epsilon(1e-12));
      REQUIRE(r.best_threshold == y.threshold);
      for (std::size_t i = 1; i < r.points.size(); ++i) {
        REQUIRE(r.points[i].fpr >= r.points[i - 1].fpr);
        REQUIRE(r.points[i].tpr >= r.points[i - 1].tpr);
      }
      REQUIRE(r.auc >= 0.0);
      REQUIRE(r.auc <= 1.0);
    }
    // Flipping the direction mirrors the AUC.
    REQUIRE(roc_sweep(d, RocDirection::higher_is_positive).auc + roc_sweep(d, RocDirection::lower_is_positive).auc ==
            doctest::Approx(1.0));
  }
}

TEST_CASE("labeled score CSV") {
  TempDir dir;
  std::ofstream(dir / "ok.csv") << "sample_id,score,label\na,0.5,pos\nb, 1e-3 ,neg\n\n";
  const auto d = load_labeled_scores(dir / "ok.csv");
  REQUIRE(d.size() == 2);
  CHECK(d[1].score == 0.001);
  CHECK_FALSE(d[1].positive);
  std::ofstream(dir / "h.csv") << "id,score,label\n";
  CHECK(error_code([&] { load_labeled_scores(dir / "h.csv"); }) == Errc::schema);
  std::ofstream(dir / "s.csv") << "sample_id,score,label\na,abc,pos\n";
  CHECK(error_code([&] { load_labeled_scores(dir / "s.csv"); }) == Errc::schema);
  std::ofstream(dir / "l.csv") << "sample_id,score,label\na,1,yes\n";
  CHECK(error_code([&] { load_labeled_scores(dir / "l.csv"); }) == Errc::schema);
  std::ofstream(dir / "n.csv") << "sample_id,score,label\na,nan,pos\n";
  CHECK(error_code([&] { load_labeled_scores(dir / "n.csv"); }) == Errc::schema);
  CHECK(error_code([&] { load_labeled_scores(dir / "none.csv"); }) == Errc::io);
}

TEST_CASE("top-k consistency") {
  const std::vector<RankFlags> q{{"a", {true, false, false}}, {"b", {false, false, true}}, {"c", {false, false, false}}};
  const auto curve = topk_consistency(q, 3);
  CHECK(curve == std::vector<double>{1.0 / 3, 1.0 / 3, 2.0 / 3});
  CHECK(error_code([&] { topk_consistency(q, 4); }) == Errc::incomplete_annotation);
  const std::vector<RankFlags> gap{{"a", {true, std::nullopt}}};
  CHECK(error_code([&] { topk_consistency(gap, 2); }) == Errc::incomplete_annotation);
  CHECK(topk_consistency(gap, 1) == std::vector<double>{1.0});

  gen::Rng rng(67);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = gen::uniform_int(rng, 1, 8);
    std::vector<std::vector<bool>> flags(static_cast<std::size_t>(gen::uniform_int(rng, 1, 12)));
    std::vector<RankFlags> queries;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      RankFlags f{"q" + std::to_string(i), {}};
      for (int r = 0; r < k; ++r) {
        const bool b = gen::uniform01(rng) < 0.2;
        flags[i].push_back(b);
        f.agreed.push_back(b);
      }
      queries.push_back(f);
    }
    const auto got = topk_consistency(queries, k);
    REQUIRE(got == oracle::prefix_scan_topk(flags, k));
    REQUIRE(std::is_sorted(got.begin(), got.end()));
  }
}

TEST_CASE("rank flags from review records") {
  const std::vector<AnnotationRecord> recs{vote("q1#rank1", "a", Verdict::disagree), vote("q1#rank2", "a", Verdict::agree),
                                           vote("q1#rank2", "b", Verdict::agree),    vote("q2#rank1", "a", Verdict::agree),
                                           vote("q2#rank1", "b", Verdict::disagree), vote("plain", "a", Verdict::agree)};
  const auto flags = rank_flags_from_annotations(recs);
  REQUIRE(flags.size() == 2);
  CHECK(flags[0].query_id == "q1");
  CHECK(flags[0].agreed == std::vector<std::optional<bool>>{false, true});
  CHECK(flags[1].agreed == std::vector<std::optional<bool>>{false});
  const std::vector<AnnotationRecord> bad{vote("q#rankx", "a", Verdict::agree)};
  CHECK(error_code([&] { rank_flags_from_annotations(bad); }) == Errc::schema);
}

TEST_CASE("metric agreement") {
  std::map<Metric, std::map<std::string, bool>> approvals;
  for (int i = 0; i < 100; ++i) {
    const auto q = "q" + std::to_string(i);
    approvals[Metric::cosine_sim][q] = i < 94;
    approvals[Metric::l2][q] = i < 50;
  }
  const auto rows = metric_agreement(approvals);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].metric == Metric::cosine_sim);
  CHECK(rows[0].approved == 94);
  CHECK(rows[0].rate == 0.94);
  CHECK(rows[1].rate == 0.5);
  approvals[Metric::l1]["other"] = true;
  CHECK(error_code([&] { metric_agreement(approvals); }) == Errc::schema);

  const std::vector<AnnotationRecord> recs{vote("q1#cosine", "a", Verdict::agree), vote("q1#cosine", "b", Verdict::agree),
                                           vote("q1#l1", "a", Verdict::agree), vote("q1#l1", "b", Verdict::disagree),
                                           vote("q1#bogus", "a", Verdict::agree)};
  const auto ap = approvals_from_annotations(recs);
  CHECK(ap.size() == 2);
  CHECK(ap.at(Metric::cosine_sim).at("q1"));
  CHECK_FALSE(ap.at(Metric::l1).at("q1"));
}

TEST_CASE("ERM threshold matches the candidate scan") {
  CHECK(erm_threshold(std::vector<double>{0.2, 0.4, 0.6, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.5);
  CHECK(erm_threshold(std::vector<double>{0.3}, std::vector<int>{1}) == 0.0);
  CHECK(erm_threshold(std::vector<double>{0.3}, std::vector<int>{0}) == 1.0);
  gen::Rng rng(71);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = gen::uniform_int(rng, 1, 30);
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
      x.push_back(gen::uniform_int(rng, 0, 20) / 20.0);
      y.push_back(gen::uniform_int(rng, 0, 1));
    }
    REQUIRE(erm_threshold(x, y) == erm_oracle(x, y));
  }
}

TEST_CASE("convergence simulation") {
  const auto noiseless = simulate_convergence(0.0, {10, 100, 2000}, 20, 3);
  REQUIRE(noiseless.size() == 3);
  CHECK(noiseless[2].mean_error <= 0.02);
  for (const auto& p : noiseless) CHECK(p.trial_errors.size() == 20);
  // Paired samples: with no noise each trial's error can only shrink.
  for (int t = 0; t < 20; ++t) {
    CHECK(noiseless[1].trial_errors[static_cast<std::size_t>(t)] <= noiseless[0].trial_errors[static_cast<std::size_t>(t)]);
  }
  const auto a = simulate_convergence(0.2, {5, 50}, 10, 9);
  const auto b = simulate_convergence(0.2, {5, 50}, 10, 9);
  CHECK(a[1].trial_errors == b[1].trial_errors);
  CHECK(a[1].std_error == doctest::Approx(oracle::two_pass_std(a[1].trial_errors) * std::sqrt(10.0 / 9.0) / std::sqrt(10.0)));
  CHECK(error_code([] { simulate_convergence(0.5, {5}, 1, 0); }) == Errc::contract);
  CHECK(error_code([] { simulate_convergence(0.1, {5, 5}, 1, 0); }) == Errc::contract);
  CHECK(error_code([] { simulate_convergence(0.1, {}, 1, 0); }) == Errc::contract);
}

TEST_CASE("acceptance simulation") {
  const auto row = simulate_acceptance(0.2, 3, 20000, 1);
  CHECK(row.closed_form == doctest::Approx(1 - 0.8 * 0.8 * 0.8));
  CHECK(std::abs(row.empirical - row.closed_form) <= 4 * row.std_error);
  CHECK(simulate_acceptance(0.0, 5, 100, 1).empirical == 0.0);
  CHECK(simulate_acceptance(1.0, 1, 100, 1).empirical == 1.0);
}
