#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "changeqa/hashing.hpp"
#include "changeqa/judge.hpp"
#include "changeqa/png_io.hpp"
#include "changeqa/preference.hpp"
#include "changeqa/prompt.hpp"
#include "support/errors.hpp"
#include "support/local_server.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace changeqa;

namespace {

std::string read_golden(const std::string& name) {
  std::ifstream in(std::string(CHANGEQA_GOLDEN_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Exemplar ex(std::string id, int group, std::vector<double> v, std::optional<int> score = std::nullopt) {
  return {std::move(id), group, Embedding(std::move(v)), "", score, {}};
}

RgbImage tiny(std::uint8_t v) {
  RgbImage img(2, 2);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) img.set(x, y, v, v, v);
  }
  return img;
}

/// Scores by class id from a fixed table; counts calls.
class ClassTableJudge final : public JudgeBackend {
 public:
  explicit ClassTableJudge(std::map<int, int> table) : table_(std::move(table)) {}
  int score(const JudgeCall& call) const override {
    ++calls;
    return table_.at(call.class_id);
  }
  mutable std::atomic<int> calls{0};

 private:
  std::map<int, int> table_;
};

}  // namespace

TEST_CASE("prompt assembly matches the golden files") {
  CHECK(assemble_prompt("building", {}) == read_golden("prompt_zero_shot.txt"));
  const std::vector<Exemplar> ctx = {ex("a", 1, {1, 0}, 5), ex("b", 1, {0, 1}, 3)};
  const auto p = assemble_prompt("building", ctx);
  CHECK(p == read_golden("prompt_two_examples.txt"));
  CHECK(assemble_prompt("building", ctx) == p);
  CHECK(p.find("1: Definitely does not contain a building.\n") != std::string::npos);
  CHECK(p.find("Example (1): <start_of_image> Score = 5\nExample (2): <start_of_image> Score = 3\n") !=
        std::string::npos);
  // Unscored exemplars are displayed as 5.
  CHECK(displayed_score(ex("u", 1, {1, 0})) == 5);
  CHECK(scoring_guide("tree").rfind("5: There is definitely a tree", 0) == 0);
}

TEST_CASE("judge_query") {
  MockEncoderConfig mc;
  mc.dim = 2;
  mc.overrides.emplace(content_key(tiny(1)), Embedding({0.6, 0.8}));
  MockEncoder enc(mc);
  JudgeSettings s;
  const JudgeQuery q{tiny(1), 1, "building"};

  SUBCASE("pinned") {
    MockJudgeConfig jc;
    jc.score = 5;
    CHECK(judge_query(q, s, MockJudge(jc), nullptr, enc).score == 5);
  }
  SUBCASE("cosine rule on planted geometry") {
    // Best in-group cosine is 0.8: round(1 + 3.2) = 4. The group-2 exemplar
    // would give cosine 1 but is outside the restricted context.
    Gallery g({ex("x", 1, {1, 0}), ex("y", 1, {0, 1}), ex("z", 2, {0.6, 0.8})});
    MockJudgeConfig jc;
    jc.mode = MockJudgeConfig::Mode::cosine;
    const auto out = judge_query(q, s, MockJudge(jc), &g, enc);
    CHECK(out.score == 4);
    CHECK(out.context_ids == std::vector<std::string>{"y", "x"});
    s.few_shot = false;
    jc.default_score = 2;
    CHECK(judge_query(q, s, MockJudge(jc), &g, enc).score == 2);
  }
  SUBCASE("context size limits retrieval") {
    Gallery g({ex("x", 1, {1, 0}), ex("y", 1, {0, 1})});
    s.context_size = 1;
    MockJudgeConfig jc;
    CHECK(judge_query(q, s, MockJudge(jc), &g, enc).context_ids == std::vector<std::string>{"y"});
  }
  SUBCASE("table lookup by query hash") {
    JudgeCall call;
    call.query_image = tiny(1);
    call.prompt_text = assemble_prompt("building", {});
    MockJudgeConfig jc;
    jc.mode = MockJudgeConfig::Mode::table;
    jc.table[judge_query_hash(call)] = 3;
    jc.default_score = 1;
    CHECK(judge_query(q, s, MockJudge(jc), nullptr, enc).score == 3);
    CHECK(judge_query({tiny(2), 1, "building"}, s, MockJudge(jc), nullptr, enc).score == 1);
  }
  SUBCASE("out-of-range scores") {
    MockJudgeConfig jc;
    jc.score = 0;
    CHECK(error_code([&] { judge_query(q, s, MockJudge(jc), nullptr, enc); }) == Errc::protocol);
    jc.score = 6;
    CHECK(error_code([&] { judge_query(q, s, MockJudge(jc), nullptr, enc); }) == Errc::protocol);
  }
  SUBCASE("bernoulli mode is deterministic per image") {
    MockJudgeConfig jc;
    jc.mode = MockJudgeConfig::Mode::bernoulli;
    jc.accept_fraction = 0.5;
    MockJudge j(jc);
    const int first = judge_query(q, s, j, nullptr, enc).score;
    CHECK((first == 5 || first == 1));
    CHECK(judge_query(q, s, j, nullptr, enc).score == first);
  }
}

TEST_CASE("judge table file") {
  TempDir dir;
  {
    std::ofstream out(dir / "t.jsonl");
    out << R"({"query_hash":"abc","score":4})" << "\n\n" << R"({"query_hash":"def","score":2})" << "\n";
  }
  const auto t = load_judge_table(dir / "t.jsonl");
  CHECK(t == std::map<std::string, int>{{"abc", 4}, {"def", 2}});
}

TEST_CASE("best of n selection") {
  SUBCASE("single hypothesis") {
    const std::vector<int> hi = {5};
    const std::vector<int> lo = {4};
    CHECK(select_best_of_n(hi, 4).selected == 0);
    CHECK(select_best_of_n(hi, 4).retained == std::vector<std::size_t>{0});
    CHECK(select_best_of_n(lo, 4).retained.empty());
  }
  SUBCASE("argmax picks the first maximum") {
    const std::vector<int> s = {2, 5, 3};
    CHECK(select_best_of_n(s, 4).selected == 1);
    const std::vector<int> t = {2, 5, 5};
    CHECK(select_best_of_n(t, 4).selected == 1);
    CHECK(select_best_of_n(t, 4).retained == std::vector<std::size_t>{1, 2});
  }
  SUBCASE("empty") {
    CHECK(error_code([] { select_best_of_n(std::vector<int>{}, 4); }) == Errc::contract);
  }
  SUBCASE("random scores against brute force") {
    gen::Rng rng(51);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<int> s(static_cast<std::size_t>(gen::uniform_int(rng, 1, 10)));
      for (auto& v : s) v = gen::uniform_int(rng, 1, 5);
      const int tau = gen::uniform_int(rng, 0, 5);
      const auto r = select_best_of_n(s, tau);
      REQUIRE(r.retained == oracle::brute_filter(s, tau));
      REQUIRE(r.scores[r.selected] == *std::max_element(s.begin(), s.end()));
      REQUIRE(std::find(s.begin(), s.end(), s[r.selected]) - s.begin() == static_cast<long>(r.selected));
      // Appending a hypothesis never lowers the selected score.
      auto longer = s;
      longer.push_back(gen::uniform_int(rng, 1, 5));
      REQUIRE(select_best_of_n(longer, tau).scores[select_best_of_n(longer, tau).selected] >= s[r.selected]);
    }
  }
}

TEST_CASE("best_of_n judges every hypothesis") {
  MockEncoder enc({});
  ClassTableJudge judge({{0, 2}, {1, 5}, {2, 3}});
  JudgeSettings s;
  s.tau = 2;
  const std::vector<JudgeQuery> h = {{tiny(1), 0, "a"}, {tiny(1), 1, "b"}, {tiny(1), 2, "c"}};
  const auto r = best_of_n(h, s, judge, nullptr, enc);
  CHECK(judge.calls == 3);
  CHECK(r.scores == std::vector<int>{2, 5, 3});
  CHECK(r.selected == 1);
  CHECK(r.retained == std::vector<std::size_t>{1, 2});
  CHECK(error_code([&] { best_of_n({}, s, judge, nullptr, enc); }) == Errc::contract);
}

TEST_CASE("remote judge") {
  LocalServer server;
  std::atomic<int> calls{0};
  std::string reply = R"({"score":4})";
  std::mutex mu;
  nlohmann::json last_request;
  server.server.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    std::lock_guard lock(mu);
    last_request = nlohmann::json::parse(req.body);
    res.set_content(reply, "application/json");
  });
  server.start();
  TempDir dir;
  save_image_png(dir / "ex.png", tiny(9));

  RemoteJudgeConfig rc;
  rc.url = server.url();
  rc.retry.retries = 0;
  RemoteJudge judge(rc);
  MockEncoderConfig mc;
  mc.dim = 2;
  mc.overrides.emplace(content_key(tiny(1)), Embedding({1, 0}));
  MockEncoder enc(mc);
  Exemplar e = ex("g1", 1, {1, 0}, 5);
  e.image = dir / "ex.png";
  Gallery g({e});
  JudgeSettings s;

  CHECK(judge_query({tiny(1), 1, "building"}, s, judge, &g, enc).score == 4);
  {
    std::lock_guard lock(mu);
    CHECK(last_request["prompt_text"] == assemble_prompt("building", std::vector{e}));
    REQUIRE(last_request["images"].size() == 2);
    CHECK(base64_decode(last_request["images"][0].get<std::string>()) == read_file_bytes(dir / "ex.png"));
    CHECK(decode_rgb_png(base64_decode(last_request["images"][1].get<std::string>())) == tiny(1));
  }
  {
    std::lock_guard lock(mu);
    reply = R"({"score":"7"})";
  }
  CHECK(error_code([&] { judge_query({tiny(1), 1, "building"}, s, judge, &g, enc); }) == Errc::protocol);

  CHECK(parse_judge_reply(R"({"score":"Score: 3"})") == 3);
  CHECK(parse_judge_reply(R"({"score":2})") == 2);
  CHECK(error_code([] { parse_judge_reply(R"({"score":"none"})"); }) == Errc::protocol);
  CHECK(error_code([] { parse_judge_reply(R"({"value":3})"); }) == Errc::protocol);
  CHECK(error_code([] { parse_judge_reply("3"); }) == Errc::protocol);

  RemoteJudgeConfig dead;
  dead.url = "http://127.0.0.1:1";
  dead.retry.retries = 1;
  dead.retry.initial_backoff = std::chrono::milliseconds(1);
  dead.retry.timeout = std::chrono::seconds(1);
  CHECK(error_code([&] { judge_query({tiny(1), 1, "building"}, s, RemoteJudge(dead), nullptr, enc); }) ==
        Errc::backend);
}

TEST_CASE("preference distribution") {
  SUBCASE("hand normalisation") {
    const auto pi = preference_distribution({{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.0, std::log(2.0), std::log(4.0)}, 1.0});
    CHECK(std::abs(pi[0] - 1.0 / 7) < 1e-12);
    CHECK(std::abs(pi[1] - 2.0 / 7) < 1e-12);
    CHECK(std::abs(pi[2] - 4.0 / 7) < 1e-12);
  }
  SUBCASE("constant reward keeps the reference") {
    const std::vector<double> ref = {0.1, 0.6, 0.3};
    const auto pi = preference_distribution({ref, {2, 2, 2}, 0.5});
    for (std::size_t i = 0; i < 3; ++i) CHECK(pi[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
  SUBCASE("large beta") {
    const std::vector<double> ref = {0.2, 0.5, 0.3};
    const auto pi = preference_distribution({ref, {0, std::log(2.0), std::log(4.0)}, 1e6});
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(pi[i] - ref[i]) < 1e-4);
  }
  SUBCASE("huge rewards stay finite") {
    const auto pi = preference_distribution({{0.5, 0.5}, {1000, 2000}, 1.0});
    CHECK(pi[1] == doctest::Approx(1.0));
    CHECK(std::isfinite(pi[0]));
  }
  SUBCASE("errors") {
    CHECK(error_code([] { preference_distribution({{1.0}, {0.0}, 0.0}); }) == Errc::contract);
  }
  SUBCASE("random models sum to one") {
    gen::Rng rng(61);
    for (int trial = 0; trial < 200; ++trial) {
      PreferenceModel m;
      const int n = gen::uniform_int(rng, 1, 8);
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        m.reference.push_back(0.01 + gen::uniform01(rng));
        total += m.reference.back();
        m.reward.push_back(gen::uniform01(rng) * 10 - 5);
      }
      for (auto& r : m.reference) r /= total;
      m.beta = 0.05 + gen::uniform01(rng) * 5;
      const auto pi = preference_distribution(m);
      double sum = 0.0;
      for (double p : pi) sum += p;
      REQUIRE(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("inverse cdf sampling") {
  const std::vector<double> pi = {0.25, 0.5, 0.25};
  const auto cdf = cumulative(pi);
  CHECK(sample_inverse_cdf(cdf, 0.0) == 0);
  CHECK(sample_inverse_cdf(cdf, 0.2499) == 0);
  CHECK(sample_inverse_cdf(cdf, 0.25) == 1);
  CHECK(sample_inverse_cdf(cdf, 0.9999) == 2);
}

TEST_CASE("acceptance probability") {
  CHECK(acceptance_probability(0.0, 7) == 0.0);
  CHECK(acceptance_probability(0.3, 1) == doctest::Approx(0.3));
  CHECK(acceptance_probability(0.5, 3) == 0.875);
  // The step from n to n + 1 is p (1 - p)^n; n stays small enough for it to
  // remain visible in double precision.
  for (double p : {0.05, 0.2, 0.5, 0.9}) {
    for (int n = 1; n < 10; ++n) {
      const double step = acceptance_probability(p, n + 1) - acceptance_probability(p, n);
      CHECK(step > 0.0);
      CHECK(step == doctest::Approx(p * std::pow(1 - p, n)).epsilon(1e-6));
    }
  }
  CHECK(error_code([] { acceptance_probability(1.5, 2); }) == Errc::contract);
  CHECK(error_code([] { acceptance_probability(0.5, 0); }) == Errc::contract);
}
