#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "changeqa/encoder.hpp"
#include "changeqa/gallery.hpp"
#include "changeqa/http_client.hpp"
#include "changeqa/raster.hpp"

namespace changeqa {

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

/// Everything a backend may look at for one scoring request. Remote
/// backends use the prompt text and images; mocks may use the structured
/// fields instead.
struct JudgeCall {
  std::string prompt_text;
  RgbImage query_image;
  Embedding query_embedding;
  int class_id = 0;
  std::string class_name;
  std::vector<Exemplar> context;
};

/// Stable key of a call: SHA-256 over the prompt text, the query image
/// content key and the context exemplar ids.
std::string judge_query_hash(const JudgeCall& call);

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  /// Raw backend reply; range checking happens in judge_query.
  virtual int score(const JudgeCall& call) const = 0;
};

struct MockJudgeConfig {
  enum class Mode {
    pinned,     // always `score`
    table,      // query-hash lookup, `default_score` on a miss
    cosine,     // round(1 + 4 * max(0, best cosine(query, context)))
    bernoulli,  // `high_score` with probability `accept_fraction`, keyed on the query image
  };
  Mode mode = Mode::pinned;
  int score = 5;
  int default_score = 1;
  std::map<std::string, int> table;
  double accept_fraction = 0.0;
  int high_score = 5;
  int low_score = 1;
};

/// Loads a fixture table: JSONL lines {"query_hash": hex, "score": int}.
std::map<std::string, int> load_judge_table(const std::filesystem::path& path);

class MockJudge final : public JudgeBackend {
 public:
  explicit MockJudge(MockJudgeConfig cfg);
  int score(const JudgeCall& call) const override;

 private:
  MockJudgeConfig cfg_;
};

struct RemoteJudgeConfig {
  std::string url;
  RetryPolicy retry;
};

/// Client for `POST /judge {"prompt_text","images":[b64 PNG...]}` ->
/// `{"score": int}`. Images are the context exemplars followed by the query.
class RemoteJudge final : public JudgeBackend {
 public:
  explicit RemoteJudge(RemoteJudgeConfig cfg);
  int score(const JudgeCall& call) const override;

 private:
  RemoteJudgeConfig cfg_;
};

/// Reads the score out of a /judge reply: an integer `score` field, or the
/// first integer token of a string `score`. Errc::protocol otherwise.
int parse_judge_reply(std::string_view body);

struct JudgeSettings {
  std::size_t context_size = 4;  // R
  bool few_shot = true;
  int tau = 4;  // accept when score > tau
  int n = 1;    // hypotheses per ambiguous region

  void validate() const;
};

/// Query for one class hypothesis on one crop.
struct JudgeQuery {
  RgbImage image;
  int class_id = 0;
  std::string class_name;
};

struct JudgeOutcome {
  int score = 0;
  std::vector<std::string> context_ids;
};

/// Retrieves the group-restricted context E_R(q) (when few-shot and a
/// gallery is given), assembles the prompt and asks the backend.
/// Errc::protocol when the reply is outside 1..5.
JudgeOutcome judge_query(const JudgeQuery& query, const JudgeSettings& settings, const JudgeBackend& backend,
                         const Gallery* gallery, const EncoderBackend& encoder);

enum class BestOfNMode { argmax, threshold };

std::string_view to_string(BestOfNMode mode);

struct BestOfNResult {
  std::vector<int> scores;       // r_j in hypothesis order
  std::size_t selected = 0;      // argmax, lowest index on ties
  std::vector<std::size_t> retained;  // indices with r_j > tau
};

/// Pure selection over already-computed scores.
BestOfNResult select_best_of_n(std::span<const int> scores, int tau);

/// Scores every hypothesis (class) on the same crop, then selects.
/// Errc::contract for an empty hypothesis list.
BestOfNResult best_of_n(const std::vector<JudgeQuery>& hypotheses, const JudgeSettings& settings,
                        const JudgeBackend& backend, const Gallery* gallery, const EncoderBackend& encoder);

}  // namespace changeqa
