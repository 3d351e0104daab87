#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "changeqa/class_map.hpp"
#include "changeqa/config.hpp"
#include "changeqa/raster.hpp"

namespace changeqa {

/// One dataset row. `options` is filled only for mcq; `class_name` is empty
/// for no-change rows and serialises as null.
struct QARecord {
  std::string sample_id;
  std::string pair_id;
  PixelRect bbox;
  QType qtype = QType::yes_no;
  std::string question;
  std::vector<std::string> options;
  std::string answer;
  std::optional<std::string> class_name;
  bool is_change = false;

  bool operator==(const QARecord&) const = default;
};

/// Field order is fixed: sample_id, pair_id, bbox, qtype, question,
/// options (mcq only), answer, class, is_change.
nlohmann::ordered_json to_json(const QARecord& record);
std::string to_jsonl(const QARecord& record);
/// Errc::schema on missing fields or broken invariants.
QARecord qa_from_json(const nlohmann::json& row);
/// mcq: 4 options and answer A-D; yes_no: answer Yes/No.
void check_record(const QARecord& record);

enum class ChangeDirection { appeared, disappeared };

/// What a question is about: a kept change, or a whole pair without change.
struct QaSubject {
  std::string sample_id;
  std::string pair_id;
  PixelRect bbox;
  int image_width = 0;
  int image_height = 0;
  std::optional<int> class_id;  // empty for no-change subjects
  ChangeDirection direction = ChangeDirection::appeared;
};

/// Position of the bbox centre on a 3x3 grid: "upper-left", "upper",
/// "upper-right", "left", "central", ..., "lower-right".
std::string location_phrase(const PixelRect& bbox, int width, int height);

std::string change_statement(std::string_view class_name, ChangeDirection direction);
inline constexpr std::string_view kNoChangeStatement = "There is no visible change.";

/// Deterministic fill-in. Distractor classes follow an index rotation whose
/// start is drawn from the per-sample seed; classes in `skip` are never used.
QARecord template_qa(const QaSubject& subject, QType qtype, const ClassMap& classes, const std::set<int>& skip,
                     std::uint64_t seed);

/// Instruction text for the remote generator.
std::string mcq_change_prompt(std::string_view class_name);
std::string mcq_no_change_prompt();

struct ParsedMcq {
  std::string question;
  std::vector<std::string> options;  // A..D
  int correct = 0;                   // index into options
};

/// Parses "Question: ...\nA. ...\nB. ...\nC. ...\nD. ...\nThe correct answer is: X".
/// Errc::generation when the text does not follow that layout.
ParsedMcq parse_mcq_reply(std::string_view text);

/// Copy of the image with a one-pixel red outline around bbox.
RgbImage draw_bbox(const RgbImage& image, const PixelRect& bbox);

/// Client for `POST /generate {"prompt_text","images","temperature"}` -> `{"text"}`.
class RemoteQaGenerator {
 public:
  explicit RemoteQaGenerator(const QaSettings& settings);
  /// Up to `remote_attempts` requests until one parses; Errc::generation after that.
  ParsedMcq generate(const std::string& prompt, const RgbImage& before, const RgbImage& after) const;

 private:
  QaSettings settings_;
};

/// Images handed to the remote generator (full scenes).
struct QaImages {
  const RgbImage* before = nullptr;
  const RgbImage* after = nullptr;
};

/// Template rows for yes_no/open, and for mcq unless a remote generator is
/// given; remote mcq replies have their correct option moved to a seeded
/// letter. A failed remote generation falls back to the template and sets
/// *fell_back.
QARecord generate_qa(const QaSubject& subject, QType qtype, const ClassMap& classes, const std::set<int>& skip,
                     std::uint64_t seed, const RemoteQaGenerator* remote, const QaImages& images,
                     bool* fell_back = nullptr);

}  // namespace changeqa
