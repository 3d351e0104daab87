#include "changeqa/qa.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include "changeqa/error.hpp"
#include "changeqa/hashing.hpp"
#include "changeqa/http_client.hpp"
#include "changeqa/png_io.hpp"

namespace changeqa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kLetters = "ABCD";

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string article(std::string_view word) {
  if (!word.empty() && std::string_view("aeiouAEIOU").find(word.front()) != std::string_view::npos) return "an";
  return "a";
}

// Non-skipped classes other than `exclude`, rotated to start at a seeded offset.
std::vector<int> rotation(const ClassMap& classes, const std::set<int>& skip, std::optional<int> exclude,
                          std::mt19937_64& rng) {
  std::vector<int> pool;
  for (int k = 0; k < classes.size(); ++k) {
    if (!skip.contains(k) && k != exclude) pool.push_back(k);
  }
  if (pool.empty()) return pool;
  const auto start = static_cast<std::ptrdiff_t>(uniform_index(rng, pool.size()));
  std::rotate(pool.begin(), pool.begin() + start, pool.end());
  return pool;
}

void push_distinct(std::vector<std::string>& out, std::string option, std::string_view correct) {
  if (out.size() < 3 && option != correct && std::find(out.begin(), out.end(), option) == out.end()) {
    out.push_back(std::move(option));
  }
}

// Places the correct option at a seeded letter, distractors in order around it.
void place_options(QARecord& rec, const std::string& correct, const std::vector<std::string>& distractors,
                   std::mt19937_64& rng) {
  require(distractors.size() == 3, Errc::generation, "could not build three distinct distractors");
  const auto pos = static_cast<std::size_t>(uniform_index(rng, 4));
  rec.options = distractors;
  rec.options.insert(rec.options.begin() + static_cast<std::ptrdiff_t>(pos), correct);
  rec.answer = std::string(1, kLetters[pos]);
}

ChangeDirection flip(ChangeDirection d) {
  return d == ChangeDirection::appeared ? ChangeDirection::disappeared : ChangeDirection::appeared;
}

}  // namespace

ordered_json to_json(const QARecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["pair_id"] = r.pair_id;
  j["bbox"] = ordered_json{{"x0", r.bbox.x0}, {"y0", r.bbox.y0}, {"w", r.bbox.w}, {"h", r.bbox.h}};
  j["qtype"] = to_string(r.qtype);
  j["question"] = r.question;
  if (r.qtype == QType::mcq) j["options"] = r.options;
  j["answer"] = r.answer;
  j["class"] = r.class_name ? ordered_json(*r.class_name) : ordered_json(nullptr);
  j["is_change"] = r.is_change;
  return j;
}

std::string to_jsonl(const QARecord& record) { return to_json(record).dump() + "\n"; }

QARecord qa_from_json(const json& row) {
  QARecord r;
  try {
    r.sample_id = row.at("sample_id").get<std::string>();
    r.pair_id = row.at("pair_id").get<std::string>();
    const auto& b = row.at("bbox");
    r.bbox = PixelRect{b.at("x0").get<int>(), b.at("y0").get<int>(), b.at("w").get<int>(), b.at("h").get<int>()};
    const auto qtype = parse_qtype(row.at("qtype").get<std::string>());
    require(qtype.has_value(), Errc::schema, "unknown qtype");
    r.qtype = *qtype;
    r.question = row.at("question").get<std::string>();
    if (row.contains("options")) r.options = row.at("options").get<std::vector<std::string>>();
    r.answer = row.at("answer").get<std::string>();
    if (!row.at("class").is_null()) r.class_name = row.at("class").get<std::string>();
    r.is_change = row.at("is_change").get<bool>();
  } catch (const json::exception& e) {
    fail(Errc::schema, std::string("malformed dataset row: ") + e.what());
  }
  check_record(r);
  return r;
}

void check_record(const QARecord& r) {
  require(!r.sample_id.empty() && !r.pair_id.empty(), Errc::schema, "record ids must be nonempty");
  require(!r.question.empty(), Errc::schema, "record question must be nonempty");
  require(r.is_change == r.class_name.has_value(), Errc::schema, "change rows carry a class, no-change rows do not");
  switch (r.qtype) {
    case QType::mcq:
      require(r.options.size() == 4, Errc::schema, "mcq rows need exactly 4 options");
      require(r.answer.size() == 1 && kLetters.find(r.answer[0]) != std::string_view::npos, Errc::schema,
              "mcq answer must be a letter A-D");
      break;
    case QType::yes_no:
      require(r.options.empty(), Errc::schema, "only mcq rows carry options");
      require(r.answer == "Yes" || r.answer == "No", Errc::schema, "yes_no answer must be Yes or No");
      break;
    case QType::open:
      require(r.options.empty(), Errc::schema, "only mcq rows carry options");
      require(!r.answer.empty(), Errc::schema, "open answer must be nonempty");
      break;
  }
}

std::string location_phrase(const PixelRect& bbox, int width, int height) {
  require(width > 0 && height > 0, Errc::contract, "location needs a nonempty image");
  // Thirds compared in integers: centre*2*3 vs size*2*i.
  const auto cell = [](long long lo, long long extent, long long size) {
    const long long c6 = 3 * (2 * lo + extent);
    return c6 < 2 * size ? 0 : (c6 < 4 * size ? 1 : 2);
  };
  const int col = cell(bbox.x0, bbox.w, width);
  const int row = cell(bbox.y0, bbox.h, height);
  static constexpr std::string_view rows[] = {"upper", "", "lower"};
  static constexpr std::string_view cols[] = {"left", "", "right"};
  if (row == 1 && col == 1) return "central";
  if (row == 1) return std::string(cols[col]);
  if (col == 1) return std::string(rows[row]);
  return std::string(rows[row]) + "-" + std::string(cols[col]);
}

std::string change_statement(std::string_view class_name, ChangeDirection direction) {
  if (direction == ChangeDirection::appeared) {
    return "A new " + std::string(class_name) + " appeared.";
  }
  const auto a = article(class_name);
  return std::string(1, static_cast<char>(std::toupper(a[0]))) + a.substr(1) + " " + std::string(class_name) +
         " was removed.";
}

constexpr std::string_view kFillers[] = {"The whole scene was flooded.", "A new structure appeared.",
                                         "A structure was removed."};

QARecord template_qa(const QaSubject& s, QType qtype, const ClassMap& classes, const std::set<int>& skip,
                     std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, s.sample_id));
  QARecord rec;
  rec.sample_id = s.sample_id;
  rec.pair_id = s.pair_id;
  rec.bbox = s.bbox;
  rec.qtype = qtype;
  rec.is_change = s.class_id.has_value();

  if (!s.class_id) {
    switch (qtype) {
      case QType::yes_no:
        rec.question = "Is there any visible change between the two images?";
        rec.answer = "No";
        break;
      case QType::open:
        rec.question = "What has changed between the two images?";
        rec.answer = "Nothing has changed; there is no visible change.";
        break;
      case QType::mcq: {
        rec.question = "Which statement describes the difference between the two images?";
        const auto others = rotation(classes, skip, std::nullopt, rng);
        std::vector<std::string> distractors;
        for (auto dir : {ChangeDirection::appeared, ChangeDirection::disappeared}) {
          for (int k : others) push_distinct(distractors, change_statement(classes.name(k), dir), kNoChangeStatement);
        }
        // Tiny class maps cannot supply three class-based false changes.
        for (auto filler : kFillers) push_distinct(distractors, std::string(filler), kNoChangeStatement);
        place_options(rec, std::string(kNoChangeStatement), distractors, rng);
        break;
      }
    }
    check_record(rec);
    return rec;
  }

  const std::string& cls = classes.name(*s.class_id);
  rec.class_name = cls;
  const auto loc = location_phrase(s.bbox, s.image_width, s.image_height);
  const bool appeared = s.direction == ChangeDirection::appeared;
  switch (qtype) {
    case QType::yes_no:
      rec.question = appeared ? "Has a new " + cls + " appeared in the " + loc + " part of the image?"
                              : "Has " + article(cls) + " " + cls + " been removed from the " + loc +
                                    " part of the image?";
      rec.answer = "Yes";
      break;
    case QType::open: {
      rec.question = "What changed in the " + loc + " part of the image?";
      auto answer = change_statement(cls, s.direction);
      answer.pop_back();
      rec.answer = answer + " in the " + loc + " part of the image.";
      break;
    }
    case QType::mcq: {
      rec.question = "What change occurred in the " + loc + " part of the image?";
      const auto correct = change_statement(cls, s.direction);
      const auto others = rotation(classes, skip, s.class_id, rng);
      std::vector<std::string> distractors;
      for (int k : others) push_distinct(distractors, change_statement(classes.name(k), s.direction), correct);
      push_distinct(distractors, change_statement(cls, flip(s.direction)), correct);
      push_distinct(distractors, std::string(kNoChangeStatement), correct);
      for (int k : others) push_distinct(distractors, change_statement(classes.name(k), flip(s.direction)), correct);
      for (auto filler : kFillers) push_distinct(distractors, std::string(filler), correct);
      place_options(rec, correct, distractors, rng);
      break;
    }
  }
  check_record(rec);
  return rec;
}

std::string mcq_change_prompt(std::string_view class_name) {
  return "You are an expert in generating multiple-choice questions based on visual changes in satellite imagery.\n"
         "The image pair below shows a change related to " +
         std::string(class_name) +
         " in the red bounding box.\n"
         "Generate one multiple-choice question with 4 answer options (A, B, C, D) to describe this change.\n"
         "One option must correctly describe the change, and the other 3 must be incorrect.\n"
         "Ignore the red bounding box in your answers-it is only for you to understand the local change.\n"
         "Focus strictly on the change inside the red bounding box; all other differences are not correct.\n"
         "Format the output as:\n"
         "Question:\\nA.\\nB.\\nC.\\nD.\\nThe correct answer is:";
}

std::string mcq_no_change_prompt() {
  return "You are an expert in generating multiple-choice questions about visual comparisons in satellite imagery.\n"
         "The two images below show no visible change.\n"
         "Generate one multiple-choice question where the correct answer states that there was no change,\n"
         "and the other three options must be incorrect changes (e.g., suggesting false changes).\n"
         "Format the output as:\n"
         "Question:\\nA.\\nB.\\nC.\\nD.\\nThe correct answer is:";
}

ParsedMcq parse_mcq_reply(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
      auto t = trim(line);
      if (!t.empty()) lines.push_back(std::move(t));
    }
  }
  ParsedMcq out;
  std::size_t i = 0;
  while (i < lines.size() && !lines[i].starts_with("Question:")) ++i;
  if (i == lines.size()) fail(Errc::generation, "reply has no 'Question:' line");
  std::string question = trim(std::string_view(lines[i]).substr(9));
  ++i;
  const auto option_letter = [](const std::string& line) -> int {
    if (line.size() >= 2 && kLetters.find(line[0]) != std::string_view::npos && (line[1] == '.' || line[1] == ')')) {
      return static_cast<int>(kLetters.find(line[0]));
    }
    return -1;
  };
  while (i < lines.size() && option_letter(lines[i]) != 0) {
    question += (question.empty() ? "" : " ") + lines[i];
    ++i;
  }
  require(!question.empty(), Errc::generation, "reply has an empty question");
  out.question = question;
  for (int letter = 0; letter < 4; ++letter, ++i) {
    require(i < lines.size() && option_letter(lines[i]) == letter, Errc::generation,
            std::string("reply lacks option ") + kLetters[static_cast<std::size_t>(letter)]);
    auto option = trim(std::string_view(lines[i]).substr(2));
    require(!option.empty(), Errc::generation, "reply has an empty option");
    out.options.push_back(std::move(option));
  }
  constexpr std::string_view kAnswer = "The correct answer is:";
  require(i < lines.size() && lines[i].starts_with(kAnswer), Errc::generation, "reply lacks the answer line");
  std::string rest = trim(std::string_view(lines[i]).substr(kAnswer.size()));
  if (rest.empty() && i + 1 < lines.size()) rest = lines[i + 1];
  require(!rest.empty() && kLetters.find(rest[0]) != std::string_view::npos &&
              (rest.size() == 1 || !std::isalpha(static_cast<unsigned char>(rest[1]))),
          Errc::generation, "answer is not a letter A-D");
  out.correct = static_cast<int>(kLetters.find(rest[0]));
  std::set<std::string> distinct(out.options.begin(), out.options.end());
  require(distinct.size() == 4, Errc::generation, "reply options are not distinct");
  return out;
}

RgbImage draw_bbox(const RgbImage& image, const PixelRect& bbox) {
  RgbImage out = image;
  if (bbox.area() == 0) return out;
  const int x1 = std::min(bbox.x0 + bbox.w - 1, image.width() - 1);
  const int y1 = std::min(bbox.y0 + bbox.h - 1, image.height() - 1);
  for (int x = bbox.x0; x <= x1; ++x) {
    out.set(x, bbox.y0, 255, 0, 0);
    out.set(x, y1, 255, 0, 0);
  }
  for (int y = bbox.y0; y <= y1; ++y) {
    out.set(bbox.x0, y, 255, 0, 0);
    out.set(x1, y, 255, 0, 0);
  }
  return out;
}

RemoteQaGenerator::RemoteQaGenerator(const QaSettings& settings) : settings_(settings) {
  require(!settings_.remote_url.empty(), Errc::config, "remote QA generator needs a url");
}

ParsedMcq RemoteQaGenerator::generate(const std::string& prompt, const RgbImage& before,
                                      const RgbImage& after) const {
  const json request = {{"prompt_text", prompt},
                        {"images", {base64_encode(encode_png(before)), base64_encode(encode_png(after))}},
                        {"temperature", settings_.temperature}};
  std::string last_error;
  for (int attempt = 0; attempt < settings_.remote_attempts; ++attempt) {
    const auto body = post_json(settings_.remote_url, "/generate", request.dump(), settings_.retry);
    try {
      const auto reply = json::parse(body);
      return parse_mcq_reply(reply.at("text").get<std::string>());
    } catch (const json::exception& e) {
      last_error = e.what();
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  fail(Errc::generation, "no well-formed reply after " + std::to_string(settings_.remote_attempts) +
                             " attempts: " + last_error);
}

QARecord generate_qa(const QaSubject& subject, QType qtype, const ClassMap& classes, const std::set<int>& skip,
                     std::uint64_t seed, const RemoteQaGenerator* remote, const QaImages& images, bool* fell_back) {
  if (fell_back) *fell_back = false;
  if (qtype != QType::mcq || remote == nullptr) return template_qa(subject, qtype, classes, skip, seed);
  require(images.before != nullptr && images.after != nullptr, Errc::contract, "remote generation needs the images");
  try {
    ParsedMcq parsed;
    if (subject.class_id) {
      parsed = remote->generate(mcq_change_prompt(classes.name(*subject.class_id)),
                                draw_bbox(*images.before, subject.bbox), draw_bbox(*images.after, subject.bbox));
    } else {
      parsed = remote->generate(mcq_no_change_prompt(), *images.before, *images.after);
    }
    QARecord rec;
    rec.sample_id = subject.sample_id;
    rec.pair_id = subject.pair_id;
    rec.bbox = subject.bbox;
    rec.qtype = QType::mcq;
    rec.question = parsed.question;
    rec.is_change = subject.class_id.has_value();
    if (subject.class_id) rec.class_name = classes.name(*subject.class_id);
    std::mt19937_64 rng(mix_seed(seed, subject.sample_id));
    const auto correct = parsed.options[static_cast<std::size_t>(parsed.correct)];
    std::vector<std::string> distractors;
    for (std::size_t i = 0; i < 4; ++i) {
      if (static_cast<int>(i) != parsed.correct) distractors.push_back(parsed.options[i]);
    }
    place_options(rec, correct, distractors, rng);
    check_record(rec);
    return rec;
  } catch (const Error& e) {
    if (e.code() != Errc::generation && e.code() != Errc::backend) throw;
    if (fell_back) *fell_back = true;
    return template_qa(subject, qtype, classes, skip, seed);
  }
}

}  // namespace changeqa
