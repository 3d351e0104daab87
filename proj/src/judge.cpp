#include "changeqa/judge.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>

#include "changeqa/error.hpp"
#include "changeqa/hashing.hpp"
#include "changeqa/png_io.hpp"
#include "changeqa/prompt.hpp"

namespace changeqa {

using nlohmann::json;

std::string judge_query_hash(const JudgeCall& call) {
  Sha256 h;
  h.update(call.prompt_text);
  h.update("\n");
  h.update(content_key(call.query_image));
  for (const auto& ex : call.context) {
    h.update("\n");
    h.update(ex.id);
  }
  return h.hex_digest();
}

std::map<std::string, int> load_judge_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open judge table " + path.string());
  std::map<std::string, int> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.insert_or_assign(j.at("query_hash").get<std::string>(), j.at("score").get<int>());
    } catch (const json::exception& e) {
      fail(Errc::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

MockJudge::MockJudge(MockJudgeConfig cfg) : cfg_(std::move(cfg)) {
  require(cfg_.accept_fraction >= 0.0 && cfg_.accept_fraction <= 1.0, Errc::config,
          "mock judge accept_fraction must lie in [0,1]");
}

int MockJudge::score(const JudgeCall& call) const {
  switch (cfg_.mode) {
    case MockJudgeConfig::Mode::pinned:
      return cfg_.score;
    case MockJudgeConfig::Mode::table: {
      const auto it = cfg_.table.find(judge_query_hash(call));
      return it == cfg_.table.end() ? cfg_.default_score : it->second;
    }
    case MockJudgeConfig::Mode::cosine: {
      if (call.context.empty()) return cfg_.default_score;
      double best = -1.0;
      for (const auto& ex : call.context) best = std::max(best, cosine(call.query_embedding, ex.embedding));
      return static_cast<int>(std::lround(1.0 + 4.0 * std::max(0.0, best)));
    }
    case MockJudgeConfig::Mode::bernoulli: {
      const auto digest = Sha256().update(content_key(call.query_image)).update(call.class_name).digest();
      std::uint64_t word = 0;
      for (int i = 0; i < 8; ++i) word = (word << 8) | digest[static_cast<std::size_t>(i)];
      return unit_double(word) < cfg_.accept_fraction ? cfg_.high_score : cfg_.low_score;
    }
  }
  fail(Errc::contract, "unknown mock judge mode");
}

RemoteJudge::RemoteJudge(RemoteJudgeConfig cfg) : cfg_(std::move(cfg)) {
  require(!cfg_.url.empty(), Errc::config, "remote judge needs a url");
}

int parse_judge_reply(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    fail(Errc::protocol, std::string("judge reply is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("score")) fail(Errc::protocol, "judge reply lacks a score");
  const auto& s = j["score"];
  if (s.is_number_integer()) return s.get<int>();
  if (s.is_string()) {
    const std::string text = s.get<std::string>();
    std::size_t i = 0;
    while (i < text.size()) {
      const bool sign = (text[i] == '-' || text[i] == '+') && i + 1 < text.size() &&
                        std::isdigit(static_cast<unsigned char>(text[i + 1]));
      if (sign || std::isdigit(static_cast<unsigned char>(text[i]))) {
        std::size_t end = i + (sign ? 1 : 0);
        while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
        if (end - i > 9) fail(Errc::protocol, "judge score token too long");
        return std::stoi(text.substr(i, end - i));
      }
      ++i;
    }
  }
  fail(Errc::protocol, "judge reply score is not an integer");
}

int RemoteJudge::score(const JudgeCall& call) const {
  json images = json::array();
  for (const auto& ex : call.context) {
    require(!ex.image.empty(), Errc::contract, "remote judge needs exemplar image files (exemplar '" + ex.id + "')");
    images.push_back(base64_encode(read_file_bytes(ex.image)));
  }
  images.push_back(base64_encode(encode_png(call.query_image)));
  const json request = {{"prompt_text", call.prompt_text}, {"images", images}};
  return parse_judge_reply(post_json(cfg_.url, "/judge", request.dump(), cfg_.retry));
}

void JudgeSettings::validate() const {
  require(n >= 1, Errc::config, "judge.n must be >= 1");
  require(tau >= kMinScore - 1 && tau <= kMaxScore, Errc::config, "judge.tau must lie within the score scale");
}

JudgeOutcome judge_query(const JudgeQuery& query, const JudgeSettings& settings, const JudgeBackend& backend,
                         const Gallery* gallery, const EncoderBackend& encoder) {
  JudgeCall call;
  call.query_image = query.image;
  call.query_embedding = encoder.embed_image(query.image);
  call.class_id = query.class_id;
  call.class_name = query.class_name;
  if (settings.few_shot && gallery != nullptr && !gallery->empty() && settings.context_size > 0) {
    call.context = gallery->retrieve_topk(call.query_embedding, settings.context_size, query.class_id);
  }
  call.prompt_text = assemble_prompt(query.class_name, call.context);
  const int s = backend.score(call);
  if (s < kMinScore || s > kMaxScore) {
    fail(Errc::protocol, "judge score " + std::to_string(s) + " outside 1..5");
  }
  JudgeOutcome out;
  out.score = s;
  for (const auto& ex : call.context) out.context_ids.push_back(ex.id);
  return out;
}

std::string_view to_string(BestOfNMode mode) { return mode == BestOfNMode::argmax ? "argmax" : "threshold"; }

BestOfNResult select_best_of_n(std::span<const int> scores, int tau) {
  require(!scores.empty(), Errc::contract, "best-of-n over an empty hypothesis set");
  BestOfNResult out;
  out.scores.assign(scores.begin(), scores.end());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > scores[out.selected]) out.selected = j;
    if (scores[j] > tau) out.retained.push_back(j);
  }
  return out;
}

BestOfNResult best_of_n(const std::vector<JudgeQuery>& hypotheses, const JudgeSettings& settings,
                        const JudgeBackend& backend, const Gallery* gallery, const EncoderBackend& encoder) {
  require(!hypotheses.empty(), Errc::contract, "best-of-n over an empty hypothesis set");
  std::vector<int> scores(hypotheses.size());
  if (hypotheses.size() == 1) {
    scores[0] = judge_query(hypotheses[0], settings, backend, gallery, encoder).score;
  } else {
    std::vector<std::future<int>> pending;
    pending.reserve(hypotheses.size());
    for (const auto& h : hypotheses) {
      pending.push_back(std::async(std::launch::async, [&, h] {
        return judge_query(h, settings, backend, gallery, encoder).score;
      }));
    }
    // Reduction happens only after every score has arrived.
    for (std::size_t j = 0; j < pending.size(); ++j) scores[j] = pending[j].get();
  }
  return select_best_of_n(scores, settings.tau);
}

}  // namespace changeqa
