#include "changeqa/screen.hpp"

#include <algorithm>

#include "changeqa/error.hpp"

namespace changeqa {

void ScreenConfig::validate() const {
  require(k >= 1, Errc::config, "screen.k must be >= 1");
  require(tau_enc >= -1.0 && tau_enc <= 1.0, Errc::config, "screen.tau_enc must lie in [-1,1]");
  require(tau_sim >= -1.0 && tau_sim <= 1.0, Errc::config, "screen.tau_sim must lie in [-1,1]");
}

std::string_view to_string(ScreenDecision decision) {
  switch (decision) {
    case ScreenDecision::discard: return "discard";
    case ScreenDecision::accept: return "accept";
    case ScreenDecision::ambiguous: return "ambiguous";
  }
  return "unknown";
}

namespace {

std::vector<ClassScore> rank_embedding(const Embedding& image, const ScreenConfig& cfg, const EncoderBackend& enc) {
  std::vector<ClassScore> out;
  out.reserve(cfg.class_prompts.size());
  for (std::size_t c = 0; c < cfg.class_prompts.size(); ++c) {
    out.push_back({static_cast<int>(c), cosine(image, enc.embed_text(cfg.class_prompts[c]))});
  }
  std::stable_sort(out.begin(), out.end(), [](const ClassScore& a, const ClassScore& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.class_id < b.class_id;
  });
  return out;
}

}  // namespace

std::vector<ClassScore> rank_classes(const RgbImage& image, const ScreenConfig& cfg, const EncoderBackend& enc) {
  require(!cfg.class_prompts.empty(), Errc::contract, "rank_classes needs at least one class prompt");
  return rank_embedding(enc.embed_image(image), cfg, enc);
}

bool in_top_k(const std::vector<ClassScore>& ranking, int class_id, int k, double tau_enc) {
  const auto n = std::min(ranking.size(), static_cast<std::size_t>(std::max(k, 0)));
  for (std::size_t i = 0; i < n; ++i) {
    if (ranking[i].class_id == class_id) return ranking[i].similarity >= tau_enc;
  }
  return false;
}

ScreenResult screen(const RgbImage& before, const RgbImage& after, int expected_class, const ScreenConfig& cfg,
                    const EncoderBackend& enc) {
  require(!cfg.class_prompts.empty(), Errc::contract, "screen needs class prompts");
  require(!before.empty() && !after.empty(), Errc::contract, "screen needs nonempty crops");
  const Embedding e_before = enc.embed_image(before);
  const Embedding e_after = enc.embed_image(after);

  ScreenResult result;
  result.after_ranking = rank_embedding(e_after, cfg, enc);
  result.before_ranking = rank_embedding(e_before, cfg, enc);
  result.crop_similarity = cosine(e_before, e_after);

  if (!in_top_k(result.after_ranking, expected_class, cfg.k, cfg.tau_enc)) {
    result.decision = ScreenDecision::discard;
    return result;
  }
  result.decision = in_top_k(result.before_ranking, expected_class, cfg.k, cfg.tau_enc) ? ScreenDecision::ambiguous
                                                                                         : ScreenDecision::accept;
  result.no_change_suspect = result.crop_similarity >= cfg.tau_sim;
  return result;
}

}  // namespace changeqa
