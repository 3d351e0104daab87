#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "changeqa/encoder.hpp"

namespace changeqa {

struct ScreenConfig {
  int k = 5;
  double tau_enc = 0.5;
  double tau_sim = 0.9;
  /// One text prompt per class index.
  std::vector<std::string> class_prompts;

  void validate() const;
};

struct ClassScore {
  int class_id = 0;
  double similarity = 0.0;
};

/// Classes by descending cosine(embed_image(x), embed_text(prompt)); ties
/// resolve to the lower class index.
std::vector<ClassScore> rank_classes(const RgbImage& image, const ScreenConfig& cfg, const EncoderBackend& enc);

enum class ScreenDecision { discard, accept, ambiguous };

std::string_view to_string(ScreenDecision decision);

struct ScreenResult {
  ScreenDecision decision = ScreenDecision::discard;
  /// Set on non-discarded candidates whose crops embed within tau_sim of
  /// each other; such candidates need judge confirmation.
  bool no_change_suspect = false;
  double crop_similarity = 0.0;
  std::vector<ClassScore> before_ranking;
  std::vector<ClassScore> after_ranking;
};

/// True when class_id is among the first k entries with similarity >= tau_enc.
bool in_top_k(const std::vector<ClassScore>& ranking, int class_id, int k, double tau_enc);

ScreenResult screen(const RgbImage& before, const RgbImage& after, int expected_class, const ScreenConfig& cfg,
                    const EncoderBackend& enc);

}  // namespace changeqa
