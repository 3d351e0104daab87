#pragma once

#include <span>
#include <string>
#include <string_view>

#include "changeqa/gallery.hpp"

namespace changeqa {

/// Placeholder emitted where an image is interleaved into the prompt text.
inline constexpr std::string_view kImageToken = "<start_of_image>";

/// Judge prompt: instruction, five-level scoring guide, one
/// "Example (i): <image> Score = s" line per context exemplar (gallery
/// order), then the query as the final example with "Score = ?". An empty
/// context yields the zero-shot form. Output is byte-stable.
std::string assemble_prompt(std::string_view selected_class, std::span<const Exemplar> context);

/// Scoring-guide lines with the class substituted, in order 5 down to 1.
std::string scoring_guide(std::string_view selected_class);

/// Score shown for an exemplar in the prompt; unscored exemplars are shown
/// as positives (5) because they were retrieved from the class's own group.
int displayed_score(const Exemplar& exemplar);

}  // namespace changeqa
