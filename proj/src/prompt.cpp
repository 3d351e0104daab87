#include "changeqa/prompt.hpp"

namespace changeqa {

namespace {

std::string substitute(std::string_view tmpl, std::string_view cls) {
  static constexpr std::string_view kSlot = "{selected_class}";
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = tmpl.find(kSlot, pos);
    if (hit == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      return out;
    }
    out.append(tmpl.substr(pos, hit - pos));
    out.append(cls);
    pos = hit + kSlot.size();
  }
}

constexpr std::string_view kInstruction =
    "You are an expert in recognizing objects from satellite images. Your task is to score a query image patch "
    "from 1 to 5. You need to specify if {selected_class} appears in the image. All images are satellite images. "
    "Return only the numerical score (1, 2, 3, 4, or 5).";

constexpr std::string_view kGuide =
    "5: There is definitely a {selected_class} in the last image. The object's shape, shadow, and features are "
    "clearly visible from above.\n"
    "4: Very likely that the image contains a {selected_class}. Features are mostly clear.\n"
    "3: Probably the image contains a {selected_class}, but visibility or details are ambiguous.\n"
    "2: Unlikely that a {selected_class} appears in the image.\n"
    "1: Definitely does not contain a {selected_class}.\n";

}  // namespace

std::string scoring_guide(std::string_view selected_class) { return substitute(kGuide, selected_class); }

int displayed_score(const Exemplar& exemplar) { return exemplar.score.value_or(5); }

std::string assemble_prompt(std::string_view selected_class, std::span<const Exemplar> context) {
  std::string out = substitute(kInstruction, selected_class);
  out += '\n';
  out += scoring_guide(selected_class);
  std::size_t i = 1;
  for (const auto& ex : context) {
    out += "Example (" + std::to_string(i++) + "): ";
    out += kImageToken;
    out += " Score = " + std::to_string(displayed_score(ex)) + "\n";
  }
  out += "Example (" + std::to_string(i) + "): ";
  out += kImageToken;
  out += " Score = ?\n";
  return out;
}

}  // namespace changeqa
