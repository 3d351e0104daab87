#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "changeqa/encoder.hpp"
#include "changeqa/pipeline.hpp"

namespace changeqa {

/// Five-class toy world used for demos and tests: background, building,
/// tree, water, road, each drawn as its palette colour plus seeded jitter.
ClassMap demo_classes();
std::vector<Rgb> demo_palette();
inline constexpr int kJitter = 12;

/// Axis-aligned object; each flag says where it is painted.
struct PlantedObject {
  int class_id = 0;
  PixelRect rect;
  bool before_mask = true;
  bool after_mask = true;
  bool before_image = true;
  bool after_image = true;
};

struct SyntheticScene {
  std::string pair_id;
  int width = 64;
  int height = 64;
  int background = 0;          // class filling the before scene
  int after_background = 0;    // class filling the after scene
  std::vector<PlantedObject> objects;  // painted in order
  std::uint64_t seed = 0;
};

LoadedPair render_scene(const SyntheticScene& scene);

/// Writes the four PNGs as <dir>/<pair_id>_{before,after}{,_mask}.png.
PairEntry write_scene(const LoadedPair& pair, const std::filesystem::path& dir);

/// Jittered single-colour patch of class k.
RgbImage class_patch(int class_id, int size, std::uint64_t seed);

struct ExpectedChange {
  std::string pair_id;
  int class_id = 0;
  PixelRect bbox;
};

/// Ten scenes: clean appearances, a building extension that needs the judge,
/// a mislabelled unchanged building, a mask-only decoy, an undersized change
/// and unchanged scenes. `expected` lists the changes that must be kept.
std::vector<SyntheticScene> planted_suite(std::uint64_t seed, std::vector<ExpectedChange>* expected = nullptr);

/// Config text that matches planted_suite: palette encoder, cosine judge,
/// background skipped, low-IoU regions treated as change.
std::string demo_config_yaml(const std::string& gallery_manifest);

/// Writes planted_suite, a gallery of one patch per foreground class, the
/// pairs manifest and config.yaml under dir. Returns the config path.
std::filesystem::path write_demo(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace changeqa
