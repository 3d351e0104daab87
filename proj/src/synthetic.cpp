#include "changeqa/synthetic.hpp"

#include <fstream>
#include <random>

#include <json.hpp>

#include "changeqa/error.hpp"
#include "changeqa/hashing.hpp"
#include "changeqa/png_io.hpp"

namespace changeqa {

namespace fs = std::filesystem;

namespace {

enum DemoClass { kBackground = 0, kBuilding = 1, kTree = 2, kWater = 3, kRoad = 4 };

void paint(RgbImage& image, int x, int y, int class_id, std::mt19937_64& rng) {
  const Rgb c = demo_palette()[static_cast<std::size_t>(class_id)];
  std::uint8_t px[3];
  for (int ch = 0; ch < 3; ++ch) {
    const int jitter = static_cast<int>(uniform_index(rng, 2 * kJitter + 1)) - kJitter;
    px[ch] = static_cast<std::uint8_t>(std::clamp(c[static_cast<std::size_t>(ch)] + jitter, 0, 255));
  }
  image.set(x, y, px[0], px[1], px[2]);
}

int class_at(const SyntheticScene& s, int x, int y, bool after, bool mask) {
  int k = after ? s.after_background : s.background;
  for (const auto& o : s.objects) {
    const bool on = after ? (mask ? o.after_mask : o.after_image) : (mask ? o.before_mask : o.before_image);
    if (on && x >= o.rect.x0 && x < o.rect.x0 + o.rect.w && y >= o.rect.y0 && y < o.rect.y0 + o.rect.h) {
      k = o.class_id;
    }
  }
  return k;
}

PlantedObject appears(int class_id, PixelRect rect) { return {class_id, rect, false, true, false, true}; }
PlantedObject stays(int class_id, PixelRect rect) { return {class_id, rect, true, true, true, true}; }

}  // namespace

ClassMap demo_classes() { return ClassMap({"background", "building", "tree", "water", "road"}); }

std::vector<Rgb> demo_palette() {
  return {Rgb{140, 110, 80}, Rgb{220, 220, 220}, Rgb{30, 120, 40}, Rgb{30, 60, 160}, Rgb{80, 80, 80}};
}

LoadedPair render_scene(const SyntheticScene& s) {
  const int k = static_cast<int>(demo_palette().size());
  LoadedPair p;
  p.pair_id = s.pair_id;
  p.before = RgbImage(s.width, s.height);
  p.after = RgbImage(s.width, s.height);
  p.before_mask = SemanticMask(s.width, s.height, k);
  p.after_mask = SemanticMask(s.width, s.height, k);
  // Both images share the jitter stream so unchanged pixels are identical.
  std::mt19937_64 rng_before(mix_seed(s.seed, s.pair_id));
  std::mt19937_64 rng_after(mix_seed(s.seed, s.pair_id));
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      paint(p.before, x, y, class_at(s, x, y, false, false), rng_before);
      paint(p.after, x, y, class_at(s, x, y, true, false), rng_after);
      p.before_mask.set(x, y, static_cast<std::uint8_t>(class_at(s, x, y, false, true)));
      p.after_mask.set(x, y, static_cast<std::uint8_t>(class_at(s, x, y, true, true)));
    }
  }
  return p;
}

PairEntry write_scene(const LoadedPair& pair, const fs::path& dir) {
  fs::create_directories(dir);
  PairEntry e;
  e.pair_id = pair.pair_id;
  e.before_image = dir / (pair.pair_id + "_before.png");
  e.after_image = dir / (pair.pair_id + "_after.png");
  e.before_mask = dir / (pair.pair_id + "_before_mask.png");
  e.after_mask = dir / (pair.pair_id + "_after_mask.png");
  save_image_png(e.before_image, pair.before);
  save_image_png(e.after_image, pair.after);
  save_mask_png(e.before_mask, pair.before_mask);
  save_mask_png(e.after_mask, pair.after_mask);
  return e;
}

RgbImage class_patch(int class_id, int size, std::uint64_t seed) {
  RgbImage image(size, size);
  std::mt19937_64 rng(mix_seed(seed, "patch/" + std::to_string(class_id)));
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) paint(image, x, y, class_id, rng);
  }
  return image;
}

std::vector<SyntheticScene> planted_suite(std::uint64_t seed, std::vector<ExpectedChange>* expected) {
  std::vector<SyntheticScene> suite;
  std::vector<ExpectedChange> keep;
  const auto scene = [&](std::string id, std::vector<PlantedObject> objects) {
    SyntheticScene s;
    s.pair_id = std::move(id);
    s.objects = std::move(objects);
    s.seed = seed;
    suite.push_back(std::move(s));
  };

  scene("p00-unchanged", {stays(kTree, {8, 8, 14, 14}), stays(kWater, {36, 36, 20, 16})});

  scene("p01-building", {appears(kBuilding, {10, 10, 12, 12})});
  keep.push_back({"p01-building", kBuilding, {10, 10, 12, 12}});

  scene("p02-water", {stays(kTree, {40, 6, 12, 12}), appears(kWater, {8, 40, 14, 10})});
  keep.push_back({"p02-water", kWater, {8, 40, 14, 10}});

  // The old building is visible in both crops, so the screen calls this
  // ambiguous and the judge decides.
  scene("p03-extension", {stays(kBuilding, {10, 10, 14, 14}), appears(kBuilding, {24, 10, 30, 30})});
  keep.push_back({"p03-extension", kBuilding, {10, 10, 44, 30}});

  // Building present in both images but missing from the before mask.
  scene("p04-mislabelled", {{kBuilding, {30, 30, 12, 12}, false, true, true, true}});

  // Tree only in the after mask; the images show bare ground.
  scene("p05-decoy", {{kTree, {12, 36, 12, 12}, false, true, false, false}});

  scene("p06-small", {appears(kBuilding, {40, 40, 4, 4})});

  scene("p07-two", {appears(kBuilding, {6, 6, 12, 12}), appears(kRoad, {10, 44, 30, 4})});
  keep.push_back({"p07-two", kBuilding, {6, 6, 12, 12}});
  keep.push_back({"p07-two", kRoad, {10, 44, 30, 4}});

  scene("p08-tree", {stays(kWater, {40, 40, 16, 16}), appears(kTree, {8, 20, 10, 12})});
  keep.push_back({"p08-tree", kTree, {8, 20, 10, 12}});

  // Mask boundary noise on an unchanged tree next to a new building.
  scene("p09-noisy", {stays(kTree, {36, 8, 16, 16}), {kTree, {52, 8, 2, 16}, false, true, true, true},
                      appears(kBuilding, {8, 36, 12, 12})});
  keep.push_back({"p09-noisy", kBuilding, {8, 36, 12, 12}});

  if (expected) *expected = std::move(keep);
  return suite;
}

std::string demo_config_yaml(const std::string& gallery_manifest) {
  std::string yaml = R"(classes: [background, building, tree, water, road]
seed: 7
jobs: 2
regions:
  connectivity: 8
  min_size: 20
  changed_threshold: 0.3
  iou_threshold: 0.18
  iou_direction: reject_above
  skip_classes: [background]
crop:
  margin: 2
screen:
  k: 5
  tau_enc: 0.1
  tau_sim: 0.9
encoder:
  backend: mock
  mock:
    mode: palette
    palette:
      background: [140, 110, 80]
      building: [220, 220, 220]
      tree: [30, 120, 40]
      water: [30, 60, 160]
      road: [80, 80, 80]
judge:
  backend: mock
  tau: 3
  n: 2
  mode: threshold
  context_size: 4
  mock:
    mode: cosine
qa:
  qtypes: [yes_no, mcq, open]
  no_change_rows_per_pair: 1
)";
  if (!gallery_manifest.empty()) yaml += "gallery:\n  manifest: " + gallery_manifest + "\n";
  return yaml;
}

fs::path write_demo(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir / "pairs");
  fs::create_directories(dir / "gallery");
  {
    std::ofstream manifest(dir / "pairs.jsonl");
    for (const auto& s : planted_suite(seed)) {
      const auto e = write_scene(render_scene(s), dir / "pairs");
      const auto rel = [&](const fs::path& p) { return fs::relative(p, dir).generic_string(); };
      manifest << nlohmann::ordered_json{{"pair_id", e.pair_id},
                                         {"before_image", rel(e.before_image)},
                                         {"after_image", rel(e.after_image)},
                                         {"before_mask", rel(e.before_mask)},
                                         {"after_mask", rel(e.after_mask)}}
                      .dump()
               << '\n';
    }
  }
  {
    const auto classes = demo_classes();
    std::ofstream manifest(dir / "gallery.jsonl");
    for (int k = 1; k < classes.size(); ++k) {
      const auto name = classes.name(k);
      save_image_png(dir / "gallery" / (name + ".png"), class_patch(k, 16, seed));
      manifest << nlohmann::ordered_json{{"id", name + "-1"},
                                         {"class", name},
                                         {"image", "gallery/" + name + ".png"},
                                         {"caption", "a " + name},
                                         {"score", 5}}
                      .dump()
               << '\n';
    }
  }
  const auto config = dir / "config.yaml";
  std::ofstream(config) << demo_config_yaml("gallery.jsonl");
  return config;
}

}  // namespace changeqa
