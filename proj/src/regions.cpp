#include "changeqa/regions.hpp"

#include <numeric>
#include <string>

#include "changeqa/error.hpp"

namespace changeqa {

namespace {

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller label wins so the root is the earliest provisional label.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::vector<std::vector<Point>> connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> labels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
  DisjointSet sets;
  const bool diagonal = connectivity == Connectivity::eight;
  auto label_at = [&](int x, int y) { return labels[static_cast<std::size_t>(y) * w + x]; };

  // First pass: provisional labels from the already-visited neighbours.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      int current = -1;
      auto merge = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w) return;
        const int other = label_at(nx, ny);
        if (other < 0) return;
        if (current < 0) {
          current = other;
        } else {
          sets.unite(current, other);
        }
      };
      merge(x - 1, y);
      merge(x, y - 1);
      if (diagonal) {
        merge(x - 1, y - 1);
        merge(x + 1, y - 1);
      }
      if (current < 0) current = sets.make();
      labels[static_cast<std::size_t>(y) * w + x] = current;
    }
  }

  // Second pass: resolve equivalences; component order = first row-major pixel.
  std::vector<int> slot_of_root;
  std::vector<std::vector<Point>> components;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int provisional = label_at(x, y);
      if (provisional < 0) continue;
      const int root = sets.find(provisional);
      if (static_cast<std::size_t>(root) >= slot_of_root.size()) slot_of_root.resize(root + 1, -1);
      int& slot = slot_of_root[root];
      if (slot < 0) {
        slot = static_cast<int>(components.size());
        components.emplace_back();
      }
      components[slot].push_back({x, y});
    }
  }
  return components;
}

int RegionThresholds::min_size_for(int class_id) const {
  const auto it = min_size_overrides.find(class_id);
  return it == min_size_overrides.end() ? min_size : it->second;
}

double RegionThresholds::changed_threshold_for(int class_id) const {
  const auto it = changed_overrides.find(class_id);
  return it == changed_overrides.end() ? changed_threshold : it->second;
}

bool RegionThresholds::iou_passes(double iou) const {
  return iou_direction == IouDirection::reject_below ? !(iou < iou_threshold) : !(iou > iou_threshold);
}

void RegionThresholds::validate() const {
  auto ratio_ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  require(min_size >= 1, Errc::config, "regions.min_size must be >= 1");
  for (const auto& [k, v] : min_size_overrides) {
    require(v >= 1, Errc::config, "regions.min_size override for class " + std::to_string(k) + " must be >= 1");
  }
  require(ratio_ok(changed_threshold), Errc::config, "regions.changed_threshold must lie in [0,1]");
  for (const auto& [k, v] : changed_overrides) {
    require(ratio_ok(v), Errc::config, "regions.changed_threshold override for class " + std::to_string(k));
  }
  require(ratio_ok(iou_threshold), Errc::config, "regions.iou_threshold must lie in [0,1]");
}

ChangeRegion region_stats(std::vector<Point> pixels, int class_id, const SemanticMask& before,
                          const SemanticMask& after, const DiffMask& diff) {
  require(!pixels.empty(), Errc::contract, "region_stats on an empty pixel set");
  require(before.width() == after.width() && before.height() == after.height() &&
              diff.width() == before.width() && diff.height() == before.height(),
          Errc::shape, "region_stats rasters differ in size");
  std::size_t both = 0;
  std::size_t either = 0;
  std::size_t changed = 0;
  for (const auto& p : pixels) {
    const bool in_before = before.at(p.x, p.y) == class_id;
    const bool in_after = after.at(p.x, p.y) == class_id;
    both += (in_before && in_after) ? 1 : 0;
    either += (in_before || in_after) ? 1 : 0;
    changed += diff.at(p.x, p.y) ? 1 : 0;
  }
  ChangeRegion region;
  region.class_id = class_id;
  region.bbox = bounding_rect(pixels);
  region.iou = either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
  region.changed_ratio = static_cast<double>(changed) / static_cast<double>(pixels.size());
  region.pixels = std::move(pixels);
  return region;
}

bool region_survives(const ChangeRegion& region, const RegionThresholds& thresholds) {
  if (region.size() < static_cast<std::size_t>(thresholds.min_size_for(region.class_id))) return false;
  if (!thresholds.iou_passes(region.iou)) return false;
  return !(region.changed_ratio < thresholds.changed_threshold_for(region.class_id));
}

std::vector<ChangeRegion> extract_candidates(const SemanticMask& before, const SemanticMask& after,
                                             const DiffMask& diff, const RegionThresholds& thresholds) {
  require(before.width() == after.width() && before.height() == after.height(), Errc::shape,
          "mask dimensions differ");
  std::vector<ChangeRegion> out;
  const auto a = before.labels();
  const auto b = after.labels();
  for (int k = 0; k < before.num_classes(); ++k) {
    if (thresholds.skip_classes.contains(k)) continue;
    std::vector<std::uint8_t> support(a.size());
    bool any = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      support[i] = (a[i] == k || b[i] == k) ? 1 : 0;
      any = any || support[i] != 0;
    }
    if (!any) continue;
    const BinaryMask union_support(before.width(), before.height(), std::move(support));
    for (auto& component : connected_components(union_support, thresholds.connectivity)) {
      // Cheap size gate first; stats only for components that can survive.
      if (component.size() < static_cast<std::size_t>(thresholds.min_size_for(k))) continue;
      ChangeRegion region = region_stats(std::move(component), k, before, after, diff);
      if (region_survives(region, thresholds)) out.push_back(std::move(region));
    }
  }
  return out;
}

}  // namespace changeqa
