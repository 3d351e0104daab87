#pragma once

#include <map>
#include <set>
#include <vector>

#include "changeqa/raster.hpp"

namespace changeqa {

enum class Connectivity { four = 4, eight = 8 };

/// Which side of tau_iou is rejected. reject_below matches the printed
/// filtering algorithm; reject_above treats low temporal IoU as change.
enum class IouDirection { reject_below, reject_above };

struct ChangeRegion {
  int class_id = 0;
  std::vector<Point> pixels;  // row-major order
  PixelRect bbox;
  double iou = 0.0;
  double changed_ratio = 0.0;

  std::size_t size() const { return pixels.size(); }
};

struct RegionThresholds {
  int min_size = 50;
  std::map<int, int> min_size_overrides;
  double changed_threshold = 0.3;
  std::map<int, double> changed_overrides;
  double iou_threshold = 0.18;
  IouDirection iou_direction = IouDirection::reject_below;
  Connectivity connectivity = Connectivity::eight;
  /// Classes never proposed as changes (typically background).
  std::set<int> skip_classes;

  int min_size_for(int class_id) const;
  double changed_threshold_for(int class_id) const;
  bool iou_passes(double iou) const;
  /// Errc::config if any threshold is outside its valid range.
  void validate() const;
};

/// Connected components of the set pixels. Components are ordered by their
/// first pixel in row-major scan; pixels inside a component are row-major.
std::vector<std::vector<Point>> connected_components(const BinaryMask& mask, Connectivity connectivity);

/// Temporal IoU of class_id restricted to the region and the fraction of
/// region pixels marked in the diff mask.
ChangeRegion region_stats(std::vector<Point> pixels, int class_id, const SemanticMask& before,
                          const SemanticMask& after, const DiffMask& diff);

/// Size, changed-ratio and IoU gates applied to every component of the
/// per-class union support. Output ordered by (class, first pixel).
std::vector<ChangeRegion> extract_candidates(const SemanticMask& before, const SemanticMask& after,
                                             const DiffMask& diff, const RegionThresholds& thresholds);

/// True when the region passes all three gates.
bool region_survives(const ChangeRegion& region, const RegionThresholds& thresholds);

}  // namespace changeqa
