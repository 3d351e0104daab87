// Independent reference implementations used to check the library. They
// favour obviousness over speed and share no code with src/.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "changeqa/calibrate.hpp"
#include "changeqa/raster.hpp"
#include "changeqa/regions.hpp"

namespace oracle {

using changeqa::BinaryMask;
using changeqa::Point;
using changeqa::SemanticMask;

inline std::vector<std::vector<Point>> flood_fill(const BinaryMask& mask, int connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<int> label(static_cast<std::size_t>(w * h), -1);
  std::vector<std::vector<Point>> out;
  std::function<void(int, int, int)> visit = [&](int x, int y, int id) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    if (!mask.at(x, y) || label[static_cast<std::size_t>(y * w + x)] >= 0) return;
    label[static_cast<std::size_t>(y * w + x)] = id;
    out[static_cast<std::size_t>(id)].push_back({x, y});
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (connectivity == 4 && dx != 0 && dy != 0) continue;
        visit(x + dx, y + dy, id);
      }
    }
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(x, y) && label[static_cast<std::size_t>(y * w + x)] < 0) {
        out.emplace_back();
        visit(x, y, static_cast<int>(out.size()) - 1);
      }
    }
  }
  for (auto& c : out) {
    std::sort(c.begin(), c.end(), [](const Point& a, const Point& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  }
  return out;
}

struct RegionTruth {
  int class_id = 0;
  std::vector<Point> pixels;
  double iou = 0.0;
  double changed = 0.0;
};

/// Applies the three region gates by direct counting.
inline std::vector<RegionTruth> gate_oracle(const SemanticMask& before, const SemanticMask& after,
                                            const changeqa::RegionThresholds& th) {
  std::vector<RegionTruth> out;
  const int conn = th.connectivity == changeqa::Connectivity::four ? 4 : 8;
  for (int k = 0; k < before.num_classes(); ++k) {
    if (th.skip_classes.contains(k)) continue;
    BinaryMask support(before.width(), before.height());
    for (int y = 0; y < before.height(); ++y) {
      for (int x = 0; x < before.width(); ++x) support.set(x, y, before.at(x, y) == k || after.at(x, y) == k);
    }
    for (auto& comp : flood_fill(support, conn)) {
      int both = 0;
      int either = 0;
      int changed = 0;
      for (const auto& p : comp) {
        const bool b = before.at(p.x, p.y) == k;
        const bool a = after.at(p.x, p.y) == k;
        both += a && b;
        either += a || b;
        changed += before.at(p.x, p.y) != after.at(p.x, p.y);
      }
      RegionTruth r{k, comp, static_cast<double>(both) / either, static_cast<double>(changed) / comp.size()};
      const int min_size = th.min_size_overrides.contains(k) ? th.min_size_overrides.at(k) : th.min_size;
      const double tau_c = th.changed_overrides.contains(k) ? th.changed_overrides.at(k) : th.changed_threshold;
      const bool iou_ok = th.iou_direction == changeqa::IouDirection::reject_below ? !(r.iou < th.iou_threshold)
                                                                                    : !(r.iou > th.iou_threshold);
      if (static_cast<int>(comp.size()) >= min_size && r.changed >= tau_c && iou_ok) out.push_back(std::move(r));
    }
  }
  return out;
}

/// P(score_pos beats score_neg) + half the ties, as a count over 2PN.
inline double pairwise_auc(const std::vector<changeqa::LabeledScore>& data, changeqa::RocDirection dir) {
  long long num2 = 0;
  long long p = 0;
  long long n = 0;
  for (const auto& a : data) (a.positive ? p : n) += 1;
  for (const auto& a : data) {
    if (!a.positive) continue;
    for (const auto& b : data) {
      if (b.positive) continue;
      const bool better = dir == changeqa::RocDirection::higher_is_positive ? a.score > b.score : a.score < b.score;
      num2 += better ? 2 : (a.score == b.score ? 1 : 0);
    }
  }
  return static_cast<double>(num2) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
}

struct YoudenTruth {
  double threshold = 0.0;
  double j = 0.0;
};

inline YoudenTruth exhaustive_youden(const std::vector<changeqa::LabeledScore>& data, changeqa::RocDirection dir) {
  std::set<double> thresholds;
  long long p = 0;
  long long n = 0;
  for (const auto& d : data) {
    thresholds.insert(d.score);
    (d.positive ? p : n) += 1;
  }
  long long best = 0;
  bool first = true;
  YoudenTruth out;
  for (double t : thresholds) {  // ascending, so strict > keeps the smaller threshold
    long long tp = 0;
    long long fp = 0;
    for (const auto& d : data) {
      const bool called = dir == changeqa::RocDirection::higher_is_positive ? d.score >= t : d.score <= t;
      if (called) (d.positive ? tp : fp) += 1;
    }
    const long long j = tp * n - fp * p;
    if (first || j > best) {
      best = j;
      out.threshold = t;
      first = false;
    }
  }
  out.j = static_cast<double>(best) / (static_cast<double>(p) * static_cast<double>(n));
  return out;
}

/// A(k) by scanning each query's prefix independently for every k.
inline std::vector<double> prefix_scan_topk(const std::vector<std::vector<bool>>& flags, int k_max) {
  std::vector<double> out;
  for (int k = 1; k <= k_max; ++k) {
    int hits = 0;
    for (const auto& q : flags) hits += std::any_of(q.begin(), q.begin() + k, [](bool b) { return b; }) ? 1 : 0;
    out.push_back(static_cast<double>(hits) / static_cast<double>(flags.size()));
  }
  return out;
}

/// Mean first, then squared deviations.
inline double two_pass_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

inline std::vector<std::size_t> brute_filter(const std::vector<int>& scores, int tau) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > tau) out.push_back(i);
  }
  return out;
}

}  // namespace oracle

namespace gen {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline changeqa::BinaryMask binary(Rng& rng, int w, int h, double density) {
  changeqa::BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, uniform01(rng) < density);
  }
  return m;
}

/// Random blocky mask: a few rectangles of random classes on class 0.
inline changeqa::SemanticMask blocky(Rng& rng, int w, int h, int k, int rects) {
  changeqa::SemanticMask m(w, h, k);
  for (int r = 0; r < rects; ++r) {
    const int cls = uniform_int(rng, 0, k - 1);
    const int x0 = uniform_int(rng, 0, w - 1);
    const int y0 = uniform_int(rng, 0, h - 1);
    const int x1 = std::min(w - 1, x0 + uniform_int(rng, 0, w / 2));
    const int y1 = std::min(h - 1, y0 + uniform_int(rng, 0, h / 2));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) m.set(x, y, static_cast<std::uint8_t>(cls));
    }
  }
  return m;
}

/// Copy of m with each pixel relabelled at random with probability p.
inline changeqa::SemanticMask perturb(Rng& rng, const changeqa::SemanticMask& m, double p) {
  auto out = m;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (uniform01(rng) < p) out.set(x, y, static_cast<std::uint8_t>(uniform_int(rng, 0, m.num_classes() - 1)));
    }
  }
  return out;
}

inline changeqa::RgbImage image(Rng& rng, int w, int h) {
  changeqa::RgbImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.set(x, y, static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()));
    }
  }
  return img;
}

}  // namespace gen
