#include <doctest.h>

#include <algorithm>
#include <set>

#include "changeqa/regions.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

using namespace changeqa;

namespace {

using PixelSet = std::set<std::pair<int, int>>;

PixelSet as_set(const std::vector<Point>& pts) {
  PixelSet s;
  for (const auto& p : pts) s.emplace(p.x, p.y);
  return s;
}

std::vector<PixelSet> survivors(const SemanticMask& a, const SemanticMask& b, const RegionThresholds& th) {
  std::vector<PixelSet> out;
  for (const auto& r : extract_candidates(a, b, diff_mask(a, b), th)) out.push_back(as_set(r.pixels));
  return out;
}

RegionThresholds loose() {
  RegionThresholds th;
  th.min_size = 1;
  th.changed_threshold = 0.0;
  th.iou_threshold = 0.0;
  return th;
}

}  // namespace

TEST_CASE("connected components examples") {
  SUBCASE("all ones") {
    const BinaryMask m(3, 3, std::vector<std::uint8_t>(9, 1));
    const auto cc = connected_components(m, Connectivity::four);
    REQUIRE(cc.size() == 1);
    CHECK(cc[0].size() == 9);
  }
  SUBCASE("diagonal pair") {
    BinaryMask m(2, 2);
    m.set(0, 0, true);
    m.set(1, 1, true);
    CHECK(connected_components(m, Connectivity::four).size() == 2);
    CHECK(connected_components(m, Connectivity::eight).size() == 1);
  }
  SUBCASE("empty raster") { CHECK(connected_components(BinaryMask(4, 4), Connectivity::eight).empty()); }
  SUBCASE("ordering by first pixel") {
    // Component starting at (3,0) comes before the one starting at (0,1).
    const BinaryMask m(4, 3, {0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0});
    const auto cc = connected_components(m, Connectivity::four);
    REQUIRE(cc.size() == 2);
    CHECK(cc[0].front() == Point{3, 0});
    CHECK(cc[1].front() == Point{0, 1});
  }
}

TEST_CASE("connected components match flood fill") {
  gen::Rng rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = gen::binary(rng, gen::uniform_int(rng, 1, 16), gen::uniform_int(rng, 1, 16), gen::uniform01(rng));
    for (const auto conn : {Connectivity::four, Connectivity::eight}) {
      const auto got = connected_components(m, conn);
      const auto want = oracle::flood_fill(m, conn == Connectivity::four ? 4 : 8);
      REQUIRE(got == want);
      std::size_t total = 0;
      PixelSet seen;
      for (const auto& c : got) {
        total += c.size();
        for (const auto& p : c) REQUIRE(seen.emplace(p.x, p.y).second);
      }
      REQUIRE(total == m.popcount());
    }
  }
}

TEST_CASE("region stats") {
  SUBCASE("identical support") {
    const SemanticMask m(3, 1, 2, {1, 1, 1});
    const auto r = region_stats({{0, 0}, {1, 0}, {2, 0}}, 1, m, m, diff_mask(m, m));
    CHECK(r.iou == 1.0);
    CHECK(r.changed_ratio == 0.0);
    CHECK(r.bbox == PixelRect{0, 0, 3, 1});
  }
  SUBCASE("class only after") {
    const SemanticMask b(2, 1, 2, {0, 0});
    const SemanticMask a(2, 1, 2, {1, 1});
    const auto r = region_stats({{0, 0}, {1, 0}}, 1, b, a, diff_mask(b, a));
    CHECK(r.iou == 0.0);
    CHECK(r.changed_ratio == 1.0);
  }
  SUBCASE("hand-counted 4x4") {
    // before: class 1 on rows 0-1; after: class 1 on row 0 x<3 and row 2.
    // intersection 3, union 12, changed 9 of 12.
    const SemanticMask b(4, 4, 2, {1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
    const SemanticMask a(4, 4, 2, {1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0});
    const auto regions = extract_candidates(b, a, diff_mask(b, a), loose());
    std::vector<ChangeRegion> ones;
    std::copy_if(regions.begin(), regions.end(), std::back_inserter(ones), [](const auto& r) { return r.class_id == 1; });
    REQUIRE(ones.size() == 1);
    CHECK(ones[0].size() == 12);
    CHECK(ones[0].iou == 0.25);
    CHECK(ones[0].changed_ratio == 0.75);
    CHECK(ones[0].bbox == PixelRect{0, 0, 4, 3});
  }
  SUBCASE("empty set") {
    const SemanticMask m(2, 2, 2);
    CHECK(error_code([&] { region_stats({}, 1, m, m, diff_mask(m, m)); }) == Errc::contract);
  }
}

TEST_CASE("extract candidates gates") {
  SUBCASE("size gate") {
    const SemanticMask b(4, 1, 2, {0, 0, 0, 0});
    const SemanticMask a(4, 1, 2, {1, 1, 0, 0});
    auto th = loose();
    th.skip_classes = {0};
    th.min_size = 3;
    CHECK(extract_candidates(b, a, diff_mask(b, a), th).empty());
    th.min_size = 2;
    CHECK(extract_candidates(b, a, diff_mask(b, a), th).size() == 1);
    th.min_size_overrides[1] = 3;
    CHECK(extract_candidates(b, a, diff_mask(b, a), th).empty());
  }
  SUBCASE("iou direction at 0.18") {
    // union 10, intersection 1: iou 0.10.
    const SemanticMask b(10, 1, 2, {1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
    const SemanticMask a(10, 1, 2, {0, 1, 1, 1, 1, 1, 1, 1, 1, 1});
    auto th = loose();
    th.skip_classes = {0};
    th.iou_threshold = 0.18;
    th.iou_direction = IouDirection::reject_below;
    CHECK(extract_candidates(b, a, diff_mask(b, a), th).empty());
    th.iou_direction = IouDirection::reject_above;
    const auto kept = extract_candidates(b, a, diff_mask(b, a), th);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].iou == doctest::Approx(0.1));
  }
  SUBCASE("three-region scene against the predicate oracle") {
    // Class 1: big new block (kept), class 2: 2-pixel speck (too small),
    // class 3: unchanged block (changed ratio 0).
    SemanticMask b(12, 12, 4);
    SemanticMask a(12, 12, 4);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) a.set(x, y, 1);
    }
    a.set(10, 0, 2);
    a.set(11, 0, 2);
    for (int y = 7; y < 11; ++y) {
      for (int x = 7; x < 11; ++x) {
        b.set(x, y, 3);
        a.set(x, y, 3);
      }
    }
    RegionThresholds th;
    th.min_size = 3;
    th.changed_threshold = 0.3;
    th.iou_threshold = 0.18;
    th.iou_direction = IouDirection::reject_above;
    th.skip_classes = {0};
    const auto got = extract_candidates(b, a, diff_mask(b, a), th);
    const auto want = oracle::gate_oracle(b, a, th);
    REQUIRE(got.size() == 1);
    REQUIRE(want.size() == 1);
    CHECK(got[0].class_id == 1);
    CHECK(got[0].pixels == want[0].pixels);
  }
}

TEST_CASE("extract candidates matches the gate oracle on random pairs") {
  gen::Rng rng(202);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = gen::uniform_int(rng, 4, 20);
    const int h = gen::uniform_int(rng, 4, 20);
    const int k = gen::uniform_int(rng, 2, 5);
    const auto b = gen::blocky(rng, w, h, k, gen::uniform_int(rng, 1, 5));
    const auto a = gen::perturb(rng, gen::blocky(rng, w, h, k, 2), 0.05);
    RegionThresholds th;
    th.min_size = gen::uniform_int(rng, 1, 12);
    th.changed_threshold = gen::uniform01(rng);
    th.iou_threshold = gen::uniform01(rng);
    th.iou_direction = gen::uniform01(rng) < 0.5 ? IouDirection::reject_below : IouDirection::reject_above;
    th.connectivity = gen::uniform01(rng) < 0.5 ? Connectivity::four : Connectivity::eight;
    if (gen::uniform01(rng) < 0.5) th.skip_classes.insert(0);
    if (gen::uniform01(rng) < 0.5) th.min_size_overrides[1] = gen::uniform_int(rng, 1, 20);
    if (gen::uniform01(rng) < 0.5) th.changed_overrides[k - 1] = gen::uniform01(rng);

    const auto got = extract_candidates(b, a, diff_mask(b, a), th);
    const auto want = oracle::gate_oracle(b, a, th);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      REQUIRE(got[i].class_id == want[i].class_id);
      REQUIRE(got[i].pixels == want[i].pixels);
      REQUIRE(got[i].iou == doctest::Approx(want[i].iou).epsilon(1e-12));
      REQUIRE(got[i].changed_ratio == doctest::Approx(want[i].changed).epsilon(1e-12));
    }
  }
}

TEST_CASE("raising size or changed thresholds never adds survivors") {
  gen::Rng rng(303);
  for (int trial = 0; trial < 150; ++trial) {
    const auto b = gen::blocky(rng, 14, 14, 4, 4);
    const auto a = gen::perturb(rng, b, 0.15);
    RegionThresholds lo;
    lo.min_size = gen::uniform_int(rng, 1, 8);
    lo.changed_threshold = gen::uniform01(rng) * 0.5;
    lo.iou_threshold = gen::uniform01(rng);
    auto hi = lo;
    hi.min_size += gen::uniform_int(rng, 0, 8);
    hi.changed_threshold += gen::uniform01(rng) * 0.5;
    const auto small = survivors(a, b, hi);
    const auto big = survivors(a, b, lo);
    for (const auto& s : small) REQUIRE(std::find(big.begin(), big.end(), s) != big.end());
  }
}

TEST_CASE("extraction is deterministic") {
  gen::Rng rng(404);
  const auto b = gen::blocky(rng, 32, 32, 5, 8);
  const auto a = gen::perturb(rng, b, 0.1);
  const auto first = survivors(b, a, loose());
  for (int i = 0; i < 3; ++i) CHECK(survivors(b, a, loose()) == first);
}

TEST_CASE("threshold validation") {
  RegionThresholds th;
  CHECK_NOTHROW(th.validate());
  th.min_size = 0;
  CHECK(error_code([&] { th.validate(); }) == Errc::config);
  th = RegionThresholds{};
  th.changed_threshold = 1.5;
  CHECK(error_code([&] { th.validate(); }) == Errc::config);
}
