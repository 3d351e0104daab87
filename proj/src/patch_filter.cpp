#include "changeqa/patch_filter.hpp"

#include <algorithm>
#include <cmath>

#include "changeqa/error.hpp"

namespace changeqa {

namespace {

// Division rather than multiplication by 1/255 so that a byte patch and its
// unit-scale conversion produce bit-identical statistics.
double divisor(ValueScale scale) { return scale == ValueScale::byte ? 255.0 : 1.0; }

void require_nonempty(const FloatPatch& patch) {
  require(patch.width > 0 && patch.height > 0, Errc::contract, "patch statistics need a nonempty patch");
  require(patch.samples.size() == 3 * patch.pixel_count(), Errc::shape, "patch sample count mismatch");
}

}  // namespace

FloatPatch to_float_patch(const RgbImage& image) {
  FloatPatch patch{image.width(), image.height(), {}};
  const auto src = image.samples();
  patch.samples.assign(src.begin(), src.end());
  return patch;
}

void PatchFilterConfig::validate() const {
  require(std::isfinite(tau_std) && tau_std >= 0.0, Errc::config, "patch_filter.tau_std must be >= 0");
  require(std::isfinite(tau_sat) && tau_sat >= 0.0 && tau_sat <= 1.0, Errc::config,
          "patch_filter.tau_sat must lie in [0,1]");
  require(std::isfinite(tau_exg), Errc::config, "patch_filter.tau_exg must be finite");
}

std::string_view to_string(PatchVerdict verdict) {
  switch (verdict) {
    case PatchVerdict::keep: return "keep";
    case PatchVerdict::reject_uniformity: return "uniformity";
    case PatchVerdict::reject_saturation: return "saturation";
    case PatchVerdict::reject_vegetation: return "vegetation";
  }
  return "unknown";
}

double intensity_std(const FloatPatch& patch, ValueScale scale) {
  require_nonempty(patch);
  const double d = divisor(scale);
  // Welford keeps the single pass stable for near-constant patches.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < patch.samples.size(); i += 3) {
    const double luma = (patch.samples[i] / d + patch.samples[i + 1] / d + patch.samples[i + 2] / d) / 3.0;
    ++n;
    const double delta = luma - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (luma - mean);
  }
  return std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
}

double mean_saturation(const FloatPatch& patch, ValueScale scale) {
  require_nonempty(patch);
  const double d = divisor(scale);
  double total = 0.0;
  for (std::size_t i = 0; i < patch.samples.size(); i += 3) {
    const double r = patch.samples[i] / d;
    const double g = patch.samples[i + 1] / d;
    const double b = patch.samples[i + 2] / d;
    const double hi = std::max({r, g, b});
    const double lo = std::min({r, g, b});
    total += hi > 0.0 ? (hi - lo) / hi : 0.0;
  }
  return total / static_cast<double>(patch.pixel_count());
}

double mean_exg(const FloatPatch& patch, ValueScale scale) {
  require_nonempty(patch);
  const double d = divisor(scale);
  double total = 0.0;
  for (std::size_t i = 0; i < patch.samples.size(); i += 3) {
    total += 2.0 * (patch.samples[i + 1] / d) - patch.samples[i] / d - patch.samples[i + 2] / d;
  }
  return total / static_cast<double>(patch.pixel_count());
}

PatchVerdict keep_patch(const FloatPatch& patch, const PatchFilterConfig& cfg) {
  if (intensity_std(patch, cfg.value_scale) < cfg.tau_std) return PatchVerdict::reject_uniformity;
  if (mean_saturation(patch, cfg.value_scale) < cfg.tau_sat) return PatchVerdict::reject_saturation;
  if (mean_exg(patch, cfg.value_scale) > cfg.tau_exg) return PatchVerdict::reject_vegetation;
  return PatchVerdict::keep;
}

PatchVerdict keep_patch(const RgbImage& patch, const PatchFilterConfig& cfg) {
  PatchFilterConfig byte_cfg = cfg;
  byte_cfg.value_scale = ValueScale::byte;
  return keep_patch(to_float_patch(patch), byte_cfg);
}

}  // namespace changeqa
