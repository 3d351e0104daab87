#pragma once

#include <string_view>
#include <vector>

#include "changeqa/raster.hpp"

namespace changeqa {

/// How raw sample values map onto [0,1]: unit samples are used as-is, byte
/// samples are divided by 255.
enum class ValueScale { unit, byte };

/// RGB patch with real-valued samples, row-major interleaved. Lets the
/// statistics run on data that is not 8-bit (e.g. already-normalised tiles).
struct FloatPatch {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

FloatPatch to_float_patch(const RgbImage& image);  // byte scale, values 0..255

struct PatchFilterConfig {
  double tau_std = 0.08;
  double tau_sat = 0.15;
  double tau_exg = 0.35;
  ValueScale value_scale = ValueScale::unit;

  void validate() const;
};

enum class PatchVerdict { keep, reject_uniformity, reject_saturation, reject_vegetation };

std::string_view to_string(PatchVerdict verdict);

/// Population std of per-pixel luma (mean of R,G,B) on the unit scale.
double intensity_std(const FloatPatch& patch, ValueScale scale);
/// Mean HSV saturation (max-min)/max, 0 where max = 0.
double mean_saturation(const FloatPatch& patch, ValueScale scale);
/// Mean Excess Green 2G - R - B on the unit scale, in [-2, 2].
double mean_exg(const FloatPatch& patch, ValueScale scale);

/// Uniformity, then saturation, then vegetation; the first failing test is
/// reported.
PatchVerdict keep_patch(const FloatPatch& patch, const PatchFilterConfig& cfg);
/// 8-bit convenience overload; the byte scale is implied.
PatchVerdict keep_patch(const RgbImage& patch, const PatchFilterConfig& cfg);

}  // namespace changeqa
