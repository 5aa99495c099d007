#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "mito/raster.hpp"

namespace mito::datapipe {

struct AugmentConfig {
  int crop_size = 363;
  int out_size = 256;
  bool photometric = true;
  double stain_jitter = 0.10;
  double max_blur_sigma = 1.5;
  double sharpen_min = 0.5;
  double sharpen_max = 1.5;
  /// Test hooks: pin the random crop origin and/or rotation.
  std::optional<int> crop_x;
  std::optional<int> crop_y;
  std::optional<double> angle_deg;

  void validate() const;
};

/// Continuous output point q maps to patch point crop + offset + c + R(angle) * (q - c)
/// with c = out / 2 and offset = (crop - out) / 2 rounded down. Pixel centers
/// sit at +0.5.
struct Geometry {
  int crop_x = 0;
  int crop_y = 0;
  int crop_size = 363;
  int out_size = 256;
  double angle_rad = 0.0;

  std::array<double, 2> to_patch(double u, double v) const;
  std::array<double, 2> to_output(double px, double py) const;
  /// Inclusive integer bounds [x0, y0, x1, y1] of every patch pixel touched by
  /// bilinear sampling over the output grid.
  std::array<int, 4> source_bounds() const;
};

struct PhotometricOps {
  bool jitter = false;
  double h_factor = 1.0;
  double e_factor = 1.0;
  bool blur = false;
  double blur_sigma = 0.0;
  bool sharpen = false;
  double sharpen_amount = 0.0;
};

struct AugmentedPair {
  Image weak;
  Image strong;
  MultiClassMask mask;
  uint64_t seed = 0;
  Geometry geometry;
  PhotometricOps ops;
};

/// Crop -> rotate -> center crop (weak), plus photometric perturbation of the
/// weak view (strong). Throws Error{PatchTooSmall}.
AugmentedPair make_pair(const Image& patch, const MultiClassMask& mask, uint64_t seed,
                        const AugmentConfig& cfg = {});

/// Bilinear geometric resampling used by make_pair.
Image warp_image(const Image& patch, const Geometry& g);
MultiClassMask warp_mask(const MultiClassMask& mask, const Geometry& g);

Image apply_photometric(const Image& weak, const PhotometricOps& ops);

/// Square patch centered on (cx, cy) with reflected borders.
Image extract_patch(const Image& region, double cx, double cy, int size);
Image resize_bilinear(const Image& img, int width, int height);

}  // namespace mito::datapipe
