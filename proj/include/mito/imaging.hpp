#pragma once

// Optical density, Macenko stain estimation, H-channel extraction and the
// classical nuclei pseudo-mask pipeline used by the non-learned teacher.

#include <array>
#include <string>

#include "mito/raster.hpp"

namespace mito::imaging {

/// Per-pixel optical densities, 3 channels, all values finite and >= 0.
using OdImage = Raster<float>;

using Vec3 = std::array<double, 3>;

/// Two unit OD vectors, hematoxylin first.
struct StainMatrix {
  Vec3 h{};
  Vec3 e{};

  /// Column-major 6-number form: h0 h1 h2 e0 e1 e2.
  std::array<double, 6> column_major() const;
  static StainMatrix from_column_major(const std::array<double, 6>& v);
};

struct PseudoMaskParams {
  double blur_sigma = 2.0;
  int open_radius = 2;
  double od_beta = 0.15;
  double alpha_percentile = 1.0;
  int min_object_area = 20;
  /// Otsu runs once per tile of this size.
  int otsu_tile = 512;

  void validate() const;
};

OdImage rgb_to_od(const Image& image);
/// Inverse of rgb_to_od with rounding and clamping to [0, 255].
void od_to_rgb(const OdImage& od, Image& out);

/// Throws Error{InsufficientTissue} or Error{StainDegenerate}.
StainMatrix estimate_stain_matrix(const OdImage& od, const PseudoMaskParams& params);

/// Nonnegative least-squares stain concentrations (c_h, c_e) of one OD pixel.
std::array<double, 2> stain_concentrations(const Vec3& od, const StainMatrix& stains);

ScalarImage h_channel(const OdImage& od, const StainMatrix& stains);

/// Truncated (radius ceil(3 sigma)) normalized Gaussian, reflected borders.
ScalarImage gaussian_blur(const ScalarImage& img, double sigma);
std::vector<double> gaussian_kernel(double sigma);

struct OtsuResult {
  /// Center of the last background bin, in image units.
  double threshold = 0.0;
  /// Last background bin; pixels in bins > bin are foreground.
  int bin = 0;
  double lo = 0.0;
  double hi = 0.0;

  int bin_of(double v) const;
  bool is_foreground(double v) const { return bin_of(v) > bin; }
};

/// 256-bin Otsu over [min, max]. Ties go to the lowest bin.
/// Throws Error{DegenerateHistogram} when every pixel lands in one bin.
OtsuResult otsu_threshold(const ScalarImage& img);
OtsuResult otsu_threshold(std::span<const float> values);

BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask morphological_open(const BinaryMask& mask, int radius);

/// Offsets (dx, dy) with dx^2 + dy^2 <= r^2.
std::vector<std::array<int, 2>> disk_offsets(int radius);

/// 8-connected component labelling; returns labels (0 = none) and count.
struct Components {
  Raster<int> labels;
  int count = 0;
  std::vector<int> areas;  // indexed by label - 1
};
Components connected_components(const BinaryMask& mask);
BinaryMask remove_small_objects(const BinaryMask& mask, int min_area);

struct PseudoMaskResult {
  BinaryMask mask;
  bool warning = false;
  std::string message;
};

/// H channel -> blur -> per-tile Otsu -> open -> drop small components.
PseudoMaskResult classical_pseudomask(const Image& image, const PseudoMaskParams& params);

}  // namespace mito::imaging
