#pragma once

#include <vector>

#include "mito/datapipe/annotation.hpp"
#include "mito/raster.hpp"

namespace mito::datapipe {

struct TileOrigin {
  int x = 0;
  int y = 0;
  bool operator==(const TileOrigin&) const = default;
};

struct TileGrid {
  int tile_size = 512;
  int stride = 256;
  std::vector<TileOrigin> origins;  // row-major
};

/// Origins on multiples of the stride; the last one per axis is clamped to
/// (dim - tile_size). Throws Error{RegionTooSmall}.
TileGrid tile_region(int width, int height, int tile_size = 512, double overlap = 0.5);

/// Per-axis origins used by tile_region.
std::vector<int> axis_origins(int dim, int tile_size, int stride);

/// Disks of class mitosis / hard-negative around annotation centroids that
/// fall in the tile; mitosis wins on overlap. Coordinates are continuous with
/// pixel (i, j) centered at (i + 0.5, j + 0.5).
MultiClassMask rasterize_targets(const std::vector<Annotation>& anns, TileOrigin origin, int width,
                                 int height, double radius = 12.0);

}  // namespace mito::datapipe
