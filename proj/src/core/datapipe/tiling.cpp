#include "mito/datapipe/tiling.hpp"

#include <algorithm>
#include <cmath>

#include "mito/error.hpp"

namespace mito::datapipe {

std::vector<int> axis_origins(int dim, int tile_size, int stride) {
  std::vector<int> out;
  for (int o = 0;; o += stride) {
    const int clamped = std::min(o, dim - tile_size);
    if (out.empty() || out.back() != clamped) out.push_back(clamped);
    if (clamped == dim - tile_size) break;
  }
  return out;
}

TileGrid tile_region(int width, int height, int tile_size, double overlap) {
  if (tile_size <= 0 || !(overlap >= 0.0 && overlap < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "tile_size must be > 0 and overlap in [0, 1)");
  }
  if (width < tile_size || height < tile_size) {
    throw Error(ErrorKind::RegionTooSmall, std::to_string(width) + "x" + std::to_string(height) +
                                               " region is smaller than tile " + std::to_string(tile_size));
  }
  TileGrid grid;
  grid.tile_size = tile_size;
  grid.stride = std::max(1, static_cast<int>(std::lround(tile_size * (1.0 - overlap))));
  const auto xs = axis_origins(width, tile_size, grid.stride);
  const auto ys = axis_origins(height, tile_size, grid.stride);
  for (int y : ys)
    for (int x : xs) grid.origins.push_back({x, y});
  return grid;
}

MultiClassMask rasterize_targets(const std::vector<Annotation>& anns, TileOrigin origin, int width,
                                 int height, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be > 0");
  MultiClassMask mask(width, height, 1, Label::kBackground);

  auto paint = [&](const Annotation& a, uint8_t label) {
    const double cx = a.x - origin.x;
    const double cy = a.y - origin.y;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= radius * radius) mask.at(x, y) = label;
      }
    }
  };
  for (const auto& a : anns)
    if (a.kind == AnnotationKind::HardNegative) paint(a, Label::kHardNegative);
  for (const auto& a : anns)
    if (a.kind == AnnotationKind::Mitosis) paint(a, Label::kMitosis);
  return mask;
}

}  // namespace mito::datapipe
