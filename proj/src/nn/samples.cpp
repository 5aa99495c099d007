#include "mito/nn/samples.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "mito/datapipe/tiling.hpp"
#include "mito/error.hpp"
#include "mito/random.hpp"

namespace mito::training {

using datapipe::AnnotationKind;

Image crop_region(const Image& region, int x0, int y0, int size) {
  Image out(size, size, region.spacing_um, region.domain_id);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int ch = 0; ch < 3; ++ch) out.rgb.at(x, y, ch) = region.rgb.at(x0 + x, y0 + y, ch);
    }
  }
  return out;
}

MultiClassMask crop_mask(const MultiClassMask& mask, int x0, int y0, int size) {
  MultiClassMask out(size, size, 1, Label::kBackground);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) out.at(x, y) = mask.at(x0 + x, y0 + y);
  }
  return out;
}

MultiClassMask resize_nearest(const MultiClassMask& mask, int width, int height) {
  if (width == mask.width && height == mask.height) return mask;
  MultiClassMask out(width, height, 1, Label::kBackground);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * mask.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width - 1, static_cast<int>((x + 0.5) * mask.width / width));
      out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

namespace {

struct TileChoice {
  datapipe::TileOrigin origin;
  std::optional<int> crop_x, crop_y;
};

// Picks a tile and, for positive draws, a crop placing the chosen annotation
// within a quarter output size of the crop center.
TileChoice choose_tile(const datapipe::DatasetCase& c, Rng& rng, const RunConfig& cfg, bool positive) {
  const auto grid = datapipe::tile_region(c.image.width(), c.image.height(), cfg.train.tile_size, cfg.train.tile_overlap);
  const int crop = cfg.augment.crop_size, out = cfg.augment.out_size;
  TileChoice t;
  if (!positive || c.annotations.empty()) {
    t.origin = grid.origins[rng.uniform_int(0, static_cast<int>(grid.origins.size()) - 1)];
    return t;
  }
  const auto& a = c.annotations[rng.uniform_int(0, static_cast<int>(c.annotations.size()) - 1)];
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : grid.origins) {
    const double d = std::hypot(o.x + grid.tile_size / 2.0 - a.x, o.y + grid.tile_size / 2.0 - a.y);
    if (d < best) {
      best = d;
      t.origin = o;
    }
  }
  const double jx = rng.uniform(-out / 4.0, out / 4.0), jy = rng.uniform(-out / 4.0, out / 4.0);
  const double centre = (crop - out) / 2 + out / 2.0;
  const int hi = grid.tile_size - crop;
  t.crop_x = std::clamp(static_cast<int>(std::lround(a.x - t.origin.x - centre + jx)), 0, hi);
  t.crop_y = std::clamp(static_cast<int>(std::lround(a.y - t.origin.y - centre + jy)), 0, hi);
  return t;
}

}  // namespace

Sample detection_sample(const datapipe::DatasetCase& c, uint64_t seed, const RunConfig& cfg) {
  if (cfg.train.tile_size < cfg.augment.crop_size) {
    throw Error(ErrorKind::InvalidConfig, "tile_size must be >= augment.crop_size");
  }
  Rng rng(seed);
  const bool positive = rng.bernoulli(cfg.train.positive_fraction);
  const auto tile = choose_tile(c, rng, cfg, positive);
  const int size = cfg.train.tile_size;

  const auto patch = crop_region(c.image, tile.origin.x, tile.origin.y, size);
  const auto raster = datapipe::rasterize_targets(c.annotations, tile.origin, size, size, cfg.train.raster_radius);
  auto aug = cfg.augment;
  aug.crop_x = tile.crop_x;
  aug.crop_y = tile.crop_y;
  auto pair = datapipe::make_pair(patch, raster, mix_seed(seed, 0xA6), aug);

  Sample s;
  s.domain_id = c.domain_id;
  for (const auto& a : c.annotations) {
    if (a.kind != AnnotationKind::Mitosis) continue;
    const auto [u, v] = pair.geometry.to_output(a.x - tile.origin.x, a.y - tile.origin.y);
    if (u >= 0 && v >= 0 && u < aug.out_size && v < aug.out_size) s.points.push_back({0, u, v, Label::kMitosis});
  }
  s.weak = std::move(pair.weak);
  s.strong = std::move(pair.strong);
  s.annotated = std::move(pair.mask);
  return s;
}

Sample subtype_sample(const datapipe::DatasetCase& c, const datapipe::Annotation& mitosis, uint64_t seed,
                      const RunConfig& cfg) {
  if (mitosis.kind != AnnotationKind::Mitosis || !mitosis.subtype) {
    throw Error(ErrorKind::InvalidArgument, "subtype samples need a mitosis with a subtype");
  }
  const int patch = cfg.train.cls_patch;
  const int side = static_cast<int>(std::ceil(patch * std::numbers::sqrt2)) + 2;
  const auto region = datapipe::extract_patch(c.image, mitosis.x, mitosis.y, side);
  const datapipe::TileOrigin origin{static_cast<int>(std::lround(mitosis.x - side / 2.0)),
                                    static_cast<int>(std::lround(mitosis.y - side / 2.0))};
  const auto raster = datapipe::rasterize_targets(c.annotations, origin, side, side, cfg.train.raster_radius);

  datapipe::AugmentConfig aug = cfg.augment;
  aug.crop_size = side;
  aug.out_size = patch;
  aug.crop_x = 0;
  aug.crop_y = 0;
  auto pair = datapipe::make_pair(region, raster, mix_seed(seed, 0xC1), aug);

  const int input = cfg.augment.out_size;
  const double scale = static_cast<double>(input) / patch;
  Sample s;
  s.domain_id = c.domain_id;
  s.subtype = *mitosis.subtype == datapipe::Subtype::Atypical ? 1 : 0;
  for (const auto& a : c.annotations) {
    if (a.kind != AnnotationKind::Mitosis) continue;
    const auto [u, v] = pair.geometry.to_output(a.x - origin.x, a.y - origin.y);
    if (u >= 0 && v >= 0 && u < patch && v < patch) s.points.push_back({0, u * scale, v * scale, Label::kMitosis});
  }
  s.weak = datapipe::resize_bilinear(pair.weak, input, input);
  s.strong = datapipe::resize_bilinear(pair.strong, input, input);
  s.annotated = resize_nearest(pair.mask, input, input);
  s.weak.spacing_um = s.strong.spacing_um = c.image.spacing_um * patch / input;
  return s;
}

Sample nuclei_sample(const datapipe::DatasetCase& c, uint64_t seed, const RunConfig& cfg) {
  if (!c.truth) throw Error(ErrorKind::InvalidConfig, "warm-up case " + c.case_id + " has no nuclei mask");
  const int crop = cfg.augment.crop_size;
  if (c.image.width() < crop || c.image.height() < crop) {
    throw Error(ErrorKind::PatchTooSmall, "warm-up region smaller than the crop");
  }
  MultiClassMask nuclei(c.truth->width, c.truth->height, 1, Label::kBackground);
  for (size_t i = 0; i < nuclei.data.size(); ++i) {
    const auto v = c.truth->data[i];
    nuclei.data[i] = v == Label::kBackground || v == Label::kIgnore ? v : Label::kNucleus;
  }
  auto pair = datapipe::make_pair(c.image, nuclei, seed, cfg.augment);
  Sample s;
  s.domain_id = c.domain_id;
  s.weak = std::move(pair.weak);
  s.strong = std::move(pair.strong);
  s.annotated = std::move(pair.mask);
  return s;
}

}  // namespace mito::training
