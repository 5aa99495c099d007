#include "mito/datapipe/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mito/datapipe/synth.hpp"
#include "mito/error.hpp"
#include "mito/imaging.hpp"
#include "mito/random.hpp"

namespace mito::datapipe {

void AugmentConfig::validate() const {
  if (out_size <= 0 || crop_size < out_size) {
    throw Error(ErrorKind::InvalidConfig, "need 0 < out_size <= crop_size");
  }
  if (crop_size < static_cast<int>(std::ceil(out_size * std::numbers::sqrt2))) {
    throw Error(ErrorKind::InvalidConfig, "crop_size must be at least out_size * sqrt(2)");
  }
  if (stain_jitter < 0.0 || max_blur_sigma < 0.0 || sharpen_min < 0.0 || sharpen_max < sharpen_min) {
    throw Error(ErrorKind::InvalidConfig, "invalid photometric ranges");
  }
}

std::array<double, 2> Geometry::to_patch(double u, double v) const {
  const double c = out_size / 2.0;
  const int off = (crop_size - out_size) / 2;
  const double dx = u - c, dy = v - c;
  const double cs = std::cos(angle_rad), sn = std::sin(angle_rad);
  return {crop_x + off + c + cs * dx - sn * dy, crop_y + off + c + sn * dx + cs * dy};
}

std::array<double, 2> Geometry::to_output(double px, double py) const {
  const double c = out_size / 2.0;
  const int off = (crop_size - out_size) / 2;
  const double dx = px - crop_x - off - c, dy = py - crop_y - off - c;
  const double cs = std::cos(angle_rad), sn = std::sin(angle_rad);
  return {c + cs * dx + sn * dy, c - sn * dx + cs * dy};
}

std::array<int, 4> Geometry::source_bounds() const {
  std::array<int, 4> b{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(),
                       std::numeric_limits<int>::min(), std::numeric_limits<int>::min()};
  for (int v = 0; v < out_size; ++v) {
    for (int u = 0; u < out_size; ++u) {
      const auto [px, py] = to_patch(u + 0.5, v + 0.5);
      const double sx = px - 0.5, sy = py - 0.5;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const int x1 = sx > x0 ? x0 + 1 : x0, y1 = sy > y0 ? y0 + 1 : y0;
      b[0] = std::min(b[0], x0);
      b[1] = std::min(b[1], y0);
      b[2] = std::max(b[2], x1);
      b[3] = std::max(b[3], y1);
    }
  }
  return b;
}

Image warp_image(const Image& patch, const Geometry& g) {
  Image out(g.out_size, g.out_size, patch.spacing_um, patch.domain_id);
  const int w = patch.width(), h = patch.height();
  for (int v = 0; v < g.out_size; ++v) {
    for (int u = 0; u < g.out_size; ++u) {
      const auto [px, py] = g.to_patch(u + 0.5, v + 0.5);
      const double sx = px - 0.5, sy = py - 0.5;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const int xa = std::clamp(x0, 0, w - 1), xb = std::clamp(x0 + 1, 0, w - 1);
      const int ya = std::clamp(y0, 0, h - 1), yb = std::clamp(y0 + 1, 0, h - 1);
      for (int c = 0; c < 3; ++c) {
        double acc = (1 - fx) * (1 - fy) * patch.rgb.at(xa, ya, c);
        if (fx > 0) acc += fx * (1 - fy) * patch.rgb.at(xb, ya, c);
        if (fy > 0) acc += (1 - fx) * fy * patch.rgb.at(xa, yb, c);
        if (fx > 0 && fy > 0) acc += fx * fy * patch.rgb.at(xb, yb, c);
        out.rgb.at(u, v, c) = static_cast<uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
    }
  }
  return out;
}

MultiClassMask warp_mask(const MultiClassMask& mask, const Geometry& g) {
  MultiClassMask out(g.out_size, g.out_size, 1, Label::kBackground);
  for (int v = 0; v < g.out_size; ++v) {
    for (int u = 0; u < g.out_size; ++u) {
      const auto [px, py] = g.to_patch(u + 0.5, v + 0.5);
      const int x = std::clamp(static_cast<int>(std::floor(px)), 0, mask.width - 1);
      const int y = std::clamp(static_cast<int>(std::floor(py)), 0, mask.height - 1);
      out.at(u, v) = mask.at(x, y);
    }
  }
  return out;
}

Image apply_photometric(const Image& weak, const PhotometricOps& ops) {
  const int w = weak.width(), h = weak.height();
  ScalarImage px(w, h, 3);
  for (size_t i = 0; i < px.data.size(); ++i) px.data[i] = weak.rgb.data[i];

  if (ops.jitter) {
    const auto od = imaging::rgb_to_od(weak);
    const imaging::StainMatrix ref{reference_h(), reference_e()};
    for (size_t p = 0; p < od.pixel_count(); ++p) {
      const imaging::Vec3 v{od.data[3 * p], od.data[3 * p + 1], od.data[3 * p + 2]};
      const auto conc = imaging::stain_concentrations(v, ref);
      for (int c = 0; c < 3; ++c) {
        const double d = v[c] + ref.h[c] * conc[0] * (ops.h_factor - 1.0) +
                         ref.e[c] * conc[1] * (ops.e_factor - 1.0);
        px.data[3 * p + c] = static_cast<float>(255.0 * std::pow(10.0, -std::max(d, 0.0)));
      }
    }
  }
  if (ops.blur && ops.blur_sigma > 0.0) px = imaging::gaussian_blur(px, ops.blur_sigma);
  if (ops.sharpen && ops.sharpen_amount > 0.0) {
    const auto soft = imaging::gaussian_blur(px, 1.0);
    for (size_t i = 0; i < px.data.size(); ++i) {
      px.data[i] += static_cast<float>(ops.sharpen_amount) * (px.data[i] - soft.data[i]);
    }
  }

  Image out(w, h, weak.spacing_um, weak.domain_id);
  for (size_t i = 0; i < px.data.size(); ++i) {
    out.rgb.data[i] = static_cast<uint8_t>(std::clamp(std::lround(px.data[i]), 0L, 255L));
  }
  return out;
}

AugmentedPair make_pair(const Image& patch, const MultiClassMask& mask, uint64_t seed,
                        const AugmentConfig& cfg) {
  cfg.validate();
  if (patch.width() < cfg.crop_size || patch.height() < cfg.crop_size) {
    throw Error(ErrorKind::PatchTooSmall, "patch smaller than crop " + std::to_string(cfg.crop_size));
  }
  if (mask.width != patch.width() || mask.height != patch.height()) {
    throw Error(ErrorKind::ShapeMismatch, "mask and patch sizes differ");
  }

  Rng rng(seed);
  AugmentedPair pair;
  pair.seed = seed;
  Geometry& g = pair.geometry;
  g.crop_size = cfg.crop_size;
  g.out_size = cfg.out_size;
  const int cx = rng.uniform_int(0, patch.width() - cfg.crop_size);
  const int cy = rng.uniform_int(0, patch.height() - cfg.crop_size);
  const double angle = rng.uniform(0.0, 360.0);
  g.crop_x = cfg.crop_x.value_or(cx);
  g.crop_y = cfg.crop_y.value_or(cy);
  g.angle_rad = cfg.angle_deg.value_or(angle) * std::numbers::pi / 180.0;
  if (g.crop_x < 0 || g.crop_y < 0 || g.crop_x + cfg.crop_size > patch.width() ||
      g.crop_y + cfg.crop_size > patch.height()) {
    throw Error(ErrorKind::InvalidArgument, "pinned crop origin exceeds the patch");
  }

  PhotometricOps& ops = pair.ops;
  if (cfg.photometric) {
    ops.jitter = rng.bernoulli(0.5);
    ops.blur = rng.bernoulli(0.5);
    ops.sharpen = rng.bernoulli(0.5);
    if (!ops.jitter && !ops.blur && !ops.sharpen) {
      switch (rng.uniform_int(0, 2)) {
        case 0: ops.jitter = true; break;
        case 1: ops.blur = true; break;
        default: ops.sharpen = true; break;
      }
    }
    ops.h_factor = 1.0 + rng.uniform(-cfg.stain_jitter, cfg.stain_jitter);
    ops.e_factor = 1.0 + rng.uniform(-cfg.stain_jitter, cfg.stain_jitter);
    ops.blur_sigma = rng.uniform(0.0, cfg.max_blur_sigma);
    ops.sharpen_amount = rng.uniform(cfg.sharpen_min, cfg.sharpen_max);
  }

  pair.weak = warp_image(patch, g);
  pair.mask = warp_mask(mask, g);
  pair.strong = cfg.photometric ? apply_photometric(pair.weak, ops) : pair.weak;
  return pair;
}

Image extract_patch(const Image& region, double cx, double cy, int size) {
  Image out(size, size, region.spacing_um, region.domain_id);
  const int x0 = static_cast<int>(std::lround(cx - size / 2.0));
  const int y0 = static_cast<int>(std::lround(cy - size / 2.0));
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i >= n ? period - i : i;
  };
  for (int y = 0; y < size; ++y) {
    const int sy = reflect(y0 + y, region.height());
    for (int x = 0; x < size; ++x) {
      const int sx = reflect(x0 + x, region.width());
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = region.rgb.at(sx, sy, c);
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, int width, int height) {
  if (width == img.width() && height == img.height()) return img;
  Image out(width, height, img.spacing_um * img.width() / width, img.domain_id);
  const double scale_x = static_cast<double>(img.width()) / width;
  const double scale_y = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp((y + 0.5) * scale_y - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(sy), y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp((x + 0.5) * scale_x - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(sx), x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fx) * (1 - fy) * img.rgb.at(x0, y0, c) + fx * (1 - fy) * img.rgb.at(x1, y0, c) +
                         (1 - fx) * fy * img.rgb.at(x0, y1, c) + fx * fy * img.rgb.at(x1, y1, c);
        out.rgb.at(x, y, c) = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace mito::datapipe
