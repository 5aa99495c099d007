#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mito/imaging.hpp"
#include "mito/random.hpp"

namespace fixtures {

inline mito::imaging::Vec3 unit(mito::imaging::Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

inline double angle_deg(const mito::imaging::Vec3& a, const mito::imaging::Vec3& b) {
  const double c = std::clamp(a[0] * b[0] + a[1] * b[1] + a[2] * b[2], -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

struct TwoStainImage {
  mito::imaging::OdImage od;
  mito::imaging::StainMatrix truth;
};

/// OD pixels = m * (t * h + (1 - t) * e) + N(0, noise), clamped at 0, with
/// h and e jittered around typical H&E directions.
inline TwoStainImage two_stain_image(uint64_t seed, int side = 64, double noise = 0.02) {
  mito::Rng rng(seed);
  auto jitter = [&](mito::imaging::Vec3 v) {
    for (auto& c : v) c = std::max(0.01, c + rng.uniform(-0.1, 0.1));
    return unit(v);
  };
  TwoStainImage out;
  out.truth.h = jitter({0.65, 0.70, 0.29});
  out.truth.e = jitter({0.07, 0.99, 0.11});
  out.od = mito::imaging::OdImage(side, side, 3);
  for (size_t p = 0; p < out.od.pixel_count(); ++p) {
    const double m = rng.uniform(0.3, 1.5), t = rng.unit();
    for (int c = 0; c < 3; ++c) {
      const double v = m * (t * out.truth.h[c] + (1.0 - t) * out.truth.e[c]) + rng.normal(0.0, noise);
      out.od.data[3 * p + c] = static_cast<float>(std::max(0.0, v));
    }
  }
  return out;
}

}  // namespace fixtures
