#pragma once

// Slow, obviously-correct reference implementations used by the unit and
// acceptance tests. None of them share code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "mito/raster.hpp"

namespace oracle {

/// Otsu by scanning every threshold and recounting the pixels each time.
/// Returns the last background bin; ties keep the lowest bin.
inline int otsu_bin(const std::vector<float>& values) {
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, hi = *mx;
  std::vector<int> bins;
  for (float v : values) {
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * 256.0));
    bins.push_back(std::min(255, std::max(0, b)));
  }
  int best = -1;
  long double best_var = -1.0L;
  for (int t = 0; t < 255; ++t) {
    long double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int b : bins) {
      if (b <= t) {
        n0 += 1;
        s0 += b;
      } else {
        n1 += 1;
        s1 += b;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const long double n = n0 + n1;
    const long double var = (n0 / n) * (n1 / n) * std::pow(s0 / n0 - s1 / n1, 2.0L);
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  return best;
}

/// Per-pixel erosion/dilation over disk neighbours that lie inside the image.
inline mito::BinaryMask naive_morph(const mito::BinaryMask& m, int r, bool erode) {
  mito::BinaryMask out(m.width, m.height, 1, 0);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      bool v = erode;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= m.width || yy >= m.height) continue;
          if (erode && !m.at(xx, yy)) v = false;
          if (!erode && m.at(xx, yy)) v = true;
        }
      }
      out.at(x, y) = v ? 1 : 0;
    }
  }
  return out;
}

inline mito::BinaryMask naive_open(const mito::BinaryMask& m, int r) {
  return naive_morph(naive_morph(m, r, true), r, false);
}

/// Maximum number of one-to-one pairs with distance <= radius, by
/// exhaustive search over assignments (memoised on the used-gt set).
inline int max_matching(const std::vector<std::array<double, 2>>& preds, const std::vector<std::array<double, 2>>& gts,
                        double radius) {
  const int np = static_cast<int>(preds.size()), ng = static_cast<int>(gts.size());
  std::vector<std::vector<int>> memo(np + 1, std::vector<int>(1u << ng, -1));
  std::function<int(int, unsigned)> go = [&](int i, unsigned used) -> int {
    if (i == np) return 0;
    int& slot = memo[i][used];
    if (slot >= 0) return slot;
    int best = go(i + 1, used);
    for (int g = 0; g < ng; ++g) {
      if (used & (1u << g)) continue;
      const double d = std::hypot(preds[i][0] - gts[g][0], preds[i][1] - gts[g][1]);
      if (d <= radius) best = std::max(best, 1 + go(i + 1, used | (1u << g)));
    }
    return slot = best;
  };
  return go(0, 0);
}

/// Adaptive Dice by explicit loops. probs is N*C*H*W, target N*H*W.
inline double adaptive_dice(const std::vector<double>& probs, const std::vector<int64_t>& target, int n, int c, int h,
                            int w, double eps) {
  double num = 0.0, den = 0.0;
  for (int k = 0; k < c; ++k) {
    double count = 0.0, inter = 0.0, sum = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < h * w; ++p) {
        const int64_t t = target[static_cast<size_t>(i) * h * w + p];
        if (t == 255) continue;
        const double g = t == k ? 1.0 : 0.0;
        const double pr = probs[(static_cast<size_t>(i) * c + k) * h * w + p];
        count += g;
        inter += pr * g;
        sum += pr + g;
      }
    }
    if (count == 0.0) continue;
    const double wk = 1.0 / ((count + eps) * (count + eps));
    num += wk * inter;
    den += wk * sum;
  }
  if (den == 0.0) return 0.0;
  return 1.0 - 2.0 * num / (den + eps);
}

/// NT-Xent over 2N rows (a then b), rows i and i + N positive.
inline double nt_xent(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                      double tau) {
  std::vector<std::vector<double>> z = a;
  z.insert(z.end(), b.begin(), b.end());
  const int m = static_cast<int>(z.size()), n = m / 2;
  auto dot = [&](int i, int j) {
    double s = 0.0;
    for (size_t k = 0; k < z[i].size(); ++k) s += z[i][k] * z[j][k];
    return s / tau;
  };
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const int pos = i < n ? i + n : i - n;
    double denom = 0.0;
    for (int j = 0; j < m; ++j) {
      if (j != i) denom += std::exp(dot(i, j));
    }
    total += -(dot(i, pos) - std::log(denom));
  }
  return total / m;
}

}  // namespace oracle
