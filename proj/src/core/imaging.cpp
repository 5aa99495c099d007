#include "mito/imaging.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>

#include "mito/error.hpp"

namespace mito::imaging {

namespace {

constexpr int kOtsuBins = 256;

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

double angle_deg(const Vec3& a, const Vec3& b) {
  const double c = std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

// Linear-interpolated percentile of a sorted sample.
double percentile_sorted(const std::vector<double>& sorted, double pct) {
  const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<size_t>(std::floor(pos));
  const size_t j = std::min(i + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(i);
  return sorted[i] + (sorted[j] - sorted[i]) * frac;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = std::abs(i) % period;
  return i >= n ? period - i : i;
}

}  // namespace

std::array<double, 6> StainMatrix::column_major() const {
  return {h[0], h[1], h[2], e[0], e[1], e[2]};
}

StainMatrix StainMatrix::from_column_major(const std::array<double, 6>& v) {
  return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
}

void PseudoMaskParams::validate() const {
  if (!(blur_sigma >= 0.0)) throw Error(ErrorKind::InvalidConfig, "blur_sigma must be >= 0");
  if (open_radius < 0) throw Error(ErrorKind::InvalidConfig, "open_radius must be >= 0");
  if (!(alpha_percentile > 0.0 && alpha_percentile < 50.0))
    throw Error(ErrorKind::InvalidConfig, "alpha_percentile must lie in (0, 50)");
  if (min_object_area < 0) throw Error(ErrorKind::InvalidConfig, "min_object_area must be >= 0");
  if (otsu_tile <= 0) throw Error(ErrorKind::InvalidConfig, "otsu_tile must be > 0");
}

OdImage rgb_to_od(const Image& image) {
  // Lookup table over the 256 possible intensities.
  std::array<float, 256> lut{};
  for (int v = 0; v < 256; ++v) {
    lut[v] = static_cast<float>(-std::log10(std::max(v, 1) / 255.0));
  }
  OdImage od(image.width(), image.height(), 3);
  for (size_t i = 0; i < image.rgb.data.size(); ++i) od.data[i] = lut[image.rgb.data[i]];
  return od;
}

void od_to_rgb(const OdImage& od, Image& out) {
  out.rgb = Raster<uint8_t>(od.width, od.height, 3);
  for (size_t i = 0; i < od.data.size(); ++i) {
    const double v = 255.0 * std::pow(10.0, -static_cast<double>(od.data[i]));
    out.rgb.data[i] = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
}

StainMatrix estimate_stain_matrix(const OdImage& od, const PseudoMaskParams& params) {
  if (od.channels != 3) throw Error(ErrorKind::InvalidArgument, "OD image must have 3 channels");

  std::vector<Vec3> tissue;
  tissue.reserve(od.pixel_count());
  for (size_t p = 0; p < od.pixel_count(); ++p) {
    const Vec3 v{od.data[3 * p], od.data[3 * p + 1], od.data[3 * p + 2]};
    if (norm(v) > params.od_beta) tissue.push_back(v);
  }
  if (tissue.size() < 100) {
    throw Error(ErrorKind::InsufficientTissue,
                std::to_string(tissue.size()) + " pixels above od_beta, need 100");
  }

  // Plane through the origin spanned by the top-2 right singular vectors.
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& v : tissue) {
    const Eigen::Vector3d x(v[0], v[1], v[2]);
    scatter.noalias() += x * x.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(scatter);
  const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
  const double s1 = std::sqrt(std::max(evals[2], 0.0));
  const double s2 = std::sqrt(std::max(evals[1], 0.0));
  if (!(s2 >= 1e-6 * s1) || s1 == 0.0) {
    throw Error(ErrorKind::StainDegenerate, "OD cloud is rank-1");
  }
  Eigen::Vector3d e1 = solver.eigenvectors().col(2);
  Eigen::Vector3d e2 = solver.eigenvectors().col(1);
  if (e1.sum() < 0) e1 = -e1;
  if (e2.sum() < 0) e2 = -e2;

  std::vector<double> angles;
  angles.reserve(tissue.size());
  for (const auto& v : tissue) {
    const Eigen::Vector3d x(v[0], v[1], v[2]);
    angles.push_back(std::atan2(x.dot(e2), x.dot(e1)));
  }
  std::sort(angles.begin(), angles.end());
  const double phi_lo = percentile_sorted(angles, params.alpha_percentile);
  const double phi_hi = percentile_sorted(angles, 100.0 - params.alpha_percentile);

  auto extreme = [&](double phi) {
    const Eigen::Vector3d d = e1 * std::cos(phi) + e2 * std::sin(phi);
    Vec3 v{std::max(d[0], 0.0), std::max(d[1], 0.0), std::max(d[2], 0.0)};
    const double n = norm(v);
    if (n == 0.0) throw Error(ErrorKind::StainDegenerate, "stain extreme has no positive component");
    for (auto& c : v) c /= n;
    return v;
  };
  const Vec3 a = extreme(phi_lo);
  const Vec3 b = extreme(phi_hi);
  if (angle_deg(a, b) <= 5.0) throw Error(ErrorKind::StainDegenerate, "stain vectors within 5 degrees");

  return a[2] >= b[2] ? StainMatrix{a, b} : StainMatrix{b, a};
}

std::array<double, 2> stain_concentrations(const Vec3& od, const StainMatrix& stains) {
  const Vec3& h = stains.h;
  const Vec3& e = stains.e;
  const double hh = dot(h, h), ee = dot(e, e), he = dot(h, e);
  const double hy = dot(h, od), ey = dot(e, od);

  auto residual = [&](double ch, double ce) {
    double r = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = h[k] * ch + e[k] * ce - od[k];
      r += d * d;
    }
    return r;
  };

  const double det = hh * ee - he * he;
  if (det > 0.0) {
    const double ch = (ee * hy - he * ey) / det;
    const double ce = (hh * ey - he * hy) / det;
    if (ch >= 0.0 && ce >= 0.0) return {ch, ce};
  }
  // Active set: one of the two concentrations pinned at zero.
  std::array<double, 2> best{0.0, 0.0};
  double best_r = residual(0.0, 0.0);
  const double ch_only = std::max(0.0, hy / hh);
  if (const double r = residual(ch_only, 0.0); r < best_r) {
    best = {ch_only, 0.0};
    best_r = r;
  }
  const double ce_only = std::max(0.0, ey / ee);
  if (const double r = residual(0.0, ce_only); r < best_r) best = {0.0, ce_only};
  return best;
}

ScalarImage h_channel(const OdImage& od, const StainMatrix& stains) {
  ScalarImage out(od.width, od.height, 1);
  for (size_t p = 0; p < od.pixel_count(); ++p) {
    const Vec3 v{od.data[3 * p], od.data[3 * p + 1], od.data[3 * p + 2]};
    out.data[p] = static_cast<float>(stain_concentrations(v, stains)[0]);
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

ScalarImage gaussian_blur(const ScalarImage& img, double sigma) {
  if (sigma < 0.0) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
  if (sigma == 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = img.width, h = img.height, ch = img.channels;

  ScalarImage tmp(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(reflect_index(x + i, w), y, c);
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  ScalarImage out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, reflect_index(y + i, h), c);
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

int OtsuResult::bin_of(double v) const {
  if (hi <= lo) return 0;
  const double t = std::floor((v - lo) / (hi - lo) * kOtsuBins);
  return static_cast<int>(std::clamp(t, 0.0, static_cast<double>(kOtsuBins - 1)));
}

OtsuResult otsu_threshold(std::span<const float> values) {
  if (values.empty()) throw Error(ErrorKind::DegenerateHistogram, "empty image");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  OtsuResult res;
  res.lo = *mn;
  res.hi = *mx;
  if (!(res.hi > res.lo)) throw Error(ErrorKind::DegenerateHistogram, "all pixels fall in one bin");

  std::array<int64_t, kOtsuBins> hist{};
  for (float v : values) ++hist[res.bin_of(v)];

  int64_t total_n = 0, total_s = 0;
  for (int b = 0; b < kOtsuBins; ++b) {
    total_n += hist[b];
    total_s += hist[b] * b;
  }

  // Between-class variance is proportional to a^2 / (n0 * n1) with
  // a = n1 * S0 - n0 * S1; compare candidates exactly where it fits.
  using u128 = unsigned __int128;
  int best_bin = -1;
  u128 best_a2 = 0, best_den = 1;
  bool best_exact = false;
  long double best_ld = -1.0L;
  int64_t n0 = 0, s0 = 0;
  for (int k = 0; k < kOtsuBins - 1; ++k) {
    n0 += hist[k];
    s0 += hist[k] * k;
    const int64_t n1 = total_n - n0;
    const int64_t s1 = total_s - s0;
    if (n0 == 0 || n1 == 0) continue;
    const __int128 a = static_cast<__int128>(n1) * s0 - static_cast<__int128>(n0) * s1;
    const u128 a_abs = static_cast<u128>(a < 0 ? -a : a);
    const u128 den = static_cast<u128>(n0) * static_cast<u128>(n1);
    const long double score = static_cast<long double>(a_abs) * static_cast<long double>(a_abs) /
                              static_cast<long double>(den);
    u128 a2 = 0;
    const bool exact = !__builtin_mul_overflow(a_abs, a_abs, &a2);

    bool better = best_bin < 0;
    if (!better) {
      u128 lhs = 0, rhs = 0;
      if (exact && best_exact && !__builtin_mul_overflow(a2, best_den, &lhs) &&
          !__builtin_mul_overflow(best_a2, den, &rhs)) {
        better = lhs > rhs;
      } else {
        better = score > best_ld;
      }
    }
    if (better) {
      best_bin = k;
      best_a2 = a2;
      best_den = den;
      best_exact = exact;
      best_ld = score;
    }
  }
  if (best_bin < 0) throw Error(ErrorKind::DegenerateHistogram, "all pixels fall in one bin");
  res.bin = best_bin;
  res.threshold = res.lo + (best_bin + 0.5) * (res.hi - res.lo) / kOtsuBins;
  return res;
}

OtsuResult otsu_threshold(const ScalarImage& img) { return otsu_threshold(std::span<const float>(img.data)); }

std::vector<std::array<int, 2>> disk_offsets(int radius) {
  std::vector<std::array<int, 2>> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) out.push_back({dx, dy});
  return out;
}

namespace {

// Disk rows as half-widths per vertical offset; out-of-image neighbours are
// skipped for both erosion and dilation.
BinaryMask morph(const BinaryMask& mask, int radius, bool erosion) {
  if (radius < 0) throw Error(ErrorKind::InvalidArgument, "radius must be >= 0");
  const int w = mask.width, h = mask.height;
  if (radius == 0 || mask.empty()) return mask;

  std::vector<int> prefix(static_cast<size_t>(h) * (w + 1), 0);
  for (int y = 0; y < h; ++y) {
    int* row = prefix.data() + static_cast<size_t>(y) * (w + 1);
    for (int x = 0; x < w; ++x) row[x + 1] = row[x] + (mask.at(x, y) != 0);
  }
  std::vector<int> half(2 * radius + 1);
  for (int dy = -radius; dy <= radius; ++dy)
    half[dy + radius] = static_cast<int>(std::floor(std::sqrt(double(radius * radius - dy * dy))));

  BinaryMask out(w, h, 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool value = erosion;
      for (int dy = -radius; dy <= radius && value == erosion; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int x0 = std::max(0, x - half[dy + radius]);
        const int x1 = std::min(w - 1, x + half[dy + radius]);
        const int* row = prefix.data() + static_cast<size_t>(yy) * (w + 1);
        const int ones = row[x1 + 1] - row[x0];
        if (erosion && ones != x1 - x0 + 1) value = false;
        if (!erosion && ones > 0) value = true;
      }
      out.at(x, y) = value ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, int radius) { return morph(mask, radius, true); }
BinaryMask dilate(const BinaryMask& mask, int radius) { return morph(mask, radius, false); }
BinaryMask morphological_open(const BinaryMask& mask, int radius) { return dilate(erode(mask, radius), radius); }

Components connected_components(const BinaryMask& mask) {
  Components cc;
  cc.labels = Raster<int>(mask.width, mask.height, 1, 0);
  std::deque<std::array<int, 2>> queue;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y) || cc.labels.at(x, y)) continue;
      const int label = ++cc.count;
      int area = 0;
      cc.labels.at(x, y) = label;
      queue.push_back({x, y});
      while (!queue.empty()) {
        const auto [cx, cy] = queue.front();
        queue.pop_front();
        ++area;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (!mask.contains(nx, ny) || !mask.at(nx, ny) || cc.labels.at(nx, ny)) continue;
            cc.labels.at(nx, ny) = label;
            queue.push_back({nx, ny});
          }
        }
      }
      cc.areas.push_back(area);
    }
  }
  return cc;
}

BinaryMask remove_small_objects(const BinaryMask& mask, int min_area) {
  if (min_area <= 1) return mask;
  const auto cc = connected_components(mask);
  BinaryMask out(mask.width, mask.height, 1, 0);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const int l = cc.labels.data[i];
    out.data[i] = (l > 0 && cc.areas[l - 1] >= min_area) ? 1 : 0;
  }
  return out;
}

PseudoMaskResult classical_pseudomask(const Image& image, const PseudoMaskParams& params) {
  params.validate();
  PseudoMaskResult res;
  res.mask = BinaryMask(image.width(), image.height(), 1, 0);

  const OdImage od = rgb_to_od(image);
  StainMatrix stains;
  try {
    stains = estimate_stain_matrix(od, params);
  } catch (const Error& e) {
    res.warning = true;
    res.message = e.what();
    return res;
  }
  const ScalarImage blurred = gaussian_blur(h_channel(od, stains), params.blur_sigma);

  BinaryMask fg(image.width(), image.height(), 1, 0);
  const int t = params.otsu_tile;
  std::vector<float> values;
  for (int ty = 0; ty < blurred.height; ty += t) {
    for (int tx = 0; tx < blurred.width; tx += t) {
      const int x1 = std::min(tx + t, blurred.width), y1 = std::min(ty + t, blurred.height);
      values.clear();
      for (int y = ty; y < y1; ++y)
        for (int x = tx; x < x1; ++x) values.push_back(blurred.at(x, y));
      std::optional<OtsuResult> otsu;
      try {
        otsu = otsu_threshold(std::span<const float>(values));
      } catch (const Error& e) {
        res.warning = true;
        res.message = e.what();
        continue;  // tile stays background
      }
      for (int y = ty; y < y1; ++y)
        for (int x = tx; x < x1; ++x) fg.at(x, y) = otsu->is_foreground(blurred.at(x, y)) ? 1 : 0;
    }
  }
  res.mask = remove_small_objects(morphological_open(fg, params.open_radius), params.min_object_area);
  return res;
}

}  // namespace mito::imaging
