#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

namespace mito {

/// Row-major interleaved raster. Pixel (x, y) channel c lives at
/// ((y * width + x) * channels + c).
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c = 1, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  bool empty() const noexcept { return data.empty(); }
  size_t pixel_count() const noexcept { return static_cast<size_t>(width) * height; }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width && y < height; }

  T& at(int x, int y, int c = 0) {
    assert(contains(x, y) && c < channels);
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  const T& at(int x, int y, int c = 0) const {
    assert(contains(x, y) && c < channels);
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  std::span<T> pixel(int x, int y) {
    return {data.data() + (static_cast<size_t>(y) * width + x) * channels, static_cast<size_t>(channels)};
  }
  std::span<const T> pixel(int x, int y) const {
    return {data.data() + (static_cast<size_t>(y) * width + x) * channels, static_cast<size_t>(channels)};
  }

  bool operator==(const Raster&) const = default;
};

using ScalarImage = Raster<float>;
/// Binary mask, values 0 or 1.
using BinaryMask = Raster<uint8_t>;
/// Per-pixel class id, see `Label`.
using MultiClassMask = Raster<uint8_t>;

namespace Label {
inline constexpr uint8_t kBackground = 0;
inline constexpr uint8_t kNucleus = 1;
inline constexpr uint8_t kMitosis = 2;
inline constexpr uint8_t kHardNegative = 3;
inline constexpr uint8_t kIgnore = 255;
inline constexpr int kNumClasses = 4;
}  // namespace Label

/// 8-bit RGB image with physical pixel spacing.
struct Image {
  Raster<uint8_t> rgb;
  double spacing_um = 0.25;
  int domain_id = 0;

  Image() = default;
  Image(int w, int h, double spacing = 0.25, int domain = 0)
      : rgb(w, h, 3), spacing_um(spacing), domain_id(domain) {}

  int width() const noexcept { return rgb.width; }
  int height() const noexcept { return rgb.height; }
  bool operator==(const Image&) const = default;
};

}  // namespace mito
