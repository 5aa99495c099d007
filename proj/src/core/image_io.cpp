#include "mito/image_io.hpp"

#include <opencv2/imgcodecs.hpp>

#include "mito/error.hpp"

namespace mito::io {

Image read_rgb(const std::filesystem::path& path, double spacing_um, int domain_id) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorKind::Io, "cannot read image " + path.string());
  Image img(bgr.cols, bgr.rows, spacing_um, domain_id);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.rgb.at(x, y, 0) = row[x][2];
      img.rgb.at(x, y, 1) = row[x][1];
      img.rgb.at(x, y, 2) = row[x][0];
    }
  }
  return img;
}

void write_rgb(const std::filesystem::path& path, const Image& image) {
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < bgr.rows; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      row[x] = {image.rgb.at(x, y, 2), image.rgb.at(x, y, 1), image.rgb.at(x, y, 0)};
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

Raster<uint8_t> read_gray(const std::filesystem::path& path) {
  const cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty() || m.type() != CV_8UC1) throw Error(ErrorKind::Io, "cannot read 8-bit mask " + path.string());
  Raster<uint8_t> out(m.cols, m.rows, 1);
  for (int y = 0; y < m.rows; ++y) std::copy_n(m.ptr<uint8_t>(y), m.cols, &out.at(0, y));
  return out;
}

void write_gray(const std::filesystem::path& path, const Raster<uint8_t>& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < m.rows; ++y) std::copy_n(&mask.at(0, y), m.cols, m.ptr<uint8_t>(y));
  if (!cv::imwrite(path.string(), m)) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

void write_binary_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  Raster<uint8_t> scaled = mask;
  for (auto& v : scaled.data) v = v ? 255 : 0;
  write_gray(path, scaled);
}

}  // namespace mito::io
