#include "mito/nn/tensor_convert.hpp"

#include <cstring>

#include "mito/error.hpp"

namespace mito::net {

torch::Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw Error(ErrorKind::InvalidArgument, "empty image batch");
  const int w = images.front()->width(), h = images.front()->height();
  auto bytes = torch::empty({static_cast<int64_t>(images.size()), h, w, 3}, torch::kUInt8);
  auto* dst = bytes.data_ptr<uint8_t>();
  const size_t per = static_cast<size_t>(w) * h * 3;
  for (size_t i = 0; i < images.size(); ++i) {
    const auto& img = *images[i];
    if (img.width() != w || img.height() != h || img.rgb.channels != 3) {
      throw Error(ErrorKind::ShapeMismatch, "images in a batch must share a size");
    }
    std::memcpy(dst + i * per, img.rgb.data.data(), per);
  }
  return bytes.permute({0, 3, 1, 2}).to(torch::kFloat32).div_(255.0).contiguous();
}

torch::Tensor image_to_tensor(const Image& image) { return images_to_tensor({&image}); }

torch::Tensor masks_to_tensor(const std::vector<const MultiClassMask*>& masks) {
  if (masks.empty()) throw Error(ErrorKind::InvalidArgument, "empty mask batch");
  const int w = masks.front()->width, h = masks.front()->height;
  auto bytes = torch::empty({static_cast<int64_t>(masks.size()), h, w}, torch::kUInt8);
  auto* dst = bytes.data_ptr<uint8_t>();
  const size_t per = static_cast<size_t>(w) * h;
  for (size_t i = 0; i < masks.size(); ++i) {
    const auto& m = *masks[i];
    if (m.width != w || m.height != h || m.channels != 1) {
      throw Error(ErrorKind::ShapeMismatch, "masks in a batch must share a size");
    }
    std::memcpy(dst + i * per, m.data.data(), per);
  }
  return bytes.to(torch::kInt64);
}

ScalarImage tensor_to_scalar(const torch::Tensor& chw) {
  if (chw.dim() != 3) throw Error(ErrorKind::ShapeMismatch, "expected C x H x W");
  const auto hwc = chw.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
  ScalarImage out(static_cast<int>(chw.size(2)), static_cast<int>(chw.size(1)), static_cast<int>(chw.size(0)));
  std::memcpy(out.data.data(), hwc.data_ptr<float>(), out.data.size() * sizeof(float));
  return out;
}

}  // namespace mito::net
