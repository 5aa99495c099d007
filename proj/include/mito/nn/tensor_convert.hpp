#pragma once

// Conversions between rasters and NCHW tensors.

#include <torch/torch.h>

#include <vector>

#include "mito/raster.hpp"

namespace mito::net {

/// RGB bytes -> float N x 3 x H x W in [0, 1]. All images must share a size.
torch::Tensor images_to_tensor(const std::vector<const Image*>& images);
torch::Tensor image_to_tensor(const Image& image);

/// Label masks -> int64 N x H x W (255 kept as the ignore index).
torch::Tensor masks_to_tensor(const std::vector<const MultiClassMask*>& masks);

/// C x H x W float tensor -> ScalarImage with C channels (interleaved).
ScalarImage tensor_to_scalar(const torch::Tensor& chw);

}  // namespace mito::net
