#pragma once

// Builds augmented training samples from dataset regions: detection crops
// (biased toward annotated objects) and mitosis-centered subtype patches.

#include <cstdint>
#include <vector>

#include "mito/config.hpp"
#include "mito/datapipe/dataset.hpp"
#include "mito/nn/losses.hpp"

namespace mito::training {

struct Sample {
  Image weak;
  Image strong;
  /// Warped annotation raster: 0, mitosis or hard-negative.
  MultiClassMask annotated;
  /// Mitosis centroids in output coordinates (batch index left at 0).
  std::vector<losses::PointTarget> points;
  int domain_id = 0;
  /// 1 atypical, 0 normal, -1 not a subtype sample.
  int subtype = -1;
};

/// Crop of augment.out_size from one tile of the region. With probability
/// positive_fraction the crop is placed so an annotation lands near the center.
Sample detection_sample(const datapipe::DatasetCase& c, uint64_t seed, const RunConfig& cfg);

/// cls_patch window centered on the mitosis, randomly rotated, resized to
/// augment.out_size. Throws Error{InvalidArgument} for non-mitosis annotations.
Sample subtype_sample(const datapipe::DatasetCase& c, const datapipe::Annotation& mitosis, uint64_t seed,
                      const RunConfig& cfg);

/// Crop of the region's ground-truth nuclei (any non-background class -> 1)
/// for segmentation warm-up. Throws Error{InvalidConfig} without truth.
Sample nuclei_sample(const datapipe::DatasetCase& c, uint64_t seed, const RunConfig& cfg);

/// Nearest-neighbour resize of a label mask.
MultiClassMask resize_nearest(const MultiClassMask& mask, int width, int height);

/// Copy of a square window of the region.
Image crop_region(const Image& region, int x0, int y0, int size);
MultiClassMask crop_mask(const MultiClassMask& mask, int x0, int y0, int size);

}  // namespace mito::training
