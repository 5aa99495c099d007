#pragma once

// Sliding-window segmentation of whole regions, candidate extraction from the
// mitosis probability map, and subtype classification of detections.

#include <string>
#include <vector>

#include "mito/config.hpp"
#include "mito/evaluation.hpp"
#include "mito/nn/network.hpp"
#include "mito/raster.hpp"

namespace mito::infer {

/// Averaged softmax probabilities, class-major (C x H x W).
struct ProbMap {
  int width = 0;
  int height = 0;
  int channels = 4;
  std::vector<float> probs;
  std::vector<uint16_t> coverage;  // windows covering each pixel

  float at(int c, int x, int y) const {
    return probs[(static_cast<size_t>(c) * height + y) * width + x];
  }
  uint16_t coverage_at(int x, int y) const { return coverage[static_cast<size_t>(y) * width + x]; }
};

/// Windows of side `window` with the given fractional overlap; each window's
/// softmax is accumulated uniformly and divided by the coverage count.
/// Throws Error{RegionTooSmall}.
ProbMap sliding_predict(net::SegNet& model, const Image& region, int window, double overlap = 0.5,
                        int batch = 8);

/// Mitosis-argmax components (8-connected) with area >= min_area become
/// candidates at their probability-weighted centroid, scored by mean mitosis
/// probability; neighbours closer than merge_radius_um keep the higher score;
/// scores below score_floor are dropped. Sorted by descending score.
std::vector<eval::Detection> extract_candidates(const ProbMap& prob, const InferenceConfig& cfg, double spacing_um,
                                                const std::string& case_id = "");

/// Sigmoid of the classifier logit for patches of side cls_patch centered on
/// each point (reflect-padded), resized to input_size.
std::vector<double> atypical_probabilities(net::SegNet& model, const Image& region,
                                           const std::vector<eval::Point>& points, int cls_patch, int input_size,
                                           int batch = 16);

struct SubtypeCall {
  bool atypical = false;
  double probability = 0.0;
};

inline SubtypeCall classify_probability(double p, double threshold) { return {p >= threshold, p}; }

struct RegionResult {
  std::vector<eval::Detection> detections;
  std::vector<SubtypeCall> subtypes;  // empty unless classification ran
};

/// Full per-region pipeline: sliding window, candidates, optional subtypes.
RegionResult predict_region(net::SegNet& model, const Image& region, const InferenceConfig& cfg, int input_size,
                            bool classify, const std::string& case_id = "");

}  // namespace mito::infer
