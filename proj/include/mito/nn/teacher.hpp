#pragma once

// Frozen teacher producing pseudo-labels. It starts either from warm-up
// weights or from the classical stain/Otsu pipeline, and is replaced by a
// copy of the student whenever validation strictly improves.

#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "mito/imaging.hpp"
#include "mito/nn/network.hpp"
#include "mito/raster.hpp"

namespace mito::teacher {

enum class TeacherSource { WarmupCheckpoint, Classical };

class Teacher {
 public:
  /// Throws Error{MissingCheckpoint}.
  static Teacher from_checkpoint(const std::filesystem::path& path, double conf_threshold = 0.7);
  static Teacher from_model(const net::SegNet& model, double conf_threshold = 0.7);
  static Teacher classical(const imaging::PseudoMaskParams& params, double conf_threshold = 0.7);

  /// Pixel labels in {0, 1, 255} for each image (same size as the input).
  std::vector<MultiClassMask> pseudomask(const std::vector<const Image*>& batch) const;
  MultiClassMask pseudomask(const Image& image) const;

  /// Replaces the weights with a deep copy of the student when metric beats
  /// the last synced metric strictly. Returns true on sync.
  bool maybe_sync(const net::SegNet& student, double metric);

  TeacherSource source() const { return source_; }
  bool is_classical() const { return !model_; }
  int sync_count() const { return sync_count_; }
  double last_sync_metric() const { return last_metric_; }
  double conf_threshold() const { return conf_; }
  /// Parameter checksum; 0 for the classical teacher.
  uint64_t checksum() const;
  const net::SegNet& model() const { return model_; }

 private:
  Teacher() = default;

  TeacherSource source_ = TeacherSource::Classical;
  mutable net::SegNet model_{nullptr};
  imaging::PseudoMaskParams params_;
  double conf_ = 0.7;
  int sync_count_ = 0;
  double last_metric_ = -std::numeric_limits<double>::infinity();
};

/// Applies the confidence rule to softmax probabilities (4 x H x W):
/// argmax over {background, nucleus}, 255 when the winner's share of
/// p(background) + p(nucleus) is below conf.
MultiClassMask confidence_labels(const torch::Tensor& probs, double conf);

}  // namespace mito::teacher
