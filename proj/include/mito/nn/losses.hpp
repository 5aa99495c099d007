#pragma once

// Segmentation, contrastive, domain and classification objectives on
// tensors. Segmentation targets are int64 N x H x W with 255 = ignore.

#include <torch/torch.h>

#include <string>
#include <vector>

#include "mito/loss_combine.hpp"

namespace mito::losses {

inline constexpr int64_t kIgnoreIndex = 255;

/// Conditions that were handled by returning 0 instead of failing.
struct LossFlags {
  bool all_ignored = false;
  bool no_points = false;
  bool missing_class = false;
  std::vector<std::string> warnings;
};

/// Mean pixel cross-entropy over non-ignored pixels.
torch::Tensor ce_loss(const torch::Tensor& logits, const torch::Tensor& target, LossFlags* flags = nullptr);

/// Mean of -(1 - p_t)^gamma log p_t; gamma = 0 reproduces ce_loss exactly.
torch::Tensor focal_loss(const torch::Tensor& logits, const torch::Tensor& target, double gamma,
                         LossFlags* flags = nullptr);

/// Class-weighted dice on probabilities (N x C x H x W). Weights are
/// 1 / (n_c + eps)^2 for classes present in the target, 0 otherwise.
torch::Tensor adaptive_dice_loss(const torch::Tensor& probs, const torch::Tensor& target, double eps = 1e-6);

struct PointTarget {
  int batch = 0;
  double x = 0.0;
  double y = 0.0;
  int64_t cls = 2;
};

/// Cross-entropy at the pixels containing the given centroids.
torch::Tensor point_ce_loss(const torch::Tensor& logits, const std::vector<PointTarget>& points,
                            LossFlags* flags = nullptr);

/// NT-Xent over the 2N views; rows i and i + N are positives.
/// Throws Error{BatchTooSmall} when N < 2.
torch::Tensor contrastive_loss(const torch::Tensor& emb_a, const torch::Tensor& emb_b, double tau = 0.5);

torch::Tensor domain_loss(const torch::Tensor& domain_logits, const torch::Tensor& domain_ids);

/// bce_w * (BCE_pos + BCE_neg) + focal_w * (F_pos + F_neg), each term a
/// per-class mean. Returns 0 with a warning if either class is missing.
torch::Tensor cls_loss(const torch::Tensor& logits, const torch::Tensor& labels, const LossWeights& w,
                       LossFlags* flags = nullptr);

struct TensorParts {
  torch::Tensor ce, adice, focal, point_ce, cont, domain, cls;
};

struct TensorTotal {
  torch::Tensor semi, dg, total;
};

/// Tensor twin of combine(); undefined parts count as 0. The cls term is
/// not touched at all when lambda2 == 0.
TensorTotal combine_tensors(const TensorParts& parts, const LossWeights& w);

/// Scalar snapshot of the tensor parts for logging.
LossParts to_parts(const TensorParts& parts);

}  // namespace mito::losses
