#pragma once

// Weighted combination of the individual objectives:
//   semi  = ce + adice + focal + lambda1 * point_ce
//   dg    = 0.5 * cont + 0.3 * domain
//   cls   = 0.5 * (bce_pos + bce_neg) + 0.25 * (focal_pos + focal_neg)
//   total = semi + dg + lambda2 * cls

#include <json.hpp>

namespace mito::losses {

struct LossWeights {
  double lambda1 = 0.4;
  double lambda2 = 0.0;
  double w_cont = 0.5;
  double w_domain = 0.3;
  double cls_bce = 0.5;
  double cls_focal = 0.25;
  double focal_gamma = 2.0;
  double contrastive_tau = 0.5;
  double dice_epsilon = 1e-6;

  /// lambda1 = 0.4 / 0.5 and lambda2 = 0 / 1 for track 1 / 2.
  static LossWeights for_track(int track);
  void validate() const;
};

struct LossParts {
  double ce = 0.0;
  double adice = 0.0;
  double focal = 0.0;
  double point_ce = 0.0;
  double cont = 0.0;
  double domain = 0.0;
  double cls = 0.0;
};

struct LossBreakdown {
  double ce = 0.0;
  double adice = 0.0;
  double focal = 0.0;
  double point_ce = 0.0;
  double cont = 0.0;
  double domain = 0.0;
  double cls = 0.0;
  double semi = 0.0;
  double dg = 0.0;
  double total = 0.0;
};

/// Throws Error{NonFinitePart}.
LossBreakdown combine(const LossParts& parts, const LossWeights& weights);
LossBreakdown combine(const LossParts& parts, int track);

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const LossBreakdown& b);

}  // namespace mito::losses
