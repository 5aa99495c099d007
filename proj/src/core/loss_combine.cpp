#include "mito/loss_combine.hpp"

#include <cmath>

#include "mito/error.hpp"

namespace mito::losses {

LossWeights LossWeights::for_track(int track) {
  if (track != 1 && track != 2) throw Error(ErrorKind::InvalidConfig, "track must be 1 or 2");
  LossWeights w;
  w.lambda1 = track == 1 ? 0.4 : 0.5;
  w.lambda2 = track == 1 ? 0.0 : 1.0;
  return w;
}

void LossWeights::validate() const {
  for (double v : {lambda1, lambda2, w_cont, w_domain, cls_bce, cls_focal, focal_gamma, dice_epsilon}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidConfig, "loss weights must be finite and >= 0");
  }
  if (!(contrastive_tau > 0.0)) throw Error(ErrorKind::InvalidConfig, "contrastive_tau must be > 0");
}

LossBreakdown combine(const LossParts& p, const LossWeights& w) {
  for (double v : {p.ce, p.adice, p.focal, p.point_ce, p.cont, p.domain, p.cls}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinitePart, "loss part is not finite");
  }
  LossBreakdown b;
  b.ce = p.ce;
  b.adice = p.adice;
  b.focal = p.focal;
  b.point_ce = p.point_ce;
  b.cont = p.cont;
  b.domain = p.domain;
  b.cls = p.cls;
  b.semi = p.ce + p.adice + p.focal + w.lambda1 * p.point_ce;
  b.dg = w.w_cont * p.cont + w.w_domain * p.domain;
  b.total = b.semi + b.dg + w.lambda2 * p.cls;
  return b;
}

LossBreakdown combine(const LossParts& parts, int track) { return combine(parts, LossWeights::for_track(track)); }

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lambda1", w.lambda1},          {"lambda2", w.lambda2},
                     {"w_cont", w.w_cont},            {"w_domain", w.w_domain},
                     {"cls_bce", w.cls_bce},          {"cls_focal", w.cls_focal},
                     {"focal_gamma", w.focal_gamma},  {"contrastive_tau", w.contrastive_tau},
                     {"dice_epsilon", w.dice_epsilon}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.lambda1 = j.value("lambda1", w.lambda1);
  w.lambda2 = j.value("lambda2", w.lambda2);
  w.w_cont = j.value("w_cont", w.w_cont);
  w.w_domain = j.value("w_domain", w.w_domain);
  w.cls_bce = j.value("cls_bce", w.cls_bce);
  w.cls_focal = j.value("cls_focal", w.cls_focal);
  w.focal_gamma = j.value("focal_gamma", w.focal_gamma);
  w.contrastive_tau = j.value("contrastive_tau", w.contrastive_tau);
  w.dice_epsilon = j.value("dice_epsilon", w.dice_epsilon);
}

void to_json(nlohmann::json& j, const LossBreakdown& b) {
  j = nlohmann::json{{"ce", b.ce},     {"adice", b.adice}, {"focal", b.focal}, {"point_ce", b.point_ce},
                     {"cont", b.cont}, {"domain", b.domain}, {"cls", b.cls},   {"semi", b.semi},
                     {"dg", b.dg},     {"total", b.total}};
}

}  // namespace mito::losses
