#include "mito/nn/losses.hpp"

#include <cmath>

#include "mito/error.hpp"

namespace mito::losses {

namespace F = torch::nn::functional;

namespace {

void check_seg_shapes(const torch::Tensor& logits, const torch::Tensor& target) {
  if (logits.dim() != 4 || target.dim() != 3 || logits.size(0) != target.size(0) ||
      logits.size(2) != target.size(1) || logits.size(3) != target.size(2)) {
    throw Error(ErrorKind::ShapeMismatch, "expected logits N x C x H x W and target N x H x W");
  }
}

torch::Tensor zero_like_graph(const torch::Tensor& t) { return t.sum() * 0.0; }

// Shared by ce and focal so that gamma == 0 walks the identical op sequence.
torch::Tensor pixel_nll(const torch::Tensor& logits, const torch::Tensor& target, double gamma, LossFlags* flags) {
  check_seg_shapes(logits, target);
  const auto valid = target.ne(kIgnoreIndex);
  const auto n_valid = valid.sum().item<int64_t>();
  if (n_valid == 0) {
    if (flags) {
      flags->all_ignored = true;
      flags->warnings.emplace_back("every pixel is ignored; loss set to 0");
    }
    return zero_like_graph(logits);
  }
  const auto safe = torch::where(valid, target, torch::zeros_like(target));
  const auto logp = torch::log_softmax(logits, 1);
  auto lp_t = logp.gather(1, safe.unsqueeze(1)).squeeze(1);
  auto per_pixel = -lp_t;
  if (gamma != 0.0) per_pixel = per_pixel * torch::pow(1.0 - lp_t.exp(), gamma);
  per_pixel = per_pixel * valid.to(per_pixel.scalar_type());
  return per_pixel.sum() / static_cast<double>(n_valid);
}

}  // namespace

torch::Tensor ce_loss(const torch::Tensor& logits, const torch::Tensor& target, LossFlags* flags) {
  return pixel_nll(logits, target, 0.0, flags);
}

torch::Tensor focal_loss(const torch::Tensor& logits, const torch::Tensor& target, double gamma, LossFlags* flags) {
  if (!(gamma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "focal gamma must be >= 0");
  return pixel_nll(logits, target, gamma, flags);
}

torch::Tensor adaptive_dice_loss(const torch::Tensor& probs, const torch::Tensor& target, double eps) {
  check_seg_shapes(probs, target);
  const int64_t n_classes = probs.size(1);
  const auto valid = target.ne(kIgnoreIndex);
  const auto safe = torch::where(valid, target, torch::zeros_like(target));
  if (safe.max().item<int64_t>() >= n_classes || safe.min().item<int64_t>() < 0) {
    throw Error(ErrorKind::InvalidArgument, "target label outside the class range");
  }
  const auto vmask = valid.unsqueeze(1).to(probs.scalar_type());
  const auto g = F::one_hot(safe, n_classes).permute({0, 3, 1, 2}).to(probs.scalar_type()) * vmask;
  const auto p = probs * vmask;

  const auto n_c = g.sum({0, 2, 3});
  const auto present = n_c.gt(0);
  if (!present.any().item<bool>()) return zero_like_graph(probs);
  const auto w = torch::where(present, 1.0 / (n_c + eps).square(), torch::zeros_like(n_c));
  const auto inter = (p * g).sum({0, 2, 3});
  const auto denom = (p + g).sum({0, 2, 3});
  return 1.0 - 2.0 * (w * inter).sum() / ((w * denom).sum() + eps);
}

torch::Tensor point_ce_loss(const torch::Tensor& logits, const std::vector<PointTarget>& points, LossFlags* flags) {
  if (logits.dim() != 4) throw Error(ErrorKind::ShapeMismatch, "expected logits N x C x H x W");
  if (points.empty()) {
    if (flags) {
      flags->no_points = true;
      flags->warnings.emplace_back("no centroid targets in batch; point loss set to 0");
    }
    return zero_like_graph(logits);
  }
  std::vector<int64_t> b, ys, xs, cls;
  for (const auto& pt : points) {
    const auto x = static_cast<int64_t>(std::floor(pt.x));
    const auto y = static_cast<int64_t>(std::floor(pt.y));
    if (pt.batch < 0 || pt.batch >= logits.size(0) || x < 0 || y < 0 || x >= logits.size(3) || y >= logits.size(2) ||
        pt.cls < 0 || pt.cls >= logits.size(1)) {
      throw Error(ErrorKind::InvalidArgument, "point target outside the logit map");
    }
    b.push_back(pt.batch);
    ys.push_back(y);
    xs.push_back(x);
    cls.push_back(pt.cls);
  }
  auto idx = [](const std::vector<int64_t>& v) { return torch::tensor(v, torch::kInt64); };
  // Advanced indexing on (N, H, W) with the class axis moved last.
  const auto picked = logits.permute({0, 2, 3, 1}).index({idx(b), idx(ys), idx(xs)});
  return F::cross_entropy(picked, idx(cls));
}

torch::Tensor contrastive_loss(const torch::Tensor& emb_a, const torch::Tensor& emb_b, double tau) {
  if (emb_a.dim() != 2 || !emb_a.sizes().equals(emb_b.sizes())) {
    throw Error(ErrorKind::ShapeMismatch, "views must both be N x d");
  }
  const int64_t n = emb_a.size(0);
  if (n < 2) throw Error(ErrorKind::BatchTooSmall, "contrastive loss needs at least 2 pairs");
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be > 0");
  const auto z = torch::cat({emb_a, emb_b}, 0);
  auto sim = z.mm(z.t()) / tau;
  const auto self = torch::eye(2 * n, torch::TensorOptions().dtype(torch::kBool));
  sim = sim.masked_fill(self, -std::numeric_limits<double>::infinity());
  const auto pos = torch::cat({torch::arange(n, 2 * n), torch::arange(0, n)}).to(torch::kInt64);
  return F::cross_entropy(sim, pos);
}

torch::Tensor domain_loss(const torch::Tensor& domain_logits, const torch::Tensor& domain_ids) {
  if (domain_logits.dim() != 2 || domain_ids.dim() != 1 || domain_logits.size(0) != domain_ids.size(0)) {
    throw Error(ErrorKind::ShapeMismatch, "expected logits N x K and ids N");
  }
  return F::cross_entropy(domain_logits, domain_ids.to(torch::kInt64));
}

torch::Tensor cls_loss(const torch::Tensor& logits, const torch::Tensor& labels, const LossWeights& w,
                       LossFlags* flags) {
  if (logits.dim() != 1 || labels.dim() != 1 || logits.size(0) != labels.size(0)) {
    throw Error(ErrorKind::ShapeMismatch, "expected logits N and labels N");
  }
  const auto pos = labels.to(torch::kInt64).eq(1);
  const auto neg = pos.logical_not();
  const auto n_pos = pos.sum().item<int64_t>();
  const auto n_neg = neg.sum().item<int64_t>();
  if (n_pos == 0 || n_neg == 0) {
    if (flags) {
      flags->missing_class = true;
      flags->warnings.emplace_back("batch lacks one subtype; classification loss set to 0");
    }
    return zero_like_graph(logits);
  }
  const auto lp = F::logsigmoid(logits);    // log p(atypical)
  const auto ln = F::logsigmoid(-logits);   // log p(normal)
  const auto p = torch::sigmoid(logits);
  const auto fpos = pos.to(logits.scalar_type());
  const auto fneg = neg.to(logits.scalar_type());
  const double g = w.focal_gamma;

  const auto bce_pos = -(lp * fpos).sum() / static_cast<double>(n_pos);
  const auto bce_neg = -(ln * fneg).sum() / static_cast<double>(n_neg);
  const auto foc_pos = -(torch::pow(1.0 - p, g) * lp * fpos).sum() / static_cast<double>(n_pos);
  const auto foc_neg = -(torch::pow(p, g) * ln * fneg).sum() / static_cast<double>(n_neg);
  return w.cls_bce * (bce_pos + bce_neg) + w.cls_focal * (foc_pos + foc_neg);
}

TensorTotal combine_tensors(const TensorParts& parts, const LossWeights& w) {
  torch::Tensor ref;
  for (const auto* t : {&parts.ce, &parts.adice, &parts.focal, &parts.point_ce, &parts.cont, &parts.domain}) {
    if (t->defined()) {
      ref = *t;
      break;
    }
  }
  if (!ref.defined()) throw Error(ErrorKind::InvalidArgument, "no loss parts supplied");
  auto val = [&](const torch::Tensor& t) { return t.defined() ? t : torch::zeros({}, ref.options()); };

  TensorTotal out;
  out.semi = val(parts.ce) + val(parts.adice) + val(parts.focal) + w.lambda1 * val(parts.point_ce);
  out.dg = w.w_cont * val(parts.cont) + w.w_domain * val(parts.domain);
  out.total = out.semi + out.dg;
  if (w.lambda2 != 0.0) out.total = out.total + w.lambda2 * val(parts.cls);
  return out;
}

LossParts to_parts(const TensorParts& t) {
  auto v = [](const torch::Tensor& x) { return x.defined() ? x.detach().item<double>() : 0.0; };
  LossParts p;
  p.ce = v(t.ce);
  p.adice = v(t.adice);
  p.focal = v(t.focal);
  p.point_ce = v(t.point_ce);
  p.cont = v(t.cont);
  p.domain = v(t.domain);
  p.cls = v(t.cls);
  return p;
}

}  // namespace mito::losses
