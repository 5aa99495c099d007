#include "mito/nn/network.hpp"

#include <algorithm>
#include <cstring>

#include "mito/error.hpp"

namespace mito::net {

namespace F = torch::nn::functional;

namespace {

int groups_for(int channels) {
  // Largest group count <= 8 dividing the channel count.
  for (int g = std::min(8, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

torch::nn::Conv2d conv3(int in, int out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1).bias(false));
}

torch::nn::GroupNorm gn(int ch) { return torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups_for(ch), ch)); }

torch::Tensor gap(const torch::Tensor& x) { return x.mean({2, 3}); }

}  // namespace

ConvBlockImpl::ConvBlockImpl(int in_ch, int out_ch) {
  conv1_ = register_module("conv1", conv3(in_ch, out_ch));
  norm1_ = register_module("norm1", gn(out_ch));
  conv2_ = register_module("conv2", conv3(out_ch, out_ch));
  norm2_ = register_module("norm2", gn(out_ch));
}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(norm1_(conv1_(x)));
  return torch::relu(norm2_(conv2_(y)));
}

AttentionBlockImpl::AttentionBlockImpl(int channels, int reduction) {
  const int hidden = std::max(1, channels / reduction);
  fc1_ = register_module("fc1", torch::nn::Linear(channels, hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(hidden, channels));
  spatial_ = register_module("spatial", torch::nn::Conv2d(torch::nn::Conv2dOptions(2, 1, 7).padding(3)));
}

torch::Tensor AttentionBlockImpl::channel_gate(const torch::Tensor& x) {
  if (identity_) return torch::ones({x.size(0), x.size(1), 1, 1}, x.options());
  auto mlp = [&](const torch::Tensor& v) { return fc2_(torch::relu(fc1_(v))); };
  const auto avg = gap(x);
  const auto mx = std::get<0>(x.flatten(2).max(2));
  return torch::sigmoid(mlp(avg) + mlp(mx)).unsqueeze(-1).unsqueeze(-1);
}

torch::Tensor AttentionBlockImpl::spatial_gate(const torch::Tensor& x) {
  if (identity_) return torch::ones({x.size(0), 1, x.size(2), x.size(3)}, x.options());
  const auto mx = std::get<0>(x.max(1, true));
  const auto mean = x.mean(1, true);
  return torch::sigmoid(spatial_(torch::cat({mx, mean}, 1)));
}

torch::Tensor AttentionBlockImpl::forward(const torch::Tensor& x) {
  if (identity_) return x;
  const auto refined = x * channel_gate(x);
  return refined * spatial_gate(refined);
}

SEGateImpl::SEGateImpl(int dim, int reduction) {
  const int hidden = std::max(1, dim / reduction);
  fc1_ = register_module("fc1", torch::nn::Linear(torch::nn::LinearOptions(dim, hidden).bias(false)));
  fc2_ = register_module("fc2", torch::nn::Linear(torch::nn::LinearOptions(hidden, dim).bias(false)));
}

torch::Tensor SEGateImpl::forward(const torch::Tensor& x) {
  if (identity_) return x;
  return x * torch::sigmoid(fc2_(torch::relu(fc1_(x))));
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  conv1_ = register_module("conv1", conv3(channels, channels));
  norm1_ = register_module("norm1", gn(channels));
  conv2_ = register_module("conv2", conv3(channels, channels));
  norm2_ = register_module("norm2", gn(channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(norm1_(conv1_(x)));
  y = norm2_(conv2_(y));
  return torch::relu(x + y);
}

ClassifierHeadImpl::ClassifierHeadImpl(const NetConfig& cfg) : refine_stage_(cfg.resolved_refine_stage()) {
  refine_ = register_module("refine", torch::nn::Sequential());
  for (int i = 0; i < cfg.refine_blocks; ++i) refine_->push_back(ResidualBlock(cfg.channels_at(refine_stage_)));
  proj_ = register_module("proj", torch::nn::ModuleList());
  for (int s = 0; s < cfg.depth; ++s) proj_->push_back(torch::nn::Linear(cfg.channels_at(s), cfg.embed_dim));
  const int fused_dim = cfg.depth * cfg.embed_dim;
  se_ = register_module("se", SEGate(fused_dim, cfg.se_reduction));
  out_ = register_module("out", torch::nn::Linear(fused_dim, 1));
}

torch::Tensor ClassifierHeadImpl::fused(const std::vector<torch::Tensor>& pyramid) {
  std::vector<torch::Tensor> parts;
  parts.reserve(pyramid.size());
  for (size_t s = 0; s < pyramid.size(); ++s) {
    auto feat = pyramid[s];
    if (static_cast<int>(s) == refine_stage_ && !refine_->is_empty()) feat = refine_->forward(feat);
    parts.push_back(proj_[s]->as<torch::nn::Linear>()->forward(gap(feat)));
  }
  return torch::cat(parts, 1);
}

torch::Tensor ClassifierHeadImpl::forward(const std::vector<torch::Tensor>& pyramid) {
  if (static_cast<int>(pyramid.size()) != static_cast<int>(proj_->size())) {
    throw Error(ErrorKind::ShapeMismatch, "classifier head expects one map per encoder stage");
  }
  return out_(se_(fused(pyramid))).squeeze(1);
}

SegNetImpl::SegNetImpl(const NetConfig& cfg) : cfg_(cfg), grl_lambda_(cfg.grl_lambda) {
  cfg.validate();
  for (int s = 0; s < cfg.depth; ++s) {
    const int in = s == 0 ? 3 : cfg.channels_at(s - 1);
    enc_.push_back(register_module("enc" + std::to_string(s), ConvBlock(in, cfg.channels_at(s))));
    attn_.push_back(register_module("attn" + std::to_string(s), AttentionBlock(cfg.channels_at(s))));
  }
  for (int s = cfg.depth - 2; s >= 0; --s) {
    const int in = cfg.channels_at(s + 1) + cfg.channels_at(s);
    dec_.push_back(register_module("dec" + std::to_string(s), ConvBlock(in, cfg.channels_at(s))));
  }
  seg_head_ = register_module("seg_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.channels_at(0), cfg.n_classes, 1)));
  const int dg_ch = cfg.channels_at(cfg.resolved_dg_stage());
  proj1_ = register_module("proj1", torch::nn::Linear(dg_ch, dg_ch));
  proj2_ = register_module("proj2", torch::nn::Linear(dg_ch, cfg.embed_dim));
  dom1_ = register_module("dom1", torch::nn::Linear(dg_ch, dg_ch));
  dom2_ = register_module("dom2", torch::nn::Linear(dg_ch, cfg.n_domains));
  cls_ = register_module("cls", ClassifierHead(cfg));
}

void SegNetImpl::check_input(const torch::Tensor& x) const {
  const int64_t mult = int64_t{1} << (cfg_.depth - 1);
  if (x.dim() != 4 || x.size(1) != 3 || x.size(0) < 1 || x.size(2) % mult != 0 || x.size(3) % mult != 0 ||
      x.size(2) < mult || x.size(3) < mult) {
    throw Error(ErrorKind::ShapeMismatch, "input must be N x 3 x H x W with H, W divisible by " + std::to_string(mult));
  }
}

std::vector<torch::Tensor> SegNetImpl::encode(const torch::Tensor& x) {
  std::vector<torch::Tensor> pyramid;
  auto h = x;
  for (int s = 0; s < cfg_.depth; ++s) {
    if (s > 0) h = F::max_pool2d(h, F::MaxPool2dFuncOptions(2));
    h = attn_[s](enc_[s](h));
    pyramid.push_back(h);
  }
  return pyramid;
}

torch::Tensor SegNetImpl::decode(const std::vector<torch::Tensor>& pyramid) {
  auto h = pyramid.back();
  for (int s = cfg_.depth - 2, k = 0; s >= 0; --s, ++k) {
    const auto& skip = pyramid[s];
    h = F::interpolate(h, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{skip.size(2), skip.size(3)})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    h = dec_[k](torch::cat({h, skip}, 1));
  }
  return seg_head_(h);
}

torch::Tensor SegNetImpl::segment(const torch::Tensor& x) {
  check_input(x);
  return decode(encode(x));
}

ForwardBundle SegNetImpl::forward(const torch::Tensor& x) {
  check_input(x);
  ForwardBundle b;
  b.pyramid = encode(x);
  b.seg_logits = decode(b.pyramid);
  const auto pooled = gap(b.pyramid[cfg_.resolved_dg_stage()]);
  b.embedding = F::normalize(proj2_(torch::relu(proj1_(pooled))), F::NormalizeFuncOptions().p(2).dim(1).eps(1e-12));
  b.domain_logits = dom2_(torch::relu(dom1_(grl(pooled, grl_lambda_))));
  b.cls_logit = cls_(b.pyramid);
  return b;
}

SegNet build(const NetConfig& cfg, uint64_t seed) {
  cfg.validate();
  // Default initializers draw from the global generator; pin it for the
  // duration of construction.
  torch::manual_seed(seed);
  SegNet net(cfg);
  return net;
}

int64_t parameter_count(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

uint64_t parameter_checksum(const torch::nn::Module& m) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& p : m.parameters()) {
    const auto c = p.detach().contiguous().to(torch::kCPU);
    const auto* bytes = static_cast<const unsigned char*>(c.data_ptr());
    const size_t n = static_cast<size_t>(c.numel()) * c.element_size();
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void copy_parameters(const torch::nn::Module& src, torch::nn::Module& dst) {
  const auto s = src.named_parameters();
  auto d = dst.named_parameters();
  if (s.size() != d.size()) throw Error(ErrorKind::ShapeMismatch, "parameter sets differ");
  torch::NoGradGuard guard;
  for (const auto& item : s) {
    auto* target = d.find(item.key());
    if (target == nullptr || !target->sizes().equals(item.value().sizes())) {
      throw Error(ErrorKind::ShapeMismatch, "parameter mismatch at " + item.key());
    }
    target->copy_(item.value());
  }
}

SegNet clone_model(const SegNet& m) {
  SegNet out(m->config());
  out->to(m->parameters().front().scalar_type());
  copy_parameters(*m, *out);
  out->set_grl_lambda(m->grl_lambda());
  return out;
}

}  // namespace mito::net
