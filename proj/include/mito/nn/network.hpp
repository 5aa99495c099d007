#pragma once

// UNet encoder-decoder with CBAM-style attention, a contrastive projection
// head, a gradient-reversed domain head and the multi-scale classifier head.
// Tensors are NCHW; inputs are RGB scaled to [0, 1].

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "mito/config.hpp"

namespace mito::net {

/// Identity forward, upstream gradient scaled by -lambda.
torch::Tensor grl(const torch::Tensor& x, double lambda);

struct ForwardBundle {
  torch::Tensor seg_logits;             // N x 4 x H x W
  std::vector<torch::Tensor> pyramid;   // one map per encoder stage
  torch::Tensor embedding;              // N x embed_dim, unit norm
  torch::Tensor domain_logits;          // N x n_domains
  torch::Tensor cls_logit;              // N
};

class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int in_ch, int out_ch);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(ConvBlock);

/// Channel gate (pooled MLP) followed by spatial gate (7x7 conv over
/// channel max/mean); both gates lie in (0, 1).
class AttentionBlockImpl : public torch::nn::Module {
 public:
  AttentionBlockImpl(int channels, int reduction = 4);
  torch::Tensor forward(const torch::Tensor& x);

  /// Test hook: both gates evaluate to exactly 1.
  void force_identity(bool on) { identity_ = on; }
  torch::Tensor channel_gate(const torch::Tensor& x);
  torch::Tensor spatial_gate(const torch::Tensor& x);

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  torch::nn::Conv2d spatial_{nullptr};
  bool identity_ = false;
};
TORCH_MODULE(AttentionBlock);

/// out = x * sigmoid(W2 relu(W1 x)).
class SEGateImpl : public torch::nn::Module {
 public:
  SEGateImpl(int dim, int reduction);
  torch::Tensor forward(const torch::Tensor& x);
  void force_identity(bool on) { identity_ = on; }

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
  bool identity_ = false;
};
TORCH_MODULE(SEGate);

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// One encoder scale goes through residual refinement; every scale is pooled
/// and projected to embed_dim, concatenated, SE-gated and mapped to a logit.
class ClassifierHeadImpl : public torch::nn::Module {
 public:
  explicit ClassifierHeadImpl(const NetConfig& cfg);
  torch::Tensor forward(const std::vector<torch::Tensor>& pyramid);
  /// Concatenated projections before gating (N x depth*embed_dim).
  torch::Tensor fused(const std::vector<torch::Tensor>& pyramid);
  SEGate& se() { return se_; }

 private:
  int refine_stage_;
  torch::nn::Sequential refine_{nullptr};
  torch::nn::ModuleList proj_{nullptr};
  SEGate se_{nullptr};
  torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(ClassifierHead);

class SegNetImpl : public torch::nn::Module {
 public:
  explicit SegNetImpl(const NetConfig& cfg);
  ForwardBundle forward(const torch::Tensor& x);
  /// Segmentation logits only (skips the auxiliary heads).
  torch::Tensor segment(const torch::Tensor& x);

  const NetConfig& config() const { return cfg_; }
  std::vector<AttentionBlock>& attention() { return attn_; }
  ClassifierHead& classifier() { return cls_; }
  void set_grl_lambda(double l) { grl_lambda_ = l; }
  double grl_lambda() const { return grl_lambda_; }

 private:
  std::vector<torch::Tensor> encode(const torch::Tensor& x);
  torch::Tensor decode(const std::vector<torch::Tensor>& pyramid);
  void check_input(const torch::Tensor& x) const;

  NetConfig cfg_;
  double grl_lambda_;
  std::vector<ConvBlock> enc_;
  std::vector<AttentionBlock> attn_;
  std::vector<ConvBlock> dec_;
  torch::nn::Conv2d seg_head_{nullptr};
  torch::nn::Linear proj1_{nullptr}, proj2_{nullptr};
  torch::nn::Linear dom1_{nullptr}, dom2_{nullptr};
  ClassifierHead cls_{nullptr};
};
TORCH_MODULE(SegNet);

/// Deterministic construction: identical (cfg, seed) give identical weights.
/// Throws Error{InvalidConfig}.
SegNet build(const NetConfig& cfg, uint64_t seed);

int64_t parameter_count(const torch::nn::Module& m);
/// FNV-1a over every parameter's bytes in registration order.
uint64_t parameter_checksum(const torch::nn::Module& m);
/// Copies parameters from src into dst (same architecture) without autograd.
void copy_parameters(const torch::nn::Module& src, torch::nn::Module& dst);
/// Fresh model with the same config and weights.
SegNet clone_model(const SegNet& m);

}  // namespace mito::net
