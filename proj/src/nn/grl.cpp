#include <torch/torch.h>

#include "mito/error.hpp"
#include "mito/nn/network.hpp"

namespace mito::net {

namespace {

class GradientReversal : public torch::autograd::Function<GradientReversal> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x, double lambda) {
    ctx->saved_data["lambda"] = lambda;
    return x.view_as(x);
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grad_out) {
    const double lambda = ctx->saved_data["lambda"].toDouble();
    return {grad_out[0] * -lambda, torch::Tensor()};
  }
};

}  // namespace

torch::Tensor grl(const torch::Tensor& x, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "GRL lambda must be >= 0");
  return GradientReversal::apply(x, lambda);
}

}  // namespace mito::net
