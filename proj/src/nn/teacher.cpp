#include "mito/nn/teacher.hpp"

#include <cstring>

#include "mito/error.hpp"
#include "mito/nn/checkpoint.hpp"
#include "mito/nn/tensor_convert.hpp"
#include "mito/targets.hpp"

namespace mito::teacher {

namespace {

void freeze(net::SegNet& m) {
  m->eval();
  for (auto& p : m->parameters()) p.set_requires_grad(false);
}

}  // namespace

Teacher Teacher::from_checkpoint(const std::filesystem::path& path, double conf_threshold) {
  auto ck = net::load_checkpoint(path);
  Teacher t;
  t.source_ = TeacherSource::WarmupCheckpoint;
  t.model_ = ck.model;
  t.conf_ = conf_threshold;
  freeze(t.model_);
  return t;
}

Teacher Teacher::from_model(const net::SegNet& model, double conf_threshold) {
  Teacher t;
  t.source_ = TeacherSource::WarmupCheckpoint;
  t.model_ = net::clone_model(model);
  t.conf_ = conf_threshold;
  freeze(t.model_);
  return t;
}

Teacher Teacher::classical(const imaging::PseudoMaskParams& params, double conf_threshold) {
  params.validate();
  Teacher t;
  t.source_ = TeacherSource::Classical;
  t.params_ = params;
  t.conf_ = conf_threshold;
  return t;
}

MultiClassMask confidence_labels(const torch::Tensor& probs, double conf) {
  if (probs.dim() != 3 || probs.size(0) < 2) throw Error(ErrorKind::ShapeMismatch, "expected C x H x W probabilities");
  const int h = static_cast<int>(probs.size(1)), w = static_cast<int>(probs.size(2));
  const auto p = probs.detach().to(torch::kFloat32).contiguous();
  const float* bg = p.data_ptr<float>();
  const float* nu = bg + static_cast<size_t>(w) * h;
  MultiClassMask out(w, h, 1, Label::kBackground);
  for (size_t i = 0; i < out.data.size(); ++i) {
    // Confidence is measured on the distribution renormalized over the two
    // classes, so mass on the mitosis / hard-negative channels does not count.
    const bool nucleus = nu[i] > bg[i];
    const float denom = bg[i] + nu[i];
    const float top = denom > 0.0f ? (nucleus ? nu[i] : bg[i]) / denom : 0.0f;
    out.data[i] = top < conf ? Label::kIgnore : (nucleus ? Label::kNucleus : Label::kBackground);
  }
  return out;
}

std::vector<MultiClassMask> Teacher::pseudomask(const std::vector<const Image*>& batch) const {
  std::vector<MultiClassMask> out;
  out.reserve(batch.size());
  if (!model_) {
    for (const auto* img : batch) {
      out.push_back(pseudo_from_binary(imaging::classical_pseudomask(*img, params_).mask));
    }
    return out;
  }
  torch::NoGradGuard guard;
  const auto x = net::images_to_tensor(batch).to(model_->parameters().front().scalar_type());
  const auto probs = torch::softmax(model_->segment(x), 1);
  for (int64_t i = 0; i < probs.size(0); ++i) out.push_back(confidence_labels(probs[i], conf_));
  return out;
}

MultiClassMask Teacher::pseudomask(const Image& image) const { return pseudomask(std::vector<const Image*>{&image}).front(); }

bool Teacher::maybe_sync(const net::SegNet& student, double metric) {
  if (!(metric > last_metric_)) return false;
  if (!model_) {
    model_ = net::clone_model(student);
    freeze(model_);
  } else {
    net::copy_parameters(*student, *model_);
  }
  last_metric_ = metric;
  ++sync_count_;
  return true;
}

uint64_t Teacher::checksum() const { return model_ ? net::parameter_checksum(*model_) : 0; }

}  // namespace mito::teacher
