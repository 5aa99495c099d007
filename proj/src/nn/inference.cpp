#include "mito/nn/inference.hpp"

#include <algorithm>
#include <cmath>

#include "mito/datapipe/augment.hpp"
#include "mito/datapipe/tiling.hpp"
#include "mito/error.hpp"
#include "mito/imaging.hpp"
#include "mito/nn/tensor_convert.hpp"

namespace mito::infer {

namespace {

torch::ScalarType model_dtype(net::SegNet& model) { return model->parameters().front().scalar_type(); }

Image crop(const Image& region, int x0, int y0, int size) {
  Image out(size, size, region.spacing_um, region.domain_id);
  for (int y = 0; y < size; ++y) {
    const auto* src = &region.rgb.data[(static_cast<size_t>(y0 + y) * region.width() + x0) * 3];
    std::copy(src, src + static_cast<size_t>(size) * 3, &out.rgb.data[static_cast<size_t>(y) * size * 3]);
  }
  return out;
}

}  // namespace

ProbMap sliding_predict(net::SegNet& model, const Image& region, int window, double overlap, int batch) {
  if (window <= 0 || !(overlap >= 0.0 && overlap < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "window must be > 0 and overlap in [0, 1)");
  }
  if (region.width() < window || region.height() < window) {
    throw Error(ErrorKind::RegionTooSmall, "region smaller than the inference window");
  }
  const int stride = std::max(1, static_cast<int>(std::lround(window * (1.0 - overlap))));
  const auto xs = datapipe::axis_origins(region.width(), window, stride);
  const auto ys = datapipe::axis_origins(region.height(), window, stride);
  std::vector<datapipe::TileOrigin> origins;
  for (int y : ys) {
    for (int x : xs) origins.push_back({x, y});
  }

  ProbMap out;
  out.width = region.width();
  out.height = region.height();
  out.channels = model->config().n_classes;
  const size_t plane = static_cast<size_t>(out.width) * out.height;
  std::vector<double> acc(plane * out.channels, 0.0);
  out.coverage.assign(plane, 0);

  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard guard;
  for (size_t start = 0; start < origins.size(); start += batch) {
    const size_t end = std::min(origins.size(), start + static_cast<size_t>(batch));
    std::vector<Image> tiles;
    for (size_t i = start; i < end; ++i) tiles.push_back(crop(region, origins[i].x, origins[i].y, window));
    std::vector<const Image*> ptrs;
    for (const auto& t : tiles) ptrs.push_back(&t);
    const auto probs = torch::softmax(model->segment(net::images_to_tensor(ptrs).to(model_dtype(model))), 1)
                           .to(torch::kFloat32)
                           .contiguous();
    const float* p = probs.data_ptr<float>();
    for (size_t i = start; i < end; ++i) {
      const auto o = origins[i];
      const float* tile = p + (i - start) * static_cast<size_t>(out.channels) * window * window;
      for (int c = 0; c < out.channels; ++c) {
        for (int y = 0; y < window; ++y) {
          const float* row = tile + (static_cast<size_t>(c) * window + y) * window;
          double* dst = &acc[(static_cast<size_t>(c) * out.height + o.y + y) * out.width + o.x];
          for (int x = 0; x < window; ++x) dst[x] += row[x];
        }
      }
      for (int y = 0; y < window; ++y) {
        for (int x = 0; x < window; ++x) ++out.coverage[static_cast<size_t>(o.y + y) * out.width + o.x + x];
      }
    }
  }
  if (was_training) model->train();

  out.probs.resize(acc.size());
  for (int c = 0; c < out.channels; ++c) {
    for (size_t i = 0; i < plane; ++i) {
      out.probs[c * plane + i] = static_cast<float>(acc[c * plane + i] / out.coverage[i]);
    }
  }
  return out;
}

std::vector<eval::Detection> extract_candidates(const ProbMap& prob, const InferenceConfig& cfg, double spacing_um,
                                                const std::string& case_id) {
  if (!(spacing_um > 0.0)) throw Error(ErrorKind::InvalidArgument, "spacing must be > 0");
  if (prob.channels <= Label::kMitosis) throw Error(ErrorKind::ShapeMismatch, "probability map lacks a mitosis class");
  const size_t plane = static_cast<size_t>(prob.width) * prob.height;
  BinaryMask fg(prob.width, prob.height, 1, 0);
  for (size_t i = 0; i < plane; ++i) {
    // Argmax with ties resolved toward the lower class index.
    int best = 0;
    for (int c = 1; c < prob.channels; ++c) {
      if (prob.probs[c * plane + i] > prob.probs[best * plane + i]) best = c;
    }
    fg.data[i] = best == Label::kMitosis ? 1 : 0;
  }
  const auto comps = imaging::connected_components(fg);

  struct Acc {
    double w = 0.0, wx = 0.0, wy = 0.0;
    int n = 0;
  };
  std::vector<Acc> accs(comps.count);
  const float* pm = &prob.probs[Label::kMitosis * plane];
  for (int y = 0; y < prob.height; ++y) {
    for (int x = 0; x < prob.width; ++x) {
      const int label = comps.labels.at(x, y);
      if (label == 0) continue;
      const double p = pm[static_cast<size_t>(y) * prob.width + x];
      auto& a = accs[label - 1];
      a.w += p;
      a.wx += p * (x + 0.5);
      a.wy += p * (y + 0.5);
      ++a.n;
    }
  }

  std::vector<eval::Detection> cands;
  for (const auto& a : accs) {
    if (a.n < cfg.min_area || a.w <= 0.0) continue;
    cands.push_back({a.wx / a.w, a.wy / a.w, a.w / a.n, case_id});
  }
  std::stable_sort(cands.begin(), cands.end(), [](const auto& l, const auto& r) { return l.score > r.score; });

  std::vector<eval::Detection> kept;
  const double merge_px = cfg.merge_radius_um / spacing_um;
  for (const auto& c : cands) {
    const bool close = std::any_of(kept.begin(), kept.end(), [&](const eval::Detection& k) {
      return std::hypot(k.x - c.x, k.y - c.y) < merge_px;
    });
    if (!close) kept.push_back(c);
  }
  std::erase_if(kept, [&](const eval::Detection& d) { return d.score < cfg.score_floor; });
  return kept;
}

std::vector<double> atypical_probabilities(net::SegNet& model, const Image& region,
                                           const std::vector<eval::Point>& points, int cls_patch, int input_size,
                                           int batch) {
  std::vector<double> out;
  if (points.empty()) return out;
  if (cls_patch <= 0 || input_size <= 0) throw Error(ErrorKind::InvalidArgument, "patch sizes must be > 0");
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard guard;
  for (size_t start = 0; start < points.size(); start += batch) {
    const size_t end = std::min(points.size(), start + static_cast<size_t>(batch));
    std::vector<Image> patches;
    for (size_t i = start; i < end; ++i) {
      auto patch = datapipe::extract_patch(region, points[i].x, points[i].y, cls_patch);
      patches.push_back(datapipe::resize_bilinear(patch, input_size, input_size));
    }
    std::vector<const Image*> ptrs;
    for (const auto& p : patches) ptrs.push_back(&p);
    const auto logits = model->forward(net::images_to_tensor(ptrs).to(model_dtype(model))).cls_logit;
    const auto probs = torch::sigmoid(logits).to(torch::kFloat64).contiguous();
    for (int64_t i = 0; i < probs.size(0); ++i) out.push_back(probs[i].item<double>());
  }
  if (was_training) model->train();
  return out;
}

RegionResult predict_region(net::SegNet& model, const Image& region, const InferenceConfig& cfg, int input_size,
                            bool classify, const std::string& case_id) {
  RegionResult r;
  const auto prob = sliding_predict(model, region, input_size, cfg.overlap);
  r.detections = extract_candidates(prob, cfg, region.spacing_um, case_id);
  if (classify) {
    std::vector<eval::Point> pts;
    for (const auto& d : r.detections) pts.push_back({d.x, d.y});
    for (double p : atypical_probabilities(model, region, pts, cfg.cls_patch, input_size)) {
      r.subtypes.push_back(classify_probability(p, cfg.cls_threshold));
    }
  }
  return r;
}

}  // namespace mito::infer
