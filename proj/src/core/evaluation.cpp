#include "mito/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mito/error.hpp"

namespace mito::eval {

MatchResult match_detections(std::span<const Detection> preds, std::span<const Point> gts, double spacing_um,
                             double radius_um) {
  if (!(spacing_um > 0.0)) throw Error(ErrorKind::InvalidArgument, "spacing must be > 0");
  const int np = static_cast<int>(preds.size()), ng = static_cast<int>(gts.size());

  // Candidate gts per prediction, nearest first so augmenting paths prefer close pairs.
  std::vector<std::vector<std::pair<double, int>>> adj(np);
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < ng; ++j) {
      const double d = std::hypot(preds[i].x - gts[j].x, preds[i].y - gts[j].y) * spacing_um;
      if (d <= radius_um) adj[i].push_back({d, j});
    }
    std::sort(adj[i].begin(), adj[i].end());
  }

  // Kuhn's augmenting paths.
  std::vector<int> gt_owner(ng, -1);
  std::vector<char> seen;
  std::function<bool(int)> augment = [&](int i) {
    for (const auto& [d, j] : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (gt_owner[j] < 0 || augment(gt_owner[j])) {
        gt_owner[j] = i;
        return true;
      }
    }
    return false;
  };
  for (int i = 0; i < np; ++i) {
    seen.assign(ng, 0);
    augment(i);
  }

  MatchResult res;
  for (int j = 0; j < ng; ++j) {
    if (gt_owner[j] < 0) continue;
    const int i = gt_owner[j];
    res.pairs.push_back({i, j, std::hypot(preds[i].x - gts[j].x, preds[i].y - gts[j].y) * spacing_um});
  }
  std::sort(res.pairs.begin(), res.pairs.end(), [](const MatchPair& a, const MatchPair& b) { return a.pred < b.pred; });
  res.tp = static_cast<int>(res.pairs.size());
  res.fp = np - res.tp;
  res.fn = ng - res.tp;
  return res;
}

namespace {

PrfReport finish(int tp, int fp, int fn) {
  PrfReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  if (tp + fp > 0) {
    r.precision = static_cast<double>(tp) / (tp + fp);
  } else {
    r.zero_denominator = true;
  }
  if (tp + fn > 0) {
    r.recall = static_cast<double>(tp) / (tp + fn);
  } else {
    r.zero_denominator = true;
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.zero_denominator = true;
  }
  return r;
}

}  // namespace

PrfReport micro_f1(std::span<const MatchResult> results) {
  if (results.empty()) throw Error(ErrorKind::InvalidArgument, "micro_f1 needs at least one result");
  int tp = 0, fp = 0, fn = 0;
  for (const auto& r : results) {
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
  }
  return finish(tp, fp, fn);
}

PrfReport f1_from_rates(double precision, double recall) {
  PrfReport r;
  r.precision = precision;
  r.recall = recall;
  if (precision + recall > 0.0) {
    r.f1 = 2.0 * precision * recall / (precision + recall);
  } else {
    r.zero_denominator = true;
  }
  return r;
}

double balanced_accuracy(double sensitivity, double specificity) { return 0.5 * (sensitivity + specificity); }

ClsReport balanced_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "scores and labels differ in length");
  ClsReport r;
  r.threshold = threshold;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    const bool pos = scores[i] >= threshold;
    if (labels[i] == 1) {
      pos ? ++r.tp : ++r.fn;
    } else {
      pos ? ++r.fp : ++r.tn;
    }
  }
  if (r.tp + r.fn > 0) {
    r.sensitivity = static_cast<double>(r.tp) / (r.tp + r.fn);
  } else {
    r.single_class = true;
  }
  if (r.tn + r.fp > 0) {
    r.specificity = static_cast<double>(r.tn) / (r.tn + r.fp);
  } else {
    r.single_class = true;
  }
  r.balanced_accuracy = balanced_accuracy(r.sensitivity, r.specificity);
  return r;
}

SweepResult threshold_sweep(std::span<const double> scores, std::span<const int> labels) {
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) throw Error(ErrorKind::SingleClass, "threshold sweep needs both classes");

  std::vector<double> uniq(scores.begin(), scores.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<double> cands{0.0, 1.0};
  for (size_t i = 0; i + 1 < uniq.size(); ++i) cands.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  SweepResult res;
  res.best_ba = -1.0;
  for (double t : cands) {
    const double ba = balanced_accuracy(scores, labels, t).balanced_accuracy;
    res.curve.push_back({t, ba});
    if (ba > res.best_ba) {
      res.best_ba = ba;
      res.best_threshold = t;
    }
  }
  return res;
}

void to_json(nlohmann::json& j, const PrfReport& r) {
  j = nlohmann::json{{"tp", r.tp},
                     {"fp", r.fp},
                     {"fn", r.fn},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"f1", r.f1},
                     {"zero_denominator", r.zero_denominator}};
}

void to_json(nlohmann::json& j, const ClsReport& r) {
  j = nlohmann::json{{"threshold", r.threshold},
                     {"tp", r.tp},
                     {"fp", r.fp},
                     {"tn", r.tn},
                     {"fn", r.fn},
                     {"sensitivity", r.sensitivity},
                     {"specificity", r.specificity},
                     {"ba", r.balanced_accuracy},
                     {"single_class", r.single_class}};
}

}  // namespace mito::eval
