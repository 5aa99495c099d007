#pragma once

// Challenge metrics: centroid matching within a physical radius, pooled
// precision/recall/F1, and balanced accuracy with a threshold sweep.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mito::eval {

struct Detection {
  double x = 0.0;
  double y = 0.0;
  double score = 1.0;
  std::string case_id;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct MatchPair {
  int pred = 0;
  int gt = 0;
  double distance_um = 0.0;
};

struct MatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<MatchPair> pairs;
};

inline constexpr double kHitRadiusUm = 7.5;

/// Maximum-cardinality one-to-one matching over pairs within radius_um
/// (inclusive). Throws Error{InvalidArgument} when spacing <= 0.
MatchResult match_detections(std::span<const Detection> preds, std::span<const Point> gts, double spacing_um,
                             double radius_um = kHitRadiusUm);

struct PrfReport {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when any ratio had a zero denominator and was defined as 0.
  bool zero_denominator = false;
};

/// Pools tp/fp/fn across cases before taking ratios.
PrfReport micro_f1(std::span<const MatchResult> results);
/// Harmonic mean; 0 with the flag set when p + r == 0.
PrfReport f1_from_rates(double precision, double recall);

struct ClsReport {
  int tp = 0;
  int fp = 0;
  int tn = 0;
  int fn = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double balanced_accuracy = 0.0;
  double threshold = 0.5;
  bool single_class = false;
};

/// Labels: 1 = atypical (positive). Positive when score >= threshold.
ClsReport balanced_accuracy(std::span<const double> scores, std::span<const int> labels, double threshold);
double balanced_accuracy(double sensitivity, double specificity);

struct SweepResult {
  double best_threshold = 0.5;
  double best_ba = 0.0;
  std::vector<std::pair<double, double>> curve;  // (threshold, BA)
};

/// Candidates are {0, 1} plus midpoints of adjacent sorted unique scores.
/// Ties go to the lowest threshold. Throws Error{SingleClass}.
SweepResult threshold_sweep(std::span<const double> scores, std::span<const int> labels);

void to_json(nlohmann::json& j, const PrfReport& r);
void to_json(nlohmann::json& j, const ClsReport& r);

}  // namespace mito::eval
