#pragma once

#include <limits>

#include "mito/config.hpp"

namespace mito::training {

/// Linear ramp 0 -> lr_init over warmup_steps, then cosine decay to lr_final
/// at total_steps.
double lr_at(long step, long total_steps, long warmup_steps, double lr_init, double lr_final);
double lr_at(long step, long total_steps, const TrainConfig& cfg, long steps_per_epoch);

/// Patience counter on a higher-is-better metric.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Returns true on strict improvement.
  bool update(double metric);
  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }
  int stale_epochs() const { return stale_; }

 private:
  int patience_;
  int stale_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

}  // namespace mito::training
