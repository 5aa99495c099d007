#include "mito/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mito/error.hpp"

namespace mito::training {

double lr_at(long step, long total_steps, long warmup_steps, double lr_init, double lr_final) {
  if (step < 0 || step > total_steps) throw Error(ErrorKind::InvalidArgument, "step outside [0, total_steps]");
  warmup_steps = std::clamp(warmup_steps, 0L, total_steps);
  if (step < warmup_steps) return lr_init * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const long span = total_steps - warmup_steps;
  const double progress = span > 0 ? static_cast<double>(step - warmup_steps) / static_cast<double>(span) : 1.0;
  return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(std::numbers::pi * progress));
}

double lr_at(long step, long total_steps, const TrainConfig& cfg, long steps_per_epoch) {
  const long warm = cfg.lr_warmup_steps < 0 ? steps_per_epoch : cfg.lr_warmup_steps;
  return lr_at(step, total_steps, warm, cfg.lr_init, cfg.lr_final);
}

bool EarlyStopping::update(double metric) {
  if (metric > best_) {
    best_ = metric;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

}  // namespace mito::training
