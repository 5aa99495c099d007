#pragma once

// Student/teacher training loop for both tracks.

#include <torch/torch.h>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

#include "mito/config.hpp"
#include "mito/datapipe/dataset.hpp"
#include "mito/datapipe/splits.hpp"
#include "mito/loss_combine.hpp"
#include "mito/nn/network.hpp"
#include "mito/nn/samples.hpp"
#include "mito/nn/teacher.hpp"

namespace mito::training {

/// AdamW with the configured initial rate and weight decay.
std::unique_ptr<torch::optim::AdamW> make_optimizer(net::SegNet& model, const TrainConfig& cfg);

/// Pins thread count and deterministic kernels for reproducible runs.
void configure_determinism(int threads);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  losses::LossBreakdown mean;
  double val_metric = 0.0;
  bool improved = false;
  bool synced = false;
  int sync_count = 0;
  std::vector<std::string> warnings;
};

struct FitResult {
  net::SegNet best_model{nullptr};
  double best_metric = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  bool early_stopped = false;
  int sync_count = 0;
  std::vector<EpochRecord> history;
  datapipe::SplitSpec split;
  std::filesystem::path best_checkpoint;
};

struct BatchLoss {
  losses::TensorParts parts;
  losses::TensorTotal total;
  losses::LossFlags flags;
};

/// Weak and strong views go through the same network in one pass; targets
/// merge warped annotations with teacher pseudo-labels of the weak view.
BatchLoss batch_loss(net::SegNet& model, const std::vector<Sample>& batch, const teacher::Teacher& teacher,
                     const RunConfig& cfg);

/// Segmentation-only pre-training on nuclei masks (classes {0, 1}).
void run_warmup(net::SegNet& model, const std::vector<datapipe::DatasetCase>& nuclei_cases, const RunConfig& cfg,
                std::ostream* log = nullptr);

/// Track 1: pooled F1 of sliding-window detections. Track 2: best swept
/// balanced accuracy on mitosis-centered patches (0.5 threshold if a class
/// is missing).
double validate(net::SegNet& model, const std::vector<const datapipe::DatasetCase*>& cases, const RunConfig& cfg);

/// Full run: split (held-out domains excluded), warm-up, epochs with teacher
/// sync and early stopping. Writes config.json, split.json, metrics.jsonl and
/// best.ckpt into run_dir. Throws Error{NonFiniteLoss}.
FitResult fit(const RunConfig& cfg, const std::vector<datapipe::DatasetCase>& cases,
              const std::vector<datapipe::DatasetCase>& nuclei_cases, const std::filesystem::path& run_dir,
              std::ostream* log = nullptr);

/// Case ids whose domain is not held out.
std::vector<std::string> eligible_cases(const std::vector<datapipe::DatasetCase>& cases, const TrainConfig& cfg);

}  // namespace mito::training
