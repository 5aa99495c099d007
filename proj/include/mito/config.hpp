#pragma once

// Configuration records for every stage of a run. All of them round-trip
// through JSON and every default is written back into the run directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mito/datapipe/augment.hpp"
#include "mito/imaging.hpp"
#include "mito/loss_combine.hpp"

namespace mito {

struct NetConfig {
  int depth = 4;
  int base_channels = 16;
  int n_classes = 4;
  int n_domains = 4;
  int embed_dim = 64;
  int refine_blocks = 2;
  int se_reduction = 4;
  double grl_lambda = 1.0;
  /// Encoder stage feeding the classifier refinement block; -1 = depth - 2.
  int refine_stage = -1;
  /// Encoder stage tapped by the contrastive and domain heads; -1 = deepest.
  int dg_stage = -1;

  int resolved_refine_stage() const { return refine_stage < 0 ? depth - 2 : refine_stage; }
  int resolved_dg_stage() const { return dg_stage < 0 ? depth - 1 : dg_stage; }
  int channels_at(int stage) const { return base_channels << stage; }
  /// Throws Error{InvalidConfig}.
  void validate() const;
};

struct TrainConfig {
  int max_epochs = 100;
  int patience = 10;
  /// Track 1 nuclei warm-up; not counted in max_epochs.
  int warmup_epochs_nuclei = 10;
  double lr_init = 4e-4;
  double weight_decay = 1e-5;
  double lr_final = 1e-6;
  /// -1 = one epoch worth of steps.
  int lr_warmup_steps = -1;
  int batch_size = 4;
  int track = 1;
  uint64_t seed = 0;

  /// Training pairs drawn per training case per epoch.
  int samples_per_case = 2;
  /// Probability that a sampled crop is centered near an annotation.
  double positive_fraction = 0.6;
  int tile_size = 512;
  double tile_overlap = 0.5;
  double raster_radius = 12.0;
  /// Disable the contrastive and domain objectives (ablation switch).
  bool enable_dg = true;
  double conf_threshold = 0.7;
  /// Track 2 patch side before resizing to the model input.
  int cls_patch = 128;
  /// Domain ids excluded from train/val (kept for held-out testing).
  std::vector<int> held_out_domains;

  void validate() const;
};

struct InferenceConfig {
  double overlap = 0.5;
  int min_area = 30;
  double score_floor = 0.3;
  double merge_radius_um = 7.5;
  int cls_patch = 128;
  double cls_threshold = 0.590;
};

struct RunConfig {
  TrainConfig train;
  NetConfig net;
  losses::LossWeights loss = losses::LossWeights::for_track(1);
  imaging::PseudoMaskParams pseudo;
  datapipe::AugmentConfig augment;
  InferenceConfig infer;
  std::string dataset;
  std::string nuclei_dataset;
  uint64_t seed = 0;
  int jobs = 1;

  /// Track defaults for lambda1/lambda2 unless explicitly overridden.
  static RunConfig for_track(int track);
  void validate() const;
};

void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const InferenceConfig& c);
void from_json(const nlohmann::json& j, InferenceConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

namespace imaging {
void to_json(nlohmann::json& j, const PseudoMaskParams& p);
void from_json(const nlohmann::json& j, PseudoMaskParams& p);
}  // namespace imaging

namespace datapipe {
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
}  // namespace datapipe

/// Reads a JSON config; throws Error{InvalidConfig} on parse or validation errors.
RunConfig load_run_config(const std::filesystem::path& path, int track);

}  // namespace mito
