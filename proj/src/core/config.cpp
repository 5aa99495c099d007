#include "mito/config.hpp"

#include <fstream>

#include "mito/error.hpp"

namespace mito {

using nlohmann::json;

void NetConfig::validate() const {
  if (depth < 2) throw Error(ErrorKind::InvalidConfig, "depth must be >= 2");
  if (base_channels < 4) throw Error(ErrorKind::InvalidConfig, "base_channels must be >= 4");
  if (n_classes != 4) throw Error(ErrorKind::InvalidConfig, "n_classes must be 4");
  if (n_domains < 1) throw Error(ErrorKind::InvalidConfig, "n_domains must be >= 1");
  if (embed_dim < 1 || refine_blocks < 0 || se_reduction < 1) {
    throw Error(ErrorKind::InvalidConfig, "embed_dim, refine_blocks and se_reduction out of range");
  }
  if (!(grl_lambda >= 0.0)) throw Error(ErrorKind::InvalidConfig, "grl_lambda must be >= 0");
  if (resolved_refine_stage() < 0 || resolved_refine_stage() >= depth || resolved_dg_stage() >= depth) {
    throw Error(ErrorKind::InvalidConfig, "refine_stage / dg_stage must name an encoder stage");
  }
}

void TrainConfig::validate() const {
  if (max_epochs < 1 || patience < 1 || patience >= max_epochs) {
    throw Error(ErrorKind::InvalidConfig, "need 1 <= patience < max_epochs");
  }
  if (!(lr_final < lr_init) || lr_final < 0.0) throw Error(ErrorKind::InvalidConfig, "need 0 <= lr_final < lr_init");
  if (weight_decay < 0.0) throw Error(ErrorKind::InvalidConfig, "weight_decay must be >= 0");
  if (batch_size < 1 || samples_per_case < 1) throw Error(ErrorKind::InvalidConfig, "batch sizes must be >= 1");
  if (track != 1 && track != 2) throw Error(ErrorKind::InvalidConfig, "track must be 1 or 2");
  if (warmup_epochs_nuclei < 0) throw Error(ErrorKind::InvalidConfig, "warmup_epochs_nuclei must be >= 0");
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "conf_threshold must lie in [0, 1]");
  }
}

RunConfig RunConfig::for_track(int track) {
  RunConfig c;
  c.train.track = track;
  c.loss = losses::LossWeights::for_track(track);
  return c;
}

void RunConfig::validate() const {
  train.validate();
  net.validate();
  loss.validate();
  pseudo.validate();
  augment.validate();
  if (jobs < 1) throw Error(ErrorKind::InvalidConfig, "jobs must be >= 1");
  const int mult = 1 << (net.depth - 1);
  if (augment.out_size % mult != 0) {
    throw Error(ErrorKind::InvalidConfig, "augment.out_size must be divisible by 2^(depth-1)");
  }
}

void to_json(json& j, const NetConfig& c) {
  j = json{{"depth", c.depth},           {"base_channels", c.base_channels}, {"n_classes", c.n_classes},
           {"n_domains", c.n_domains},   {"embed_dim", c.embed_dim},         {"refine_blocks", c.refine_blocks},
           {"se_reduction", c.se_reduction}, {"grl_lambda", c.grl_lambda},   {"refine_stage", c.refine_stage},
           {"dg_stage", c.dg_stage}};
}

void from_json(const json& j, NetConfig& c) {
  c.depth = j.value("depth", c.depth);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.n_classes = j.value("n_classes", c.n_classes);
  c.n_domains = j.value("n_domains", c.n_domains);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.refine_blocks = j.value("refine_blocks", c.refine_blocks);
  c.se_reduction = j.value("se_reduction", c.se_reduction);
  c.grl_lambda = j.value("grl_lambda", c.grl_lambda);
  c.refine_stage = j.value("refine_stage", c.refine_stage);
  c.dg_stage = j.value("dg_stage", c.dg_stage);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"warmup_epochs_nuclei", c.warmup_epochs_nuclei},
           {"lr_init", c.lr_init},
           {"weight_decay", c.weight_decay},
           {"lr_final", c.lr_final},
           {"lr_warmup_steps", c.lr_warmup_steps},
           {"batch_size", c.batch_size},
           {"track", c.track},
           {"seed", c.seed},
           {"samples_per_case", c.samples_per_case},
           {"positive_fraction", c.positive_fraction},
           {"tile_size", c.tile_size},
           {"tile_overlap", c.tile_overlap},
           {"raster_radius", c.raster_radius},
           {"enable_dg", c.enable_dg},
           {"conf_threshold", c.conf_threshold},
           {"cls_patch", c.cls_patch},
           {"held_out_domains", c.held_out_domains}};
}

void from_json(const json& j, TrainConfig& c) {
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.warmup_epochs_nuclei = j.value("warmup_epochs_nuclei", c.warmup_epochs_nuclei);
  c.lr_init = j.value("lr_init", c.lr_init);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.lr_final = j.value("lr_final", c.lr_final);
  c.lr_warmup_steps = j.value("lr_warmup_steps", c.lr_warmup_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.track = j.value("track", c.track);
  c.seed = j.value("seed", c.seed);
  c.samples_per_case = j.value("samples_per_case", c.samples_per_case);
  c.positive_fraction = j.value("positive_fraction", c.positive_fraction);
  c.tile_size = j.value("tile_size", c.tile_size);
  c.tile_overlap = j.value("tile_overlap", c.tile_overlap);
  c.raster_radius = j.value("raster_radius", c.raster_radius);
  c.enable_dg = j.value("enable_dg", c.enable_dg);
  c.conf_threshold = j.value("conf_threshold", c.conf_threshold);
  c.cls_patch = j.value("cls_patch", c.cls_patch);
  c.held_out_domains = j.value("held_out_domains", c.held_out_domains);
}

void to_json(json& j, const InferenceConfig& c) {
  j = json{{"overlap", c.overlap},         {"min_area", c.min_area},   {"score_floor", c.score_floor},
           {"merge_radius_um", c.merge_radius_um}, {"cls_patch", c.cls_patch}, {"cls_threshold", c.cls_threshold}};
}

void from_json(const json& j, InferenceConfig& c) {
  c.overlap = j.value("overlap", c.overlap);
  c.min_area = j.value("min_area", c.min_area);
  c.score_floor = j.value("score_floor", c.score_floor);
  c.merge_radius_um = j.value("merge_radius_um", c.merge_radius_um);
  c.cls_patch = j.value("cls_patch", c.cls_patch);
  c.cls_threshold = j.value("cls_threshold", c.cls_threshold);
}

namespace imaging {

void to_json(json& j, const PseudoMaskParams& p) {
  j = json{{"blur_sigma", p.blur_sigma},   {"open_radius", p.open_radius},       {"od_beta", p.od_beta},
           {"alpha_percentile", p.alpha_percentile}, {"min_object_area", p.min_object_area}, {"otsu_tile", p.otsu_tile}};
}

void from_json(const json& j, PseudoMaskParams& p) {
  p.blur_sigma = j.value("blur_sigma", p.blur_sigma);
  p.open_radius = j.value("open_radius", p.open_radius);
  p.od_beta = j.value("od_beta", p.od_beta);
  p.alpha_percentile = j.value("alpha_percentile", p.alpha_percentile);
  p.min_object_area = j.value("min_object_area", p.min_object_area);
  p.otsu_tile = j.value("otsu_tile", p.otsu_tile);
}

}  // namespace imaging

namespace datapipe {

void to_json(json& j, const AugmentConfig& c) {
  j = json{{"crop_size", c.crop_size},       {"out_size", c.out_size},         {"photometric", c.photometric},
           {"stain_jitter", c.stain_jitter}, {"max_blur_sigma", c.max_blur_sigma}, {"sharpen_min", c.sharpen_min},
           {"sharpen_max", c.sharpen_max}};
}

void from_json(const json& j, AugmentConfig& c) {
  c.crop_size = j.value("crop_size", c.crop_size);
  c.out_size = j.value("out_size", c.out_size);
  c.photometric = j.value("photometric", c.photometric);
  c.stain_jitter = j.value("stain_jitter", c.stain_jitter);
  c.max_blur_sigma = j.value("max_blur_sigma", c.max_blur_sigma);
  c.sharpen_min = j.value("sharpen_min", c.sharpen_min);
  c.sharpen_max = j.value("sharpen_max", c.sharpen_max);
}

}  // namespace datapipe

void to_json(json& j, const RunConfig& c) {
  j = json{{"train", c.train},   {"net", c.net},       {"loss", c.loss},
           {"pseudo", c.pseudo}, {"augment", c.augment}, {"infer", c.infer},
           {"dataset", c.dataset}, {"nuclei_dataset", c.nuclei_dataset}, {"seed", c.seed},
           {"jobs", c.jobs}};
}

void from_json(const json& j, RunConfig& c) {
  if (j.contains("train")) from_json(j["train"], c.train);
  if (j.contains("net")) from_json(j["net"], c.net);
  if (j.contains("loss")) losses::from_json(j["loss"], c.loss);
  if (j.contains("pseudo")) imaging::from_json(j["pseudo"], c.pseudo);
  if (j.contains("augment")) datapipe::from_json(j["augment"], c.augment);
  if (j.contains("infer")) from_json(j["infer"], c.infer);
  c.dataset = j.value("dataset", c.dataset);
  c.nuclei_dataset = j.value("nuclei_dataset", c.nuclei_dataset);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  c.train.seed = c.seed;
}

RunConfig load_run_config(const std::filesystem::path& path, int track) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open config " + path.string());
  RunConfig cfg = RunConfig::for_track(track);
  try {
    from_json(json::parse(in), cfg);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  cfg.train.track = track;
  cfg.validate();
  return cfg;
}

}  // namespace mito
