#include "mito/nn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "mito/error.hpp"
#include "mito/evaluation.hpp"
#include "mito/nn/checkpoint.hpp"
#include "mito/nn/inference.hpp"
#include "mito/nn/losses.hpp"
#include "mito/nn/tensor_convert.hpp"
#include "mito/random.hpp"
#include "mito/schedule.hpp"
#include "mito/targets.hpp"

namespace mito::training {

using datapipe::AnnotationKind;
using datapipe::DatasetCase;
using nlohmann::json;

namespace {

constexpr uint64_t kWarmupStream = 0x57A2;
constexpr uint64_t kTrainStream = 0x7EA1;

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

uint64_t sample_seed(uint64_t seed, uint64_t stream, long epoch, long slot) {
  return mix_seed(mix_seed(seed, stream, static_cast<uint64_t>(epoch)), static_cast<uint64_t>(slot));
}

struct ImageBatch {
  std::vector<const Image*> weak, strong;
};

ImageBatch views(const std::vector<Sample>& batch) {
  ImageBatch b;
  for (const auto& s : batch) {
    b.weak.push_back(&s.weak);
    b.strong.push_back(&s.strong);
  }
  return b;
}

// Segmentation terms on both views against the same targets.
void seg_terms(const torch::Tensor& logits, const torch::Tensor& targets, const RunConfig& cfg,
               losses::TensorParts& parts, losses::LossFlags& flags) {
  parts.ce = losses::ce_loss(logits, targets, &flags);
  parts.focal = losses::focal_loss(logits, targets, cfg.loss.focal_gamma, &flags);
  parts.adice = losses::adaptive_dice_loss(torch::softmax(logits, 1), targets, cfg.loss.dice_epsilon);
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// Per-domain sampling pools. Track 1 draws regions, Track 2 draws mitoses.
struct SampleKey {
  const DatasetCase* c = nullptr;
  int ann = -1;
};

std::vector<std::vector<SampleKey>> build_pools(const std::vector<const DatasetCase*>& train, int track) {
  std::map<int, std::vector<SampleKey>> by_domain;
  for (const auto* c : train) {
    if (track == 1) {
      by_domain[c->domain_id].push_back({c, -1});
      continue;
    }
    for (size_t i = 0; i < c->annotations.size(); ++i) {
      const auto& a = c->annotations[i];
      if (a.kind == AnnotationKind::Mitosis && a.subtype) by_domain[c->domain_id].push_back({c, static_cast<int>(i)});
    }
  }
  std::vector<std::vector<SampleKey>> pools;
  for (auto& [d, keys] : by_domain) {
    if (!keys.empty()) pools.push_back(std::move(keys));
  }
  return pools;
}

}  // namespace

std::unique_ptr<torch::optim::AdamW> make_optimizer(net::SegNet& model, const TrainConfig& cfg) {
  return std::make_unique<torch::optim::AdamW>(
      model->parameters(), torch::optim::AdamWOptions(cfg.lr_init).weight_decay(cfg.weight_decay));
}

void configure_determinism(int threads) {
  torch::set_num_threads(std::max(1, threads));
  at::globalContext().setDeterministicAlgorithms(true, true);
}

BatchLoss batch_loss(net::SegNet& model, const std::vector<Sample>& batch, const teacher::Teacher& teacher,
                     const RunConfig& cfg) {
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
  const auto n = static_cast<int64_t>(batch.size());
  const auto v = views(batch);

  const auto pseudo = teacher.pseudomask(v.weak);
  std::vector<MultiClassMask> targets;
  std::vector<const MultiClassMask*> tptr;
  targets.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) targets.push_back(teacher::assemble_targets(batch[i].annotated, pseudo[i]));
  for (const auto& t : targets) tptr.push_back(&t);

  const auto x = torch::cat({net::images_to_tensor(v.weak), net::images_to_tensor(v.strong)}, 0);
  const auto out = model->forward(x);
  const auto t1 = net::masks_to_tensor(tptr);
  const auto t2 = torch::cat({t1, t1}, 0);

  BatchLoss bl;
  seg_terms(out.seg_logits, t2, cfg, bl.parts, bl.flags);

  std::vector<losses::PointTarget> points;
  for (int64_t i = 0; i < n; ++i) {
    for (auto p : batch[i].points) {
      p.batch = static_cast<int>(i);
      points.push_back(p);
      p.batch = static_cast<int>(i + n);
      points.push_back(p);
    }
  }
  bl.parts.point_ce = losses::point_ce_loss(out.seg_logits, points, &bl.flags);

  if (cfg.train.enable_dg) {
    if (n >= 2) {
      bl.parts.cont = losses::contrastive_loss(out.embedding.slice(0, 0, n), out.embedding.slice(0, n, 2 * n),
                                               cfg.loss.contrastive_tau);
    } else {
      bl.flags.warnings.emplace_back("batch of one; contrastive term skipped");
    }
    std::vector<int64_t> ids;
    for (int rep = 0; rep < 2; ++rep) {
      for (const auto& s : batch) ids.push_back(s.domain_id);
    }
    bl.parts.domain = losses::domain_loss(out.domain_logits, torch::tensor(ids, torch::kInt64));
  }

  if (cfg.loss.lambda2 != 0.0) {
    std::vector<int64_t> labels;
    for (int rep = 0; rep < 2; ++rep) {
      for (const auto& s : batch) labels.push_back(s.subtype == 1 ? 1 : 0);
    }
    bl.parts.cls = losses::cls_loss(out.cls_logit, torch::tensor(labels, torch::kInt64), cfg.loss, &bl.flags);
  }
  bl.total = losses::combine_tensors(bl.parts, cfg.loss);
  return bl;
}

void run_warmup(net::SegNet& model, const std::vector<DatasetCase>& nuclei_cases, const RunConfig& cfg,
                std::ostream* log) {
  const int epochs = cfg.train.warmup_epochs_nuclei;
  if (epochs <= 0) return;
  if (nuclei_cases.empty()) throw Error(ErrorKind::InvalidConfig, "warm-up needs nuclei cases");
  const long b = cfg.train.batch_size;
  const long spe = std::max(1L, static_cast<long>(nuclei_cases.size()) * cfg.train.samples_per_case / b);
  const long total = spe * epochs;
  auto opt = make_optimizer(model, cfg.train);
  model->train();
  long step = 0;
  for (int e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (long k = 0; k < spe; ++k, ++step) {
      set_lr(*opt, lr_at(step, total, cfg.train, spe));
      std::vector<Sample> batch;
      for (long i = 0; i < b; ++i) {
        const uint64_t s = sample_seed(cfg.train.seed, kWarmupStream, e, k * b + i);
        const auto& c = nuclei_cases[mix_seed(s, 1) % nuclei_cases.size()];
        batch.push_back(nuclei_sample(c, s, cfg));
      }
      const auto v = views(batch);
      std::vector<const MultiClassMask*> tptr;
      for (const auto& s : batch) tptr.push_back(&s.annotated);
      const auto t1 = net::masks_to_tensor(tptr);
      const auto logits =
          model->segment(torch::cat({net::images_to_tensor(v.weak), net::images_to_tensor(v.strong)}, 0));
      losses::TensorParts parts;
      losses::LossFlags flags;
      seg_terms(logits, torch::cat({t1, t1}, 0), cfg, parts, flags);
      const auto loss = parts.ce + parts.adice + parts.focal;
      if (!std::isfinite(loss.item<double>())) throw Error(ErrorKind::NonFiniteLoss, "non-finite warm-up loss");
      opt->zero_grad();
      loss.backward();
      opt->step();
      sum += loss.item<double>();
    }
    if (log) *log << "warmup epoch " << e + 1 << "/" << epochs << " loss " << sum / spe << "\n";
  }
}

double validate(net::SegNet& model, const std::vector<const DatasetCase*>& cases, const RunConfig& cfg) {
  const int input = cfg.augment.out_size;
  if (cfg.train.track == 1) {
    std::vector<eval::MatchResult> results;
    for (const auto* c : cases) {
      const auto prob = infer::sliding_predict(model, c->image, input, cfg.infer.overlap);
      const auto dets = infer::extract_candidates(prob, cfg.infer, c->image.spacing_um, c->case_id);
      std::vector<eval::Point> gts;
      for (const auto& a : c->annotations) {
        if (a.kind == AnnotationKind::Mitosis) gts.push_back({a.x, a.y});
      }
      results.push_back(eval::match_detections(dets, gts, c->image.spacing_um));
    }
    return eval::micro_f1(results).f1;
  }
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto* c : cases) {
    std::vector<eval::Point> pts;
    for (const auto& a : c->annotations) {
      if (a.kind != AnnotationKind::Mitosis || !a.subtype) continue;
      pts.push_back({a.x, a.y});
      labels.push_back(*a.subtype == datapipe::Subtype::Atypical ? 1 : 0);
    }
    const auto p = infer::atypical_probabilities(model, c->image, pts, cfg.train.cls_patch, input);
    scores.insert(scores.end(), p.begin(), p.end());
  }
  if (scores.empty()) return 0.0;
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (!both) return eval::balanced_accuracy(scores, labels, 0.5).balanced_accuracy;
  return eval::threshold_sweep(scores, labels).best_ba;
}

std::vector<std::string> eligible_cases(const std::vector<DatasetCase>& cases, const TrainConfig& cfg) {
  std::vector<std::string> ids;
  for (const auto& c : cases) {
    const auto& held = cfg.held_out_domains;
    if (std::find(held.begin(), held.end(), c.domain_id) == held.end()) ids.push_back(c.case_id);
  }
  return ids;
}

FitResult fit(const RunConfig& cfg, const std::vector<DatasetCase>& cases, const std::vector<DatasetCase>& nuclei_cases,
              const std::filesystem::path& run_dir, std::ostream* log) {
  cfg.validate();
  if (cfg.train.tile_size < cfg.augment.crop_size) {
    throw Error(ErrorKind::InvalidConfig, "tile_size must be >= augment.crop_size");
  }
  configure_determinism(cfg.jobs);
  std::filesystem::create_directories(run_dir);
  write_json(run_dir / "config.json", cfg);

  FitResult result;
  result.split = datapipe::split_patients(eligible_cases(cases, cfg.train), cfg.train.seed);
  write_json(run_dir / "split.json", json{{"seed", result.split.seed},
                                          {"train", result.split.train_cases},
                                          {"val", result.split.val_cases},
                                          {"test", result.split.test_cases},
                                          {"held_out_domains", cfg.train.held_out_domains}});
  std::map<std::string, const DatasetCase*> by_id;
  for (const auto& c : cases) by_id[c.case_id] = &c;
  std::vector<const DatasetCase*> train, val;
  for (const auto& id : result.split.train_cases) train.push_back(by_id.at(id));
  for (const auto& id : result.split.val_cases) val.push_back(by_id.at(id));

  auto model = net::build(cfg.net, cfg.train.seed);
  if (log) *log << "model parameters: " << net::parameter_count(*model) << "\n";

  std::optional<teacher::Teacher> teach;
  if (cfg.train.track == 1 && cfg.train.warmup_epochs_nuclei > 0) {
    std::vector<DatasetCase> warm = nuclei_cases;
    if (warm.empty()) {
      for (const auto* c : train) warm.push_back(*c);
    }
    run_warmup(model, warm, cfg, log);
    net::save_checkpoint(run_dir / "warmup.ckpt", model, json{{"stage", "warmup"}, {"input_size", cfg.augment.out_size}});
    teach = teacher::Teacher::from_model(model, cfg.train.conf_threshold);
  } else {
    teach = teacher::Teacher::classical(cfg.pseudo, cfg.train.conf_threshold);
  }

  const auto pools = build_pools(train, cfg.train.track);
  if (pools.empty()) throw Error(ErrorKind::InvalidConfig, "no training samples in the training split");
  long count = 0;
  for (const auto& p : pools) count += static_cast<long>(p.size());
  if (cfg.train.track == 1) count *= cfg.train.samples_per_case;
  const long b = cfg.train.batch_size;
  const long spe = std::max(1L, count / b);
  const long total = spe * cfg.train.max_epochs;

  auto opt = make_optimizer(model, cfg.train);
  EarlyStopping stopper(cfg.train.patience);
  std::ofstream metrics(run_dir / "metrics.jsonl");
  if (!metrics) throw Error(ErrorKind::Io, "cannot write metrics.jsonl");

  long step = 0;
  for (int epoch = 1; epoch <= cfg.train.max_epochs; ++epoch) {
    model->train();
    losses::LossParts sum;
    EpochRecord rec;
    rec.epoch = epoch;
    for (long k = 0; k < spe; ++k, ++step) {
      rec.lr = lr_at(step, total, cfg.train, spe);
      set_lr(*opt, rec.lr);
      std::vector<Sample> batch;
      for (long i = 0; i < b; ++i) {
        const long slot = k * b + i;
        const uint64_t s = sample_seed(cfg.train.seed, kTrainStream, epoch, slot);
        const auto& pool = pools[static_cast<size_t>(slot + epoch) % pools.size()];
        const auto& key = pool[mix_seed(s, 1) % pool.size()];
        batch.push_back(key.ann < 0 ? detection_sample(*key.c, s, cfg)
                                    : subtype_sample(*key.c, key.c->annotations[key.ann], s, cfg));
      }
      auto bl = batch_loss(model, batch, *teach, cfg);
      const double total_value = bl.total.total.item<double>();
      if (!std::isfinite(total_value)) {
        metrics << json{{"type", "error"}, {"epoch", epoch}, {"step", step}, {"error", "NonFiniteLoss"}}.dump() << "\n";
        throw Error(ErrorKind::NonFiniteLoss, "loss became non-finite at step " + std::to_string(step));
      }
      opt->zero_grad();
      bl.total.total.backward();
      opt->step();
      metrics << json{{"type", "step"}, {"epoch", epoch}, {"step", step}, {"lr", rec.lr}, {"total", total_value}}.dump()
              << "\n";

      const auto p = losses::to_parts(bl.parts);
      sum.ce += p.ce;
      sum.adice += p.adice;
      sum.focal += p.focal;
      sum.point_ce += p.point_ce;
      sum.cont += p.cont;
      sum.domain += p.domain;
      sum.cls += p.cls;
      for (auto& w : bl.flags.warnings) {
        if (std::find(rec.warnings.begin(), rec.warnings.end(), w) == rec.warnings.end()) rec.warnings.push_back(w);
      }
    }
    const double inv = 1.0 / static_cast<double>(spe);
    losses::LossParts mean{sum.ce * inv,   sum.adice * inv,  sum.focal * inv, sum.point_ce * inv,
                           sum.cont * inv, sum.domain * inv, sum.cls * inv};
    rec.mean = losses::combine(mean, cfg.loss);
    rec.val_metric = validate(model, val, cfg);
    rec.improved = stopper.update(rec.val_metric);
    rec.synced = teach->maybe_sync(model, rec.val_metric);
    rec.sync_count = teach->sync_count();
    if (rec.synced) {
      metrics << json{{"type", "sync"}, {"epoch", epoch}, {"metric", rec.val_metric}, {"sync_count", rec.sync_count}}.dump()
              << "\n";
    }

    if (rec.improved) {
      result.best_model = net::clone_model(model);
      result.best_metric = rec.val_metric;
      result.best_epoch = epoch;
      result.best_checkpoint = run_dir / "best.ckpt";
      net::save_checkpoint(result.best_checkpoint, model,
                           json{{"stage", "best"},
                                {"track", cfg.train.track},
                                {"epoch", epoch},
                                {"val_metric", rec.val_metric},
                                {"input_size", cfg.augment.out_size},
                                {"infer", cfg.infer}});
    }

    json line{{"type", "epoch"},
              {"epoch", epoch},
              {"lr", rec.lr},
              {"loss", rec.mean},
              {"val_metric", rec.val_metric},
              {"improved", rec.improved},
              {"synced", rec.synced},
              {"sync_count", rec.sync_count},
              {"teacher_checksum", teach->checksum()},
              {"warnings", rec.warnings}};
    metrics << line.dump() << "\n";
    metrics.flush();
    if (log) {
      *log << "epoch " << epoch << " loss " << rec.mean.total << " val " << rec.val_metric
           << (rec.synced ? " [teacher synced]" : "") << "\n";
    }
    result.history.push_back(std::move(rec));
    result.epochs_run = epoch;
    if (stopper.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  result.sync_count = teach->sync_count();
  if (!result.best_model) result.best_model = net::clone_model(model);
  return result;
}

}  // namespace mito::training
