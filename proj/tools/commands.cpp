#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "mito/config.hpp"
#include "mito/datapipe/dataset.hpp"
#include "mito/datapipe/synth.hpp"
#include "mito/datapipe/tiling.hpp"
#include "mito/error.hpp"
#include "mito/evaluation.hpp"
#include "mito/image_io.hpp"
#include "mito/imaging.hpp"
#include "mito/nn/checkpoint.hpp"
#include "mito/nn/inference.hpp"
#include "mito/nn/training.hpp"
#include "svg_plot.hpp"

namespace mito::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path, ErrorKind missing = ErrorKind::InvalidConfig) {
  std::ifstream in(path);
  if (!in) throw Error(missing, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Runs f(i) for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <typename F>
void parallel_for(size_t n, int jobs, F&& f) {
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
}

struct Run {
  RunConfig cfg;
  json split;
  net::Checkpoint ckpt;
  int input_size = 0;
};

Run load_run(const fs::path& dir) {
  Run r;
  const json cj = read_json(dir / "config.json");
  try {
    from_json(cj, r.cfg);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, "config.json: " + std::string(e.what()));
  }
  if (fs::exists(dir / "split.json")) r.split = read_json(dir / "split.json");
  r.ckpt = net::load_checkpoint(dir / "best.ckpt");
  r.input_size = r.ckpt.meta.value("input_size", r.cfg.augment.out_size);
  return r;
}

std::vector<datapipe::DatasetCase> load_dataset(const std::string& path) {
  if (path.empty()) throw Error(ErrorKind::InvalidConfig, "no dataset given");
  if (!fs::exists(fs::path(path) / "manifest.json")) {
    throw Error(ErrorKind::InvalidConfig, "not a dataset directory: " + path);
  }
  return datapipe::read_dataset(path);
}

/// Cases of the requested split. "test" also takes every case of a held-out domain.
std::vector<const datapipe::DatasetCase*> select_split(const std::vector<datapipe::DatasetCase>& cases,
                                                       const Run& run, const std::string& split) {
  const auto& held = run.cfg.train.held_out_domains;
  auto held_out = [&](const datapipe::DatasetCase& c) {
    return std::find(held.begin(), held.end(), c.domain_id) != held.end();
  };
  std::set<std::string> ids;
  if (split == "train" || split == "val" || split == "test") {
    if (run.split.is_null()) throw Error(ErrorKind::InvalidConfig, "run has no split.json");
    for (const auto& id : run.split.at(split)) ids.insert(id.get<std::string>());
  } else if (split != "held_out" && split != "all") {
    throw Error(ErrorKind::InvalidConfig, "unknown split '" + split + "'");
  }
  std::vector<const datapipe::DatasetCase*> out;
  for (const auto& c : cases) {
    const bool take = split == "all" || ids.count(c.case_id) ||
                      ((split == "test" || split == "held_out") && held_out(c));
    if (take) out.push_back(&c);
  }
  return out;
}

std::vector<eval::Point> mitosis_points(const datapipe::DatasetCase& c) {
  std::vector<eval::Point> pts;
  for (const auto& a : c.annotations)
    if (a.kind == datapipe::AnnotationKind::Mitosis) pts.push_back({a.x, a.y});
  return pts;
}

json prf_json(const eval::PrfReport& r) {
  json j;
  eval::to_json(j, r);
  return j;
}

void set_threads(int jobs) { training::configure_determinism(std::max(1, jobs)); }

json eval_detection(net::SegNet& model, const Run& run, const std::vector<const datapipe::DatasetCase*>& cases,
                    const fs::path& plot_dir, bool plots) {
  struct CaseOut {
    const datapipe::DatasetCase* c;
    std::vector<eval::Detection> dets;
    std::vector<eval::Point> gts;
    eval::MatchResult match;
  };
  std::vector<CaseOut> outs;
  for (const auto* c : cases) {
    auto res = infer::predict_region(model, c->image, run.cfg.infer, run.input_size, false, c->case_id);
    CaseOut o{c, std::move(res.detections), mitosis_points(*c), {}};
    o.match = eval::match_detections(o.dets, o.gts, c->image.spacing_um, eval::kHitRadiusUm);
    outs.push_back(std::move(o));
  }

  json per_case = json::array();
  std::map<int, std::vector<eval::MatchResult>> by_domain;
  std::vector<eval::MatchResult> all;
  for (const auto& o : outs) {
    json j = prf_json(eval::micro_f1(std::span(&o.match, 1)));
    j["case_id"] = o.c->case_id;
    j["domain_id"] = o.c->domain_id;
    j["n_detections"] = o.dets.size();
    per_case.push_back(j);
    by_domain[o.c->domain_id].push_back(o.match);
    all.push_back(o.match);
  }
  json per_domain = json::object();
  for (const auto& [d, results] : by_domain) per_domain[std::to_string(d)] = prf_json(eval::micro_f1(results));

  json report{{"hit_radius_um", eval::kHitRadiusUm},
              {"overall", prf_json(eval::micro_f1(all))},
              {"per_domain", per_domain},
              {"per_case", per_case}};

  if (plots) {
    std::set<double> scores;
    for (const auto& o : outs)
      for (const auto& d : o.dets) scores.insert(d.score);
    Series pr{"precision-recall", {}};
    for (double t : scores) {
      std::vector<eval::MatchResult> pooled;
      for (const auto& o : outs) {
        std::vector<eval::Detection> kept;
        for (const auto& d : o.dets)
          if (d.score >= t) kept.push_back(d);
        pooled.push_back(eval::match_detections(kept, o.gts, o.c->image.spacing_um, eval::kHitRadiusUm));
      }
      const auto r = eval::micro_f1(pooled);
      pr.points.push_back({r.recall, r.precision});
    }
    std::sort(pr.points.begin(), pr.points.end());
    PlotSpec spec{"Detection precision-recall", "recall", "precision"};
    write_line_plot(plot_dir / "pr_curve.svg", spec, {pr});
    report["plots"] = {"pr_curve.svg"};
  }
  return report;
}

json eval_classification(net::SegNet& model, const Run& run, const std::vector<const datapipe::DatasetCase*>& cases,
                         const fs::path& plot_dir, bool plots) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto* c : cases) {
    std::vector<eval::Point> pts;
    for (const auto& a : c->annotations) {
      if (a.kind != datapipe::AnnotationKind::Mitosis || !a.subtype) continue;
      pts.push_back({a.x, a.y});
      labels.push_back(*a.subtype == datapipe::Subtype::Atypical ? 1 : 0);
    }
    if (pts.empty()) continue;
    const auto p = infer::atypical_probabilities(model, c->image, pts, run.cfg.infer.cls_patch, run.input_size);
    scores.insert(scores.end(), p.begin(), p.end());
  }

  const double fixed_t = run.cfg.infer.cls_threshold;
  json fixed;
  eval::to_json(fixed, eval::balanced_accuracy(scores, labels, fixed_t));
  json report{{"n_figures", scores.size()}, {"fixed_threshold", fixed}};

  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (!both) {
    report["single_class"] = true;
    return report;
  }
  const auto sweep = eval::threshold_sweep(scores, labels);
  const auto best = eval::balanced_accuracy(scores, labels, sweep.best_threshold);
  json curve = json::array();
  for (const auto& [t, ba] : sweep.curve) curve.push_back({{"threshold", t}, {"ba", ba}});
  report["classification"] = {{"threshold", sweep.best_threshold},
                              {"sensitivity", best.sensitivity},
                              {"specificity", best.specificity},
                              {"ba", sweep.best_ba},
                              {"curve", curve}};
  report["single_class"] = false;

  if (plots) {
    Series s{"balanced accuracy", {}};
    for (const auto& [t, ba] : sweep.curve) s.points.push_back({t, ba});
    std::sort(s.points.begin(), s.points.end());
    PlotSpec spec{"Balanced accuracy vs threshold", "threshold", "balanced accuracy"};
    spec.marker_x = sweep.best_threshold;
    write_line_plot(plot_dir / "ba_curve.svg", spec, {s});
    report["plots"] = {"ba_curve.svg"};
  }
  return report;
}

}  // namespace

std::optional<uint64_t> seed_override() {
  const char* env = std::getenv("MITO_SEED");
  if (!env || !*env) return std::nullopt;
  uint64_t v = 0;
  const std::string s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::InvalidConfig, "MITO_SEED must be an unsigned integer, got '" + s + "'");
  }
  return v;
}

int cmd_synth(const SynthArgs& a) {
  datapipe::SynthConfig cfg;
  if (!a.config.empty()) {
    const json j = read_json(a.config);
    try {
      datapipe::from_json(j.contains("synth") ? j.at("synth") : j, cfg);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, a.config.string() + ": " + e.what());
    }
  }
  if (auto s = seed_override()) cfg.seed = *s;
  cfg.validate();
  std::cout << json{{"command", "synth"}, {"out", a.out.string()}, {"config", cfg}}.dump(2) << '\n';
  datapipe::write_dataset(a.out, datapipe::synth_dataset(cfg), cfg);
  return exit_code::kOk;
}

int cmd_pseudomask(const PseudomaskArgs& a) {
  imaging::PseudoMaskParams params;
  if (!a.params.empty()) {
    try {
      imaging::from_json(read_json(a.params), params);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, a.params.string() + ": " + e.what());
    }
  }
  params.validate();

  std::vector<datapipe::DatasetCase> cases;
  if (fs::exists(a.input / "manifest.json")) {
    cases = datapipe::read_dataset(a.input);
  } else if (fs::is_directory(a.input)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a.input)) {
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      datapipe::DatasetCase c;
      c.case_id = f.stem().string();
      c.image = io::read_rgb(f);
      cases.push_back(std::move(c));
    }
  }
  if (cases.empty()) throw Error(ErrorKind::Io, "no input images in " + a.input.string());

  fs::create_directories(a.out / "masks");
  std::vector<json> rows(cases.size());
  std::vector<double> ious(cases.size(), -1.0);
  parallel_for(cases.size(), a.jobs, [&](size_t i) {
    const auto& c = cases[i];
    const auto res = imaging::classical_pseudomask(c.image, params);
    io::write_binary_mask(a.out / "masks" / (c.case_id + ".png"), res.mask);
    size_t fg = 0;
    for (uint8_t v : res.mask.data) fg += v != 0;
    json row{{"case_id", c.case_id},
             {"mask", "masks/" + c.case_id + ".png"},
             {"foreground_fraction", static_cast<double>(fg) / static_cast<double>(res.mask.pixel_count())},
             {"warning", res.warning}};
    if (res.warning) row["message"] = res.message;
    if (c.truth) {
      size_t inter = 0, uni = 0;
      for (size_t k = 0; k < res.mask.data.size(); ++k) {
        const uint8_t t = c.truth->data[k];
        const bool g = t != Label::kBackground && t != Label::kIgnore;
        const bool p = res.mask.data[k] != 0;
        inter += g && p;
        uni += g || p;
      }
      ious[i] = uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
      row["iou"] = ious[i];
    }
    rows[i] = std::move(row);
  });

  json summary{{"params", params}, {"images", rows}};
  int warnings = 0;
  for (const auto& r : rows) warnings += r["warning"].get<bool>();
  summary["warnings"] = warnings;
  std::vector<double> have;
  for (double v : ious)
    if (v >= 0.0) have.push_back(v);
  if (!have.empty()) {
    double sum = 0.0;
    for (double v : have) sum += v;
    summary["mean_iou"] = sum / static_cast<double>(have.size());
  }
  write_json(a.out / "summary.json", summary);
  std::cout << json{{"command", "pseudomask"}, {"images", rows.size()}, {"warnings", warnings},
                    {"mean_iou", summary.value("mean_iou", json())}}
                   .dump()
            << '\n';
  return exit_code::kOk;
}

int cmd_tile(const TileArgs& a) {
  const auto cases = load_dataset(a.dataset.string());
  fs::create_directories(a.out / "images");
  fs::create_directories(a.out / "targets");
  std::vector<json> per_case(cases.size());
  parallel_for(cases.size(), a.jobs, [&](size_t i) {
    const auto& c = cases[i];
    const auto grid = datapipe::tile_region(c.image.width(), c.image.height(), a.tile_size, a.overlap);
    json tiles = json::array();
    for (const auto& o : grid.origins) {
      Image tile(a.tile_size, a.tile_size, c.image.spacing_um, c.domain_id);
      for (int y = 0; y < a.tile_size; ++y)
        for (int x = 0; x < a.tile_size; ++x)
          for (int ch = 0; ch < 3; ++ch) tile.rgb.at(x, y, ch) = c.image.rgb.at(o.x + x, o.y + y, ch);
      const auto target = datapipe::rasterize_targets(c.annotations, o, a.tile_size, a.tile_size, a.radius);
      const std::string name = c.case_id + "_" + std::to_string(o.x) + "_" + std::to_string(o.y) + ".png";
      io::write_rgb(a.out / "images" / name, tile);
      io::write_gray(a.out / "targets" / name, target);
      tiles.push_back({{"x", o.x}, {"y", o.y}, {"image", "images/" + name}, {"target", "targets/" + name}});
    }
    per_case[i] = {{"case_id", c.case_id}, {"domain_id", c.domain_id}, {"stride", grid.stride}, {"tiles", tiles}};
  });
  write_json(a.out / "tiles.json",
             {{"tile_size", a.tile_size}, {"overlap", a.overlap}, {"raster_radius", a.radius}, {"cases", per_case}});
  size_t n = 0;
  for (const auto& c : per_case) n += c["tiles"].size();
  std::cout << json{{"command", "tile"}, {"cases", cases.size()}, {"tiles", n}}.dump() << '\n';
  return exit_code::kOk;
}

int cmd_train(const TrainArgs& a) {
  if (a.track != 1 && a.track != 2) throw Error(ErrorKind::InvalidConfig, "track must be 1 or 2");
  RunConfig cfg = a.config.empty() ? RunConfig::for_track(a.track) : load_run_config(a.config, a.track);
  cfg.train.track = a.track;
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  if (!a.nuclei_dataset.empty()) cfg.nuclei_dataset = a.nuclei_dataset;
  if (a.jobs > 0) cfg.jobs = a.jobs;
  if (auto s = seed_override()) cfg.seed = cfg.train.seed = *s;
  if (!cfg.dataset.empty()) cfg.dataset = fs::absolute(cfg.dataset).lexically_normal().string();
  if (!cfg.nuclei_dataset.empty()) cfg.nuclei_dataset = fs::absolute(cfg.nuclei_dataset).lexically_normal().string();
  cfg.validate();

  std::cout << json{{"command", "train"}, {"out", a.out.string()}, {"config", cfg}}.dump(2) << '\n';
  const auto cases = load_dataset(cfg.dataset);
  std::vector<datapipe::DatasetCase> nuclei;
  if (!cfg.nuclei_dataset.empty()) nuclei = load_dataset(cfg.nuclei_dataset);

  const auto res = training::fit(cfg, cases, nuclei, a.out, a.quiet ? nullptr : &std::cerr);
  std::cout << json{{"best_epoch", res.best_epoch},
                    {"best_val_metric", res.best_metric},
                    {"epochs_run", res.epochs_run},
                    {"early_stopped", res.early_stopped},
                    {"teacher_syncs", res.sync_count},
                    {"checkpoint", res.best_checkpoint.string()}}
                   .dump()
            << '\n';
  return exit_code::kOk;
}

int cmd_eval(const EvalArgs& a) {
  Run run = load_run(a.run);
  if (a.jobs > 0) run.cfg.jobs = a.jobs;
  set_threads(run.cfg.jobs);
  const int track = a.track ? a.track : run.cfg.train.track;
  if (track != 1 && track != 2) throw Error(ErrorKind::InvalidConfig, "track must be 1 or 2");
  const auto cases = load_dataset(a.dataset.empty() ? run.cfg.dataset : a.dataset);
  const auto selected = select_split(cases, run, a.split);
  if (selected.empty()) throw Error(ErrorKind::InvalidConfig, "split '" + a.split + "' selects no cases");

  const fs::path out = a.out.empty() ? a.run / ("eval_" + a.split + ".json") : a.out;
  const fs::path plot_dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  fs::create_directories(plot_dir);
  auto& model = run.ckpt.model;
  model->eval();
  json report{{"track", track},
              {"split", a.split},
              {"n_cases", selected.size()},
              {"checkpoint_epoch", run.ckpt.meta.value("epoch", 0)},
              {"held_out_domains", run.cfg.train.held_out_domains}};
  if (track == 1) {
    report["detection"] = eval_detection(model, run, selected, plot_dir, a.plots);
  } else {
    report.update(eval_classification(model, run, selected, plot_dir, a.plots));
  }
  write_json(out, report);
  std::cout << report.dump(2) << '\n';
  return exit_code::kOk;
}

int cmd_infer(const InferArgs& a) {
  Run run = load_run(a.run);
  if (a.jobs > 0) run.cfg.jobs = a.jobs;
  set_threads(run.cfg.jobs);
  if (!fs::exists(a.image)) throw Error(ErrorKind::Io, "cannot read image " + a.image.string());
  const Image img = io::read_rgb(a.image, a.spacing_um);
  auto& model = run.ckpt.model;
  model->eval();
  const bool classify = run.cfg.train.track == 2;
  const auto res = infer::predict_region(model, img, run.cfg.infer, run.input_size, classify, a.image.stem().string());

  json out = json::array();
  for (size_t i = 0; i < res.detections.size(); ++i) {
    const auto& d = res.detections[i];
    json j{{"x", d.x}, {"y", d.y}, {"score", d.score}, {"subtype", nullptr}, {"subtype_prob", nullptr}};
    if (i < res.subtypes.size()) {
      j["subtype"] = res.subtypes[i].atypical ? "atypical" : "normal";
      j["subtype_prob"] = res.subtypes[i].probability;
    }
    out.push_back(j);
  }
  if (a.out.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    write_json(a.out, out);
  }
  return exit_code::kOk;
}

int cmd_report(const ReportArgs& a) {
  const json cfg = read_json(a.run / "config.json");
  std::ifstream in(a.run / "metrics.jsonl");
  if (!in) throw Error(ErrorKind::InvalidConfig, "run has no metrics.jsonl");

  Series loss{"total loss", {}}, val{"validation metric", {}};
  json epochs = json::array(), errors = json::array();
  int syncs = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::InvalidConfig, "malformed metrics.jsonl line");
    const auto type = j.value("type", std::string());
    if (type == "epoch") {
      const double e = j["epoch"].get<double>();
      loss.points.push_back({e, j["loss"].value("total", 0.0)});
      val.points.push_back({e, j["val_metric"].get<double>()});
      epochs.push_back({{"epoch", j["epoch"]}, {"val_metric", j["val_metric"]}, {"loss", j["loss"].value("total", 0.0)}});
    } else if (type == "sync") {
      ++syncs;
    } else if (type == "error") {
      errors.push_back(j);
    }
  }

  json report{{"run", a.run.string()}, {"config", cfg}, {"epochs", epochs}, {"teacher_syncs", syncs}, {"errors", errors}};
  if (fs::exists(a.run / "best.ckpt")) {
    const auto ck = net::load_checkpoint(a.run / "best.ckpt");
    report["parameter_count"] = net::parameter_count(*ck.model);
    report["best"] = ck.meta;
  }
  json evals = json::object();
  for (const auto& e : fs::directory_iterator(a.run)) {
    const auto name = e.path().filename().string();
    if (name.rfind("eval_", 0) == 0 && e.path().extension() == ".json") {
      evals[e.path().stem().string().substr(5)] = read_json(e.path());
    }
  }
  report["evaluations"] = evals;

  const fs::path out = a.out.empty() ? a.run / "report.json" : a.out;
  if (a.plots && !loss.points.empty()) {
    const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    fs::create_directories(dir);
    auto bounds = [](const Series& s) {
      double lo = s.points.front().second, hi = lo;
      for (const auto& p : s.points) lo = std::min(lo, p.second), hi = std::max(hi, p.second);
      if (hi <= lo) hi = lo + 1.0;
      return std::pair{std::min(lo, 0.0), hi};
    };
    PlotSpec ls{"Training loss", "epoch", "loss", 1.0, std::max(2.0, loss.points.back().first)};
    std::tie(ls.y_min, ls.y_max) = bounds(loss);
    write_line_plot(dir / "loss_curve.svg", ls, {loss});
    PlotSpec vs{"Validation metric", "epoch", "metric", 1.0, std::max(2.0, val.points.back().first), 0.0, 1.0};
    write_line_plot(dir / "val_curve.svg", vs, {val});
    report["plots"] = {"loss_curve.svg", "val_curve.svg"};
  }
  write_json(out, report);
  std::cout << json{{"command", "report"}, {"out", out.string()}, {"epochs", epochs.size()}, {"teacher_syncs", syncs}}
                   .dump()
            << '\n';
  return exit_code::kOk;
}

}  // namespace mito::cli
