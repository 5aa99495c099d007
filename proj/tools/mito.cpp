// mito: batch pipeline for synthetic data, pseudo-masks, training, evaluation
// and inference. Exit codes: 0 success, 2 usage/config, 3 numerical failure.

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mito/error.hpp"

namespace cli = mito::cli;

int main(int argc, char** argv) {
  CLI::App app{"Mitotic figure detection and subtyping pipeline"};
  app.require_subcommand(1);

  cli::SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic multi-domain dataset");
  s->add_option("-c,--config", synth.config, "SynthConfig JSON (defaults when omitted)")->check(CLI::ExistingFile);
  s->add_option("-o,--out", synth.out, "Output dataset directory")->required();

  cli::PseudomaskArgs pm;
  auto* p = app.add_subcommand("pseudomask", "Classical nuclei pseudo-masks for a directory of images");
  p->add_option("-i,--input", pm.input, "Dataset directory or directory of images")->required();
  p->add_option("-o,--out", pm.out, "Output directory")->required();
  p->add_option("-p,--params", pm.params, "PseudoMaskParams JSON")->check(CLI::ExistingFile);
  p->add_option("-j,--jobs", pm.jobs, "Worker threads")->check(CLI::PositiveNumber);

  cli::TileArgs tile;
  auto* t = app.add_subcommand("tile", "Cut dataset regions into overlapping tiles with target masks");
  t->add_option("-d,--dataset", tile.dataset, "Dataset directory")->required();
  t->add_option("-o,--out", tile.out, "Output directory")->required();
  t->add_option("--tile-size", tile.tile_size, "Tile side in pixels")->check(CLI::PositiveNumber);
  t->add_option("--overlap", tile.overlap, "Fractional overlap")->check(CLI::Range(0.0, 0.95));
  t->add_option("--radius", tile.radius, "Target disk radius in pixels")->check(CLI::PositiveNumber);
  t->add_option("-j,--jobs", tile.jobs, "Worker threads")->check(CLI::PositiveNumber);

  cli::TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a model and write a run directory");
  tr->add_option("-c,--config", train.config, "RunConfig JSON (track defaults when omitted)")->check(CLI::ExistingFile);
  tr->add_option("-o,--out", train.out, "Run directory")->required();
  tr->add_option("-t,--track", train.track, "1 = detection, 2 = subtyping")->check(CLI::IsMember({1, 2}));
  tr->add_option("-d,--dataset", train.dataset, "Dataset directory (overrides config)");
  tr->add_option("--nuclei-dataset", train.nuclei_dataset, "Nuclei dataset for the warm-up");
  tr->add_option("-j,--jobs", train.jobs, "Compute threads")->check(CLI::PositiveNumber);
  tr->add_flag("-q,--quiet", train.quiet, "No per-epoch log on stderr");

  cli::EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a run's best checkpoint");
  e->add_option("-r,--run", ev.run, "Run directory")->required();
  e->add_option("-s,--split", ev.split, "train | val | test | held_out | all (test includes held-out domains)");
  e->add_option("-t,--track", ev.track, "Override the run's track")->check(CLI::IsMember({1, 2}));
  e->add_option("-d,--dataset", ev.dataset, "Dataset directory (defaults to the run's)");
  e->add_option("-o,--out", ev.out, "Report path (default <run>/eval_<split>.json)");
  e->add_flag("--plots", ev.plots, "Write SVG curves next to the report");
  e->add_option("-j,--jobs", ev.jobs, "Compute threads")->check(CLI::PositiveNumber);

  cli::InferArgs inf;
  auto* in = app.add_subcommand("infer", "Detect (and subtype) mitotic figures in one image");
  in->add_option("-r,--run", inf.run, "Run directory")->required();
  in->add_option("-i,--image", inf.image, "Input RGB image")->required();
  in->add_option("-o,--out", inf.out, "Detections JSON (stdout when omitted)");
  in->add_option("--spacing", inf.spacing_um, "Pixel spacing in micrometres")->check(CLI::PositiveNumber);
  in->add_option("-j,--jobs", inf.jobs, "Compute threads")->check(CLI::PositiveNumber);

  cli::ReportArgs rep;
  auto* r = app.add_subcommand("report", "Summarize a run directory");
  r->add_option("-r,--run", rep.run, "Run directory")->required();
  r->add_option("-o,--out", rep.out, "Report path (default <run>/report.json)");
  r->add_flag("--plots", rep.plots, "Write SVG training curves");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return cli::exit_code::kUsage;
  }

  try {
    if (*s) return cli::cmd_synth(synth);
    if (*p) return cli::cmd_pseudomask(pm);
    if (*t) return cli::cmd_tile(tile);
    if (*tr) return cli::cmd_train(train);
    if (*e) return cli::cmd_eval(ev);
    if (*in) return cli::cmd_infer(inf);
    if (*r) return cli::cmd_report(rep);
  } catch (const mito::Error& ex) {
    std::cerr << "mito: " << ex.what() << '\n';
    const auto k = ex.kind();
    if (k == mito::ErrorKind::NonFiniteLoss || k == mito::ErrorKind::NonFinitePart) return cli::exit_code::kNumerical;
    return cli::exit_code::kUsage;
  } catch (const std::exception& ex) {
    std::cerr << "mito: " << ex.what() << '\n';
    return 1;
  }
  return cli::exit_code::kUsage;
}
