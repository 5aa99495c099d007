#pragma once

// Subcommand implementations for the `mito` tool. Each returns a process
// exit code and throws mito::Error for anything the caller maps to one.

#include <filesystem>
#include <optional>
#include <string>

namespace mito::cli {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kNumerical = 3;
}  // namespace exit_code

/// MITO_SEED, when set to an unsigned integer, replaces every configured seed.
std::optional<uint64_t> seed_override();

struct SynthArgs {
  std::filesystem::path config;  // optional; defaults used when empty
  std::filesystem::path out;
};
int cmd_synth(const SynthArgs& a);

struct PseudomaskArgs {
  std::filesystem::path input;  // dataset directory or directory of images
  std::filesystem::path out;
  std::filesystem::path params;  // optional PseudoMaskParams JSON
  int jobs = 1;
};
int cmd_pseudomask(const PseudomaskArgs& a);

struct TileArgs {
  std::filesystem::path dataset;
  std::filesystem::path out;
  int tile_size = 512;
  double overlap = 0.5;
  double radius = 12.0;
  int jobs = 1;
};
int cmd_tile(const TileArgs& a);

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  int track = 1;
  std::string dataset;  // overrides config.dataset when set
  std::string nuclei_dataset;
  int jobs = 0;  // 0 keeps the configured value
  bool quiet = false;
};
int cmd_train(const TrainArgs& a);

struct EvalArgs {
  std::filesystem::path run;
  std::string split = "test";
  int track = 0;  // 0 = from the run config
  std::string dataset;
  std::filesystem::path out;  // default run/eval_<split>.json
  bool plots = false;
  int jobs = 0;
};
int cmd_eval(const EvalArgs& a);

struct InferArgs {
  std::filesystem::path run;
  std::filesystem::path image;
  std::filesystem::path out;  // stdout when empty
  double spacing_um = 0.25;
  int jobs = 0;
};
int cmd_infer(const InferArgs& a);

struct ReportArgs {
  std::filesystem::path run;
  std::filesystem::path out;  // default run/report.json
  bool plots = false;
};
int cmd_report(const ReportArgs& a);

}  // namespace mito::cli
