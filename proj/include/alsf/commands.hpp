#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "alsf/classifier.hpp"
#include "alsf/config.hpp"
#include "alsf/trainer.hpp"

namespace alsf::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

// Maps a library error to the command exit status.
int exit_code_for(ErrorCode code);

// Load, convert to the requested channel count and downsample.
ImageBuffer prepare_image(const std::filesystem::path& path, int channels,
                          const std::optional<std::pair<int, int>>& downsample);

// Patches for every class of a manifest (train images only), spread evenly
// over each class's images with per-image seeds.
TrainingSet collect_training_set(const config::Manifest& manifest);

// Labels from the manifest class order.
std::vector<std::string> class_names(const config::Manifest& manifest);

PatchGrid classify_image(const ImageBuffer& img, int patch_size, const AlsfModel& model,
                         ResidualMode mode);

struct TrainOptions {
  std::filesystem::path manifest;
  std::filesystem::path config;  // empty = defaults
  std::filesystem::path out_model;
  std::filesystem::path report;  // empty = <out_model>.report.txt
  std::optional<std::uint64_t> seed;
};
int cmd_train(const TrainOptions& opts, std::ostream& log);

struct ClassifyOptions {
  std::filesystem::path model;
  std::filesystem::path input;  // image file or directory
  std::filesystem::path rule_config;  // empty = defaults
  std::filesystem::path out_csv;      // empty = write to `out`
};
int cmd_classify(const ClassifyOptions& opts, std::ostream& out, std::ostream& log);

struct ImageScore {
  std::string split;  // train / test
  std::string class_name;
  std::string path;
  double score = 0.0;
  bool positive_truth = false;
  bool positive_pred = false;
};

struct EvalResult {
  RuleKind rule = RuleKind::kRatio;
  std::string positive_class;
  double threshold = 0.0;
  double train_balanced_accuracy = 0.0;
  std::vector<std::string> row_labels;   // negative first, then positive
  std::vector<std::vector<double>> confusion;  // row-normalized, [true][pred]
  std::vector<ImageScore> images;
};

EvalResult run_eval(const AlsfModel& model, const config::Manifest& manifest);
std::string format_eval_report(const EvalResult& result);

struct EvalOptions {
  std::filesystem::path model;
  std::filesystem::path manifest;
  std::filesystem::path out_report;  // empty = write to `out`
};
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& log);

struct BenchOptions {
  std::filesystem::path model;  // empty = random model from the dimensions below
  int n_patches = 1300;
  int d = 400;
  int classes = 2;
  int k_per_class = 400;
  int k_shared = 100;
  int repetitions = 5;
  int baseline_iterations = 50;
  int baseline_patches = 32;  // baseline is timed on this many patches
  int patches_per_image = 130;
  std::uint64_t seed = 0;
};

struct BenchReport {
  int n_patches = 0;
  Index d = 0;
  Index total_atoms = 0;
  double alsf_seconds = 0.0;           // median, n patches, OpenMP path
  double alsf_serial_seconds = 0.0;    // median, n patches, serial reference
  double alsf_double_seconds = 0.0;    // median, 2n patches
  double baseline_per_patch = 0.0;     // median seconds per patch
  double alsf_per_patch = 0.0;
  double alsf_per_image = 0.0;
  double baseline_per_image = 0.0;
  double speedup = 0.0;
  double scaling_ratio = 0.0;          // time(2n) / time(n)
  std::uint64_t alsf_solver_invocations = 0;
  std::uint64_t baseline_solver_invocations = 0;
};

BenchReport run_bench(const BenchOptions& opts);
AlsfModel random_model(Index d, int classes, Index k_per_class, Index k_shared,
                       std::uint64_t seed);
int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& log);

struct SynthOptions {
  std::filesystem::path config;  // empty = defaults
  std::filesystem::path out_manifest;
  std::optional<std::uint64_t> seed;
};
// Renders a synthetic image dataset (16-bit PNG images, masks, manifest).
void render_synthetic_dataset(const config::SynthConfig& cfg,
                              const std::filesystem::path& out_manifest);
int cmd_synth(const SynthOptions& opts, std::ostream& log);

struct CvOptions {
  std::filesystem::path manifest;
  std::filesystem::path grid;
  std::filesystem::path out;  // best hyperparameters, config format; empty = skip
  std::optional<std::uint64_t> seed;
};
int cmd_cv(const CvOptions& opts, std::ostream& out, std::ostream& log);

std::string format_hyperparams(const Hyperparams& hp);

// Writes to a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace alsf::cli
