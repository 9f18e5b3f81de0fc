#include <omp.h>

#include <CLI11.hpp>
#include <iostream>

#include "alsf/commands.hpp"

using namespace alsf::cli;

int main(int argc, char** argv) {
  CLI::App app{"Analysis-synthesis dictionary learning for patch-based image classification"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string config;
  app.add_option("--seed", seed, "Master random seed (overrides config files)");
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--config", config, "Command config file (hyperparameters, rule, synth spec or grid)");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Learn a model from a dataset manifest");
  train_cmd->add_option("manifest", train.manifest, "Dataset manifest")->required();
  train_cmd->add_option("-o,--out", train.out_model, "Output model file")->required();
  train_cmd->add_option("--report", train.report, "Report path (default <out>.report.txt)");

  ClassifyOptions classify;
  auto* classify_cmd = app.add_subcommand("classify", "Classify an image or a directory of images");
  classify_cmd->add_option("model", classify.model, "Model file")->required();
  classify_cmd->add_option("input", classify.input, "Image file or directory")->required();
  classify_cmd->add_option("-o,--out", classify.out_csv, "CSV output (default stdout)");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Learn a threshold on train images, report test confusion");
  eval_cmd->add_option("model", eval.model, "Model file")->required();
  eval_cmd->add_option("manifest", eval.manifest, "Labeled dataset manifest")->required();
  eval_cmd->add_option("-o,--out", eval.out_report, "Report output (default stdout)");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time the classifier against an iterative baseline");
  bench_cmd->add_option("--model", bench.model, "Model file (default: random model)");
  bench_cmd->add_option("-n,--patches", bench.n_patches, "Patches per timed batch");
  bench_cmd->add_option("-d,--dim", bench.d, "Feature dimension for the random model");
  bench_cmd->add_option("--classes", bench.classes, "Classes in the random model");
  bench_cmd->add_option("--k-class", bench.k_per_class, "Atoms per class");
  bench_cmd->add_option("--k-shared", bench.k_shared, "Shared atoms");
  bench_cmd->add_option("-r,--repetitions", bench.repetitions, "Timed repetitions");
  bench_cmd->add_option("--baseline-iterations", bench.baseline_iterations,
                        "Coordinate-descent iterations per patch");
  bench_cmd->add_option("--baseline-patches", bench.baseline_patches,
                        "Patches timed on the baseline path");
  bench_cmd->add_option("--patches-per-image", bench.patches_per_image,
                        "Patches per image for per-image figures");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic image dataset and manifest");
  synth_cmd->add_option("out_manifest", synth.out_manifest, "Manifest path to write")->required();

  CvOptions cv;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate a hyperparameter grid");
  cv_cmd->add_option("manifest", cv.manifest, "Dataset manifest")->required();
  cv_cmd->add_option("grid", cv.grid, "Grid file (comma-separated values per key)")->required();
  cv_cmd->add_option("-o,--out", cv.out, "Write the best hyperparameters here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (threads > 0) omp_set_num_threads(threads);

  if (*train_cmd) {
    train.config = config;
    train.seed = seed;
    return cmd_train(train, std::cerr);
  }
  if (*classify_cmd) {
    classify.rule_config = config;
    return cmd_classify(classify, std::cout, std::cerr);
  }
  if (*eval_cmd) return cmd_eval(eval, std::cout, std::cerr);
  if (*bench_cmd) {
    if (seed) bench.seed = *seed;
    return cmd_bench(bench, std::cout, std::cerr);
  }
  if (*synth_cmd) {
    synth.config = config;
    synth.seed = seed;
    return cmd_synth(synth, std::cerr);
  }
  cv.seed = seed;
  return cmd_cv(cv, std::cout, std::cerr);
}
