#include "alsf/commands.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "alsf/data.hpp"
#include "alsf/model_file.hpp"
#include "alsf/sparse_coding.hpp"

namespace alsf::cli {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shortest text that round-trips the double.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Runs `body`, mapping library errors to exit codes with a message on `log`.
template <typename F>
int guarded(std::ostream& log, const char* command, F&& body) {
  try {
    return body();
  } catch (const Error& err) {
    log << command << ": " << err.what() << "\n";
    return exit_code_for(err.code());
  } catch (const fs::filesystem_error& err) {
    log << command << ": " << err.what() << "\n";
    return kExitData;
  }
}

bool is_image_path(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

RegionMask downsample_mask(const RegionMask& mask, int w, int h) {
  ImageBuffer img(mask.width, mask.height, 1);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) img.at(x, y) = mask.at(x, y) ? 1.0 : 0.0;
  }
  const ImageBuffer small = data::downsample(img, w, h);
  RegionMask out(w, h, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.set(x, y, small.at(x, y) >= 1.0 - 1e-9);
  }
  return out;
}

std::vector<Patch> class_patches(const config::Manifest& manifest, const config::ClassEntry& cls) {
  const int n = manifest.patches_per_class;
  const int m = static_cast<int>(cls.train.size());
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < m; ++i) {
    const int count = n / m + (i < n % m ? 1 : 0);
    if (count == 0) continue;
    const auto& entry = cls.train[i];
    const ImageBuffer raw = data::load_image(entry.image);
    ImageBuffer img = manifest.channels == 1 ? data::to_grayscale(raw) : raw;
    if (manifest.channels == 3 && img.channels != 3) {
      throw Error(ErrorCode::kDimensionMismatch, entry.image.string() + " is not an RGB image");
    }
    std::optional<RegionMask> mask;
    if (entry.mask) {
      mask = data::load_mask(*entry.mask);
      if (mask->width != raw.width || mask->height != raw.height) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "mask " + entry.mask->string() + " does not match its image size");
      }
    }
    if (manifest.downsample) {
      const auto [w, h] = *manifest.downsample;
      img = data::downsample(img, w, h);
      if (mask) mask = downsample_mask(*mask, w, h);
    }
    if (cls.center_mask) {
      const RegionMask center = data::center_mask(img.width, img.height);
      if (!mask) {
        mask = center;
      } else {
        for (std::size_t k = 0; k < mask->inside.size(); ++k) {
          mask->inside[k] = mask->inside[k] && center.inside[k];
        }
      }
    }
    auto patches = data::extract_random_patches(
        img, count, manifest.patch_size, mask ? &*mask : nullptr,
        data::derive_seed(manifest.seed, entry.key), manifest.sampling_stride);
    std::move(patches.begin(), patches.end(), std::back_inserter(out));
  }
  return out;
}

std::pair<int, int> infer_geometry(Index d, const config::RuleConfig& rc) {
  if (rc.patch_size > 0) {
    const int ch = rc.channels > 0 ? rc.channels
                                   : (static_cast<Index>(rc.patch_size) * rc.patch_size == d ? 1 : 3);
    if (static_cast<Index>(rc.patch_size) * rc.patch_size * ch != d) {
      throw Error(ErrorCode::kConfigError, "patch_size does not match the model dimension");
    }
    return {rc.patch_size, ch};
  }
  for (int ch : {1, 3}) {
    if (rc.channels > 0 && rc.channels != ch) continue;
    if (d % ch != 0) continue;
    const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d / ch))));
    if (static_cast<Index>(side) * side * ch == d) return {side, ch};
  }
  throw Error(ErrorCode::kConfigError,
              "cannot infer patch geometry from model dimension " + std::to_string(d));
}

int resolve_positive(const std::vector<std::string>& labels, const std::string& name) {
  if (name.empty()) return static_cast<int>(labels.size()) - 1;
  const auto it = std::find(labels.begin(), labels.end(), name);
  if (it == labels.end()) {
    throw Error(ErrorCode::kConfigError, "positive class '" + name + "' is not a model label");
  }
  return static_cast<int>(it - labels.begin());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
double timed_median(int reps, F&& body) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    body();
    t.push_back(seconds_since(t0));
  }
  return median(t);
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kWeightError:
      return kExitConfig;
    case ErrorCode::kNonFiniteInput:
    case ErrorCode::kRankError:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

ImageBuffer prepare_image(const fs::path& path, int channels,
                          const std::optional<std::pair<int, int>>& downsample) {
  ImageBuffer img = data::load_image(path);
  if (channels == 1) img = data::to_grayscale(img);
  else if (img.channels != 3) {
    throw Error(ErrorCode::kDimensionMismatch, path.string() + " is not an RGB image");
  }
  if (downsample) img = data::downsample(img, downsample->first, downsample->second);
  return img;
}

TrainingSet collect_training_set(const config::Manifest& manifest) {
  std::vector<std::vector<Patch>> per_class;
  for (const auto& cls : manifest.classes) {
    if (cls.train.empty()) {
      throw Error(ErrorCode::kInsufficientData, "class '" + cls.name + "' has no training images");
    }
    per_class.push_back(class_patches(manifest, cls));
  }
  return data::build_training_set(per_class);
}

std::vector<std::string> class_names(const config::Manifest& manifest) {
  std::vector<std::string> names;
  for (const auto& cls : manifest.classes) names.push_back(cls.name);
  return names;
}

PatchGrid classify_image(const ImageBuffer& img, int patch_size, const AlsfModel& model,
                         ResidualMode mode) {
  const PatchBatch batch = data::extract_grid_patches(img, patch_size);
  const Matrix Y = data::patches_to_matrix(batch.patches);
  if (Y.rows() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "patch dimension " + std::to_string(Y.rows()) + " does not match model dimension " +
                    std::to_string(model.dim()));
  }
  return classifier::classify_grid(Y, batch.rows, batch.cols, model, mode);
}

std::string format_hyperparams(const Hyperparams& hp) {
  std::ostringstream out;
  out << "eta = " << num(hp.eta) << "\n"
      << "eta1 = " << num(hp.eta1) << "\n"
      << "tau = " << num(hp.tau) << "\n"
      << "lambda1 = " << num(hp.lambda1) << "\n"
      << "lambda2 = " << num(hp.lambda2) << "\n"
      << "lambda3 = " << num(hp.lambda3) << "\n"
      << "k_per_class = " << hp.k_per_class << "\n"
      << "k_shared = " << hp.k_shared << "\n"
      << "max_iters = " << hp.max_iters << "\n"
      << "rel_tol = " << num(hp.rel_tol) << "\n"
      << "code_sweeps = " << hp.code_sweeps << "\n"
      << "ridge_a0 = " << num(hp.ridge_a0) << "\n"
      << "seed = " << hp.seed << "\n"
      << "joint_code_solve = " << (hp.joint_code_solve ? "true" : "false") << "\n"
      << "parallel_classes = " << (hp.parallel_classes ? "true" : "false") << "\n"
      << "block_order = "
      << (hp.block_order == ClassBlockOrder::kCodesAnalysisDict ? "codes-analysis-dict"
                                                                 : "codes-dict-analysis")
      << "\n";
  return out.str();
}

// ---------------------------------------------------------------- train

int cmd_train(const TrainOptions& opts, std::ostream& log) {
  return guarded(log, "train", [&] {
    const auto t_start = Clock::now();
    config::Manifest manifest = config::parse_manifest(opts.manifest);
    Hyperparams hp = opts.config.empty() ? Hyperparams{} : config::parse_hyperparams_file(opts.config);
    if (opts.seed) {
      hp.seed = *opts.seed;
      manifest.seed = *opts.seed;
    }
    if (manifest.classes.size() < 2) {
      throw Error(ErrorCode::kInsufficientData, "training needs at least two classes");
    }
    const TrainingSet set = collect_training_set(manifest);
    const double load_seconds = seconds_since(t_start);

    const auto t_train = Clock::now();
    TrainResult result = trainer::train(set, hp);
    const double train_seconds = seconds_since(t_train);
    result.model.labels = class_names(manifest);
    const TrainReport& rep = result.report;

    std::ostringstream r;
    r << "# alsf training report\n";
    r << "classes," << set.num_classes() << "\n";
    r << "feature_dim," << set.dim() << "\n";
    for (int c = 0; c < set.num_classes(); ++c) {
      r << "class," << result.model.labels[c] << ",patches," << set.count(c) << ",dict,"
        << result.model.class_dicts[c].rows() << "x" << result.model.class_dicts[c].cols() << "\n";
    }
    r << "shared_dict," << result.model.shared_dict.rows() << "x" << result.model.shared_dict.cols()
      << "\n";
    r << "iterations," << rep.iterations_run << "\n";
    r << "stop_reason," << to_string(rep.stop_reason) << "\n";
    r << "objective_initial," << num(rep.objective_trace.front()) << "\n";
    r << "objective_final," << num(rep.objective_trace.back()) << "\n";
    r << "\n[objective]\niteration,objective\n";
    for (std::size_t i = 0; i < rep.objective_trace.size(); ++i) {
      r << i << "," << num(rep.objective_trace[i]) << "\n";
    }
    r << "\n[warnings]\n";
    for (const auto& w : rep.warnings) r << w << "\n";
    r << "\n[timings]\n";
    r << "load_seconds," << fixed(load_seconds, 3) << "\n";
    r << "train_seconds," << fixed(train_seconds, 3) << "\n";

    fs::path report = opts.report;
    if (report.empty()) {
      report = opts.out_model;
      report += ".report.txt";
    }
    if (rep.stop_reason == StopReason::kDegenerate) {
      write_text_atomic(report, r.str());
      log << "train: objective became non-finite at iteration " << rep.iterations_run << "\n";
      return static_cast<int>(kExitNumerical);
    }
    model_file::save_model(result.model, opts.out_model);
    write_text_atomic(report, r.str());
    for (const auto& w : rep.warnings) log << "train: warning: " << w << "\n";
    log << "train: " << rep.iterations_run << " iterations, objective "
        << num(rep.objective_trace.front()) << " -> " << num(rep.objective_trace.back()) << "\n";
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------- classify

int cmd_classify(const ClassifyOptions& opts, std::ostream& out, std::ostream& log) {
  return guarded(log, "classify", [&] {
    const AlsfModel model = model_file::load_model(opts.model);
    config::RuleConfig rc;
    if (!opts.rule_config.empty()) rc = config::parse_rule_config(config::parse_file(opts.rule_config));
    rc.rule.positive_class = resolve_positive(model.labels, rc.positive_class);
    rc.rule.validate();
    const auto [patch_size, channels] = infer_geometry(model.dim(), rc);

    std::vector<fs::path> files;
    if (fs::is_directory(opts.input)) {
      for (const auto& e : fs::directory_iterator(opts.input)) {
        if (e.is_regular_file() && is_image_path(e.path())) files.push_back(e.path());
      }
    } else {
      files.push_back(opts.input);
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });

    std::ostringstream csv;
    csv << "path,grid_rows,grid_cols,positive_ratio,largest_region,score,decision,error\n";
    int succeeded = 0;
    for (const auto& file : files) {
      try {
        const ImageBuffer img = prepare_image(file, channels, rc.downsample);
        const PatchGrid grid = classify_image(img, patch_size, model, rc.residual_mode);
        const ImageDecision dec = classifier::decide_image(grid, rc.rule);
        csv << csv_field(file.string()) << "," << grid.rows << "," << grid.cols << ","
            << num(classifier::score_ratio(grid, rc.rule.positive_class)) << ","
            << classifier::score_largest_region(grid, rc.rule.positive_class) << ","
            << num(dec.score) << "," << (dec.positive ? "positive" : "negative") << ",\n";
        ++succeeded;
      } catch (const Error& err) {
        csv << csv_field(file.string()) << ",,,,,,," << csv_field(err.what()) << "\n";
        log << "classify: " << file.string() << ": " << err.what() << "\n";
      }
    }
    if (opts.out_csv.empty()) out << csv.str();
    else write_text_atomic(opts.out_csv, csv.str());
    if (succeeded == 0) {
      log << "classify: no image could be classified\n";
      return static_cast<int>(kExitData);
    }
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------- eval

EvalResult run_eval(const AlsfModel& model, const config::Manifest& manifest) {
  const auto names = class_names(manifest);
  if (names != model.labels) {
    throw Error(ErrorCode::kDimensionMismatch, "manifest classes do not match the model labels");
  }
  if (manifest.feature_dim() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "manifest patch geometry does not match the model");
  }
  const int C = static_cast<int>(names.size());
  const int pos = manifest.positive_index();
  DecisionRule rule;
  rule.kind = manifest.rule;
  rule.positive_class = pos;

  EvalResult res;
  res.rule = manifest.rule;
  res.positive_class = names[pos];
  for (const std::string split : {"train", "test"}) {
    for (int c = 0; c < C; ++c) {
      const auto& list = split == "train" ? manifest.classes[c].train : manifest.classes[c].test;
      for (const auto& entry : list) {
        const ImageBuffer img = prepare_image(entry.image, manifest.channels, manifest.downsample);
        const PatchGrid grid = classify_image(img, manifest.patch_size, model, manifest.residual_mode);
        ImageScore s;
        s.split = split;
        s.class_name = names[c];
        s.path = entry.key;
        s.score = classifier::score_image(grid, rule);
        s.positive_truth = c == pos;
        res.images.push_back(s);
      }
    }
  }

  std::vector<double> train_scores;
  std::vector<bool> train_truth;
  for (const auto& s : res.images) {
    if (s.split != "train") continue;
    train_scores.push_back(s.score);
    train_truth.push_back(s.positive_truth);
  }
  const auto fit = classifier::learn_threshold(train_scores, train_truth);
  res.threshold = fit.threshold;
  if (rule.kind == RuleKind::kConnectedRegion && std::isfinite(res.threshold)) {
    res.threshold = std::max(0.0, std::floor(res.threshold));
  }
  res.train_balanced_accuracy = classifier::balanced_accuracy(train_scores, train_truth, res.threshold);

  // Row 0 is the negative side, row 1 the positive class. With two classes
  // the rows follow manifest order instead.
  const bool positive_first = C == 2 && pos == 0;
  const std::string negative_name = C == 2 ? names[1 - pos] : "not_" + names[pos];
  res.row_labels = positive_first ? std::vector<std::string>{names[pos], negative_name}
                                  : std::vector<std::string>{negative_name, names[pos]};
  auto row_of = [&](bool positive) { return positive == positive_first ? 0 : 1; };
  std::vector<std::vector<double>> counts(2, std::vector<double>(2, 0.0));
  for (auto& s : res.images) {
    s.positive_pred = s.score > res.threshold;
    if (s.split == "test") counts[row_of(s.positive_truth)][row_of(s.positive_pred)] += 1.0;
  }
  for (int r = 0; r < 2; ++r) {
    const double total = counts[r][0] + counts[r][1];
    if (total == 0.0) {
      throw Error(ErrorCode::kDegenerateLabels,
                  "no test images for row '" + res.row_labels[r] + "'");
    }
    for (auto& v : counts[r]) v /= total;
  }
  res.confusion = counts;
  return res;
}

std::string format_eval_report(const EvalResult& res) {
  std::ostringstream r;
  r << "# alsf evaluation report\n";
  r << "rule," << config::to_string(res.rule) << "\n";
  r << "positive_class," << res.positive_class << "\n";
  r << "threshold," << num(res.threshold) << "\n";
  r << "train_balanced_accuracy," << num(res.train_balanced_accuracy) << "\n";
  r << "\n[confusion]\ntrue\\predicted";
  for (const auto& l : res.row_labels) r << "," << l;
  r << "\n";
  for (std::size_t i = 0; i < res.row_labels.size(); ++i) {
    r << res.row_labels[i];
    for (double v : res.confusion[i]) r << "," << fixed(v, 3);
    r << "\n";
  }
  r << "\n[images]\nsplit,class,path,score,truth,prediction\n";
  for (const auto& s : res.images) {
    r << s.split << "," << csv_field(s.class_name) << "," << csv_field(s.path) << ","
      << num(s.score) << "," << (s.positive_truth ? "positive" : "negative") << ","
      << (s.positive_pred ? "positive" : "negative") << "\n";
  }
  return r.str();
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& log) {
  return guarded(log, "eval", [&] {
    const AlsfModel model = model_file::load_model(opts.model);
    const config::Manifest manifest = config::parse_manifest(opts.manifest);
    const std::string report = format_eval_report(run_eval(model, manifest));
    if (opts.out_report.empty()) out << report;
    else write_text_atomic(opts.out_report, report);
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------- bench

AlsfModel random_model(Index d, int classes, Index k_per_class, Index k_shared,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Index r, Index c) {
    Matrix M(r, c);
    for (Index j = 0; j < c; ++j) {
      for (Index i = 0; i < r; ++i) M(i, j) = normal(rng);
    }
    return M;
  };
  const double a_scale = 1.0 / std::sqrt(static_cast<double>(d));
  AlsfModel m;
  for (int c = 0; c < classes; ++c) {
    m.class_dicts.push_back(numerics::project_columns_unit(gaussian(d, k_per_class)));
    m.class_analysis.push_back(gaussian(k_per_class, d) * a_scale);
    m.labels.push_back("class" + std::to_string(c));
  }
  m.shared_dict = numerics::project_columns_unit(gaussian(d, k_shared));
  m.shared_analysis = gaussian(k_shared, d) * a_scale;
  return m;
}

BenchReport run_bench(const BenchOptions& opts) {
  if (opts.n_patches < 1 || opts.d < 1 || opts.classes < 1 || opts.k_per_class < 1 ||
      opts.k_shared < 0 || opts.repetitions < 1 || opts.baseline_iterations < 1 ||
      opts.baseline_patches < 1 || opts.patches_per_image < 1) {
    throw Error(ErrorCode::kConfigError, "bench dimensions and counts must be positive");
  }
  const AlsfModel model = opts.model.empty()
                              ? random_model(opts.d, opts.classes, opts.k_per_class,
                                             opts.k_shared, opts.seed)
                              : model_file::load_model(opts.model);
  const Index d = model.dim();
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix Y(d, 2 * static_cast<Index>(opts.n_patches));
  for (Index j = 0; j < Y.cols(); ++j) {
    for (Index i = 0; i < d; ++i) Y(i, j) = unif(rng);
  }
  const Matrix Yn = Y.leftCols(opts.n_patches);

  BenchReport rep;
  rep.n_patches = opts.n_patches;
  rep.d = d;
  rep.total_atoms = model.total_atoms();

  const auto before = numerics::solver_invocations();
  classifier::classify_batch(Yn, model);  // warm-up
  rep.alsf_seconds = timed_median(opts.repetitions, [&] { classifier::classify_batch(Yn, model); });
  rep.alsf_serial_seconds =
      timed_median(opts.repetitions, [&] { classifier::classify_batch_serial(Yn, model); });
  rep.alsf_double_seconds =
      timed_median(opts.repetitions, [&] { classifier::classify_batch(Y, model); });
  rep.alsf_solver_invocations = numerics::solver_invocations() - before;

  const Index nb = std::min<Index>(opts.baseline_patches, opts.n_patches);
  const Matrix Yb = Yn.leftCols(nb);
  sparse_coding::LassoOptions lasso;
  lasso.iterations = opts.baseline_iterations;
  const auto before_baseline = numerics::solver_invocations();
  const double baseline = timed_median(
      opts.repetitions, [&] { sparse_coding::classify_batch_iterative(Yb, model, lasso); });
  rep.baseline_solver_invocations = numerics::solver_invocations() - before_baseline;

  rep.baseline_per_patch = baseline / static_cast<double>(nb);
  rep.alsf_per_patch = rep.alsf_seconds / opts.n_patches;
  rep.alsf_per_image = rep.alsf_per_patch * opts.patches_per_image;
  rep.baseline_per_image = rep.baseline_per_patch * opts.patches_per_image;
  rep.speedup = rep.baseline_per_patch / rep.alsf_per_patch;
  rep.scaling_ratio = rep.alsf_double_seconds / rep.alsf_seconds;
  return rep;
}

int cmd_bench(const BenchOptions& opts, std::ostream& out, std::ostream& log) {
  return guarded(log, "bench", [&] {
    const BenchReport r = run_bench(opts);
    out << "# alsf benchmark\n"
        << "n_patches," << r.n_patches << "\n"
        << "d," << r.d << "\n"
        << "total_atoms," << r.total_atoms << "\n"
        << "threads," << omp_get_max_threads() << "\n"
        << "alsf_solver_invocations," << r.alsf_solver_invocations << "\n"
        << "baseline_solver_invocations," << r.baseline_solver_invocations << "\n"
        << "\n[timings]\n"
        << "alsf_seconds," << num(r.alsf_seconds) << "\n"
        << "alsf_serial_seconds," << num(r.alsf_serial_seconds) << "\n"
        << "alsf_double_seconds," << num(r.alsf_double_seconds) << "\n"
        << "alsf_per_patch," << num(r.alsf_per_patch) << "\n"
        << "baseline_per_patch," << num(r.baseline_per_patch) << "\n"
        << "alsf_per_image," << num(r.alsf_per_image) << "\n"
        << "baseline_per_image," << num(r.baseline_per_image) << "\n"
        << "speedup," << fixed(r.speedup, 2) << "\n"
        << "scaling_ratio," << fixed(r.scaling_ratio, 3) << "\n";
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------- synth

int cmd_synth(const SynthOptions& opts, std::ostream& log) {
  return guarded(log, "synth", [&] {
    config::SynthConfig cfg =
        opts.config.empty() ? config::SynthConfig{} : config::parse_synth_config(config::parse_file(opts.config));
    if (opts.seed) cfg.spec.seed = *opts.seed;
    try {
      SynthSpec probe = cfg.spec;
      probe.d = cfg.patch_size * cfg.patch_size;
      probe.patches_per_class = 1;
      probe.validate();
    } catch (const Error& err) {
      throw Error(ErrorCode::kConfigError, err.what());
    }
    render_synthetic_dataset(cfg, opts.out_manifest);
    log << "synth: wrote " << opts.out_manifest.string() << "\n";
    return static_cast<int>(kExitOk);
  });
}

// ---------------------------------------------------------------- cv

int cmd_cv(const CvOptions& opts, std::ostream& out, std::ostream& log) {
  return guarded(log, "cv", [&] {
    config::Manifest manifest = config::parse_manifest(opts.manifest);
    config::CvGrid grid = config::parse_grid(config::parse_file(opts.grid));
    if (grid.folds < 2) throw Error(ErrorCode::kConfigError, "folds must be >= 2");
    std::uint64_t seed = manifest.seed;
    if (opts.seed) {
      seed = *opts.seed;
      manifest.seed = seed;
      for (auto& hp : grid.points) hp.seed = seed;
    }
    if (manifest.classes.size() < 2) {
      throw Error(ErrorCode::kInsufficientData, "cross-validation needs at least two classes");
    }
    const TrainingSet set = collect_training_set(manifest);
    const auto cv = trainer::cross_validate(set, grid.points, grid.folds, seed, manifest.residual_mode);

    std::ostringstream r;
    r << "# alsf cross-validation\nfolds," << grid.folds << "\n\n[grid]\nindex,eta,tau,lambda1,lambda2,"
         "lambda3,k_per_class,k_shared,mean_accuracy";
    for (int f = 0; f < grid.folds; ++f) r << ",fold" << f;
    r << "\n";
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
      const auto& hp = grid.points[i];
      r << i << "," << num(hp.eta) << "," << num(hp.tau) << "," << num(hp.lambda1) << ","
        << num(hp.lambda2) << "," << num(hp.lambda3) << "," << hp.k_per_class << ","
        << hp.k_shared << "," << num(cv.mean_scores[i]);
      for (double s : cv.fold_scores[i]) r << "," << num(s);
      r << "\n";
    }
    r << "\nbest_index," << cv.best_index << "\n";
    out << r.str();
    if (!opts.out.empty()) write_text_atomic(opts.out, format_hyperparams(cv.best));
    return static_cast<int>(kExitOk);
  });
}

}  // namespace alsf::cli
