#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alsf/classifier.hpp"
#include "alsf/data.hpp"
#include "alsf/model.hpp"

namespace alsf::config {

// Line-oriented text format shared by every config file:
//
//   # comment
//   key = value
//   [section name]
//   key = value
//
// Keys may repeat (manifests list one image per `train =` / `test =` line).
struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string kind;  // "" for the leading global section
  std::string name;
  std::vector<Entry> entries;
};

std::vector<Section> parse_text(const std::string& text, const std::string& source = "<text>");
std::vector<Section> parse_file(const std::filesystem::path& path);

struct ImageEntry {
  std::filesystem::path image;
  std::optional<std::filesystem::path> mask;
  std::string key;  // path as written in the manifest; seeds per-image sampling
};

struct ClassEntry {
  std::string name;
  std::vector<ImageEntry> train;
  std::vector<ImageEntry> test;
  bool center_mask = false;
};

struct Manifest {
  std::vector<ClassEntry> classes;
  int patch_size = 20;
  int patches_per_class = 800;
  int channels = 1;  // 1 = grayscale, 3 = RGB
  std::optional<std::pair<int, int>> downsample;  // width, height
  RuleKind rule = RuleKind::kRatio;
  std::string positive_class;  // empty = last class
  std::uint64_t seed = 0;
  int sampling_stride = 1;
  ResidualMode residual_mode = ResidualMode::kSharedSubtracted;

  int positive_index() const;
  Index feature_dim() const {
    return static_cast<Index>(patch_size) * patch_size * channels;
  }
};

// Syntax and value errors throw ConfigError; image paths are resolved
// relative to the manifest directory and missing files throw IoError.
Manifest parse_manifest(const std::filesystem::path& path);
Manifest parse_manifest_text(const std::string& text, const std::filesystem::path& base_dir,
                             bool check_paths = true);
std::string format_manifest(const Manifest& manifest, const std::filesystem::path& base_dir);

Hyperparams parse_hyperparams(const std::vector<Section>& sections);
Hyperparams parse_hyperparams_file(const std::filesystem::path& path);

// Keys take comma-separated lists; the grid is their cartesian product in
// key order of appearance, with `folds` read separately.
struct CvGrid {
  std::vector<Hyperparams> points;
  int folds = 5;
};
CvGrid parse_grid(const std::vector<Section>& sections);

// Settings for `classify`: rule, positive class, threshold, patch geometry.
struct RuleConfig {
  DecisionRule rule;
  std::string positive_class;  // resolved against model labels when set
  int patch_size = 0;          // 0 = infer from model dimension
  int channels = 0;            // 0 = infer
  std::optional<std::pair<int, int>> downsample;
  ResidualMode residual_mode = ResidualMode::kSharedSubtracted;
};
RuleConfig parse_rule_config(const std::vector<Section>& sections);

// Settings for `synth`. Patches are patch_size x patch_size grayscale, so
// the feature dimension is patch_size^2.
struct SynthConfig {
  SynthSpec spec;
  int patch_size = 10;
  int grid_rows = 8;
  int grid_cols = 8;
  int train_images_per_class = 8;
  int test_images_per_class = 4;
  int train_patches_per_class = 400;
  RuleKind rule = RuleKind::kRatio;
};
SynthConfig parse_synth_config(const std::vector<Section>& sections);

std::string_view to_string(RuleKind kind);
std::string_view to_string(ResidualMode mode);

}  // namespace alsf::config
