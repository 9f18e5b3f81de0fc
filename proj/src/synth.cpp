#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "alsf/commands.hpp"
#include "alsf/data.hpp"

namespace alsf::cli {
namespace {

struct CellRect {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
  bool contains(int r, int c) const {
    return r >= row && r < row + rows && c >= col && c < col + cols;
  }
};

}  // namespace

void render_synthetic_dataset(const config::SynthConfig& cfg,
                              const std::filesystem::path& out_manifest) {
  namespace fs = std::filesystem;
  const int C = cfg.spec.classes;
  const int P = cfg.patch_size;
  const int R = cfg.grid_rows;
  const int K = cfg.grid_cols;
  const int positive = C - 1;
  const int per_image = R * K;
  const int images_per_class = cfg.train_images_per_class + cfg.test_images_per_class;

  // Every cell of every image may come from any class, so this pool is
  // always large enough.
  SynthSpec spec = cfg.spec;
  spec.d = P * P;
  spec.patches_per_class = images_per_class * per_image * C;
  const SynthData synth = data::synth_generate(spec);

  double peak = 0.0;
  for (const auto& Y : synth.set.per_class) peak = std::max(peak, Y.cwiseAbs().maxCoeff());
  const double scale = peak > 0.0 ? 0.45 / peak : 0.0;

  fs::path dir = out_manifest.parent_path();
  if (dir.empty()) dir = ".";
  const fs::path image_dir = dir / "images";
  fs::create_directories(image_dir);

  std::mt19937_64 rng(data::derive_seed(spec.seed, "synth-layout"));
  std::vector<Index> cursor(C, 0);
  const int region_rows = std::max(1, R / 2);
  const int region_cols = std::max(1, K / 2);

  config::Manifest manifest;
  manifest.patch_size = P;
  manifest.patches_per_class = cfg.train_patches_per_class;
  manifest.channels = 1;
  manifest.rule = cfg.rule;
  manifest.seed = spec.seed;
  manifest.sampling_stride = P;
  for (int c = 0; c < C; ++c) manifest.classes.push_back({"class" + std::to_string(c), {}, {}, false});
  manifest.positive_class = manifest.classes[positive].name;

  for (const std::string split : {"train", "test"}) {
    const int count = split == "train" ? cfg.train_images_per_class : cfg.test_images_per_class;
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < count; ++i) {
        CellRect region;
        if (c == positive) {
          region.rows = region_rows;
          region.cols = region_cols;
          region.row = std::uniform_int_distribution<int>(0, R - region_rows)(rng);
          region.col = std::uniform_int_distribution<int>(0, K - region_cols)(rng);
        }
        ImageBuffer img(K * P, R * P, 1);
        for (int r = 0; r < R; ++r) {
          for (int k = 0; k < K; ++k) {
            int cls = c;
            if (c == positive && !region.contains(r, k)) {
              cls = positive == 1 ? 0 : std::uniform_int_distribution<int>(0, positive - 1)(rng);
            }
            const Vector v = synth.set.per_class[cls].col(cursor[cls]++);
            const Patch patch = data::devectorize_patch(v, P, 1);
            for (int y = 0; y < P; ++y) {
              for (int x = 0; x < P; ++x) {
                img.at(k * P + x, r * P + y) = 0.5 + scale * patch.at(x, y);
              }
            }
          }
        }
        const std::string stem =
            manifest.classes[c].name + "_" + split + "_" + std::to_string(i);
        config::ImageEntry entry;
        entry.image = image_dir / (stem + ".png");
        entry.key = "images/" + stem + ".png";
        data::save_image(img, entry.image);
        if (c == positive && split == "train") {
          RegionMask mask(K * P, R * P, false);
          for (int y = region.row * P; y < (region.row + region.rows) * P; ++y) {
            for (int x = region.col * P; x < (region.col + region.cols) * P; ++x) mask.set(x, y, true);
          }
          entry.mask = image_dir / (stem + "_mask.png");
          data::save_mask(mask, *entry.mask);
        }
        (split == "train" ? manifest.classes[c].train : manifest.classes[c].test).push_back(entry);
      }
    }
  }

  write_text_atomic(out_manifest, config::format_manifest(manifest, dir));
}

}  // namespace alsf::cli
