#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "alsf/model.hpp"

namespace alsf {

// Interleaved row-major pixels, values in [0, 1].
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> pixels;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int ch, double fill = 0.0)
      : width(w), height(h), channels(ch),
        pixels(static_cast<std::size_t>(w) * h * ch, fill) {}

  double& at(int x, int y, int ch = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  double at(int x, int y, int ch = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
};

struct RegionMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> inside;  // row-major, nonzero = included

  RegionMask() = default;
  RegionMask(int w, int h, bool fill)
      : width(w), height(h), inside(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return inside[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { inside[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
};

// A square patch cut from an image (size x size x channels).
struct Patch {
  int size = 0;
  int channels = 1;
  int x = 0;  // top-left pixel in the source image
  int y = 0;
  std::vector<double> pixels;  // interleaved row-major like ImageBuffer

  double at(int px, int py, int ch = 0) const {
    return pixels[(static_cast<std::size_t>(py) * size + px) * channels + ch];
  }
};

struct PatchBatch {
  std::vector<Patch> patches;  // row-major over the grid
  int rows = 0;
  int cols = 0;
};

struct SynthSpec {
  int d = 100;
  int classes = 2;
  int class_subspace_dim = 5;
  int shared_subspace_dim = 3;
  double noise_sigma = 0.01;
  int patches_per_class = 400;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  TrainingSet set;
  std::vector<int> labels;           // class of each column of set.all_columns()
  std::vector<Matrix> class_bases;   // d x class_subspace_dim, orthonormal
  Matrix shared_basis;               // d x shared_subspace_dim
};

namespace data {

// PNG or TIFF (8- or 16-bit), scaled to [0, 1]. Alpha channels are dropped.
ImageBuffer load_image(const std::filesystem::path& path);
// Nonzero pixels are inside.
RegionMask load_mask(const std::filesystem::path& path);
// 16-bit PNG (or TIFF, by extension).
void save_image(const ImageBuffer& img, const std::filesystem::path& path);
void save_mask(const RegionMask& mask, const std::filesystem::path& path);

// 0.299 R + 0.587 G + 0.114 B; single-channel input is returned unchanged.
ImageBuffer to_grayscale(const ImageBuffer& img);

// Area-averaging resample to exactly target_w x target_h.
ImageBuffer downsample(const ImageBuffer& img, int target_w, int target_h);

// Centered rectangle covering the middle `fraction` of each dimension.
RegionMask center_mask(int width, int height, double fraction = 0.5);

// Valid top-left positions for a size x size patch: fully inside the image
// and, with a mask, fully inside the mask. stride restricts positions to
// multiples of stride (1 = every pixel).
std::vector<std::pair<int, int>> valid_placements(const ImageBuffer& img, int size,
                                                  const RegionMask* mask, int stride = 1);

Patch crop(const ImageBuffer& img, int x, int y, int size);

// n patches drawn uniformly with replacement over valid placements.
std::vector<Patch> extract_random_patches(const ImageBuffer& img, int n, int size,
                                          const RegionMask* mask, std::uint64_t seed,
                                          int stride = 1);

// Row-major non-overlapping grid; trailing remainder pixels are dropped.
PatchBatch extract_grid_patches(const ImageBuffer& img, int size);

// Column-major within a channel (row index fastest), channels concatenated.
Vector vectorize_patch(const Patch& patch);
Patch devectorize_patch(const Vector& v, int size, int channels);

Matrix patches_to_matrix(const std::vector<Patch>& patches);

TrainingSet build_training_set(const std::vector<std::vector<Patch>>& per_class);

// Deterministic per-image seed from the master seed and the image path.
std::uint64_t derive_seed(std::uint64_t master, std::string_view key);

SynthData synth_generate(const SynthSpec& spec);

}  // namespace data
}  // namespace alsf
