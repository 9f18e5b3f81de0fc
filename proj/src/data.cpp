#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "alsf/data.hpp"

namespace alsf::data {

ImageBuffer to_grayscale(const ImageBuffer& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "to_grayscale expects 1 or 3 channels, got " + std::to_string(img.channels));
  }
  ImageBuffer out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    }
  }
  return out;
}

namespace {

// Row i holds the (source index, weight) pairs averaged into target pixel i.
std::vector<std::vector<std::pair<int, double>>> box_weights(int source, int target) {
  std::vector<std::vector<std::pair<int, double>>> w(target);
  const double scale = static_cast<double>(source) / target;
  for (int t = 0; t < target; ++t) {
    const double lo = t * scale;
    const double hi = (t + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(source - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int s = first; s <= last; ++s) {
      const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
      if (overlap > 0.0) w[t].emplace_back(s, overlap / scale);
    }
  }
  return w;
}

}  // namespace

ImageBuffer downsample(const ImageBuffer& img, int target_w, int target_h) {
  if (target_w < 1 || target_h < 1) {
    throw Error(ErrorCode::kInvalidArgument, "downsample target must be at least 1x1");
  }
  if (target_w > img.width || target_h > img.height) {
    throw Error(ErrorCode::kUpsampleRequested,
                std::to_string(img.width) + "x" + std::to_string(img.height) + " -> " +
                    std::to_string(target_w) + "x" + std::to_string(target_h));
  }
  if (target_w == img.width && target_h == img.height) return img;
  const auto wx = box_weights(img.width, target_w);
  const auto wy = box_weights(img.height, target_h);

  // Horizontal pass then vertical pass.
  ImageBuffer tmp(target_w, img.height, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < target_w; ++x) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (const auto& [s, w] : wx[x]) acc += w * img.at(s, y, ch);
        tmp.at(x, y, ch) = acc;
      }
    }
  }
  ImageBuffer out(target_w, target_h, img.channels);
  for (int y = 0; y < target_h; ++y) {
    for (int x = 0; x < target_w; ++x) {
      for (int ch = 0; ch < img.channels; ++ch) {
        double acc = 0.0;
        for (const auto& [s, w] : wy[y]) acc += w * tmp.at(x, s, ch);
        out.at(x, y, ch) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

RegionMask center_mask(int width, int height, double fraction) {
  RegionMask mask(width, height, false);
  const int mw = static_cast<int>(std::lround(width * fraction));
  const int mh = static_cast<int>(std::lround(height * fraction));
  const int x0 = (width - mw) / 2;
  const int y0 = (height - mh) / 2;
  for (int y = y0; y < y0 + mh; ++y) {
    for (int x = x0; x < x0 + mw; ++x) mask.set(x, y, true);
  }
  return mask;
}

std::vector<std::pair<int, int>> valid_placements(const ImageBuffer& img, int size,
                                                  const RegionMask* mask, int stride) {
  if (size < 1 || stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "patch size and stride must be >= 1");
  }
  if (mask != nullptr && (mask->width != img.width || mask->height != img.height)) {
    throw Error(ErrorCode::kDimensionMismatch, "mask dimensions differ from image dimensions");
  }
  std::vector<std::pair<int, int>> out;
  if (size > img.width || size > img.height) return out;
  const int nx = img.width - size + 1;
  const int ny = img.height - size + 1;

  // Summed-area table of excluded pixels; a placement is valid when its
  // window holds none.
  std::vector<int> excluded;
  if (mask != nullptr) {
    excluded.assign(static_cast<std::size_t>(img.width + 1) * (img.height + 1), 0);
    const int W = img.width + 1;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        excluded[(y + 1) * W + x + 1] = (mask->at(x, y) ? 0 : 1) + excluded[y * W + x + 1] +
                                        excluded[(y + 1) * W + x] - excluded[y * W + x];
      }
    }
  }
  auto clean = [&](int x, int y) {
    if (mask == nullptr) return true;
    const int W = img.width + 1;
    const int total = excluded[(y + size) * W + x + size] - excluded[y * W + x + size] -
                      excluded[(y + size) * W + x] + excluded[y * W + x];
    return total == 0;
  };
  for (int y = 0; y < ny; y += stride) {
    for (int x = 0; x < nx; x += stride) {
      if (clean(x, y)) out.emplace_back(x, y);
    }
  }
  return out;
}

Patch crop(const ImageBuffer& img, int x, int y, int size) {
  if (x < 0 || y < 0 || x + size > img.width || y + size > img.height) {
    throw Error(ErrorCode::kInvalidArgument, "crop window outside the image");
  }
  Patch p;
  p.size = size;
  p.channels = img.channels;
  p.x = x;
  p.y = y;
  p.pixels.resize(static_cast<std::size_t>(size) * size * img.channels);
  for (int py = 0; py < size; ++py) {
    const auto* row = &img.pixels[(static_cast<std::size_t>(y + py) * img.width + x) * img.channels];
    std::copy(row, row + static_cast<std::size_t>(size) * img.channels,
              p.pixels.begin() + static_cast<std::size_t>(py) * size * img.channels);
  }
  return p;
}

std::vector<Patch> extract_random_patches(const ImageBuffer& img, int n, int size,
                                          const RegionMask* mask, std::uint64_t seed,
                                          int stride) {
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "negative patch count");
  const auto positions = valid_placements(img, size, mask, stride);
  if (positions.empty()) {
    throw Error(ErrorCode::kNoValidPlacement,
                "no " + std::to_string(size) + "x" + std::to_string(size) +
                    " patch fits inside the image/mask");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, positions.size() - 1);
  std::vector<Patch> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto [x, y] = positions[pick(rng)];
    out.push_back(crop(img, x, y, size));
  }
  return out;
}

PatchBatch extract_grid_patches(const ImageBuffer& img, int size) {
  if (size < 1) throw Error(ErrorCode::kInvalidArgument, "patch size must be >= 1");
  const int rows = img.height / size;
  const int cols = img.width / size;
  if (rows < 1 || cols < 1) {
    throw Error(ErrorCode::kImageTooSmall,
                std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " image holds no complete " + std::to_string(size) + "-pixel patch");
  }
  PatchBatch batch;
  batch.rows = rows;
  batch.cols = cols;
  batch.patches.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) batch.patches.push_back(crop(img, c * size, r * size, size));
  }
  return batch;
}

Vector vectorize_patch(const Patch& patch) {
  const int s = patch.size;
  Vector v(static_cast<Index>(s) * s * patch.channels);
  Index i = 0;
  for (int ch = 0; ch < patch.channels; ++ch) {
    for (int x = 0; x < s; ++x) {
      for (int y = 0; y < s; ++y) v(i++) = patch.at(x, y, ch);
    }
  }
  return v;
}

Patch devectorize_patch(const Vector& v, int size, int channels) {
  if (v.size() != static_cast<Index>(size) * size * channels) {
    throw Error(ErrorCode::kDimensionMismatch, "vector length does not match patch shape");
  }
  Patch p;
  p.size = size;
  p.channels = channels;
  p.pixels.resize(v.size());
  Index i = 0;
  for (int ch = 0; ch < channels; ++ch) {
    for (int x = 0; x < size; ++x) {
      for (int y = 0; y < size; ++y) {
        p.pixels[(static_cast<std::size_t>(y) * size + x) * channels + ch] = v(i++);
      }
    }
  }
  return p;
}

Matrix patches_to_matrix(const std::vector<Patch>& patches) {
  if (patches.empty()) return Matrix();
  const Index d = static_cast<Index>(patches.front().size) * patches.front().size *
                  patches.front().channels;
  Matrix out(d, static_cast<Index>(patches.size()));
  for (std::size_t j = 0; j < patches.size(); ++j) {
    const Vector v = vectorize_patch(patches[j]);
    if (v.size() != d) throw Error(ErrorCode::kDimensionMismatch, "patches differ in shape");
    out.col(static_cast<Index>(j)) = v;
  }
  return out;
}

TrainingSet build_training_set(const std::vector<std::vector<Patch>>& per_class) {
  if (per_class.empty()) throw Error(ErrorCode::kEmptyClass, "no classes");
  std::vector<Matrix> blocks;
  blocks.reserve(per_class.size());
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c].empty()) {
      throw Error(ErrorCode::kEmptyClass, "class " + std::to_string(c) + " has no patches");
    }
    blocks.push_back(patches_to_matrix(per_class[c]));
  }
  return TrainingSet::from_classes(std::move(blocks));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view key) {
  // FNV-1a over the key, then a splitmix64 finalizer mixing in the master seed.
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char ch : key) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::uint64_t z = h ^ (master + 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace alsf::data

void alsf::SynthSpec::validate() const {
  if (d < 1 || classes < 1 || class_subspace_dim < 1 || shared_subspace_dim < 0 ||
      patches_per_class < 1) {
    throw Error(ErrorCode::kDimensionError, "synthetic spec has a non-positive dimension");
  }
  if (class_subspace_dim * classes + shared_subspace_dim > d) {
    throw Error(ErrorCode::kDimensionError,
                "class and shared subspaces do not fit in d = " + std::to_string(d));
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::kDimensionError, "noise_sigma must be finite and >= 0");
  }
}

namespace alsf::data {

SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int m = spec.class_subspace_dim;
  const int s = spec.shared_subspace_dim;
  const int total = m * spec.classes + s;

  Matrix raw(spec.d, total);
  for (Index j = 0; j < raw.cols(); ++j) {
    for (Index i = 0; i < raw.rows(); ++i) raw(i, j) = normal(rng);
  }
  const Eigen::HouseholderQR<Matrix> qr(raw);
  const Matrix Q = qr.householderQ() * Matrix::Identity(spec.d, total);

  SynthData out;
  out.class_bases.resize(spec.classes);
  for (int c = 0; c < spec.classes; ++c) out.class_bases[c] = Q.middleCols(c * m, m);
  out.shared_basis = Q.rightCols(s);

  auto unit_coefficients = [&](int k) {
    Vector a(k);
    for (int i = 0; i < k; ++i) a(i) = normal(rng);
    const double n = a.norm();
    return n > 0.0 ? Vector(a / n) : a;
  };

  std::vector<Matrix> blocks(spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    Matrix Y(spec.d, spec.patches_per_class);
    for (int j = 0; j < spec.patches_per_class; ++j) {
      Vector y = out.class_bases[c] * unit_coefficients(m);
      if (s > 0) y += out.shared_basis * unit_coefficients(s);
      if (spec.noise_sigma > 0.0) {
        for (Index i = 0; i < y.size(); ++i) y(i) += spec.noise_sigma * normal(rng);
      }
      Y.col(j) = y;
      out.labels.push_back(c);
    }
    blocks[c] = std::move(Y);
  }
  out.set = TrainingSet::from_classes(std::move(blocks));
  return out;
}

}  // namespace alsf::data
