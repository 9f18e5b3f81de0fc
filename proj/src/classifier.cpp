#include "alsf/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace alsf::classifier {
namespace {

constexpr Index kBlockCols = 256;

void check_dim(const Matrix& Y, const AlsfModel& model) {
  if (Y.rows() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "patch length " + std::to_string(Y.rows()) + " differs from model dimension " +
                    std::to_string(model.dim()));
  }
}

// Best class and margin from one column of residuals.
template <typename Residuals>
std::pair<int, double> pick(const Residuals& res) {
  int best = 0;
  for (Index c = 1; c < res.size(); ++c) {
    if (res(c) < res(best)) best = static_cast<int>(c);
  }
  double second = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < res.size(); ++c) {
    if (c != best) second = std::min(second, res(c));
  }
  const double margin = res.size() > 1 ? second - res(best) : 0.0;
  return {best, margin};
}

// Residuals of every class for a block of columns, computed with GEMMs.
Matrix block_residuals(const Eigen::Ref<const Matrix>& Y, const AlsfModel& model,
                       ResidualMode mode) {
  const int C = model.num_classes();
  Matrix base = Y;
  if (mode == ResidualMode::kSharedSubtracted && model.shared_size() > 0) {
    base.noalias() -= model.shared_dict * (model.shared_analysis * Y);
  }
  Matrix res(C, Y.cols());
  for (int c = 0; c < C; ++c) {
    Matrix r = base;
    r.noalias() -= model.class_dicts[c] * (model.class_analysis[c] * Y);
    res.row(c) = r.colwise().squaredNorm();
  }
  return res;
}

}  // namespace

int classify_patch(const Vector& y, const AlsfModel& model, ResidualMode mode) {
  const CodeSlices slices = extract_code(y, model);
  Vector res(model.num_classes());
  for (int c = 0; c < model.num_classes(); ++c) {
    res(c) = class_residual(y, model, slices, c, mode);
  }
  return pick(res).first;
}

BatchLabels classify_batch_serial(const Matrix& Y, const AlsfModel& model, ResidualMode mode) {
  check_dim(Y, model);
  BatchLabels out;
  out.labels.resize(Y.cols());
  out.margins.resize(Y.cols());
  Vector res(model.num_classes());
  for (Index j = 0; j < Y.cols(); ++j) {
    const Vector y = Y.col(j);
    const CodeSlices slices = extract_code(y, model);
    for (int c = 0; c < model.num_classes(); ++c) {
      res(c) = class_residual(y, model, slices, c, mode);
    }
    const auto [label, margin] = pick(res);
    out.labels[j] = label;
    out.margins[j] = margin;
  }
  return out;
}

BatchLabels classify_batch(const Matrix& Y, const AlsfModel& model, ResidualMode mode) {
  check_dim(Y, model);
  const Index n = Y.cols();
  BatchLabels out;
  out.labels.resize(n);
  out.margins.resize(n);
  const Index blocks = (n + kBlockCols - 1) / kBlockCols;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index start = b * kBlockCols;
    const Index width = std::min(kBlockCols, n - start);
    const Matrix res = block_residuals(Y.middleCols(start, width), model, mode);
    for (Index j = 0; j < width; ++j) {
      const auto [label, margin] = pick(res.col(j));
      out.labels[start + j] = label;
      out.margins[start + j] = margin;
    }
  }
  return out;
}

PatchGrid classify_grid(const Matrix& patches, int rows, int cols, const AlsfModel& model,
                        ResidualMode mode) {
  if (rows < 1 || cols < 1 || patches.cols() != static_cast<Index>(rows) * cols) {
    throw Error(ErrorCode::kShapeMismatch,
                std::to_string(patches.cols()) + " patches do not fill a " +
                    std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  BatchLabels batch = classify_batch(patches, model, mode);
  PatchGrid grid;
  grid.rows = rows;
  grid.cols = cols;
  grid.labels = std::move(batch.labels);
  grid.margins = std::move(batch.margins);
  return grid;
}

double score_ratio(const PatchGrid& grid, int positive_class) {
  if (grid.size() == 0) throw Error(ErrorCode::kEmptyGrid, "score_ratio on an empty grid");
  const auto hits = std::count(grid.labels.begin(), grid.labels.end(), positive_class);
  return static_cast<double>(hits) / static_cast<double>(grid.size());
}

int score_largest_region(const PatchGrid& grid, int positive_class) {
  if (grid.size() == 0) {
    throw Error(ErrorCode::kEmptyGrid, "score_largest_region on an empty grid");
  }
  std::vector<char> seen(grid.size(), 0);
  std::vector<int> stack;
  int best = 0;
  for (int r0 = 0; r0 < grid.rows; ++r0) {
    for (int c0 = 0; c0 < grid.cols; ++c0) {
      const int start = r0 * grid.cols + c0;
      if (seen[start] || grid.labels[start] != positive_class) continue;
      int size = 0;
      seen[start] = 1;
      stack.push_back(start);
      while (!stack.empty()) {
        const int cell = stack.back();
        stack.pop_back();
        ++size;
        const int r = cell / grid.cols;
        const int c = cell % grid.cols;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = r + dr;
            const int nc = c + dc;
            if (nr < 0 || nr >= grid.rows || nc < 0 || nc >= grid.cols) continue;
            const int next = nr * grid.cols + nc;
            if (seen[next] || grid.labels[next] != positive_class) continue;
            seen[next] = 1;
            stack.push_back(next);
          }
        }
      }
      best = std::max(best, size);
    }
  }
  return best;
}

}  // namespace alsf::classifier

void alsf::DecisionRule::validate() const {
  if (std::isnan(threshold)) throw Error(ErrorCode::kConfigError, "threshold is NaN");
  if (positive_class < 0) throw Error(ErrorCode::kConfigError, "positive class must be >= 0");
  if (std::isinf(threshold)) return;
  if (kind == RuleKind::kRatio && (threshold < 0.0 || threshold > 1.0)) {
    throw Error(ErrorCode::kConfigError, "ratio threshold must lie in [0, 1]");
  }
  if (kind == RuleKind::kConnectedRegion &&
      (threshold < 0.0 || threshold != std::floor(threshold))) {
    throw Error(ErrorCode::kConfigError, "region threshold must be an integer >= 0");
  }
}

namespace alsf::classifier {

double score_image(const PatchGrid& grid, const DecisionRule& rule) {
  return rule.kind == RuleKind::kRatio
             ? score_ratio(grid, rule.positive_class)
             : static_cast<double>(score_largest_region(grid, rule.positive_class));
}

double balanced_accuracy(const std::vector<double>& scores, const std::vector<bool>& positive,
                         double threshold) {
  std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    if (positive[i]) {
      ++pos;
      tp += predicted;
    } else {
      ++neg;
      tn += !predicted;
    }
  }
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::kDegenerateLabels, "balanced accuracy needs both classes");
  }
  return 0.5 * (static_cast<double>(tp) / pos + static_cast<double>(tn) / neg);
}

std::vector<double> threshold_candidates(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<double> out;
  out.reserve(scores.size() + 1);
  out.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 1; i < scores.size(); ++i) {
    out.push_back(0.5 * (scores[i - 1] + scores[i]));
  }
  out.push_back(std::numeric_limits<double>::infinity());
  return out;
}

ThresholdFit learn_threshold(const std::vector<double>& scores,
                             const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "score and label counts differ");
  }
  const auto n_pos = std::count(positive.begin(), positive.end(), true);
  if (n_pos == 0 || n_pos == static_cast<long>(positive.size())) {
    throw Error(ErrorCode::kDegenerateLabels, "threshold learning needs images of both classes");
  }
  ThresholdFit best{0.0, -1.0};
  // Candidates arrive in increasing order, so strict improvement keeps the
  // smallest threshold on ties.
  for (const double t : threshold_candidates(scores)) {
    const double ba = balanced_accuracy(scores, positive, t);
    if (ba > best.balanced_accuracy) best = {t, ba};
  }
  return best;
}

ImageDecision decide_image(const PatchGrid& grid, const DecisionRule& rule) {
  rule.validate();
  const double score = score_image(grid, rule);
  return {score > rule.threshold, score};
}

}  // namespace alsf::classifier
