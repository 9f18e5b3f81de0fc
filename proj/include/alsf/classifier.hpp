#pragma once

#include <limits>
#include <vector>

#include "alsf/model.hpp"

namespace alsf {

// Patch labels laid out row-major over the non-overlapping patch grid of
// one image. margins hold (second-best residual - best residual).
struct PatchGrid {
  int rows = 0;
  int cols = 0;
  std::vector<int> labels;
  std::vector<double> margins;

  int at(int r, int c) const { return labels[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return labels.size(); }
};

enum class RuleKind { kRatio, kConnectedRegion };

struct DecisionRule {
  RuleKind kind = RuleKind::kRatio;
  int positive_class = 1;
  // Ratio in [0, 1] or region size (patch count, >= 1). -inf and +inf are
  // accepted as "always positive" / "never positive".
  double threshold = 0.5;

  void validate() const;
};

struct ImageDecision {
  bool positive = false;
  double score = 0.0;
};

struct BatchLabels {
  std::vector<int> labels;
  std::vector<double> margins;
};

namespace classifier {

// argmin_c of the class residual, ties to the lowest index. Matrix-vector
// products only; no solver is invoked.
int classify_patch(const Vector& y, const AlsfModel& model,
                   ResidualMode mode = ResidualMode::kSharedSubtracted);

// Batched, OpenMP-parallel classification of the columns of Y (d x n).
BatchLabels classify_batch(const Matrix& Y, const AlsfModel& model,
                           ResidualMode mode = ResidualMode::kSharedSubtracted);

// Reference implementation: one classify_patch-style evaluation per column,
// serial.
BatchLabels classify_batch_serial(const Matrix& Y, const AlsfModel& model,
                                  ResidualMode mode = ResidualMode::kSharedSubtracted);

// Patches are the columns of Y in row-major grid order.
PatchGrid classify_grid(const Matrix& patches, int rows, int cols, const AlsfModel& model,
                        ResidualMode mode = ResidualMode::kSharedSubtracted);

double score_ratio(const PatchGrid& grid, int positive_class);

// Size of the largest 8-connected component of positive cells.
int score_largest_region(const PatchGrid& grid, int positive_class);

double score_image(const PatchGrid& grid, const DecisionRule& rule);

struct ThresholdFit {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

double balanced_accuracy(const std::vector<double>& scores, const std::vector<bool>& positive,
                         double threshold);

// Midpoints of consecutive distinct sorted scores plus -inf and +inf.
std::vector<double> threshold_candidates(std::vector<double> scores);

// Candidate maximizing balanced accuracy of (score > threshold); ties go to
// the smallest threshold.
ThresholdFit learn_threshold(const std::vector<double>& scores,
                             const std::vector<bool>& positive);

ImageDecision decide_image(const PatchGrid& grid, const DecisionRule& rule);

}  // namespace classifier
}  // namespace alsf
