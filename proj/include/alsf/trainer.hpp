#pragma once

#include <string>
#include <utility>
#include <vector>

#include "alsf/model.hpp"

namespace alsf {

enum class BlockKind { kCodes, kClassAnalysis, kClassDict, kSharedAnalysis, kSharedDict };

std::string_view to_string(BlockKind kind);

// One subproblem solve. before/after are the block's own subobjective,
// measured before any feasibility projection.
struct BlockStep {
  int iteration = 0;
  BlockKind block = BlockKind::kCodes;
  int class_index = -1;  // -1 for shared blocks
  double before = 0.0;
  double after = 0.0;
};

enum class StopReason { kMaxIters, kRelTol, kDegenerate };

std::string_view to_string(StopReason reason);

struct TrainReport {
  std::vector<double> objective_trace;  // iterations_run + 1 entries
  std::vector<BlockStep> block_steps;
  int iterations_run = 0;
  StopReason stop_reason = StopReason::kMaxIters;
  std::vector<std::string> warnings;
};

struct TrainResult {
  AlsfModel model;
  Codes codes;
  TrainReport report;
};

namespace trainer {

// Sampled data columns for D_c, leading left singular vectors of Y for D_0,
// analysis operators from the pseudoinverse of [D_1, ..., D_C, D_0] and
// codes consistent with them (X_cc = A_c Y_c, X_0c = A_0 Y_c).
std::pair<AlsfModel, Codes> init_model(const TrainingSet& data, const Hyperparams& hp,
                                       std::vector<std::string>* warnings = nullptr);

// Each update returns the new block(s) and, when `step` is given, fills in
// the block's before/after subobjective.

// X_cc and X_0c alternation (or the joint stacked solve).
std::pair<Matrix, Matrix> update_codes(const AlsfModel& model, const Codes& codes,
                                       const TrainingSet& data, const Hyperparams& hp, int c,
                                       BlockStep* step = nullptr);

Matrix update_analysis_class(const AlsfModel& model, const Codes& codes,
                             const TrainingSet& data, const Hyperparams& hp, int c,
                             BlockStep* step = nullptr);

Matrix update_analysis_shared(const AlsfModel& model, const Codes& codes,
                              const TrainingSet& data, const Hyperparams& hp,
                              BlockStep* step = nullptr);

// Least-squares refit of D_c followed by unit-column projection. An all-zero
// X_cc keeps the previous D_c.
Matrix update_dict_class(const AlsfModel& model, const Codes& codes, const TrainingSet& data,
                         int c, BlockStep* step = nullptr);

// D_0 <- project(svt(R X_0^+, eta / 2)). Throws RankError when X_0 is zero.
Matrix update_dict_shared(const AlsfModel& model, const Codes& codes, const TrainingSet& data,
                          const Hyperparams& hp, BlockStep* step = nullptr);

// Subobjectives minimized by the updates above.
double codes_subobjective(const AlsfModel& model, const Matrix& class_codes,
                          const Matrix& shared_codes, const TrainingSet& data,
                          const Hyperparams& hp, int c);
double analysis_class_subobjective(const Matrix& class_analysis, const Codes& codes,
                                   const TrainingSet& data, const Hyperparams& hp, int c);
double analysis_shared_subobjective(const Matrix& shared_analysis, const Codes& codes,
                                    const TrainingSet& data, const Hyperparams& hp);
double dict_class_subobjective(const Matrix& class_dict, const AlsfModel& model,
                               const Codes& codes, const TrainingSet& data, int c);
// ||M - D_0||^2 + eta ||D_0||_* with M = R X_0^+.
double dict_shared_subobjective(const Matrix& shared_dict, const Matrix& target, double eta);

// Ridge added to the D_c least-squares fit.
inline constexpr double kDictRidge = 1e-10;

TrainResult train(const TrainingSet& data, const Hyperparams& hp);

struct CvResult {
  Hyperparams best;
  std::size_t best_index = 0;
  std::vector<std::vector<double>> fold_scores;  // [grid point][fold]
  std::vector<double> mean_scores;
};

// Stratified k-fold selection by held-out patch accuracy; ties go to the
// earliest grid point.
CvResult cross_validate(const TrainingSet& data, const std::vector<Hyperparams>& grid,
                        int folds, std::uint64_t seed, ResidualMode mode =
                                                           ResidualMode::kSharedSubtracted);

}  // namespace trainer
}  // namespace alsf
