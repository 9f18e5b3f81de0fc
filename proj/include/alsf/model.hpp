#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alsf/numerics.hpp"

namespace alsf {

using Index = Eigen::Index;

// Residual used by the patch classifier.
//   kSharedSubtracted: ||y - D_c A_c y - D_0 A_0 y||^2
//   kPlain:            ||y - D_c A_c y||^2
enum class ResidualMode { kSharedSubtracted, kPlain };

// Synthesis dictionaries (D_c, D_0) and analysis operators (A_c, A_0). The
// stacked analysis operator is [A_1; ...; A_C; A_0] in that block order.
struct AlsfModel {
  std::vector<Matrix> class_dicts;     // d x k_c each
  Matrix shared_dict;                  // d x k_0 (k_0 may be 0)
  std::vector<Matrix> class_analysis;  // k_c x d each
  Matrix shared_analysis;              // k_0 x d
  std::vector<std::string> labels;

  Index dim() const;
  int num_classes() const { return static_cast<int>(class_dicts.size()); }
  Index class_size(int c) const { return class_dicts.at(c).cols(); }
  Index shared_size() const { return shared_dict.cols(); }
  Index total_atoms() const;

  // Throws DimensionMismatch / NonFiniteInput / InvalidArgument when a block
  // is inconsistent or a dictionary column exceeds unit norm (+1e-9).
  void validate() const;

  // [A_1; ...; A_C; A_0]
  Matrix stacked_analysis() const;
};

// Per-class training columns plus the global mean column (the template
// replicated to form Y^m).
struct TrainingSet {
  std::vector<Matrix> per_class;  // d x N_c each
  Vector mean_template;           // length d

  // Computes the mean template over all columns of all classes.
  static TrainingSet from_classes(std::vector<Matrix> per_class);

  Index dim() const { return per_class.empty() ? 0 : per_class.front().rows(); }
  int num_classes() const { return static_cast<int>(per_class.size()); }
  Index count(int c) const { return per_class.at(c).cols(); }
  Index total_count() const;
  Index complement_count(int c) const { return total_count() - count(c); }

  // Horizontal concatenation of every class except c (d x N_cbar).
  Matrix complement(int c) const;
  // Y_c - Y^m
  Matrix centered(int c) const;
  // [Y_1, ..., Y_C]
  Matrix all_columns() const;
};

struct Codes {
  std::vector<Matrix> class_codes;   // X_cc: k_c x N_c
  std::vector<Matrix> shared_codes;  // X_0c: k_0 x N_c
};

enum class ClassBlockOrder { kCodesAnalysisDict, kCodesDictAnalysis };

struct Hyperparams {
  double eta = 0.1;       // nuclear-norm weight on D_0
  double eta1 = 1e-3;     // ridge on A_c
  double tau = 1.0;       // analysis vs synthesis balance
  double lambda1 = 1e-2;  // mean anchoring of A_0
  double lambda2 = 1e-2;  // X_cc ~ A_c Y_c coupling
  double lambda3 = 1e-2;  // X_0c ~ A_0 Y_c coupling
  int k_per_class = 20;
  int k_shared = 8;
  int max_iters = 30;
  double rel_tol = 1e-4;
  int code_sweeps = 1;
  double ridge_a0 = 1e-6;
  std::uint64_t seed = 0;

  bool joint_code_solve = false;
  bool parallel_classes = true;
  ClassBlockOrder block_order = ClassBlockOrder::kCodesAnalysisDict;

  // Throws ConfigError on a negative weight or invalid control.
  void validate() const;
};

// Individual terms of the full training objective. total() is their sum.
struct ObjectiveTerms {
  double reconstruction = 0.0;   // sum_c ||Y_c - D_c X_cc - D_0 X_0c||^2
  double suppression = 0.0;      // tau * sum_c (1/N_cbar) ||A_c Y_cbar||^2
  double mean_anchor = 0.0;      // tau * lambda1 * sum_c ||A_0 (Y_c - Y^m)||^2
  double class_coupling = 0.0;   // tau * lambda2 * sum_c ||X_cc - A_c Y_c||^2
  double shared_coupling = 0.0;  // tau * lambda3 * sum_c ||X_0c - A_0 Y_c||^2
  double nuclear = 0.0;          // eta * ||D_0||_*  (counted once)

  double total() const {
    return reconstruction + suppression + mean_anchor + class_coupling + shared_coupling + nuclear;
  }
};

// ||Y_c - D_c X_cc - D_0 X_0c||^2 + eta ||D_0||_*
double eval_f(const AlsfModel& model, const Codes& codes, const TrainingSet& data, int c,
              double eta);

// (1/N_cbar) ||A_c Y_cbar||^2 + lambda1 ||A_0 (Y_c - Y^m)||^2. The first term
// is 0 when there is a single class.
double eval_g(const AlsfModel& model, const TrainingSet& data, int c, double lambda1);

ObjectiveTerms objective_terms(const AlsfModel& model, const Codes& codes,
                               const TrainingSet& data, const Hyperparams& hp);

double eval_objective(const AlsfModel& model, const Codes& codes, const TrainingSet& data,
                      const Hyperparams& hp);

struct CodeSlices {
  std::vector<Vector> class_slices;  // A_c y
  Vector shared_slice;               // A_0 y
};

// Analysis coefficients of y: one matrix-vector product per block.
CodeSlices extract_code(const Vector& y, const AlsfModel& model);

double class_residual(const Vector& y, const AlsfModel& model, int c, ResidualMode mode);

// Residual from precomputed slices, so a caller scoring all classes computes
// A_0 y and D_0 A_0 y once.
double class_residual(const Vector& y, const AlsfModel& model, const CodeSlices& slices, int c,
                      ResidualMode mode);

// Shape check of codes against model and data; throws DimensionMismatch.
void check_shapes(const AlsfModel& model, const Codes& codes, const TrainingSet& data);

}  // namespace alsf
