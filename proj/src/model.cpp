#include "alsf/model.hpp"

#include <cmath>
#include <string>

namespace alsf {
namespace {

void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

void require_class(int c, int num_classes) {
  require(c >= 0 && c < num_classes, ErrorCode::kInvalidArgument,
          "class index " + std::to_string(c) + " out of range");
}

}  // namespace

Index AlsfModel::dim() const {
  if (!class_dicts.empty()) return class_dicts.front().rows();
  return shared_dict.rows();
}

Index AlsfModel::total_atoms() const {
  Index k = shared_size();
  for (const auto& D : class_dicts) k += D.cols();
  return k;
}

void AlsfModel::validate() const {
  const int C = num_classes();
  require(C >= 1, ErrorCode::kDimensionMismatch, "model has no classes");
  require(static_cast<int>(class_analysis.size()) == C, ErrorCode::kDimensionMismatch,
          "analysis block count differs from dictionary block count");
  require(labels.empty() || static_cast<int>(labels.size()) == C,
          ErrorCode::kDimensionMismatch, "label count differs from class count");
  const Index d = dim();
  require(d >= 1, ErrorCode::kDimensionMismatch, "feature dimension is zero");
  auto check_dict = [&](const Matrix& D, const std::string& name) {
    require(D.rows() == d, ErrorCode::kDimensionMismatch, name + " row count differs from d");
    numerics::require_finite(D, name);
    for (Index j = 0; j < D.cols(); ++j) {
      require(D.col(j).norm() <= 1.0 + 1e-9, ErrorCode::kInvalidArgument,
              name + " column " + std::to_string(j) + " exceeds unit norm");
    }
  };
  for (int c = 0; c < C; ++c) {
    const std::string tag = std::to_string(c);
    require(class_dicts[c].cols() >= 1, ErrorCode::kDimensionMismatch, "D_" + tag + " is empty");
    check_dict(class_dicts[c], "D_" + tag);
    require(class_analysis[c].rows() == class_dicts[c].cols() && class_analysis[c].cols() == d,
            ErrorCode::kDimensionMismatch, "A_" + tag + " shape inconsistent with D_" + tag);
    numerics::require_finite(class_analysis[c], "A_" + tag);
  }
  if (shared_size() > 0) check_dict(shared_dict, "D_0");
  require(shared_analysis.rows() == shared_size() &&
              (shared_size() == 0 || shared_analysis.cols() == d),
          ErrorCode::kDimensionMismatch, "A_0 shape inconsistent with D_0");
  numerics::require_finite(shared_analysis, "A_0");
}

Matrix AlsfModel::stacked_analysis() const {
  Matrix A(total_atoms(), dim());
  Index row = 0;
  for (const auto& Ac : class_analysis) {
    A.middleRows(row, Ac.rows()) = Ac;
    row += Ac.rows();
  }
  if (shared_size() > 0) A.middleRows(row, shared_size()) = shared_analysis;
  return A;
}

TrainingSet TrainingSet::from_classes(std::vector<Matrix> per_class) {
  require(!per_class.empty(), ErrorCode::kEmptyClass, "training set has no classes");
  const Index d = per_class.front().rows();
  Vector sum = Vector::Zero(d);
  Index total = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const Matrix& Y = per_class[c];
    require(Y.cols() >= 1, ErrorCode::kEmptyClass, "class " + std::to_string(c) + " is empty");
    require(Y.rows() == d, ErrorCode::kDimensionMismatch,
            "class " + std::to_string(c) + " has a different feature dimension");
    numerics::require_finite(Y, "training data");
    sum += Y.rowwise().sum();
    total += Y.cols();
  }
  TrainingSet set;
  set.per_class = std::move(per_class);
  set.mean_template = sum / static_cast<double>(total);
  return set;
}

Index TrainingSet::total_count() const {
  Index n = 0;
  for (const auto& Y : per_class) n += Y.cols();
  return n;
}

Matrix TrainingSet::complement(int c) const {
  require_class(c, num_classes());
  Matrix out(dim(), complement_count(c));
  Index col = 0;
  for (int o = 0; o < num_classes(); ++o) {
    if (o == c) continue;
    out.middleCols(col, count(o)) = per_class[o];
    col += count(o);
  }
  return out;
}

Matrix TrainingSet::centered(int c) const {
  require_class(c, num_classes());
  return per_class[c].colwise() - mean_template;
}

Matrix TrainingSet::all_columns() const {
  Matrix out(dim(), total_count());
  Index col = 0;
  for (const auto& Y : per_class) {
    out.middleCols(col, Y.cols()) = Y;
    col += Y.cols();
  }
  return out;
}

void Hyperparams::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kConfigError, std::string(name) + " must be finite and >= 0");
    }
  };
  nonneg(eta, "eta");
  nonneg(eta1, "eta1");
  nonneg(tau, "tau");
  nonneg(lambda1, "lambda1");
  nonneg(lambda2, "lambda2");
  nonneg(lambda3, "lambda3");
  nonneg(ridge_a0, "ridge_a0");
  if (k_per_class < 1) throw Error(ErrorCode::kConfigError, "k_per_class must be >= 1");
  if (k_shared < 0) throw Error(ErrorCode::kConfigError, "k_shared must be >= 0");
  if (max_iters < 1) throw Error(ErrorCode::kConfigError, "max_iters must be >= 1");
  if (!(rel_tol > 0.0)) throw Error(ErrorCode::kConfigError, "rel_tol must be > 0");
  if (code_sweeps < 1) throw Error(ErrorCode::kConfigError, "code_sweeps must be >= 1");
}

void check_shapes(const AlsfModel& model, const Codes& codes, const TrainingSet& data) {
  const int C = model.num_classes();
  require(data.num_classes() == C, ErrorCode::kDimensionMismatch,
          "training set and model disagree on class count");
  require(data.dim() == model.dim(), ErrorCode::kDimensionMismatch,
          "training set and model disagree on feature dimension");
  require(static_cast<int>(codes.class_codes.size()) == C &&
              static_cast<int>(codes.shared_codes.size()) == C,
          ErrorCode::kDimensionMismatch, "code block count differs from class count");
  for (int c = 0; c < C; ++c) {
    require(codes.class_codes[c].rows() == model.class_size(c) &&
                codes.class_codes[c].cols() == data.count(c),
            ErrorCode::kDimensionMismatch, "X_cc shape mismatch for class " + std::to_string(c));
    require(codes.shared_codes[c].rows() == model.shared_size() &&
                codes.shared_codes[c].cols() == data.count(c),
            ErrorCode::kDimensionMismatch, "X_0c shape mismatch for class " + std::to_string(c));
  }
}

namespace {

double reconstruction_error(const AlsfModel& model, const Codes& codes, const TrainingSet& data,
                            int c) {
  Matrix R = data.per_class[c] - model.class_dicts[c] * codes.class_codes[c];
  if (model.shared_size() > 0) R.noalias() -= model.shared_dict * codes.shared_codes[c];
  return R.squaredNorm();
}

double suppression_term(const AlsfModel& model, const TrainingSet& data, int c) {
  if (data.num_classes() < 2) return 0.0;
  const double n_bar = static_cast<double>(data.complement_count(c));
  return (model.class_analysis[c] * data.complement(c)).squaredNorm() / n_bar;
}

double mean_anchor_term(const AlsfModel& model, const TrainingSet& data, int c) {
  if (model.shared_size() == 0) return 0.0;
  return (model.shared_analysis * data.centered(c)).squaredNorm();
}

}  // namespace

double eval_f(const AlsfModel& model, const Codes& codes, const TrainingSet& data, int c,
              double eta) {
  check_shapes(model, codes, data);
  require_class(c, model.num_classes());
  const double nuclear = eta != 0.0 ? eta * numerics::nuclear_norm(model.shared_dict) : 0.0;
  return reconstruction_error(model, codes, data, c) + nuclear;
}

double eval_g(const AlsfModel& model, const TrainingSet& data, int c, double lambda1) {
  require(data.num_classes() == model.num_classes() && data.dim() == model.dim(),
          ErrorCode::kDimensionMismatch, "training set and model disagree");
  require_class(c, model.num_classes());
  return suppression_term(model, data, c) + lambda1 * mean_anchor_term(model, data, c);
}

ObjectiveTerms objective_terms(const AlsfModel& model, const Codes& codes,
                               const TrainingSet& data, const Hyperparams& hp) {
  check_shapes(model, codes, data);
  ObjectiveTerms t;
  for (int c = 0; c < model.num_classes(); ++c) {
    t.reconstruction += reconstruction_error(model, codes, data, c);
    t.suppression += hp.tau * suppression_term(model, data, c);
    t.mean_anchor += hp.tau * hp.lambda1 * mean_anchor_term(model, data, c);
    t.class_coupling += hp.tau * hp.lambda2 *
                        (codes.class_codes[c] - model.class_analysis[c] * data.per_class[c])
                            .squaredNorm();
    if (model.shared_size() > 0) {
      t.shared_coupling +=
          hp.tau * hp.lambda3 *
          (codes.shared_codes[c] - model.shared_analysis * data.per_class[c]).squaredNorm();
    }
  }
  if (model.shared_size() > 0 && hp.eta != 0.0) {
    t.nuclear = hp.eta * numerics::nuclear_norm(model.shared_dict);
  }
  return t;
}

double eval_objective(const AlsfModel& model, const Codes& codes, const TrainingSet& data,
                      const Hyperparams& hp) {
  return objective_terms(model, codes, data, hp).total();
}

CodeSlices extract_code(const Vector& y, const AlsfModel& model) {
  require(y.size() == model.dim(), ErrorCode::kDimensionMismatch,
          "sample length " + std::to_string(y.size()) + " differs from model dimension " +
              std::to_string(model.dim()));
  CodeSlices out;
  out.class_slices.reserve(model.class_analysis.size());
  for (const auto& Ac : model.class_analysis) out.class_slices.push_back(Ac * y);
  out.shared_slice = model.shared_size() > 0 ? Vector(model.shared_analysis * y) : Vector();
  return out;
}

double class_residual(const Vector& y, const AlsfModel& model, const CodeSlices& slices, int c,
                      ResidualMode mode) {
  require_class(c, model.num_classes());
  require(y.size() == model.dim(), ErrorCode::kDimensionMismatch,
          "sample length differs from model dimension");
  Vector r = y - model.class_dicts[c] * slices.class_slices.at(c);
  if (mode == ResidualMode::kSharedSubtracted && model.shared_size() > 0) {
    r.noalias() -= model.shared_dict * slices.shared_slice;
  }
  return r.squaredNorm();
}

double class_residual(const Vector& y, const AlsfModel& model, int c, ResidualMode mode) {
  return class_residual(y, model, extract_code(y, model), c, mode);
}

}  // namespace alsf
