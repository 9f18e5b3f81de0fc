#include "alsf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "alsf/classifier.hpp"

namespace alsf {

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kCodes: return "codes";
    case BlockKind::kClassAnalysis: return "class_analysis";
    case BlockKind::kClassDict: return "class_dict";
    case BlockKind::kSharedAnalysis: return "shared_analysis";
    case BlockKind::kSharedDict: return "shared_dict";
  }
  return "unknown";
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kMaxIters: return "max-iters";
    case StopReason::kRelTol: return "rel-tol";
    case StopReason::kDegenerate: return "degenerate";
  }
  return "unknown";
}

namespace trainer {
namespace {

void require_class(const TrainingSet& data, int c) {
  if (c < 0 || c >= data.num_classes()) {
    throw Error(ErrorCode::kInvalidArgument, "class index " + std::to_string(c) + " out of range");
  }
}

// Weight on the mean-deviation blocks of the A_0 system, sqrt(lambda1/lambda3).
double mean_block_scale(const Hyperparams& hp) {
  if (hp.lambda1 == 0.0) return 0.0;
  if (hp.lambda3 == 0.0) {
    throw Error(ErrorCode::kWeightError,
                "lambda3 = 0 with lambda1 > 0 leaves the shared-analysis system undefined");
  }
  return std::sqrt(hp.lambda1 / hp.lambda3);
}

void record(BlockStep* step, BlockKind kind, int c, double before, double after) {
  if (step == nullptr) return;
  step->block = kind;
  step->class_index = c;
  step->before = before;
  step->after = after;
}

}  // namespace

std::pair<AlsfModel, Codes> init_model(const TrainingSet& data, const Hyperparams& hp,
                                       std::vector<std::string>* warnings) {
  hp.validate();
  const int C = data.num_classes();
  if (C < 1) throw Error(ErrorCode::kInsufficientData, "no classes in the training set");
  for (int c = 0; c < C; ++c) {
    if (data.count(c) == 0) {
      throw Error(ErrorCode::kInsufficientData, "class " + std::to_string(c) + " has no samples");
    }
  }
  const Index d = data.dim();
  if (d < 1) throw Error(ErrorCode::kInsufficientData, "feature dimension is zero");
  const Matrix Y = data.all_columns();
  if (Y.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::kDegenerateInit, "training data is identically zero");
  }

  std::mt19937_64 rng(hp.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index k = hp.k_per_class;

  AlsfModel model;
  model.class_dicts.resize(C);
  for (int c = 0; c < C; ++c) {
    const Matrix& Yc = data.per_class[c];
    std::vector<Index> order(Yc.cols());
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Matrix D(d, k);
    const Index taken = std::min<Index>(k, Yc.cols());
    for (Index j = 0; j < taken; ++j) D.col(j) = Yc.col(order[j]);
    if (taken < k && warnings != nullptr) {
      warnings->push_back("class " + std::to_string(c) + " has " + std::to_string(Yc.cols()) +
                          " samples for " + std::to_string(k) +
                          " atoms; padding with random unit columns");
    }
    for (Index j = taken; j < k; ++j) {
      for (Index i = 0; i < d; ++i) D(i, j) = normal(rng);
      D.col(j).normalize();
    }
    model.class_dicts[c] = numerics::project_columns_unit(D);
  }

  const Index k0 = hp.k_shared;
  model.shared_dict = Matrix::Zero(d, k0);
  if (k0 > 0) {
    numerics::note_solver_invocation();
    Eigen::BDCSVD<Matrix> svd(Y, Eigen::ComputeThinU);
    const Index avail = std::min<Index>(k0, svd.matrixU().cols());
    model.shared_dict.leftCols(avail) = svd.matrixU().leftCols(avail);
    if (avail < k0 && warnings != nullptr) {
      warnings->push_back("shared dictionary larger than data rank; extra atoms start at zero");
    }
  }

  Matrix full(d, k * C + k0);
  for (int c = 0; c < C; ++c) full.middleCols(c * k, k) = model.class_dicts[c];
  if (k0 > 0) full.rightCols(k0) = model.shared_dict;
  const Matrix A = numerics::pseudoinverse(full);

  model.class_analysis.resize(C);
  for (int c = 0; c < C; ++c) model.class_analysis[c] = A.middleRows(c * k, k);
  model.shared_analysis = k0 > 0 ? Matrix(A.bottomRows(k0)) : Matrix(0, d);

  Codes codes;
  codes.class_codes.resize(C);
  codes.shared_codes.resize(C);
  for (int c = 0; c < C; ++c) {
    codes.class_codes[c] = model.class_analysis[c] * data.per_class[c];
    codes.shared_codes[c] = k0 > 0 ? Matrix(model.shared_analysis * data.per_class[c])
                                   : Matrix(0, data.count(c));
  }
  return {std::move(model), std::move(codes)};
}

double codes_subobjective(const AlsfModel& model, const Matrix& class_codes,
                          const Matrix& shared_codes, const TrainingSet& data,
                          const Hyperparams& hp, int c) {
  const Matrix& Yc = data.per_class[c];
  Matrix R = Yc - model.class_dicts[c] * class_codes;
  double value = 0.0;
  if (model.shared_size() > 0) {
    R.noalias() -= model.shared_dict * shared_codes;
    value += hp.tau * hp.lambda3 * (shared_codes - model.shared_analysis * Yc).squaredNorm();
  }
  value += R.squaredNorm();
  value += hp.tau * hp.lambda2 * (class_codes - model.class_analysis[c] * Yc).squaredNorm();
  return value;
}

std::pair<Matrix, Matrix> update_codes(const AlsfModel& model, const Codes& codes,
                                       const TrainingSet& data, const Hyperparams& hp, int c,
                                       BlockStep* step) {
  require_class(data, c);
  const Matrix& Yc = data.per_class[c];
  const Matrix& Dc = model.class_dicts[c];
  const Matrix& D0 = model.shared_dict;
  const Index kc = Dc.cols();
  const Index k0 = model.shared_size();
  const double w2 = std::sqrt(hp.tau * hp.lambda2);
  const double w3 = std::sqrt(hp.tau * hp.lambda3);
  const double before =
      step ? codes_subobjective(model, codes.class_codes[c], codes.shared_codes[c], data, hp, c)
           : 0.0;

  const Matrix AcY = model.class_analysis[c] * Yc;
  const Matrix A0Y = k0 > 0 ? Matrix(model.shared_analysis * Yc) : Matrix(0, Yc.cols());
  const Index d = Yc.rows();
  const Index n = Yc.cols();

  Matrix Xc = codes.class_codes[c];
  Matrix X0 = codes.shared_codes[c];

  if (hp.joint_code_solve && k0 > 0) {
    Matrix G = Matrix::Zero(d + kc + k0, kc + k0);
    G.topLeftCorner(d, kc) = Dc;
    G.topRightCorner(d, k0) = D0;
    G.block(d, 0, kc, kc) = w2 * Matrix::Identity(kc, kc);
    G.block(d + kc, kc, k0, k0) = w3 * Matrix::Identity(k0, k0);
    Matrix H(d + kc + k0, n);
    H.topRows(d) = Yc;
    H.middleRows(d, kc) = w2 * AcY;
    H.bottomRows(k0) = w3 * A0Y;
    const Matrix X = numerics::solve_lsq_left(G, H, 0.0);
    Xc = X.topRows(kc);
    X0 = X.bottomRows(k0);
  } else {
    for (int sweep = 0; sweep < hp.code_sweeps; ++sweep) {
      if (k0 > 0) {
        Matrix G(d + k0, k0);
        G.topRows(d) = D0;
        G.bottomRows(k0) = w3 * Matrix::Identity(k0, k0);
        Matrix H(d + k0, n);
        H.topRows(d) = Yc - Dc * Xc;
        H.bottomRows(k0) = w3 * A0Y;
        X0 = numerics::solve_lsq_left(G, H, 0.0);
      }
      Matrix G(d + kc, kc);
      G.topRows(d) = Dc;
      G.bottomRows(kc) = w2 * Matrix::Identity(kc, kc);
      Matrix H(d + kc, n);
      H.topRows(d) = k0 > 0 ? Matrix(Yc - D0 * X0) : Yc;
      H.bottomRows(kc) = w2 * AcY;
      Xc = numerics::solve_lsq_left(G, H, 0.0);
    }
  }
  if (step) {
    record(step, BlockKind::kCodes, c, before, codes_subobjective(model, Xc, X0, data, hp, c));
  }
  return {std::move(Xc), std::move(X0)};
}

double analysis_class_subobjective(const Matrix& class_analysis, const Codes& codes,
                                   const TrainingSet& data, const Hyperparams& hp, int c) {
  double value = hp.lambda2 * (codes.class_codes[c] - class_analysis * data.per_class[c])
                                  .squaredNorm() +
                 hp.eta1 * class_analysis.squaredNorm();
  if (data.num_classes() > 1) {
    value += (class_analysis * data.complement(c)).squaredNorm() /
             static_cast<double>(data.complement_count(c));
  }
  return value;
}

Matrix update_analysis_class(const AlsfModel& model, const Codes& codes,
                             const TrainingSet& data, const Hyperparams& hp, int c,
                             BlockStep* step) {
  require_class(data, c);
  const Matrix& Yc = data.per_class[c];
  const Index kc = model.class_size(c);
  const Index nc = Yc.cols();
  const Index nbar = data.num_classes() > 1 ? data.complement_count(c) : 0;
  const double s2 = std::sqrt(hp.lambda2);

  // Columns: [Y_cbar / sqrt(N_cbar), sqrt(lambda2) Y_c] -> [0, sqrt(lambda2) X_cc]
  Matrix G(Yc.rows(), nbar + nc);
  Matrix H = Matrix::Zero(kc, nbar + nc);
  if (nbar > 0) G.leftCols(nbar) = data.complement(c) / std::sqrt(static_cast<double>(nbar));
  G.rightCols(nc) = s2 * Yc;
  H.rightCols(nc) = s2 * codes.class_codes[c];
  Matrix A = numerics::solve_lsq_right(G, H, hp.eta1);
  if (step) {
    record(step, BlockKind::kClassAnalysis, c,
           analysis_class_subobjective(model.class_analysis[c], codes, data, hp, c),
           analysis_class_subobjective(A, codes, data, hp, c));
  }
  return A;
}

double analysis_shared_subobjective(const Matrix& shared_analysis, const Codes& codes,
                                    const TrainingSet& data, const Hyperparams& hp) {
  const double ratio = hp.lambda1 == 0.0 ? 0.0 : hp.lambda1 / hp.lambda3;
  double value = hp.ridge_a0 * shared_analysis.squaredNorm();
  for (int c = 0; c < data.num_classes(); ++c) {
    value += (codes.shared_codes[c] - shared_analysis * data.per_class[c]).squaredNorm();
    if (ratio != 0.0) value += ratio * (shared_analysis * data.centered(c)).squaredNorm();
  }
  return value;
}

Matrix update_analysis_shared(const AlsfModel& model, const Codes& codes,
                              const TrainingSet& data, const Hyperparams& hp, BlockStep* step) {
  const Index k0 = model.shared_size();
  if (k0 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "update_analysis_shared requires k_shared >= 1");
  }
  const double scale = mean_block_scale(hp);
  const Index N = data.total_count();
  const Index d = data.dim();
  const bool with_mean = scale != 0.0;

  // Per class: Y_c -> X_0c, then sqrt(lambda1/lambda3) (Y_c - Y^m) -> 0.
  Matrix G(d, with_mean ? 2 * N : N);
  Matrix H = Matrix::Zero(k0, G.cols());
  Index col = 0;
  for (int c = 0; c < data.num_classes(); ++c) {
    const Index nc = data.count(c);
    G.middleCols(col, nc) = data.per_class[c];
    H.middleCols(col, nc) = codes.shared_codes[c];
    col += nc;
    if (with_mean) {
      G.middleCols(col, nc) = scale * data.centered(c);
      col += nc;
    }
  }
  Matrix A0 = numerics::solve_lsq_right(G, H, hp.ridge_a0);
  if (step) {
    record(step, BlockKind::kSharedAnalysis, -1,
           analysis_shared_subobjective(model.shared_analysis, codes, data, hp),
           analysis_shared_subobjective(A0, codes, data, hp));
  }
  return A0;
}

double dict_class_subobjective(const Matrix& class_dict, const AlsfModel& model,
                               const Codes& codes, const TrainingSet& data, int c) {
  Matrix R = data.per_class[c] - class_dict * codes.class_codes[c];
  if (model.shared_size() > 0) R.noalias() -= model.shared_dict * codes.shared_codes[c];
  return R.squaredNorm() + kDictRidge * class_dict.squaredNorm();
}

Matrix update_dict_class(const AlsfModel& model, const Codes& codes, const TrainingSet& data,
                         int c, BlockStep* step) {
  require_class(data, c);
  const Matrix& Xc = codes.class_codes[c];
  if (Xc.cwiseAbs().maxCoeff() == 0.0) {
    const double v = step ? dict_class_subobjective(model.class_dicts[c], model, codes, data, c)
                          : 0.0;
    record(step, BlockKind::kClassDict, c, v, v);
    return model.class_dicts[c];
  }
  Matrix target = data.per_class[c];
  if (model.shared_size() > 0) target.noalias() -= model.shared_dict * codes.shared_codes[c];
  const Matrix D = numerics::solve_lsq_right(Xc, target, kDictRidge);
  if (step) {
    record(step, BlockKind::kClassDict, c,
           dict_class_subobjective(model.class_dicts[c], model, codes, data, c),
           dict_class_subobjective(D, model, codes, data, c));
  }
  return numerics::project_columns_unit(D);
}

double dict_shared_subobjective(const Matrix& shared_dict, const Matrix& target, double eta) {
  double value = (target - shared_dict).squaredNorm();
  if (eta != 0.0) value += eta * numerics::nuclear_norm(shared_dict);
  return value;
}

Matrix update_dict_shared(const AlsfModel& model, const Codes& codes, const TrainingSet& data,
                          const Hyperparams& hp, BlockStep* step) {
  const Index k0 = model.shared_size();
  if (k0 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "update_dict_shared requires k_shared >= 1");
  }
  const Index N = data.total_count();
  Matrix R(data.dim(), N);
  Matrix X0(k0, N);
  Index col = 0;
  for (int c = 0; c < data.num_classes(); ++c) {
    const Index nc = data.count(c);
    R.middleCols(col, nc) = data.per_class[c] - model.class_dicts[c] * codes.class_codes[c];
    X0.middleCols(col, nc) = codes.shared_codes[c];
    col += nc;
  }
  if (X0.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::kRankError, "shared codes are identically zero; D_0 retained");
  }
  const Matrix M = R * numerics::pseudoinverse(X0);
  // ||M - D||^2 + eta ||D||_* is minimized by the prox of (eta/2) ||.||_*.
  const Matrix D0 = hp.eta > 0.0 ? numerics::svt(M, 0.5 * hp.eta) : M;
  if (step) {
    record(step, BlockKind::kSharedDict, -1, dict_shared_subobjective(model.shared_dict, M, hp.eta),
           dict_shared_subobjective(D0, M, hp.eta));
  }
  return numerics::project_columns_unit(D0);
}

namespace {

// Per-class block round. Reads and writes only class c blocks plus the
// shared blocks (read-only), so distinct classes can run concurrently.
void class_round(AlsfModel& model, Codes& codes, const TrainingSet& data, const Hyperparams& hp,
                 int c, int iteration, std::vector<BlockStep>& steps) {
  BlockStep step;
  step.iteration = iteration;
  auto [Xc, X0] = update_codes(model, codes, data, hp, c, &step);
  codes.class_codes[c] = std::move(Xc);
  codes.shared_codes[c] = std::move(X0);
  steps.push_back(step);

  auto analysis = [&] {
    model.class_analysis[c] = update_analysis_class(model, codes, data, hp, c, &step);
    steps.push_back(step);
  };
  auto dict = [&] {
    model.class_dicts[c] = update_dict_class(model, codes, data, c, &step);
    steps.push_back(step);
  };
  if (hp.block_order == ClassBlockOrder::kCodesAnalysisDict) {
    analysis();
    dict();
  } else {
    dict();
    analysis();
  }
}

}  // namespace

TrainResult train(const TrainingSet& data, const Hyperparams& hp) {
  hp.validate();
  if (hp.k_shared > 0) mean_block_scale(hp);

  TrainResult result;
  TrainReport& report = result.report;
  auto [model, codes] = init_model(data, hp, &report.warnings);
  check_shapes(model, codes, data);

  double previous = eval_objective(model, codes, data, hp);
  report.objective_trace.push_back(previous);
  if (!std::isfinite(previous)) {
    report.stop_reason = StopReason::kDegenerate;
    result.model = std::move(model);
    result.codes = std::move(codes);
    return result;
  }

  const int C = data.num_classes();
  report.stop_reason = StopReason::kMaxIters;
  for (int it = 1; it <= hp.max_iters; ++it) {
    std::vector<std::vector<BlockStep>> class_steps(C);
    // Exceptions cannot cross the OpenMP region boundary; capture the first.
    std::vector<std::exception_ptr> failures(C);
#pragma omp parallel for schedule(static) if (hp.parallel_classes && C > 1)
    for (int c = 0; c < C; ++c) {
      try {
        class_round(model, codes, data, hp, c, it, class_steps[c]);
      } catch (...) {
        failures[c] = std::current_exception();
      }
    }
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
    for (const auto& steps : class_steps) {
      report.block_steps.insert(report.block_steps.end(), steps.begin(), steps.end());
    }

    if (model.shared_size() > 0) {
      BlockStep step;
      step.iteration = it;
      model.shared_analysis = update_analysis_shared(model, codes, data, hp, &step);
      report.block_steps.push_back(step);
      try {
        model.shared_dict = update_dict_shared(model, codes, data, hp, &step);
        report.block_steps.push_back(step);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kRankError) throw;
        report.warnings.push_back("iteration " + std::to_string(it) + ": " + e.what());
      }
    }

    const double current = eval_objective(model, codes, data, hp);
    report.objective_trace.push_back(current);
    report.iterations_run = it;
    if (!std::isfinite(current)) {
      report.stop_reason = StopReason::kDegenerate;
      break;
    }
    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    if (std::abs(previous - current) / scale < hp.rel_tol) {
      report.stop_reason = StopReason::kRelTol;
      break;
    }
    previous = current;
  }

  if (report.stop_reason != StopReason::kDegenerate) model.validate();
  result.model = std::move(model);
  result.codes = std::move(codes);
  return result;
}

CvResult cross_validate(const TrainingSet& data, const std::vector<Hyperparams>& grid, int folds,
                        std::uint64_t seed, ResidualMode mode) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "empty hyperparameter grid");
  if (folds < 2) throw Error(ErrorCode::kInsufficientData, "cross-validation needs >= 2 folds");
  const int C = data.num_classes();
  for (int c = 0; c < C; ++c) {
    if (data.count(c) < folds) {
      throw Error(ErrorCode::kInsufficientData,
                  "class " + std::to_string(c) + " has fewer samples than folds");
    }
  }

  // Stratified assignment: shuffled position within the class modulo folds.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> fold_of(C);
  for (int c = 0; c < C; ++c) {
    std::vector<Index> order(data.count(c));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    fold_of[c].resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      fold_of[c][order[i]] = static_cast<int>(i % folds);
    }
  }

  auto split = [&](int f, bool held_out) {
    std::vector<Matrix> parts(C);
    for (int c = 0; c < C; ++c) {
      std::vector<Index> cols;
      for (Index j = 0; j < data.count(c); ++j) {
        if ((fold_of[c][j] == f) == held_out) cols.push_back(j);
      }
      parts[c] = data.per_class[c](Eigen::all, cols);
    }
    return parts;
  };

  CvResult out;
  out.fold_scores.assign(grid.size(), std::vector<double>(folds, 0.0));
  const int jobs = static_cast<int>(grid.size()) * folds;
  std::vector<std::exception_ptr> failures(jobs);
#pragma omp parallel for schedule(dynamic)
  for (int job = 0; job < jobs; ++job) {
    const std::size_t g = job / folds;
    const int f = job % folds;
    try {
      Hyperparams hp = grid[g];
      hp.parallel_classes = false;
      const TrainingSet train_set = TrainingSet::from_classes(split(f, false));
      const std::vector<Matrix> held = split(f, true);
      const TrainResult trained = train(train_set, hp);
      Index correct = 0, total = 0;
      for (int c = 0; c < C; ++c) {
        const BatchLabels labels = classifier::classify_batch(held[c], trained.model, mode);
        correct += std::count(labels.labels.begin(), labels.labels.end(), c);
        total += held[c].cols();
      }
      out.fold_scores[g][f] = static_cast<double>(correct) / static_cast<double>(total);
    } catch (...) {
      failures[job] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  out.mean_scores.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (double s : out.fold_scores[g]) sum += s;
    out.mean_scores[g] = sum / folds;
    if (out.mean_scores[g] > out.mean_scores[out.best_index]) out.best_index = g;
  }
  out.best = grid[out.best_index];
  return out;
}

}  // namespace trainer
}  // namespace alsf
