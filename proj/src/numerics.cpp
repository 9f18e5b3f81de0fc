#include "alsf/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

namespace alsf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kDegenerateInit: return "DegenerateInit";
    case ErrorCode::kWeightError: return "WeightError";
    case ErrorCode::kRankError: return "RankError";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kCorruptImage: return "CorruptImage";
    case ErrorCode::kUpsampleRequested: return "UpsampleRequested";
    case ErrorCode::kNoValidPlacement: return "NoValidPlacement";
    case ErrorCode::kImageTooSmall: return "ImageTooSmall";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kDimensionError: return "DimensionError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kChecksumFailure: return "ChecksumFailure";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace numerics {
namespace {

std::atomic<std::uint64_t> g_solver_calls{0};

using Svd = Eigen::BDCSVD<Matrix>;

Svd thin_svd(const Matrix& M) {
  note_solver_invocation();
  return Svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace

std::uint64_t solver_invocations() { return g_solver_calls.load(std::memory_order_relaxed); }

void note_solver_invocation() { g_solver_calls.fetch_add(1, std::memory_order_relaxed); }

bool all_finite(const Matrix& M) { return M.allFinite(); }

void require_finite(const Matrix& M, std::string_view what) {
  if (!M.allFinite()) {
    throw Error(ErrorCode::kNonFiniteInput, std::string(what) + " contains NaN or Inf");
  }
}

Matrix solve_lsq_left(const Matrix& G, const Matrix& H, double ridge) {
  if (G.rows() != H.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "solve_lsq_left: G has " + std::to_string(G.rows()) + " rows, H has " +
                    std::to_string(H.rows()));
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw Error(ErrorCode::kInvalidArgument, "solve_lsq_left: ridge must be finite and >= 0");
  }
  require_finite(G, "solve_lsq_left G");
  require_finite(H, "solve_lsq_left H");

  const Eigen::Index q = G.cols();
  const Eigen::Index n = H.cols();
  if (q == 0 || n == 0) return Matrix::Zero(q, n);
  if (G.rows() == 0) return Matrix::Zero(q, n);

  note_solver_invocation();
  if (ridge == 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(G);
    return cod.solve(H);
  }
  // Ridge folded in as extra rows so the factorization never forms G^T G.
  Matrix Ga(G.rows() + q, q);
  Ga.topRows(G.rows()) = G;
  Ga.bottomRows(q) = std::sqrt(ridge) * Matrix::Identity(q, q);
  Matrix Ha = Matrix::Zero(G.rows() + q, n);
  Ha.topRows(G.rows()) = H;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Ga);
  return cod.solve(Ha);
}

Matrix solve_lsq_right(const Matrix& G, const Matrix& H, double ridge) {
  if (G.cols() != H.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "solve_lsq_right: G has " + std::to_string(G.cols()) + " cols, H has " +
                    std::to_string(H.cols()));
  }
  return solve_lsq_left(G.transpose(), H.transpose(), ridge).transpose();
}

Matrix svt(const Matrix& M, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::kInvalidArgument, "svt: tau must be finite and > 0");
  }
  require_finite(M, "svt input");
  if (M.size() == 0) return M;
  const Svd svd = thin_svd(M);
  const Vector shrunk = (svd.singularValues().array() - tau).cwiseMax(0.0).matrix();
  return svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
}

Matrix pseudoinverse(const Matrix& M) {
  require_finite(M, "pseudoinverse input");
  if (M.size() == 0) return Matrix::Zero(M.cols(), M.rows());
  const Svd svd = thin_svd(M);
  const Vector& s = svd.singularValues();
  const double s_max = s.size() > 0 ? s(0) : 0.0;
  const double cutoff =
      1e-12 * static_cast<double>(std::max(M.rows(), M.cols())) * s_max;
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix project_columns_unit(const Matrix& D) {
  require_finite(D, "project_columns_unit input");
  Matrix out = D;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (norm > 1.0) out.col(j) /= norm;
  }
  return out;
}

Vector singular_values(const Matrix& M) {
  require_finite(M, "singular_values input");
  if (M.size() == 0) return Vector();
  note_solver_invocation();
  return Svd(M).singularValues();
}

double nuclear_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return singular_values(M).sum();
}

int numerical_rank(const Matrix& M, double rel_tol) {
  const Vector s = singular_values(M);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<int>((s.array() > rel_tol * s(0)).count());
}

}  // namespace numerics
}  // namespace alsf
