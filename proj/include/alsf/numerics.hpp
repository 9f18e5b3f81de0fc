#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>

#include "alsf/error.hpp"

namespace alsf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numerics {

// Minimizes ||G X - H||_F^2 + ridge ||X||_F^2 over X (q x n). With ridge = 0
// and rank-deficient G the minimum-Frobenius-norm minimizer is returned.
Matrix solve_lsq_left(const Matrix& G, const Matrix& H, double ridge);

// Minimizes ||A G - H||_F^2 + ridge ||A||_F^2 over A (p x q).
Matrix solve_lsq_right(const Matrix& G, const Matrix& H, double ridge);

// Proximal map of tau * nuclear norm: soft-thresholds the singular values of M.
Matrix svt(const Matrix& M, double tau);

// Moore-Penrose pseudoinverse. Singular values below
// 1e-12 * max(rows, cols) * s_max are treated as zero.
Matrix pseudoinverse(const Matrix& M);

// Rescales every column with Euclidean norm > 1 to unit norm; other columns
// are left untouched.
Matrix project_columns_unit(const Matrix& D);

Vector singular_values(const Matrix& M);
double nuclear_norm(const Matrix& M);

// Number of singular values above rel_tol * s_max.
int numerical_rank(const Matrix& M, double rel_tol);

bool all_finite(const Matrix& M);
void require_finite(const Matrix& M, std::string_view what);

// Counts invocations of every factorization or iterative solver in the
// library. The classification path must leave it unchanged.
std::uint64_t solver_invocations();
void note_solver_invocation();

}  // namespace numerics
}  // namespace alsf
