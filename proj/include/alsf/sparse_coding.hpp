#pragma once

#include "alsf/classifier.hpp"
#include "alsf/model.hpp"

namespace alsf::sparse_coding {

struct LassoOptions {
  double lambda = 0.05;
  int iterations = 50;
};

// Cyclic coordinate descent on 0.5 ||y - D x||^2 + lambda ||x||_1 with a
// precomputed Gram matrix. Used as the per-patch iterative baseline that the
// analysis-operator classifier avoids.
class CoordinateDescentCoder {
 public:
  CoordinateDescentCoder(Matrix dictionary, LassoOptions options);

  Vector encode(const Vector& y) const;
  const Matrix& dictionary() const { return dict_; }

 private:
  Matrix dict_;
  Matrix gram_;
  LassoOptions options_;
};

// Sparse-code every column over [D_1, ..., D_C, D_0], then pick the class
// with the smallest shared-subtracted reconstruction residual.
BatchLabels classify_batch_iterative(const Matrix& Y, const AlsfModel& model,
                                     const LassoOptions& options = {});

}  // namespace alsf::sparse_coding
