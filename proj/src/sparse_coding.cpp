#include "alsf/sparse_coding.hpp"

#include <cmath>
#include <limits>

namespace alsf::sparse_coding {

CoordinateDescentCoder::CoordinateDescentCoder(Matrix dictionary, LassoOptions options)
    : dict_(std::move(dictionary)), options_(options) {
  gram_ = dict_.transpose() * dict_;
}

Vector CoordinateDescentCoder::encode(const Vector& y) const {
  numerics::note_solver_invocation();
  const Index k = dict_.cols();
  const Vector corr = dict_.transpose() * y;
  Vector x = Vector::Zero(k);
  Vector gx = Vector::Zero(k);  // gram_ * x, kept in sync
  for (int it = 0; it < options_.iterations; ++it) {
    for (Index j = 0; j < k; ++j) {
      const double gjj = gram_(j, j);
      if (gjj <= 0.0) continue;
      const double rho = corr(j) - gx(j) + gjj * x(j);
      const double mag = std::abs(rho) - options_.lambda;
      const double next = mag > 0.0 ? std::copysign(mag, rho) / gjj : 0.0;
      const double delta = next - x(j);
      if (delta != 0.0) {
        gx.noalias() += delta * gram_.col(j);
        x(j) = next;
      }
    }
  }
  return x;
}

BatchLabels classify_batch_iterative(const Matrix& Y, const AlsfModel& model,
                                     const LassoOptions& options) {
  const int C = model.num_classes();
  Matrix full(model.dim(), model.total_atoms());
  std::vector<Index> offsets(C + 1, 0);
  for (int c = 0; c < C; ++c) {
    full.middleCols(offsets[c], model.class_size(c)) = model.class_dicts[c];
    offsets[c + 1] = offsets[c] + model.class_size(c);
  }
  if (model.shared_size() > 0) full.rightCols(model.shared_size()) = model.shared_dict;
  const CoordinateDescentCoder coder(full, options);

  BatchLabels out;
  out.labels.resize(Y.cols());
  out.margins.resize(Y.cols());
  for (Index j = 0; j < Y.cols(); ++j) {
    const Vector y = Y.col(j);
    const Vector x = coder.encode(y);
    Vector base = y;
    if (model.shared_size() > 0) base -= model.shared_dict * x.tail(model.shared_size());
    int best = 0;
    double best_res = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      const double r =
          (base - model.class_dicts[c] * x.segment(offsets[c], model.class_size(c))).squaredNorm();
      if (r < best_res) {
        second = best_res;
        best_res = r;
        best = c;
      } else if (r < second) {
        second = r;
      }
    }
    out.labels[j] = best;
    out.margins[j] = C > 1 ? second - best_res : 0.0;
  }
  return out;
}

}  // namespace alsf::sparse_coding
