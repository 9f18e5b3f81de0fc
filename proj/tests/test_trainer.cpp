#include <doctest.h>

#include "alsf/data.hpp"
#include "alsf/trainer.hpp"
#include "fixtures.hpp"

using namespace alsf;
using oracle::Mat;
using oracle::Vec;

namespace {

Hyperparams weights(double tau, double l1, double l2, double l3) {
  Hyperparams hp;
  hp.tau = tau;
  hp.lambda1 = l1;
  hp.lambda2 = l2;
  hp.lambda3 = l3;
  return hp;
}

Mat project_oracle(Mat D) {
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    const double n = D.col(j).norm();
    if (n > 1.0) D.col(j) /= n;
  }
  return D;
}

}  // namespace

TEST_CASE("init_model: baseline mode uses the pseudoinverse of the class dictionaries") {
  const auto in = fixture::random_instance(1, 8, 2, 3, 0, 6);
  Hyperparams hp;
  hp.k_per_class = 3;
  hp.k_shared = 0;
  const auto [model, codes] = trainer::init_model(in.data, hp);
  CHECK(model.shared_size() == 0);
  Mat D(8, 6);
  D << model.class_dicts[0], model.class_dicts[1];
  const Mat ref = D.completeOrthogonalDecomposition().pseudoInverse();
  CHECK(oracle::rel(model.stacked_analysis(), ref) < 1e-9);
  CHECK(oracle::rel(codes.class_codes[1], model.class_analysis[1] * in.Y[1]) < 1e-14);
}

TEST_CASE("init_model: orthonormal columns are reproduced") {
  std::mt19937_64 rng(2);
  const Mat Q = oracle::random_matrix(rng, 10, 6).householderQr().householderQ() * Mat::Identity(10, 6);
  const auto set = TrainingSet::from_classes({Q.leftCols(3), Q.rightCols(3)});
  Hyperparams hp;
  hp.k_per_class = 3;
  hp.k_shared = 0;
  const auto [model, codes] = trainer::init_model(set, hp);
  for (int c = 0; c < 2; ++c) {
    const Mat& Yc = set.per_class[c];
    for (Eigen::Index j = 0; j < 3; ++j) {
      double best = 1e9;
      for (Eigen::Index i = 0; i < 3; ++i) best = std::min(best, (model.class_dicts[c].col(j) - Yc.col(i)).norm());
      CHECK(best < 1e-14);
    }
    CHECK((model.class_analysis[c] * model.class_dicts[c] - Mat::Identity(3, 3)).norm() < 1e-10);
  }
}

TEST_CASE("init_model: deterministic, shared atoms from leading singular vectors") {
  const auto in = fixture::random_instance(3, 12, 2, 4, 3, 10);
  Hyperparams hp;
  hp.k_per_class = 4;
  hp.k_shared = 3;
  hp.seed = 42;
  const auto a = trainer::init_model(in.data, hp);
  const auto b = trainer::init_model(in.data, hp);
  CHECK(a.first.class_dicts[0] == b.first.class_dicts[0]);
  CHECK(a.first.shared_analysis == b.first.shared_analysis);

  Mat Y(12, 20);
  Y << in.Y[0], in.Y[1];
  Eigen::JacobiSVD<Mat> svd(Y, Eigen::ComputeThinU);
  const Mat U = svd.matrixU().leftCols(3);
  // Same subspace: projector difference.
  const Mat P1 = U * U.transpose();
  const Mat P2 = a.first.shared_dict * a.first.shared_dict.transpose();
  CHECK((P1 - P2).norm() < 1e-9);

  std::vector<std::string> warnings;
  Hyperparams big = hp;
  big.k_per_class = 15;
  trainer::init_model(in.data, big, &warnings);
  CHECK(!warnings.empty());

  const auto zero = TrainingSet::from_classes({Mat::Zero(4, 3), Mat::Zero(4, 3)});
  try {
    trainer::init_model(zero, hp);
    FAIL("expected DegenerateInit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateInit);
  }
}

TEST_CASE("update_codes satisfies both block normal equations") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = fixture::random_instance(seed, 12, 2, 4, 3, 9);
    const Hyperparams hp = weights(1.3, 0.1, 0.4, 0.7);
    for (int c = 0; c < 2; ++c) {
      BlockStep step;
      const auto [Xc, X0] = trainer::update_codes(in.model, in.codes, in.data, hp, c, &step);
      const double w2 = std::sqrt(hp.tau * hp.lambda2), w3 = std::sqrt(hp.tau * hp.lambda3);
      const Mat& D = in.model.class_dicts[c];
      const Mat& D0 = in.model.shared_dict;
      // X_0c against the previous X_cc.
      Mat G0(12 + 3, 3);
      G0 << D0, w3 * Mat::Identity(3, 3);
      Mat H0(15, 9);
      H0 << in.Y[c] - D * in.codes.class_codes[c], w3 * in.model.shared_analysis * in.Y[c];
      CHECK(oracle::left_normal_residual(G0, H0, X0, 0.0) <= 1e-9);
      // X_cc against the new X_0c.
      Mat G(12 + 4, 4);
      G << D, w2 * Mat::Identity(4, 4);
      Mat H(16, 9);
      H << in.Y[c] - D0 * X0, w2 * in.model.class_analysis[c] * in.Y[c];
      CHECK(oracle::left_normal_residual(G, H, Xc, 0.0) <= 1e-9);
      CHECK(step.after <= step.before + 1e-9);
    }
  }
}

TEST_CASE("update_codes: joint solve, penalty limit and baseline reduction") {
  const auto in = fixture::random_instance(11, 10, 2, 3, 2, 8);
  Hyperparams hp = weights(1.0, 0.1, 0.3, 0.2);
  hp.joint_code_solve = true;
  BlockStep step;
  const auto [Xc, X0] = trainer::update_codes(in.model, in.codes, in.data, hp, 0, &step);
  Mat G(10 + 5, 5);
  G << in.model.class_dicts[0], in.model.shared_dict, Mat::Zero(5, 5);
  G.block(10, 0, 3, 3) = std::sqrt(0.3) * Mat::Identity(3, 3);
  G.block(13, 3, 2, 2) = std::sqrt(0.2) * Mat::Identity(2, 2);
  Mat H(15, 8);
  H << in.Y[0], std::sqrt(0.3) * in.model.class_analysis[0] * in.Y[0],
      std::sqrt(0.2) * in.model.shared_analysis * in.Y[0];
  Mat X(5, 8);
  X << Xc, X0;
  CHECK(oracle::left_normal_residual(G, H, X, 0.0) <= 1e-9);
  CHECK(step.after <= step.before + 1e-9);

  const Hyperparams big = weights(1.0, 0.0, 1e12, 1e12);
  const auto [Xb, X0b] = trainer::update_codes(in.model, in.codes, in.data, big, 1);
  const Mat AY = in.model.class_analysis[1] * in.Y[1];
  const Mat A0Y = in.model.shared_analysis * in.Y[1];
  CHECK(oracle::rel(Xb, AY) < 1e-4);
  CHECK(oracle::rel(X0b, A0Y) < 1e-4);

  const auto base = fixture::random_instance(12, 10, 2, 3, 0, 8);
  const Hyperparams hb = weights(1.0, 0.0, 0.5, 0.0);
  const auto [Xr, X0r] = trainer::update_codes(base.model, base.codes, base.data, hb, 0);
  CHECK(X0r.rows() == 0);
  const Mat& D = base.model.class_dicts[0];
  const Mat ref = (D.transpose() * D + 0.5 * Mat::Identity(3, 3))
                      .ldlt()
                      .solve(D.transpose() * base.Y[0] + 0.5 * base.model.class_analysis[0] * base.Y[0]);
  CHECK(oracle::rel(Xr, ref) < 1e-10);
}

TEST_CASE("update_analysis_class normal equations and limits") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = fixture::random_instance(seed + 20, 8, 3, 3, 2, 12);
    Hyperparams hp = weights(1.0, 0.1, 0.6, 0.2);
    hp.eta1 = 1e-3;
    for (int c = 0; c < 3; ++c) {
      BlockStep step;
      const Mat A = trainer::update_analysis_class(in.model, in.codes, in.data, hp, c, &step);
      const Mat Yb = oracle::complement(in.Y, c);
      const Mat lhs = A * (Yb * Yb.transpose() / Yb.cols() + hp.lambda2 * in.Y[c] * in.Y[c].transpose() +
                           hp.eta1 * Mat::Identity(8, 8));
      const Mat rhs = hp.lambda2 * in.codes.class_codes[c] * in.Y[c].transpose();
      CHECK((lhs - rhs).norm() / rhs.norm() <= 1e-9);
      CHECK(step.after <= step.before + 1e-9);
    }
  }
  const auto in = fixture::random_instance(30, 8, 2, 3, 2, 12);
  Hyperparams hp = weights(1.0, 0.1, 0.6, 0.2);
  hp.eta1 = 1e12;
  CHECK(trainer::update_analysis_class(in.model, in.codes, in.data, hp, 0).norm() < 1e-9);

  // Single class, full row rank: interpolation A_c Y_c = X_cc.
  auto one = fixture::random_instance(31, 5, 1, 3, 0, 9);
  Hyperparams h1 = weights(1.0, 0.0, 1.0, 0.0);
  h1.eta1 = 0.0;
  const Mat A = trainer::update_analysis_class(one.model, one.codes, one.data, h1, 0);
  const Mat ref = one.codes.class_codes[0] * one.Y[0].transpose() *
                  (one.Y[0] * one.Y[0].transpose()).inverse();
  CHECK(oracle::rel(A, ref) < 1e-8);
}

TEST_CASE("update_analysis_shared normal equations, limits and weight errors") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = fixture::random_instance(seed + 40, 9, 2, 3, 4, 10);
    Hyperparams hp = weights(1.0, 0.3, 0.5, 0.2);
    BlockStep step;
    const Mat A0 = trainer::update_analysis_shared(in.model, in.codes, in.data, hp, &step);
    const Vec m = oracle::column_mean(in.Y);
    Mat gram = hp.ridge_a0 * Mat::Identity(9, 9);
    Mat rhs = Mat::Zero(4, 9);
    for (int c = 0; c < 2; ++c) {
      Mat cen = in.Y[c];
      for (Eigen::Index j = 0; j < cen.cols(); ++j) cen.col(j) -= m;
      gram += in.Y[c] * in.Y[c].transpose() + (hp.lambda1 / hp.lambda3) * cen * cen.transpose();
      rhs += in.codes.shared_codes[c] * in.Y[c].transpose();
    }
    CHECK((A0 * gram - rhs).norm() / rhs.norm() <= 1e-9);
    CHECK(step.after <= step.before + 1e-9);
  }

  auto in = fixture::random_instance(50, 6, 2, 2, 3, 12);
  std::mt19937_64 rng(51);
  const Mat B = oracle::random_matrix(rng, 3, 6);
  for (int c = 0; c < 2; ++c) in.codes.shared_codes[c] = B * in.Y[c];
  const Mat A0 = trainer::update_analysis_shared(in.model, in.codes, in.data, weights(1, 0, 0.1, 0.1));
  for (int c = 0; c < 2; ++c) CHECK(oracle::rel(A0 * in.Y[c], in.codes.shared_codes[c]) < 1e-5);

  try {
    trainer::update_analysis_shared(in.model, in.codes, in.data, weights(1, 0.5, 0.1, 0.0));
    FAIL("expected WeightError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kWeightError);
  }
}

TEST_CASE("update_dict_class normal equations and degenerate codes") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = fixture::random_instance(seed + 60, 10, 2, 4, 2, 15);
    // Small data keeps the least-squares solution feasible, so the returned
    // dictionary is the unprojected solve.
    for (auto& Y : in.data.per_class) Y *= 0.01;
    for (auto& Y : in.Y) Y *= 0.01;
    for (auto& X : in.codes.shared_codes) X *= 0.01;
    BlockStep step;
    const Mat D = trainer::update_dict_class(in.model, in.codes, in.data, 0, &step);
    REQUIRE(D.colwise().norm().maxCoeff() < 1.0);
    const Mat& X = in.codes.class_codes[0];
    const Mat T = in.Y[0] - in.model.shared_dict * in.codes.shared_codes[0];
    CHECK(oracle::right_normal_residual(X, T, D, trainer::kDictRidge) <= 1e-9);
    CHECK(step.after <= step.before + 1e-9);
  }
  auto in = fixture::random_instance(70, 6, 2, 4, 2, 4);
  in.codes.class_codes[0] = Mat::Identity(4, 4);
  const Mat D = trainer::update_dict_class(in.model, in.codes, in.data, 0);
  CHECK(oracle::rel(D, project_oracle(in.Y[0] - in.model.shared_dict * in.codes.shared_codes[0])) < 1e-8);
  in.codes.class_codes[1].setZero();
  CHECK(trainer::update_dict_class(in.model, in.codes, in.data, 1) == in.model.class_dicts[1]);
}

TEST_CASE("update_dict_shared against an SVD oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = fixture::random_instance(seed + 80, 9, 2, 3, 4, 10);
    Hyperparams hp;
    hp.eta = 0.8;  // threshold 0.4
    BlockStep step;
    const Mat D0 = trainer::update_dict_shared(in.model, in.codes, in.data, hp, &step);
    Mat R(9, 20), X0(4, 20);
    for (int c = 0; c < 2; ++c) {
      R.middleCols(c * 10, 10) = in.Y[c] - in.model.class_dicts[c] * in.codes.class_codes[c];
      X0.middleCols(c * 10, 10) = in.codes.shared_codes[c];
    }
    Eigen::JacobiSVD<Mat> svd(X0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vec inv = svd.singularValues();
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > 1e-12 ? 1.0 / inv(i) : 0.0;
    const Mat M = R * svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    CHECK(oracle::rel(D0, project_oracle(oracle::svt(M, 0.4))) < 1e-9);
    CHECK(step.after <= step.before + 1e-9);
  }
  auto in = fixture::random_instance(90, 6, 2, 2, 3, 5);
  Hyperparams hp;
  hp.eta = 1e6;
  CHECK(trainer::update_dict_shared(in.model, in.codes, in.data, hp).norm() == 0.0);
  for (auto& X : in.codes.shared_codes) X.setZero();
  try {
    trainer::update_dict_shared(in.model, in.codes, in.data, hp);
    FAIL("expected RankError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRankError);
  }
}

TEST_CASE("train: one iteration, per-block descent, determinism") {
  SynthSpec spec;
  spec.d = 30;
  spec.patches_per_class = 60;
  spec.class_subspace_dim = 4;
  spec.shared_subspace_dim = 2;
  spec.seed = 3;
  const auto synth = data::synth_generate(spec);
  Hyperparams hp;
  hp.k_per_class = 8;
  hp.k_shared = 3;
  hp.max_iters = 1;
  const auto one = trainer::train(synth.set, hp);
  CHECK(one.report.objective_trace.size() == 2);
  CHECK(one.report.iterations_run == 1);

  hp.max_iters = 10;
  const auto a = trainer::train(synth.set, hp);
  for (const auto& s : a.report.block_steps) {
    CHECK(s.after <= s.before + 1e-9 * std::max(1.0, std::abs(s.before)));
  }
  CHECK(a.report.objective_trace.size() == static_cast<std::size_t>(a.report.iterations_run) + 1);
  const auto b = trainer::train(synth.set, hp);
  CHECK(a.report.objective_trace == b.report.objective_trace);
  CHECK(a.model.shared_dict == b.model.shared_dict);

  Hyperparams serial = hp;
  serial.parallel_classes = false;
  const auto s = trainer::train(synth.set, serial);
  CHECK(s.report.objective_trace == a.report.objective_trace);
  CHECK(s.model.class_analysis[1] == a.model.class_analysis[1]);
  CHECK_NOTHROW(a.model.validate());
}

TEST_CASE("train: 400-atom dictionary shapes") {
  SynthSpec spec;
  spec.d = 400;
  spec.patches_per_class = 420;
  spec.seed = 1;
  const auto synth = data::synth_generate(spec);
  Hyperparams hp;
  hp.k_per_class = 400;
  hp.k_shared = 8;
  hp.max_iters = 1;
  const auto r = trainer::train(synth.set, hp);
  CHECK(r.model.class_dicts[0].rows() == 400);
  CHECK(r.model.class_dicts[0].cols() == 400);
  CHECK(r.model.class_analysis[1].rows() == 400);
}

TEST_CASE("cross_validate tie-breaking and selection") {
  SynthSpec spec;
  spec.d = 30;
  spec.patches_per_class = 40;
  spec.class_subspace_dim = 4;
  spec.shared_subspace_dim = 2;
  spec.seed = 5;
  const auto synth = data::synth_generate(spec);
  Hyperparams hp;
  hp.k_per_class = 6;
  hp.k_shared = 2;
  hp.max_iters = 5;

  const auto single = trainer::cross_validate(synth.set, {hp}, 3, 1);
  CHECK(single.best_index == 0);
  CHECK(single.fold_scores.size() == 1);
  CHECK(single.fold_scores[0].size() == 3);

  const auto twins = trainer::cross_validate(synth.set, {hp, hp}, 3, 1);
  CHECK(twins.best_index == 0);
  CHECK(twins.mean_scores[0] == twins.mean_scores[1]);

  Hyperparams bad = hp;
  bad.tau = 1e6;  // analysis terms swamp reconstruction
  const auto pick = trainer::cross_validate(synth.set, {bad, hp, bad}, 3, 1);
  CHECK(pick.best_index == 1);

  CHECK_THROWS_AS(trainer::cross_validate(synth.set, {hp}, 1, 1), Error);
}
