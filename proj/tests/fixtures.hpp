#pragma once

#include "alsf/model.hpp"
#include "oracles.hpp"

namespace fixture {

struct Instance {
  alsf::AlsfModel model;
  alsf::Codes codes;
  alsf::TrainingSet data;
  std::vector<oracle::Mat> Y;

  oracle::Blocks blocks() const {
    oracle::Blocks b;
    b.D = model.class_dicts;
    b.A = model.class_analysis;
    b.X = codes.class_codes;
    b.X0 = codes.shared_codes;
    b.D0 = model.shared_dict;
    b.A0 = model.shared_analysis;
    return b;
  }
};

// Random model, codes and data with unit-feasible dictionaries.
inline Instance random_instance(std::uint64_t seed, int d, int C, int k, int k0, int n) {
  std::mt19937_64 rng(seed);
  Instance in;
  for (int c = 0; c < C; ++c) {
    oracle::Mat D = oracle::random_matrix(rng, d, k);
    for (Eigen::Index j = 0; j < D.cols(); ++j) D.col(j) /= D.col(j).norm();
    in.model.class_dicts.push_back(D);
    in.model.class_analysis.push_back(oracle::random_matrix(rng, k, d, 0.3));
    in.model.labels.push_back("c" + std::to_string(c));
    in.Y.push_back(oracle::random_matrix(rng, d, n));
    in.codes.class_codes.push_back(oracle::random_matrix(rng, k, n));
    in.codes.shared_codes.push_back(oracle::random_matrix(rng, k0, n));
  }
  oracle::Mat D0 = oracle::random_matrix(rng, d, k0);
  for (Eigen::Index j = 0; j < D0.cols(); ++j) D0.col(j) /= D0.col(j).norm();
  in.model.shared_dict = D0;
  in.model.shared_analysis = oracle::random_matrix(rng, k0, d, 0.3);
  if (k0 == 0) in.model.shared_analysis.resize(0, d);
  in.data = alsf::TrainingSet::from_classes(in.Y);
  return in;
}

}  // namespace fixture
