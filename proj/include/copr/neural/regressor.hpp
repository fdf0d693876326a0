#pragma once

// Non-linear descriptor regressor: f_target = H(f_anchor, Δp), where the
// input is the anchor descriptor stacked with the 7-component relative pose.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "copr/error.hpp"
#include "copr/geometry.hpp"
#include "copr/neural/mlp.hpp"
#include "copr/neural/train.hpp"
#include "copr/rng.hpp"
#include "copr/vpr_map.hpp"

namespace copr::nn {

inline constexpr std::size_t kRelativePoseLength = 7;
inline constexpr std::size_t kRegressorHiddenLayers = 7;

struct RegressionPair {
  Descriptor anchor;
  RelativePose dp;
  Descriptor target;
};

/// [N+7, N+7 ×7 hidden, N]
inline std::vector<std::size_t> regressor_widths(std::size_t descriptor_dim) {
  std::vector<std::size_t> w(kRegressorHiddenLayers + 1, descriptor_dim + kRelativePoseLength);
  w.push_back(descriptor_dim);
  return w;
}

inline MlpModel make_regressor(std::size_t descriptor_dim, std::uint64_t seed) {
  return MlpModel::build(regressor_widths(descriptor_dim), Activation::GeLU, seed, "regressor");
}

inline void write_regression_input(const Descriptor& f_anchor, const RelativePose& dp, double* out) {
  const auto n = static_cast<std::size_t>(f_anchor.size());
  std::copy(f_anchor.data(), f_anchor.data() + n, out);
  const auto flat = dp.flat();
  std::copy(flat.begin(), flat.end(), out + n);
}

inline Vector regression_input(const Descriptor& f_anchor, const RelativePose& dp) {
  Vector in(f_anchor.size() + static_cast<Eigen::Index>(kRelativePoseLength));
  write_regression_input(f_anchor, dp, in.data());
  return in;
}

inline Descriptor regress_nonlinear(const MlpModel& model_h, const Descriptor& f_anchor, const RelativePose& dp) {
  if (model_h.input_dim() != static_cast<std::size_t>(f_anchor.size()) + kRelativePoseLength ||
      model_h.output_dim() != static_cast<std::size_t>(f_anchor.size())) {
    throw Error(ErrorCode::DimMismatch, "regressor expects input N+7 and output N for N=" +
                                            std::to_string(f_anchor.size()));
  }
  return mlp_forward(model_h, regression_input(f_anchor, dp));
}

/// Batched regression; column i of the result corresponds to pair i.
inline Matrix regress_nonlinear_batch(const MlpModel& model_h, const std::vector<const Descriptor*>& anchors,
                                      const std::vector<RelativePose>& dps) {
  if (anchors.empty()) return Matrix(model_h.output_dim(), 0);
  const auto n = static_cast<std::size_t>(anchors.front()->size());
  if (model_h.input_dim() != n + kRelativePoseLength || model_h.output_dim() != n) {
    throw Error(ErrorCode::DimMismatch, "regressor expects input N+7 and output N");
  }
  Matrix x(static_cast<Eigen::Index>(n + kRelativePoseLength), static_cast<Eigen::Index>(anchors.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (static_cast<std::size_t>(anchors[i]->size()) != n) throw Error(ErrorCode::DimMismatch, "anchor dim");
    write_regression_input(*anchors[i], dps[i], x.col(static_cast<Eigen::Index>(i)).data());
  }
  return forward_batch(model_h, x);
}

/// Trains H on (anchor, Δp, target) pairs with MSE and Adam.
inline TrainResult train_regressor(const std::vector<RegressionPair>& pairs, const TrainConfig& cfg,
                                   std::size_t descriptor_dim) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no regression pairs");
  const auto n = static_cast<Eigen::Index>(descriptor_dim);
  Matrix x(n + static_cast<Eigen::Index>(kRelativePoseLength), static_cast<Eigen::Index>(pairs.size()));
  Matrix y(n, static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.anchor.size() != n || p.target.size() != n) {
      throw Error(ErrorCode::DimMismatch, "pair " + std::to_string(i) + " descriptor dim");
    }
    write_regression_input(p.anchor, p.dp, x.col(static_cast<Eigen::Index>(i)).data());
    y.col(static_cast<Eigen::Index>(i)) = p.target;
  }
  return train_mse(make_regressor(descriptor_dim, cfg.seed), x, y, cfg);
}

struct PairSampling {
  double max_translation = 0.5;  // meters
  std::size_t max_pairs = 8000;
  std::uint64_t seed = 1;
};

/// Ordered pairs (i, j), i != j, from a set of observations whose relative
/// translation is within `max_translation`, subsampled to `max_pairs`.
inline std::vector<RegressionPair> make_regression_pairs(const std::vector<Descriptor>& descriptors,
                                                         const std::vector<Pose>& poses,
                                                         const PairSampling& sampling) {
  if (descriptors.size() != poses.size()) throw Error(ErrorCode::CountMismatch, "descriptors vs poses");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
  const double cap2 = sampling.max_translation * sampling.max_translation;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (std::size_t j = 0; j < poses.size(); ++j) {
      if (i != j && (poses[i].t - poses[j].t).squaredNorm() <= cap2) {
        candidates.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
      }
    }
  }
  Rng rng = make_rng(sampling.seed, "pairs");
  if (candidates.size() > sampling.max_pairs) {
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(sampling.max_pairs);
  }
  std::vector<RegressionPair> pairs;
  pairs.reserve(candidates.size());
  for (auto [i, j] : candidates) {
    pairs.push_back({descriptors[i], relative_pose(poses[i], poses[j]), descriptors[j]});
  }
  return pairs;
}

}  // namespace copr::nn
