#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "copr/error.hpp"
#include "copr/neural/mlp.hpp"
#include "copr/rng.hpp"

namespace copr::nn {

struct TrainConfig {
  double lr = 5e-4;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double validation_fraction = 0.4;
  std::size_t early_stop_patience = 20;

  void validate() const {
    if (!(lr > 0.0) || epochs == 0 || batch_size == 0 || early_stop_patience == 0 ||
        !(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "TrainConfig: lr, epochs, batch_size, patience must be positive "
                                            "and validation_fraction in (0,1)");
    }
  }
};

/// Validation loss per epoch; index 0 is before the first update.
struct TrainHistory {
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;

  double initial() const { return validation_loss.front(); }
  double best() const { return validation_loss[best_epoch]; }
};

struct TrainResult {
  MlpModel model;
  TrainHistory history;
};

/// Deterministic train/validation split of sample indices.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

inline Split split_indices(std::size_t n, double validation_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(seed, "split");
  std::shuffle(idx.begin(), idx.end(), rng);
  Split s;
  if (n < 2) {
    s.train = idx;
    s.validation = idx;
    return s;
  }
  auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  s.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return s;
}

inline Matrix gather_columns(const Matrix& m, const std::vector<std::size_t>& cols, std::size_t begin,
                             std::size_t end) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i - begin)) = m.col(static_cast<Eigen::Index>(cols[i]));
  return out;
}

/// Mini-batch Adam on MSE with early stopping; returns the best-validation
/// snapshot rounded to f32.
inline TrainResult train_mse(MlpModel model, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (n == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training samples");
  if (targets.cols() != inputs.cols()) throw Error(ErrorCode::DimMismatch, "inputs/targets sample count");

  const Split split = split_indices(n, cfg.validation_fraction, cfg.seed);
  const Matrix val_x = gather_columns(inputs, split.validation, 0, split.validation.size());
  const Matrix val_y = gather_columns(targets, split.validation, 0, split.validation.size());

  AdamState adam = AdamState::for_model(model, cfg.lr);
  Rng shuffle_rng = make_rng(cfg.seed, "shuffle");
  std::vector<std::size_t> order = split.train;

  TrainResult result{model, {}};
  result.history.validation_loss.push_back(mse_batch(model, val_x, val_y));
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const Matrix bx = gather_columns(inputs, order, b, e);
      const Matrix by = gather_columns(targets, order, b, e);
      auto [loss, grads] = mse_grad_batch(model, bx, by);
      adam_step(adam, model, grads);
    }
    const double val = mse_batch(model, val_x, val_y);
    result.history.validation_loss.push_back(val);
    result.history.epochs_run = epoch;
    if (val < result.history.best()) {
      result.history.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  result.model.round_to_f32();
  return result;
}

}  // namespace copr::nn
