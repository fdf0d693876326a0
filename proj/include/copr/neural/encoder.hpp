#pragma once

// Small synthetic feature encoder E trained with one of three objectives:
// triplet (scene-discriminative), relative pose through an RPE head, or
// distance matching between feature and translation differences.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "copr/error.hpp"
#include "copr/geometry.hpp"
#include "copr/neural/losses.hpp"
#include "copr/neural/mlp.hpp"
#include "copr/neural/train.hpp"
#include "copr/rng.hpp"

namespace copr::nn {

enum class EncoderLoss { Triplet, Relative, Distance };

inline const char* to_string(EncoderLoss v) {
  switch (v) {
    case EncoderLoss::Triplet: return "triplet";
    case EncoderLoss::Relative: return "relative";
    case EncoderLoss::Distance: return "distance";
  }
  return "?";
}

/// Adam learning rates per objective (triplet, relative, distance).
inline double default_encoder_lr(EncoderLoss v) {
  switch (v) {
    case EncoderLoss::Triplet: return 1e-5;
    case EncoderLoss::Relative: return 1e-4;
    case EncoderLoss::Distance: return 5e-5;
  }
  return 1e-4;
}

struct EncoderDataset {
  std::vector<Vector> observations;
  std::vector<Pose> poses;
  std::vector<int> labels;  // scene label per observation

  std::size_t size() const { return observations.size(); }
};

struct EncoderConfig {
  std::size_t descriptor_dim = 16;
  std::vector<std::size_t> hidden = {32};
  std::vector<std::size_t> rpe_hidden = {32};
  double margin = 0.3;
  /// Probability that a distance-loss partner is drawn from the same scene.
  double distance_same_scene = 0.9;
  TrainConfig train;  // train.lr is used as given; see default_encoder_lr
};

struct EncoderTrainResult {
  MlpModel encoder;
  TrainHistory history;
};

namespace detail {

struct Tuple {
  std::size_t q, p, n;
};

class TupleSampler {
 public:
  TupleSampler(const EncoderDataset& data, const std::vector<std::size_t>& pool) : data_(data), pool_(pool) {
    for (std::size_t i : pool) by_label_[data.labels[i]].push_back(i);
  }

  Tuple sample(EncoderLoss variant, std::size_t q, Rng& rng, double same_scene_prob) const {
    const auto& same = by_label_.at(data_.labels[q]);
    auto pick_same = [&] {
      if (same.size() < 2) return q;
      for (;;) {
        std::size_t c = same[uniform_index(rng, same.size())];
        if (c != q) return c;
      }
    };
    auto pick_any = [&] {
      for (;;) {
        std::size_t c = pool_[uniform_index(rng, pool_.size())];
        if (c != q || pool_.size() == 1) return c;
      }
    };
    switch (variant) {
      case EncoderLoss::Triplet: {
        std::size_t n;
        do {
          n = pool_[uniform_index(rng, pool_.size())];
        } while (data_.labels[n] == data_.labels[q]);
        return {q, pick_same(), n};
      }
      case EncoderLoss::Relative:
        return {q, pick_same(), q};
      case EncoderLoss::Distance:
        return {q, uniform(rng, 0.0, 1.0) < same_scene_prob ? pick_same() : pick_any(), q};
    }
    return {q, q, q};
  }

 private:
  const EncoderDataset& data_;
  const std::vector<std::size_t>& pool_;
  std::map<int, std::vector<std::size_t>> by_label_;
};

struct BatchOutcome {
  double loss = 0.0;
  Gradients encoder;
  Gradients head;
};

inline Matrix stack_observations(const EncoderDataset& data, const std::vector<Tuple>& tuples,
                                 std::size_t Tuple::*member) {
  Matrix x(data.observations.front().size(), static_cast<Eigen::Index>(tuples.size()));
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = data.observations[tuples[i].*member];
  }
  return x;
}

inline BatchOutcome evaluate_batch(const EncoderDataset& data, EncoderLoss variant, const MlpModel& encoder,
                                   const MlpModel& head, const std::vector<Tuple>& tuples, double margin,
                                   bool want_grads) {
  const double inv_b = 1.0 / static_cast<double>(tuples.size());
  const auto nd = static_cast<Eigen::Index>(encoder.output_dim());
  BatchOutcome out;
  ForwardCache cq, cp, cn;
  const Matrix fq = forward_batch(encoder, stack_observations(data, tuples, &Tuple::q), &cq);
  const Matrix fp = forward_batch(encoder, stack_observations(data, tuples, &Tuple::p), &cp);
  Matrix gq = Matrix::Zero(nd, fq.cols());
  Matrix gp = Matrix::Zero(nd, fq.cols());

  switch (variant) {
    case EncoderLoss::Triplet: {
      const Matrix fn = forward_batch(encoder, stack_observations(data, tuples, &Tuple::n), &cn);
      Matrix gn = Matrix::Zero(nd, fq.cols());
      for (Eigen::Index i = 0; i < fq.cols(); ++i) {
        const auto g = loss_triplet_grad(fq.col(i), fp.col(i), fn.col(i), margin);
        out.loss += g.loss * inv_b;
        gq.col(i) = g.d_query * inv_b;
        gp.col(i) = g.d_positive * inv_b;
        gn.col(i) = g.d_negative * inv_b;
      }
      if (want_grads) {
        out.encoder = backward(encoder, cn, gn);
      }
      break;
    }
    case EncoderLoss::Relative: {
      Matrix joint(2 * nd, fq.cols());
      joint.topRows(nd) = fq;
      joint.bottomRows(nd) = fp;
      ForwardCache ch;
      const Matrix est = forward_batch(head, joint, &ch);
      Matrix gest(7, fq.cols());
      for (Eigen::Index i = 0; i < fq.cols(); ++i) {
        const auto gt = relative_pose(data.poses[tuples[static_cast<std::size_t>(i)].q],
                                      data.poses[tuples[static_cast<std::size_t>(i)].p])
                            .flat();
        const Eigen::VectorXd gt_v = Eigen::Map<const Eigen::VectorXd>(gt.data(), 7);
        out.loss += loss_relative(est.col(i), gt_v) * inv_b;
        gest.col(i) = loss_relative_grad(est.col(i), gt_v) * inv_b;
      }
      if (want_grads) {
        Matrix gjoint;
        out.head = backward(head, ch, gest, &gjoint);
        gq = gjoint.topRows(nd);
        gp = gjoint.bottomRows(nd);
      }
      break;
    }
    case EncoderLoss::Distance: {
      for (Eigen::Index i = 0; i < fq.cols(); ++i) {
        const auto& t = tuples[static_cast<std::size_t>(i)];
        const auto g = loss_distance_grad(fq.col(i), fp.col(i), data.poses[t.q].t, data.poses[t.p].t);
        out.loss += g.loss * inv_b;
        gq.col(i) = g.d_first * inv_b;
        gp.col(i) = g.d_second * inv_b;
      }
      break;
    }
  }
  if (want_grads) {
    Gradients g = backward(encoder, cq, gq);
    g += backward(encoder, cp, gp);
    if (variant == EncoderLoss::Triplet) g += out.encoder;
    out.encoder = std::move(g);
  }
  return out;
}

}  // namespace detail

inline std::size_t count_labels(const std::vector<int>& labels) {
  return std::set<int>(labels.begin(), labels.end()).size();
}

/// Trains E mapping observations to `cfg.descriptor_dim` descriptors. The RPE
/// head of the Relative objective is discarded after training.
inline EncoderTrainResult train_encoder(const EncoderDataset& data, EncoderLoss variant, const EncoderConfig& cfg) {
  cfg.train.validate();
  if (data.size() < 2) throw Error(ErrorCode::EmptyTrainingSet, "encoder dataset needs >= 2 observations");
  if (data.poses.size() != data.size() || data.labels.size() != data.size()) {
    throw Error(ErrorCode::CountMismatch, "observations, poses and labels must align");
  }
  if (variant == EncoderLoss::Triplet && count_labels(data.labels) < 2) {
    throw Error(ErrorCode::InsufficientScenes, "triplet loss needs negatives from at least 2 scenes");
  }
  const std::size_t obs_dim = static_cast<std::size_t>(data.observations.front().size());
  for (const auto& o : data.observations) {
    if (static_cast<std::size_t>(o.size()) != obs_dim) throw Error(ErrorCode::DimMismatch, "observation dim");
  }

  std::vector<std::size_t> widths{obs_dim};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(cfg.descriptor_dim);
  MlpModel encoder = MlpModel::build(widths, Activation::GeLU, cfg.train.seed, "encoder");
  std::vector<std::size_t> head_widths{2 * cfg.descriptor_dim};
  head_widths.insert(head_widths.end(), cfg.rpe_hidden.begin(), cfg.rpe_hidden.end());
  head_widths.push_back(7);
  MlpModel head = MlpModel::build(head_widths, Activation::GeLU, cfg.train.seed, "rpe-head");

  Split split = split_indices(data.size(), cfg.train.validation_fraction, cfg.train.seed);
  if (variant == EncoderLoss::Triplet &&
      (count_labels([&] {
         std::vector<int> l;
         for (auto i : split.validation) l.push_back(data.labels[i]);
         return l;
       }()) < 2)) {
    split.validation = split.train;
  }
  const detail::TupleSampler train_sampler(data, split.train);
  const detail::TupleSampler val_sampler(data, split.validation);

  Rng val_rng = make_rng(cfg.train.seed, "val-tuples");
  std::vector<detail::Tuple> val_tuples;
  for (std::size_t q : split.validation) {
    val_tuples.push_back(val_sampler.sample(variant, q, val_rng, cfg.distance_same_scene));
  }
  auto validation_loss = [&](const MlpModel& e, const MlpModel& h) {
    return detail::evaluate_batch(data, variant, e, h, val_tuples, cfg.margin, false).loss;
  };

  AdamState adam_e = AdamState::for_model(encoder, cfg.train.lr);
  AdamState adam_h = AdamState::for_model(head, cfg.train.lr);
  Rng rng = make_rng(cfg.train.seed, "encoder-epochs");

  EncoderTrainResult result{encoder, {}};
  result.history.validation_loss.push_back(validation_loss(encoder, head));
  std::vector<std::size_t> order = split.train;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.train.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.train.batch_size);
      std::vector<detail::Tuple> tuples;
      tuples.reserve(e - b);
      for (std::size_t i = b; i < e; ++i) {
        tuples.push_back(train_sampler.sample(variant, order[i], rng, cfg.distance_same_scene));
      }
      auto outcome = detail::evaluate_batch(data, variant, encoder, head, tuples, cfg.margin, true);
      adam_step(adam_e, encoder, outcome.encoder);
      if (variant == EncoderLoss::Relative) adam_step(adam_h, head, outcome.head);
    }
    const double val = validation_loss(encoder, head);
    result.history.validation_loss.push_back(val);
    result.history.epochs_run = epoch;
    if (val < result.history.best()) {
      result.history.best_epoch = epoch;
      result.encoder = encoder;
      since_best = 0;
    } else if (++since_best >= cfg.train.early_stop_patience) {
      break;
    }
  }
  result.encoder.round_to_f32();
  return result;
}

/// Encodes a batch of observations; column i is the descriptor of obs i.
inline Matrix encode(const MlpModel& encoder, const std::vector<Vector>& observations) {
  if (observations.empty()) return Matrix(encoder.output_dim(), 0);
  Matrix x(observations.front().size(), static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = observations[i];
  return forward_batch(encoder, x);
}

}  // namespace copr::nn
