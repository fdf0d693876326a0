#pragma once

// Independent reference computations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "copr/neural/mlp.hpp"
#include "copr/rng.hpp"
#include "copr/vpr_map.hpp"

namespace oracle {

using copr::nn::Matrix;
using copr::nn::MlpModel;
using copr::nn::Vector;

/// Index of the nearest row by plain linear scan; ties keep the lower index.
inline std::size_t brute_force_nn(const std::vector<copr::Descriptor>& rows, const copr::Descriptor& q) {
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double d = 0.0;
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      const double diff = rows[i][k] - q[k];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

/// Random model with 1..3 layers, widths in [1, 8], random activations and biases.
inline MlpModel random_model(copr::Rng& rng) {
  const std::size_t n_layers = 1 + copr::uniform_index(rng, 3);
  std::vector<copr::nn::Layer> layers;
  auto in = static_cast<Eigen::Index>(1 + copr::uniform_index(rng, 8));
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto out = static_cast<Eigen::Index>(1 + copr::uniform_index(rng, 8));
    copr::nn::Layer layer{Matrix(out, in), Vector(out),
                          copr::uniform_index(rng, 2) == 0 ? copr::nn::Activation::GeLU
                                                           : copr::nn::Activation::Identity};
    for (auto& w : layer.weights.reshaped()) w = copr::gaussian(rng);
    for (auto& b : layer.bias) b = copr::gaussian(rng, 0.5);
    layers.push_back(std::move(layer));
    in = out;
  }
  layers.back().activation = copr::nn::Activation::Identity;
  return MlpModel(std::move(layers));
}

inline double mse(const MlpModel& m, const Vector& x, const Vector& y) {
  return (copr::nn::mlp_forward(m, x) - y).squaredNorm() / static_cast<double>(y.size());
}

/// Relative error ||g_analytic - g_fd|| / max(||g_analytic||, ||g_fd||, 1e-12)
/// over all parameters, with central differences of step h.
inline double gradient_relative_error(const MlpModel& model, const Vector& x, const Vector& y, double h = 1e-6) {
  const auto analytic = copr::nn::mlp_grad(model, x, y).second;
  double diff2 = 0.0, a2 = 0.0, f2 = 0.0;
  MlpModel probe = model;
  auto visit = [&](double& param, double g) {
    const double orig = param;
    param = orig + h;
    const double up = mse(probe, x, y);
    param = orig - h;
    const double down = mse(probe, x, y);
    param = orig;
    const double fd = (up - down) / (2.0 * h);
    diff2 += (g - fd) * (g - fd);
    a2 += g * g;
    f2 += fd * fd;
  };
  for (std::size_t l = 0; l < probe.num_layers(); ++l) {
    auto& layer = probe.layers()[l];
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) visit(layer.weights(r, c), analytic.weights[l](r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) visit(layer.bias[r], analytic.biases[l][r]);
  }
  return std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(f2), 1e-12});
}

/// Worst relative error over `draws` seeded random (model, input, target) triples.
inline double worst_gradient_error(std::uint64_t seed, std::size_t draws) {
  copr::Rng rng = copr::make_rng(seed, "gradient-oracle");
  double worst = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    const MlpModel m = random_model(rng);
    Vector x(static_cast<Eigen::Index>(m.input_dim()));
    Vector y(static_cast<Eigen::Index>(m.output_dim()));
    for (auto& v : x) v = copr::gaussian(rng);
    for (auto& v : y) v = copr::gaussian(rng);
    worst = std::max(worst, gradient_relative_error(m, x, y));
  }
  return worst;
}

/// Two Adam steps on a 1×1 Identity layer (weight w0, bias b0) with the
/// given per-step gradients, evaluated scalar by scalar. Returns the largest
/// deviation of the library result from the hand recurrence.
inline double adam_two_step_deviation(double lr, double w0, double b0, const double gw[2], const double gb[2]) {
  copr::nn::Layer layer{Matrix::Constant(1, 1, w0), Vector::Constant(1, b0), copr::nn::Activation::Identity};
  MlpModel model({layer});
  auto state = copr::nn::AdamState::for_model(model, lr);

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double p[2] = {w0, b0}, m[2] = {0, 0}, v[2] = {0, 0};
  double worst = 0.0;
  for (int t = 1; t <= 2; ++t) {
    copr::nn::Gradients g = copr::nn::Gradients::zeros_like(model);
    g.weights[0](0, 0) = gw[t - 1];
    g.biases[0][0] = gb[t - 1];
    copr::nn::adam_step(state, model, g);
    const double grads[2] = {gw[t - 1], gb[t - 1]};
    for (int k = 0; k < 2; ++k) {
      m[k] = b1 * m[k] + (1 - b1) * grads[k];
      v[k] = b2 * v[k] + (1 - b2) * grads[k] * grads[k];
      const double m_hat = m[k] / (1 - std::pow(b1, t));
      const double v_hat = v[k] / (1 - std::pow(b2, t));
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    worst = std::max({worst, std::abs(model.layers()[0].weights(0, 0) - p[0]),
                      std::abs(model.layers()[0].bias[0] - p[1]),
                      std::abs(state.m.weights[0](0, 0) - m[0]), std::abs(state.v.biases[0][0] - v[1])});
  }
  return worst;
}

}  // namespace oracle
