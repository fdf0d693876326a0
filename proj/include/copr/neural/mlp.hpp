#pragma once

// Minimal deterministic feed-forward network: dense layers with GeLU or
// identity activations, reverse-mode gradients and Adam. Math is 64-bit;
// the persisted format stores f32.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "copr/binary_io.hpp"
#include "copr/error.hpp"
#include "copr/rng.hpp"

namespace copr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint32_t { GeLU = 0, Identity = 1 };

namespace detail {
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;
}  // namespace detail

/// tanh approximation of GeLU.
inline double gelu(double x) {
  const double u = detail::kGeluC * (x + detail::kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_derivative(double x) {
  const double u = detail::kGeluC * (x + detail::kGeluA * x * x * x);
  const double th = std::tanh(u);
  const double du = detail::kGeluC * (1.0 + 3.0 * detail::kGeluA * x * x);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}

struct Layer {
  Matrix weights;  // out × in
  Vector bias;     // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

class MlpModel {
 public:
  MlpModel() = default;

  explicit MlpModel(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

  /// Glorot-uniform init, zero biases. `widths` = [in, hidden..., out]; the
  /// last layer is Identity, all others use `hidden`.
  static MlpModel build(const std::vector<std::size_t>& widths, Activation hidden, std::uint64_t seed,
                        std::string_view tag = "mlp") {
    if (widths.size() < 2) throw Error(ErrorCode::ShapeMismatch, "need at least input and output widths");
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const auto in = static_cast<Eigen::Index>(widths[l]);
      const auto out = static_cast<Eigen::Index>(widths[l + 1]);
      if (in == 0 || out == 0) throw Error(ErrorCode::ShapeMismatch, "zero layer width");
      Rng rng = make_rng(seed, tag, l);
      const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
      Layer layer{Matrix(out, in), Vector::Zero(out),
                  l + 2 == widths.size() ? Activation::Identity : hidden};
      for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = uniform(rng, -bound, bound);
      }
      layers.push_back(std::move(layer));
    }
    return MlpModel(std::move(layers));
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

  /// [in, out_0, out_1, ...]
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w;
    if (layers_.empty()) return w;
    w.push_back(input_dim());
    for (const auto& l : layers_) w.push_back(l.out_dim());
    return w;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  /// Round every parameter to the nearest f32 (the persisted precision).
  void round_to_f32() {
    for (auto& l : layers_) {
      l.weights = l.weights.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
      l.bias = l.bias.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    }
  }

  bool operator==(const MlpModel& o) const {
    if (layers_.size() != o.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& a = layers_[i];
      const auto& b = o.layers_[i];
      if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
          a.weights.cols() != b.weights.cols() || a.weights != b.weights || a.bias != b.bias) {
        return false;
      }
    }
    return true;
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.weights.rows()) throw Error(ErrorCode::ShapeMismatch, "bias/weight rows");
      if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
        throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " input does not chain");
      }
      if (!l.weights.allFinite() || !l.bias.allFinite()) {
        throw Error(ErrorCode::NonFinite, "layer " + std::to_string(i) + " parameters");
      }
    }
  }

  std::vector<Layer> layers_;
};

/// Parameter-shaped buffer (gradients, Adam moments).
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const MlpModel& m) {
    Gradients g;
    for (const auto& l : m.layers()) {
      g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      g.biases.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
  }

  bool matches(const MlpModel& m) const {
    if (weights.size() != m.num_layers() || biases.size() != m.num_layers()) return false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const auto& l = m.layers()[i];
      if (weights[i].rows() != l.weights.rows() || weights[i].cols() != l.weights.cols() ||
          biases[i].size() != l.bias.size()) {
        return false;
      }
    }
    return true;
  }

  Gradients& operator+=(const Gradients& o) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] += o.weights[i];
      biases[i] += o.biases[i];
    }
    return *this;
  }

  Gradients& operator*=(double s) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] *= s;
      biases[i] *= s;
    }
    return *this;
  }
};

/// Activations kept from a batched forward pass for backprop.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input of layer l (in_l × B)
  std::vector<Matrix> preactivations;  // W·x + b of layer l (out_l × B)
};

/// Batched forward pass; columns of `x` are samples.
inline Matrix forward_batch(const MlpModel& model, const Matrix& x, ForwardCache* cache = nullptr) {
  if (static_cast<std::size_t>(x.rows()) != model.input_dim()) {
    throw Error(ErrorCode::DimMismatch, "input dim " + std::to_string(x.rows()) + " != model input " +
                                            std::to_string(model.input_dim()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  Matrix a = x;
  for (const auto& layer : model.layers()) {
    Matrix z = layer.weights * a;
    z.colwise() += layer.bias;
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(a));
      cache->preactivations.push_back(z);
    }
    if (layer.activation == Activation::GeLU) {
      a = z.unaryExpr([](double v) { return gelu(v); });
    } else {
      a = std::move(z);
    }
  }
  return a;
}

inline Vector mlp_forward(const MlpModel& model, const Vector& input) {
  return forward_batch(model, input);
}

/// Backprop `grad_out` (dL/d output, out × B) through a cached forward pass.
/// Optionally returns dL/d input.
inline Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& grad_out,
                          Matrix* grad_input = nullptr) {
  Gradients g = Gradients::zeros_like(model);
  Matrix delta = grad_out;
  for (std::size_t li = model.num_layers(); li-- > 0;) {
    const auto& layer = model.layers()[li];
    if (layer.activation == Activation::GeLU) {
      delta = delta.cwiseProduct(cache.preactivations[li].unaryExpr([](double v) { return gelu_derivative(v); }));
    }
    g.weights[li].noalias() = delta * cache.inputs[li].transpose();
    g.biases[li] = delta.rowwise().sum();
    if (li > 0 || grad_input != nullptr) {
      Matrix next = layer.weights.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (grad_input != nullptr) *grad_input = std::move(delta);
  return g;
}

/// Mean squared error over output dims and columns, with gradients.
inline std::pair<double, Gradients> mse_grad_batch(const MlpModel& model, const Matrix& x, const Matrix& y) {
  if (static_cast<std::size_t>(y.rows()) != model.output_dim() || y.cols() != x.cols()) {
    throw Error(ErrorCode::DimMismatch, "target shape does not match model output");
  }
  ForwardCache cache;
  const Matrix out = forward_batch(model, x, &cache);
  const Matrix resid = out - y;
  const double denom = static_cast<double>(resid.size());
  const double loss = resid.squaredNorm() / denom;
  Gradients g = backward(model, cache, (2.0 / denom) * resid);
  return {loss, std::move(g)};
}

inline std::pair<double, Gradients> mlp_grad(const MlpModel& model, const Vector& input, const Vector& target) {
  if (static_cast<std::size_t>(input.size()) != model.input_dim()) {
    throw Error(ErrorCode::DimMismatch, "input dim does not match model");
  }
  if (static_cast<std::size_t>(target.size()) != model.output_dim()) {
    throw Error(ErrorCode::DimMismatch, "target dim does not match model");
  }
  return mse_grad_batch(model, input, target);
}

inline double mse_batch(const MlpModel& model, const Matrix& x, const Matrix& y) {
  return (forward_batch(model, x) - y).squaredNorm() / static_cast<double>(y.size());
}

struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step_count = 0;
  Gradients m;
  Gradients v;

  static AdamState for_model(const MlpModel& model, double lr) {
    if (!(lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
    AdamState s;
    s.lr = lr;
    s.m = Gradients::zeros_like(model);
    s.v = Gradients::zeros_like(model);
    return s;
  }
};

namespace detail {
template <typename Param, typename Grad, typename Moment>
void adam_update(Param& p, const Grad& g, Moment& m, Moment& v, const AdamState& s, double bc1, double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  p.array() -= s.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}
}  // namespace detail

/// One bias-corrected Adam update of `model` in place.
inline void adam_step(AdamState& state, MlpModel& model, const Gradients& grads) {
  if (!grads.matches(model) || !state.m.matches(model) || !state.v.matches(model)) {
    throw Error(ErrorCode::ShapeMismatch, "gradient/optimizer state shapes do not match model");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    auto& layer = model.layers()[i];
    detail::adam_update(layer.weights, grads.weights[i], state.m.weights[i], state.v.weights[i], state, bc1, bc2);
    detail::adam_update(layer.bias, grads.biases[i], state.m.biases[i], state.v.biases[i], state, bc1, bc2);
  }
}

inline constexpr std::uint32_t kModelFormatVersion = 1;

inline void save_model(const MlpModel& model, const std::filesystem::path& path) {
  for (const auto& l : model.layers()) {
    const bool ok = (l.weights.array().abs() <= std::numeric_limits<float>::max()).all() &&
                    (l.bias.array().abs() <= std::numeric_limits<float>::max()).all();
    if (!ok || !l.weights.allFinite() || !l.bias.allFinite()) {
      throw Error(ErrorCode::RefusedNonFinite, "model parameter does not fit f32");
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os.write("CPRM", 4);
  binary::put_u32(os, kModelFormatVersion);
  binary::put_u32(os, static_cast<std::uint32_t>(model.num_layers()));
  for (const auto& l : model.layers()) {
    binary::put_u32(os, static_cast<std::uint32_t>(l.in_dim()));
    binary::put_u32(os, static_cast<std::uint32_t>(l.out_dim()));
    binary::put_u32(os, static_cast<std::uint32_t>(l.activation));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) binary::put_f32(os, static_cast<float>(l.weights(r, c)));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) binary::put_f32(os, static_cast<float>(l.bias[r]));
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  binary::expect_magic(is, "CPRM");
  const auto version = binary::get_u32(is, "version");
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported, "model format version " + std::to_string(version));
  }
  const auto count = binary::get_u32(is, "layer count");
  std::vector<Layer> layers;
  for (std::uint32_t li = 0; li < count; ++li) {
    const auto in = binary::get_u32(is, "in_dim");
    const auto out = binary::get_u32(is, "out_dim");
    const auto act = binary::get_u32(is, "activation");
    if (act > 1) throw Error(ErrorCode::ParseError, "unknown activation code " + std::to_string(act));
    Layer l{Matrix(out, in), Vector(out), static_cast<Activation>(act)};
    for (std::uint32_t r = 0; r < out; ++r) {
      for (std::uint32_t c = 0; c < in; ++c) l.weights(r, c) = binary::get_f32(is, "weights");
    }
    for (std::uint32_t r = 0; r < out; ++r) l.bias[r] = binary::get_f32(is, "bias");
    layers.push_back(std::move(l));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::ParseError, "trailing bytes in model file");
  return MlpModel(std::move(layers));
}

}  // namespace copr::nn
