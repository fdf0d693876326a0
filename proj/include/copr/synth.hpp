#pragma once

// Seeded synthetic worlds. A descriptor field G*(pose) stands in for a fixed
// image encoder, so ground-truth descriptors exist at every pose. Scenes
// mirror three dataset shapes: a looped reference trajectory with an offset
// query loop, two parallel lanes, and several disjoint scenes.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "copr/error.hpp"
#include "copr/geometry.hpp"
#include "copr/neural/encoder.hpp"
#include "copr/rng.hpp"
#include "copr/vpr_map.hpp"

namespace copr {

enum class FieldKind { Affine, RandomFourier };

struct FieldConfig {
  std::size_t dim = 16;
  FieldKind kind = FieldKind::RandomFourier;
  std::size_t num_waves = 3;
  double freq_scale = 1.5;          // rad / m
  double orientation_weight = 0.1;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (dim == 0) throw Error(ErrorCode::InvalidConfig, "field dim must be >= 1");
    if (kind == FieldKind::RandomFourier && num_waves == 0) throw Error(ErrorCode::InvalidConfig, "num_waves must be >= 1");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise_sigma must be >= 0");
    if (!(freq_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "freq_scale must be > 0");
  }
};

/// Smooth deterministic map from pose to descriptor.
class DescriptorField {
 public:
  /// f(p) = A·t + b
  static DescriptorField affine(Eigen::MatrixXd a, Eigen::VectorXd b, double noise_sigma = 0.0) {
    if (a.rows() != b.size() || a.cols() != 3) throw Error(ErrorCode::DimMismatch, "affine field needs A: N×3, b: N");
    DescriptorField f;
    f.kind_ = FieldKind::Affine;
    f.dim_ = static_cast<std::size_t>(b.size());
    f.linear_ = std::move(a);
    f.offset_ = std::move(b);
    f.noise_sigma_ = noise_sigma;
    return f;
  }

  std::size_t dim() const { return dim_; }
  FieldKind kind() const { return kind_; }
  double noise_sigma() const { return noise_sigma_; }
  const Eigen::MatrixXd& linear() const { return linear_; }
  const Eigen::VectorXd& offset() const { return offset_; }
  const Eigen::MatrixXd& frequencies() const { return freqs_; }
  const Eigen::VectorXd& amplitudes() const { return amps_; }
  const Eigen::VectorXd& phases() const { return phases_; }
  const Eigen::MatrixXd& orientation_basis() const { return orient_; }
  double orientation_weight() const { return orientation_weight_; }

  /// Noiseless value at `pose`.
  Descriptor operator()(const Pose& pose) const {
    if (kind_ == FieldKind::Affine) return linear_ * pose.t + offset_;
    Descriptor out = Descriptor::Zero(static_cast<Eigen::Index>(dim_));
    const Eigen::VectorXd arg = freqs_ * pose.t + phases_;  // one row per (dim, wave)
    for (std::size_t d = 0; d < dim_; ++d) {
      double acc = 0.0;
      for (std::size_t w = 0; w < waves_; ++w) {
        const auto k = static_cast<Eigen::Index>(d * waves_ + w);
        acc += amps_[k] * std::sin(arg[k]);
      }
      out[static_cast<Eigen::Index>(d)] = acc;
    }
    if (orientation_weight_ != 0.0) out += orientation_weight_ * (orient_ * view_direction(pose.q));
    return out;
  }

  /// Camera viewing direction: the body x-axis rotated into the world.
  static Vec3 view_direction(const Quaternion& q) { return q.rotate(Vec3::UnitX()); }

  /// Upper bound on ||∂f_d/∂t|| per component (amplitude · frequency sums).
  Eigen::VectorXd lipschitz_bound() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(dim_));
    for (std::size_t d = 0; d < dim_; ++d) {
      if (kind_ == FieldKind::Affine) {
        out[static_cast<Eigen::Index>(d)] = linear_.row(static_cast<Eigen::Index>(d)).norm();
        continue;
      }
      double acc = 0.0;
      for (std::size_t w = 0; w < waves_; ++w) {
        const auto k = static_cast<Eigen::Index>(d * waves_ + w);
        acc += std::abs(amps_[k]) * freqs_.row(k).norm();
      }
      out[static_cast<Eigen::Index>(d)] = acc;
    }
    return out;
  }

  bool operator==(const DescriptorField& o) const {
    return kind_ == o.kind_ && dim_ == o.dim_ && waves_ == o.waves_ && linear_ == o.linear_ &&
           offset_ == o.offset_ && freqs_ == o.freqs_ && amps_ == o.amps_ && phases_ == o.phases_ &&
           orient_ == o.orient_ && orientation_weight_ == o.orientation_weight_ && noise_sigma_ == o.noise_sigma_;
  }

 private:
  friend DescriptorField make_field(const FieldConfig& cfg);

  FieldKind kind_ = FieldKind::Affine;
  std::size_t dim_ = 0;
  std::size_t waves_ = 0;
  Eigen::MatrixXd linear_;
  Eigen::VectorXd offset_;
  Eigen::MatrixXd freqs_;  // (dim·waves) × 3
  Eigen::VectorXd amps_;
  Eigen::VectorXd phases_;
  Eigen::MatrixXd orient_;  // dim × 3
  double orientation_weight_ = 0.0;
  double noise_sigma_ = 0.0;
};

inline DescriptorField make_field(const FieldConfig& cfg) {
  cfg.validate();
  DescriptorField f;
  f.kind_ = cfg.kind;
  f.dim_ = cfg.dim;
  f.noise_sigma_ = cfg.noise_sigma;
  const auto n = static_cast<Eigen::Index>(cfg.dim);
  Rng rng = make_rng(cfg.seed, "field");
  if (cfg.kind == FieldKind::Affine) {
    f.linear_.resize(n, 3);
    f.offset_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < 3; ++c) f.linear_(i, c) = gaussian(rng);
      f.offset_[i] = gaussian(rng);
    }
    return f;
  }
  f.waves_ = cfg.num_waves;
  const auto rows = n * static_cast<Eigen::Index>(cfg.num_waves);
  f.freqs_.resize(rows, 3);
  f.amps_.resize(rows);
  f.phases_.resize(rows);
  const double amp_scale = 1.0 / std::sqrt(static_cast<double>(cfg.num_waves));
  for (Eigen::Index k = 0; k < rows; ++k) {
    Vec3 dir(gaussian(rng), gaussian(rng), gaussian(rng));
    dir.normalize();
    f.freqs_.row(k) = (cfg.freq_scale * uniform(rng, 0.5, 1.5)) * dir.transpose();
    f.amps_[k] = amp_scale * gaussian(rng);
    f.phases_[k] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  f.orient_.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) f.orient_(i, c) = gaussian(rng) / std::sqrt(3.0);
  }
  f.orientation_weight_ = cfg.orientation_weight;
  return f;
}

/// Field value at `pose`, plus N(0, σ²) per component from `rng` when requested.
inline Descriptor eval_field(const DescriptorField& field, const Pose& pose, bool with_noise, Rng& rng) {
  Descriptor d = field(pose);
  if (with_noise && field.noise_sigma() > 0.0) {
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] += gaussian(rng, field.noise_sigma());
  }
  return d;
}

inline Descriptor eval_field(const DescriptorField& field, const Pose& pose) { return field(pose); }

// ---------------------------------------------------------------------------
// Observations for encoder training: the noisy field value stacked with
// nuisance dimensions, then mixed by a fixed random rotation (dim 4N).

class ObservationModel {
 public:
  ObservationModel() = default;

  ObservationModel(std::size_t descriptor_dim, double nuisance_sigma, std::uint64_t seed)
      : n_(descriptor_dim), nuisance_sigma_(nuisance_sigma) {
    const auto m = static_cast<Eigen::Index>(4 * descriptor_dim);
    Rng rng = make_rng(seed, "observation-mixing");
    Eigen::MatrixXd g(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < m; ++c) g(r, c) = gaussian(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    mixing_ = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  }

  std::size_t observation_dim() const { return 4 * n_; }

  Eigen::VectorXd observe(const Descriptor& field_value, Rng& rng) const {
    Eigen::VectorXd raw(static_cast<Eigen::Index>(4 * n_));
    raw.head(static_cast<Eigen::Index>(n_)) = field_value;
    for (Eigen::Index i = static_cast<Eigen::Index>(n_); i < raw.size(); ++i) raw[i] = gaussian(rng, nuisance_sigma_);
    return mixing_ * raw;
  }

 private:
  std::size_t n_ = 0;
  double nuisance_sigma_ = 1.0;
  Eigen::MatrixXd mixing_;
};

// ---------------------------------------------------------------------------

enum class Layout { LoopTrajectory, ParallelLanes, MultiScene };

inline const char* to_string(Layout l) {
  switch (l) {
    case Layout::LoopTrajectory: return "loop";
    case Layout::ParallelLanes: return "lanes";
    case Layout::MultiScene: return "multi";
  }
  return "?";
}

struct SceneConfig {
  Layout layout = Layout::LoopTrajectory;
  // LoopTrajectory / MultiScene: references per loop and loop radius.
  std::size_t n_refs = 1000;
  double extent_m = 2.0;
  // ParallelLanes
  std::size_t n_per_lane = 337;
  double lane_offset_m = 1.8;
  double lane_length_m = 30.0;
  // MultiScene
  std::size_t n_scenes = 4;
  double scene_spacing_m = 10.0;

  double query_offset_m = 0.3;
  std::size_t n_queries = 200;       // per scene
  std::size_t n_training = 1500;     // per scene
  double training_band_m = 0.45;     // lateral spread of training poses
  double yaw_jitter_deg = 5.0;
  bool with_observations = false;
  double nuisance_sigma = 1.0;
  double stray_ref_distance_m = 0.6;
  std::uint64_t seed = 1;

  void validate() const {
    switch (layout) {
      case Layout::LoopTrajectory:
      case Layout::MultiScene:
        if (n_refs < 2) throw Error(ErrorCode::InvalidConfig, "n_refs must be >= 2");
        if (!(extent_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "extent_m must be > 0");
        if (!(query_offset_m < extent_m) || !(training_band_m < extent_m)) {
          throw Error(ErrorCode::ConfigConflict, "loop radius must exceed query offset and training band");
        }
        if (layout == Layout::MultiScene) {
          if (n_scenes < 1) throw Error(ErrorCode::InvalidConfig, "n_scenes must be >= 1");
          if (!(scene_spacing_m > 2.0 * (extent_m + std::max(query_offset_m, training_band_m)))) {
            throw Error(ErrorCode::ConfigConflict, "scenes overlap: spacing too small for their extent");
          }
        }
        break;
      case Layout::ParallelLanes:
        if (n_per_lane < 2) throw Error(ErrorCode::InvalidConfig, "n_per_lane must be >= 2");
        if (!(lane_offset_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "lane_offset_m must be > 0");
        if (!(lane_length_m > lane_offset_m)) throw Error(ErrorCode::ConfigConflict, "lane shorter than lane offset");
        break;
    }
    if (n_queries == 0) throw Error(ErrorCode::InvalidConfig, "n_queries must be >= 1");
    if (!(query_offset_m >= 0.0) || !(training_band_m >= 0.0)) throw Error(ErrorCode::InvalidConfig, "negative offset");
  }
};

struct Observation {
  Descriptor descriptor;
  Pose pose;
  int label = 0;
  Eigen::VectorXd observation;  // empty unless with_observations
};

struct SyntheticScene {
  SceneConfig scene_config;
  FieldConfig field_config;
  DescriptorField field;
  ObservationModel observation_model;
  ReferenceMap gt_dense{1};
  std::vector<int> labels;  // per gt_dense entry
  std::vector<Eigen::VectorXd> gt_observations;
  std::vector<Observation> queries;
  std::vector<Observation> training;

  std::vector<Descriptor> training_descriptors() const {
    std::vector<Descriptor> out;
    for (const auto& o : training) out.push_back(o.descriptor);
    return out;
  }
  std::vector<Pose> training_poses() const {
    std::vector<Pose> out;
    for (const auto& o : training) out.push_back(o.pose);
    return out;
  }
};

namespace detail {

inline Quaternion yaw(double rad) { return Quaternion::from_axis_angle(Vec3::UnitZ(), rad); }

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Point on a wobbly loop of nominal radius r at angle theta, shifted
/// radially by `lateral`.
inline Vec3 loop_point(const Vec3& center, double radius, double theta, double lateral) {
  const double r = radius * (1.0 + 0.08 * std::sin(3.0 * theta)) + lateral;
  return center + Vec3(r * std::cos(theta), r * std::sin(theta), 1.2 + 0.05 * radius * std::sin(2.0 * theta));
}

/// Looking toward the loop center.
inline Quaternion loop_facing(double theta, double jitter_rad) { return yaw(theta + std::numbers::pi + jitter_rad); }

struct SceneBuilder {
  const SceneConfig& sc;
  SyntheticScene& scene;
  Rng noise_rng;
  Rng obs_rng;

  Observation observe(const Pose& pose, int label) {
    Observation o{eval_field(scene.field, pose, true, noise_rng), pose, label, {}};
    if (sc.with_observations) o.observation = scene.observation_model.observe(o.descriptor, obs_rng);
    return o;
  }

  void add_ref(const std::string& id, const Pose& pose, int label) {
    Observation o = observe(pose, label);
    scene.gt_dense.add(id, o.descriptor, pose);
    scene.labels.push_back(label);
    if (sc.with_observations) scene.gt_observations.push_back(std::move(o.observation));
  }

  void build_loop(const Vec3& center, int label, const std::string& prefix, Rng& layout_rng) {
    const double jitter = sc.yaw_jitter_deg * kDeg;
    for (std::size_t i = 0; i < sc.n_refs; ++i) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(sc.n_refs);
      const Pose p{loop_point(center, sc.extent_m, theta, 0.0), loop_facing(theta, uniform(layout_rng, -jitter, jitter))};
      add_ref(prefix + "r" + std::to_string(i), p, label);
    }
    for (std::size_t i = 0; i < sc.n_queries; ++i) {
      const double theta = uniform(layout_rng, 0.0, 2.0 * std::numbers::pi);
      const Pose p{loop_point(center, sc.extent_m, theta, sc.query_offset_m),
                   loop_facing(theta, uniform(layout_rng, -2.0 * jitter, 2.0 * jitter))};
      scene.queries.push_back(observe(p, label));
    }
    for (std::size_t i = 0; i < sc.n_training; ++i) {
      const double theta = uniform(layout_rng, 0.0, 2.0 * std::numbers::pi);
      const double lateral = uniform(layout_rng, -sc.training_band_m, sc.training_band_m);
      const Pose p{loop_point(center, sc.extent_m, theta, lateral),
                   loop_facing(theta, uniform(layout_rng, -2.0 * jitter, 2.0 * jitter))};
      scene.training.push_back(observe(p, label));
    }
  }

  void build_lanes(Rng& layout_rng) {
    const double jitter = sc.yaw_jitter_deg * kDeg;
    auto lane_pose = [&](double x, double y, double j) {
      return Pose{Vec3(x, y, 1.2 + 0.05 * std::sin(0.7 * y)), yaw(0.5 * std::numbers::pi + j)};
    };
    for (std::size_t i = 0; i < sc.n_per_lane; ++i) {
      const double y = sc.lane_length_m * static_cast<double>(i) / static_cast<double>(sc.n_per_lane - 1);
      add_ref("a" + std::to_string(i), lane_pose(0.0, y, uniform(layout_rng, -jitter, jitter)), 0);
    }
    for (std::size_t i = 0; i < sc.n_queries; ++i) {
      const double y = uniform(layout_rng, 0.0, sc.lane_length_m);
      scene.queries.push_back(observe(lane_pose(sc.lane_offset_m, y, uniform(layout_rng, -2.0 * jitter, 2.0 * jitter)), 0));
    }
    for (std::size_t i = 0; i < sc.n_training; ++i) {
      const double x = (i % 2 == 0) ? 0.0 : sc.lane_offset_m;
      const double y = uniform(layout_rng, 0.0, sc.lane_length_m);
      scene.training.push_back(observe(lane_pose(x, y, uniform(layout_rng, -2.0 * jitter, 2.0 * jitter)), 0));
    }
  }
};

}  // namespace detail

inline Vec3 scene_center(const SceneConfig& sc, std::size_t scene_index) {
  return Vec3(static_cast<double>(scene_index) * sc.scene_spacing_m, 0.0, 0.0);
}

/// Builds references (gt_dense), queries and training observations. Every
/// descriptor is field(pose) plus a noise draw; the whole scene is a pure
/// function of (scene seed, field config).
inline SyntheticScene gen_scene(const SceneConfig& sc, const FieldConfig& fc) {
  sc.validate();
  fc.validate();
  SyntheticScene scene{sc, fc, make_field(fc), {}, ReferenceMap(fc.dim), {}, {}, {}, {}};
  if (sc.with_observations) scene.observation_model = ObservationModel(fc.dim, sc.nuisance_sigma, fc.seed);
  detail::SceneBuilder b{sc, scene, make_rng(sc.seed, "descriptor-noise"), make_rng(sc.seed, "nuisance")};
  Rng layout_rng = make_rng(sc.seed, "layout");
  switch (sc.layout) {
    case Layout::LoopTrajectory:
      b.build_loop(Vec3::Zero(), 0, "", layout_rng);
      break;
    case Layout::ParallelLanes:
      b.build_lanes(layout_rng);
      break;
    case Layout::MultiScene:
      for (std::size_t s = 0; s < sc.n_scenes; ++s) {
        b.build_loop(scene_center(sc, s), static_cast<int>(s), "s" + std::to_string(s) + "_", layout_rng);
      }
      break;
  }
  return scene;
}

/// The encoder's view of a set of observations (requires with_observations).
inline nn::EncoderDataset encoder_dataset(const std::vector<Observation>& obs) {
  nn::EncoderDataset data;
  for (const auto& o : obs) {
    if (o.observation.size() == 0) throw Error(ErrorCode::InvalidConfig, "scene was generated without observations");
    data.observations.push_back(o.observation);
    data.poses.push_back(o.pose);
    data.labels.push_back(o.label);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Perceptual-aliasing cases: a query in scene A, four references around it,
// and a stray reference from scene B blended toward the query descriptor.

struct StrayCase {
  Descriptor query;
  Pose query_pose;
  int query_scene = 0;
  int stray_scene = 1;
  ReferenceMap refs{1};  // four local refs, then the stray last
  std::size_t stray_index = 4;
};

inline StrayCase make_stray_case(const SceneConfig& sc, const FieldConfig& fc, double similarity,
                                 std::size_t case_index = 0) {
  if (sc.layout != Layout::MultiScene || sc.n_scenes < 2) {
    throw Error(ErrorCode::InsufficientScenes, "stray cases need a MultiScene layout with >= 2 scenes");
  }
  if (!(similarity >= 0.0 && similarity <= 1.0)) throw Error(ErrorCode::InvalidConfig, "similarity must be in [0,1]");
  sc.validate();
  const DescriptorField field = make_field(fc);
  Rng rng = make_rng(sc.seed, "stray-case", case_index);
  Rng noise = make_rng(sc.seed, "stray-noise", case_index);

  StrayCase c;
  c.query_scene = static_cast<int>(case_index % sc.n_scenes);
  c.stray_scene = static_cast<int>((case_index + 1) % sc.n_scenes);
  const double jitter = sc.yaw_jitter_deg * detail::kDeg;
  const double theta_q = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  c.query_pose = Pose{detail::loop_point(scene_center(sc, static_cast<std::size_t>(c.query_scene)), sc.extent_m, theta_q,
                                         uniform(rng, -sc.query_offset_m, sc.query_offset_m)),
                      detail::loop_facing(theta_q, uniform(rng, -jitter, jitter))};
  c.query = eval_field(field, c.query_pose, true, noise);

  c.refs = ReferenceMap(fc.dim);
  const double r = sc.stray_ref_distance_m;
  const Vec3 offsets[4] = {Vec3(r, 0, 0), Vec3(0, r, 0), Vec3(-r, 0, 0), Vec3(0, -r, 0)};
  for (int k = 0; k < 4; ++k) {
    const Pose p{c.query_pose.t + offsets[k], c.query_pose.q * detail::yaw(uniform(rng, -jitter, jitter))};
    c.refs.add("local" + std::to_string(k), eval_field(field, p, true, noise), p);
  }
  const double theta_b = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const Pose pb{detail::loop_point(scene_center(sc, static_cast<std::size_t>(c.stray_scene)), sc.extent_m, theta_b, 0.0),
                detail::loop_facing(theta_b, uniform(rng, -jitter, jitter))};
  const Descriptor fb = eval_field(field, pb, true, noise);
  const Descriptor stray = similarity == 1.0 ? c.query : Descriptor((1.0 - similarity) * fb + similarity * c.query);
  c.refs.add("stray", stray, pb);
  c.stray_index = 4;
  return c;
}

}  // namespace copr
