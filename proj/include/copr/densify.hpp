#pragma once

// Map densification: choose target poses (interpolation along the trajectory
// or extrapolation around anchors), regress a descriptor at each target and
// append the results to the sparse map.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "json.hpp"

#include "copr/error.hpp"
#include "copr/geometry.hpp"
#include "copr/neural/mlp.hpp"
#include "copr/neural/regressor.hpp"
#include "copr/vpr_map.hpp"

namespace copr {

struct DensifyConfig {
  std::size_t K = 50;          // trajectory subsampling stride
  double e_step = 0.05;        // grid step, meters
  double e_span = 0.1;         // grid half-span, meters
  std::size_t O = 4;           // plane-fit neighbor count
  double dedupe_radius = 0.025;

  /// Config with dedupe_radius = e_step / 2.
  static DensifyConfig with_step(double step, double span, std::size_t k = 50) {
    return DensifyConfig{k, step, span, 4, step / 2.0};
  }

  void validate() const {
    if (K < 2) throw Error(ErrorCode::InvalidConfig, "K must be >= 2");
    if (!(e_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "e_step must be > 0");
    if (!(e_span >= e_step)) throw Error(ErrorCode::InvalidConfig, "e_span must be >= e_step");
    if (O < 4) throw Error(ErrorCode::InvalidConfig, "O must be >= 4");
    if (!(dedupe_radius >= 0.0)) throw Error(ErrorCode::InvalidConfig, "dedupe_radius must be >= 0");
  }

  /// ⌊e_span / e_step⌋, tolerant of representation error (0.1/0.05 -> 2).
  long half_steps() const { return static_cast<long>(std::floor(e_span / e_step + 1e-9)); }
};

enum class Scheme { Interpolation, Extrapolation };

inline const char* to_string(Scheme s) { return s == Scheme::Interpolation ? "interpolation" : "extrapolation"; }

struct Target {
  std::string id;  // id the regressed entry receives
  Pose pose;
  std::vector<std::string> anchor_ids;
};

struct TargetPlan {
  Scheme scheme = Scheme::Interpolation;
  std::vector<Target> targets;
};

struct DroppedPose {
  std::size_t index = 0;  // index in the original trajectory
  std::string id;
  Pose pose;
};

struct Subsampled {
  ReferenceMap anchors;
  std::vector<std::size_t> anchor_indices;
  std::vector<DroppedPose> dropped;
};

/// Keeps entries 0, K, 2K, ...; all others become dropped poses.
inline Subsampled subsample_trajectory(const ReferenceMap& map, std::size_t K) {
  if (map.empty()) throw Error(ErrorCode::EmptyMap, "subsample_trajectory on empty map");
  if (K < 2) throw Error(ErrorCode::InvalidConfig, "K must be >= 2");
  Subsampled out{ReferenceMap(map.dim()), {}, {}};
  for (std::size_t i = 0; i < map.size(); ++i) {
    const auto& e = map.entry(i);
    if (i % K == 0) {
      out.anchors.add(e.id, map.descriptor(i), e.pose, e.origin);
      out.anchor_indices.push_back(i);
    } else {
      out.dropped.push_back({i, e.id, e.pose});
    }
  }
  return out;
}

namespace detail {

inline std::string interp_id(const std::string& a1, const std::string& a2, std::size_t k) {
  return a1 + "~" + a2 + "#k" + std::to_string(k);
}

/// Bucketed point set for radius queries.
class PointHash {
 public:
  explicit PointHash(double cell) : cell_(cell > 0.0 ? cell : 1.0) {}

  void insert(const Vec3& p) {
    cells_[key(cell_of(p))].push_back(p);
  }

  bool any_within(const Vec3& p, double radius) const {
    if (!(radius > 0.0)) return false;
    const auto c = cell_of(p);
    const long reach = static_cast<long>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (long dx = -reach; dx <= reach; ++dx) {
      for (long dy = -reach; dy <= reach; ++dy) {
        for (long dz = -reach; dz <= reach; ++dz) {
          auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (const auto& q : it->second) {
            if ((q - p).squaredNorm() < r2) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  std::array<long, 3> cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x() / cell_)), static_cast<long>(std::floor(p.y() / cell_)),
            static_cast<long>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (long v : c) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
    return h;
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Vec3>> cells_;
};

}  // namespace detail

/// Interpolation targets at dropped trajectory poses; each target gets the
/// two consecutive anchors bracketing its original index. Poses past the last
/// anchor use the final anchor segment.
inline TargetPlan gen_interp_targets(const Subsampled& sub) {
  const auto& anchors = sub.anchors;
  if (anchors.size() < 2) throw Error(ErrorCode::TooFewAnchors, "interpolation needs at least 2 anchors");
  TargetPlan plan{Scheme::Interpolation, {}};
  std::vector<std::size_t> ordinal(anchors.size(), 0);
  for (const auto& d : sub.dropped) {
    auto upper = std::upper_bound(sub.anchor_indices.begin(), sub.anchor_indices.end(), d.index);
    std::size_t seg = static_cast<std::size_t>(upper - sub.anchor_indices.begin());
    seg = std::clamp<std::size_t>(seg, 1, anchors.size() - 1) - 1;  // anchors seg, seg+1
    const auto& a1 = anchors.entry(seg).id;
    const auto& a2 = anchors.entry(seg + 1).id;
    plan.targets.push_back({detail::interp_id(a1, a2, ++ordinal[seg]), d.pose, {a1, a2}});
  }
  return plan;
}

/// `n` equally spaced targets per consecutive anchor pair; orientation is
/// slerped between the anchor orientations.
inline TargetPlan gen_interp_targets(const ReferenceMap& anchors, std::size_t n) {
  if (anchors.size() < 2) throw Error(ErrorCode::TooFewAnchors, "interpolation needs at least 2 anchors");
  if (n == 0) throw Error(ErrorCode::InvalidConfig, "subdivision count must be >= 1");
  TargetPlan plan{Scheme::Interpolation, {}};
  for (std::size_t s = 0; s + 1 < anchors.size(); ++s) {
    const auto& a = anchors.entry(s);
    const auto& b = anchors.entry(s + 1);
    for (std::size_t k = 1; k <= n; ++k) {
      const double u = static_cast<double>(k) / static_cast<double>(n + 1);
      const Pose p{a.pose.t + u * (b.pose.t - a.pose.t), slerp(a.pose.q, b.pose.q, u)};
      plan.targets.push_back({detail::interp_id(a.id, b.id, k), p, {a.id, b.id}});
    }
  }
  return plan;
}

/// Per-anchor x/y grid at fixed z and orientation, minus the center. Targets
/// closer than dedupe_radius to an anchor or to an earlier target are dropped.
inline TargetPlan gen_extrap_grid(const ReferenceMap& anchors, const DensifyConfig& cfg) {
  cfg.validate();
  TargetPlan plan{Scheme::Extrapolation, {}};
  detail::PointHash taken(cfg.dedupe_radius);
  for (const auto& e : anchors.entries()) taken.insert(e.pose.t);
  const long h = cfg.half_steps();
  for (const auto& e : anchors.entries()) {
    for (long i = -h; i <= h; ++i) {
      for (long j = -h; j <= h; ++j) {
        if (i == 0 && j == 0) continue;
        const Vec3 t = e.pose.t + Vec3(static_cast<double>(i) * cfg.e_step, static_cast<double>(j) * cfg.e_step, 0.0);
        if (taken.any_within(t, cfg.dedupe_radius)) continue;
        taken.insert(t);
        plan.targets.push_back({e.id + "#gx" + std::to_string(i) + "y" + std::to_string(j), Pose{t, e.pose.q}, {e.id}});
      }
    }
  }
  return plan;
}

/// Extrapolation to fixed translation offsets from every anchor (orientation
/// kept), e.g. a single lateral offset onto a parallel lane.
inline TargetPlan gen_offset_targets(const ReferenceMap& anchors, const std::vector<Vec3>& offsets,
                                     double dedupe_radius) {
  if (offsets.empty()) throw Error(ErrorCode::InvalidConfig, "no offsets");
  TargetPlan plan{Scheme::Extrapolation, {}};
  detail::PointHash taken(dedupe_radius);
  for (const auto& e : anchors.entries()) taken.insert(e.pose.t);
  for (const auto& e : anchors.entries()) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      const Vec3 t = e.pose.t + offsets[k];
      if (taken.any_within(t, dedupe_radius)) continue;
      taken.insert(t);
      plan.targets.push_back({e.id + "#o" + std::to_string(k), Pose{t, e.pose.q}, {e.id}});
    }
  }
  return plan;
}

/// Weights (1 - β₁/(β₁+β₂), 1 - β₂/(β₁+β₂)) with βᵢ = ||t_new - tᵢ||.
inline std::array<double, 2> lin_interp_weights(const Vec3& t_a1, const Vec3& t_a2, const Vec3& t_new) {
  if ((t_a1 - t_a2).norm() <= 1e-12) throw Error(ErrorCode::CoincidentAnchors, "anchor translations coincide");
  const double b1 = (t_new - t_a1).norm();
  const double b2 = (t_new - t_a2).norm();
  return {1.0 - b1 / (b1 + b2), 1.0 - b2 / (b1 + b2)};
}

/// Distance-weighted combination of two anchors.
inline Descriptor lin_interp(const Descriptor& f_a1, const Descriptor& f_a2, const Vec3& t_a1, const Vec3& t_a2,
                             const Vec3& t_new) {
  if (f_a1.size() != f_a2.size()) throw Error(ErrorCode::DimMismatch, "anchor descriptor dims differ");
  const auto w = lin_interp_weights(t_a1, t_a2, t_new);
  return w[0] * f_a1 + w[1] * f_a2;
}

struct Neighbor {
  Descriptor descriptor;
  Vec3 t;
};

/// Per-dimension least-squares plane f ≈ a·x + b·y + c·z + e over the
/// neighbors, evaluated at t_new. Coordinates are centered on the neighbor
/// centroid; rank-deficient systems take the minimum-norm solution with
/// singular values below 1e-10·σ_max dropped.
inline Descriptor plane_fit_regress(const std::vector<Neighbor>& neighbors, const Vec3& t_new) {
  if (neighbors.size() < 4) {
    throw Error(ErrorCode::TooFewNeighbors, "plane fit needs >= 4 neighbors, got " + std::to_string(neighbors.size()));
  }
  const auto rows = static_cast<Eigen::Index>(neighbors.size());
  const auto dim = neighbors.front().descriptor.size();
  Vec3 centroid = Vec3::Zero();
  for (const auto& n : neighbors) {
    if (n.descriptor.size() != dim) throw Error(ErrorCode::DimMismatch, "neighbor descriptor dims differ");
    centroid += n.t;
  }
  centroid /= static_cast<double>(neighbors.size());

  Eigen::MatrixXd design(rows, 4);
  Eigen::MatrixXd values(rows, dim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& n = neighbors[static_cast<std::size_t>(r)];
    design.row(r) << (n.t - centroid).transpose(), 1.0;
    values.row(r) = n.descriptor.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  const Eigen::MatrixXd coeffs = svd.solve(values);  // 4 × dim
  Eigen::RowVector4d at;
  at << (t_new - centroid).transpose(), 1.0;
  return (at * coeffs).transpose();
}

enum class Method { LinInterp, LinReg, NonLinReg };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::LinInterp: return "lin_interp";
    case Method::LinReg: return "lin_reg";
    case Method::NonLinReg: return "nonlin_reg";
  }
  return "?";
}

namespace detail {

/// Indices of the `k` entries in `pool` closest to `t` (ties by pool order).
inline std::vector<std::size_t> nearest_by_translation(const ReferenceMap& map, const std::vector<std::size_t>& pool,
                                                       const Vec3& t, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(pool.size());
  for (std::size_t i : pool) d.emplace_back((map.entry(i).pose.t - t).squaredNorm(), i);
  const std::size_t keep = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(keep), d.end());
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < keep; ++r) out.push_back(d[r].second);
  return out;
}

}  // namespace detail

/// M_dense = M_sparse ∪ regressed targets. Regression inputs come from the
/// plan's anchors: LinInterp uses each target's two anchors, LinReg the O
/// translation-nearest anchors, NonLinReg the single nearest anchor and H.
inline ReferenceMap densify_map(const ReferenceMap& sparse, const TargetPlan& plan, Method method,
                                const nn::MlpModel* model_h = nullptr, std::size_t O = 4) {
  if (method == Method::LinInterp && plan.scheme != Scheme::Interpolation) {
    throw Error(ErrorCode::MethodPlanMismatch, "linear interpolation requires an interpolation plan");
  }
  if (method == Method::NonLinReg) {
    if (model_h == nullptr) throw Error(ErrorCode::MethodPlanMismatch, "non-linear regression needs a model");
    if (model_h->input_dim() != sparse.dim() + nn::kRelativePoseLength || model_h->output_dim() != sparse.dim()) {
      throw Error(ErrorCode::DimMismatch, "regressor dims do not match map dim " + std::to_string(sparse.dim()));
    }
  }
  ReferenceMap dense = sparse;
  if (plan.targets.empty()) return dense;
  dense.reserve(sparse.size() + plan.targets.size());

  std::vector<std::size_t> pool;
  {
    std::unordered_set<std::size_t> seen;
    for (const auto& t : plan.targets) {
      if (method == Method::LinInterp && t.anchor_ids.size() != 2) {
        throw Error(ErrorCode::MethodPlanMismatch, "interpolation target '" + t.id + "' needs 2 anchors");
      }
      for (const auto& id : t.anchor_ids) {
        auto idx = sparse.index_of(id);
        if (!idx) throw Error(ErrorCode::UnknownId, "anchor '" + id + "' not in map");
        if (seen.insert(*idx).second) pool.push_back(*idx);
      }
    }
    std::sort(pool.begin(), pool.end());
  }

  auto descriptor_of = [&](std::size_t i) { return Descriptor(sparse.descriptor(i)); };

  switch (method) {
    case Method::LinInterp:
      for (const auto& t : plan.targets) {
        const std::size_t a = *sparse.index_of(t.anchor_ids[0]);
        const std::size_t b = *sparse.index_of(t.anchor_ids[1]);
        dense.add(t.id, lin_interp(descriptor_of(a), descriptor_of(b), sparse.entry(a).pose.t, sparse.entry(b).pose.t, t.pose.t),
                  t.pose, Origin::Regressed);
      }
      break;
    case Method::LinReg:
      if (pool.size() < O) throw Error(ErrorCode::TooFewNeighbors, "fewer anchors than O=" + std::to_string(O));
      for (const auto& t : plan.targets) {
        std::vector<Neighbor> nbrs;
        for (std::size_t i : detail::nearest_by_translation(sparse, pool, t.pose.t, O)) {
          nbrs.push_back({descriptor_of(i), sparse.entry(i).pose.t});
        }
        dense.add(t.id, plane_fit_regress(nbrs, t.pose.t), t.pose, Origin::Regressed);
      }
      break;
    case Method::NonLinReg: {
      std::vector<Descriptor> anchor_desc;
      std::vector<const Descriptor*> anchors;
      std::vector<RelativePose> dps;
      anchor_desc.reserve(plan.targets.size());
      for (const auto& t : plan.targets) {
        const std::size_t a = detail::nearest_by_translation(sparse, pool, t.pose.t, 1).front();
        anchor_desc.push_back(descriptor_of(a));
        dps.push_back(relative_pose(sparse.entry(a).pose, t.pose));
      }
      for (const auto& d : anchor_desc) anchors.push_back(&d);
      const nn::Matrix out = nn::regress_nonlinear_batch(*model_h, anchors, dps);
      for (std::size_t k = 0; k < plan.targets.size(); ++k) {
        dense.add(plan.targets[k].id, out.col(static_cast<Eigen::Index>(k)), plan.targets[k].pose, Origin::Regressed);
      }
      break;
    }
  }
  return dense;
}

// JSON form: {"scheme": "interpolation"|"extrapolation",
//             "targets": [{"id", "pose": {"t": [x,y,z], "q": [w,x,y,z]}, "anchor_ids": [...]}]}

inline nlohmann::json pose_to_json(const Pose& p) {
  const auto& c = p.q.coeffs();
  return {{"t", {p.t.x(), p.t.y(), p.t.z()}}, {"q", {c[0], c[1], c[2], c[3]}}};
}

inline Pose pose_from_json(const nlohmann::json& j) {
  const auto t = j.at("t").get<std::vector<double>>();
  const auto q = j.at("q").get<std::vector<double>>();
  if (t.size() != 3 || q.size() != 4) throw Error(ErrorCode::ParseError, "pose needs t[3] and q[4]");
  return make_pose(Vec3(t[0], t[1], t[2]), Quaternion(q[0], q[1], q[2], q[3]));
}

inline nlohmann::json plan_to_json(const TargetPlan& plan) {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : plan.targets) {
    targets.push_back({{"id", t.id}, {"pose", pose_to_json(t.pose)}, {"anchor_ids", t.anchor_ids}});
  }
  return {{"scheme", to_string(plan.scheme)}, {"targets", std::move(targets)}};
}

inline TargetPlan plan_from_json(const nlohmann::json& j) {
  TargetPlan plan;
  const auto scheme = j.at("scheme").get<std::string>();
  if (scheme == "interpolation") {
    plan.scheme = Scheme::Interpolation;
  } else if (scheme == "extrapolation") {
    plan.scheme = Scheme::Extrapolation;
  } else {
    throw Error(ErrorCode::ParseError, "unknown scheme '" + scheme + "'");
  }
  for (const auto& t : j.at("targets")) {
    plan.targets.push_back({t.at("id").get<std::string>(), pose_from_json(t.at("pose")),
                            t.at("anchor_ids").get<std::vector<std::string>>()});
  }
  return plan;
}

}  // namespace copr
