#pragma once

// Reference map of (descriptor, pose) entries and exact nearest-neighbor
// retrieval, in feature space (VPR) and in physical space (oracle).

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "copr/error.hpp"
#include "copr/geometry.hpp"

namespace copr {

using Descriptor = Eigen::VectorXd;

enum class Origin { Anchor, Regressed };

inline const char* to_string(Origin o) { return o == Origin::Anchor ? "anchor" : "regressed"; }

struct MapEntry {
  std::string id;
  Pose pose;
  Origin origin = Origin::Anchor;

  bool operator==(const MapEntry&) const = default;
};

class ReferenceMap {
 public:
  using DescriptorView = Eigen::Map<const Eigen::VectorXd>;
  using DescriptorMatrix = Eigen::Map<const Eigen::MatrixXd>;

  explicit ReferenceMap(std::size_t dim = 1) : dim_(dim) {
    if (dim == 0) throw Error(ErrorCode::DimMismatch, "descriptor dimension must be >= 1");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  void reserve(std::size_t n) {
    entries_.reserve(n);
    values_.reserve(n * dim_);
  }

  void add(std::string id, const Descriptor& d, const Pose& pose, Origin origin = Origin::Anchor) {
    if (static_cast<std::size_t>(d.size()) != dim_) {
      throw Error(ErrorCode::DimMismatch, "descriptor dim " + std::to_string(d.size()) +
                                              " != map dim " + std::to_string(dim_));
    }
    if (!d.allFinite()) throw Error(ErrorCode::NonFinite, "descriptor for '" + id + "'");
    if (index_.contains(id)) throw Error(ErrorCode::DuplicateId, id);
    index_.emplace(id, entries_.size());
    entries_.push_back(MapEntry{std::move(id), pose, origin});
    values_.insert(values_.end(), d.data(), d.data() + d.size());
  }

  const MapEntry& entry(std::size_t i) const { return entries_.at(i); }
  const std::vector<MapEntry>& entries() const { return entries_; }

  DescriptorView descriptor(std::size_t i) const {
    return DescriptorView(values_.data() + i * dim_, static_cast<Eigen::Index>(dim_));
  }

  /// dim × size, column-major: column i is the descriptor of entry i.
  DescriptorMatrix descriptors() const {
    return DescriptorMatrix(values_.data(), static_cast<Eigen::Index>(dim_),
                            static_cast<Eigen::Index>(entries_.size()));
  }

  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t count(Origin origin) const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [&](const MapEntry& e) { return e.origin == origin; }));
  }

  /// Same entries in the same order with bitwise-equal descriptors.
  bool operator==(const ReferenceMap& o) const {
    return dim_ == o.dim_ && entries_ == o.entries_ && values_ == o.values_;
  }

  void l2_normalize() {
    for (std::size_t i = 0; i < size(); ++i) {
      Eigen::Map<Eigen::VectorXd> col(values_.data() + i * dim_, static_cast<Eigen::Index>(dim_));
      const double n = col.norm();
      if (n > 0.0) col /= n;
    }
  }

 private:
  std::size_t dim_;
  std::vector<MapEntry> entries_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Match {
  std::size_t index = 0;
  std::string ref_id;
  double feature_distance = 0.0;
  double translation_error = 0.0;
  double rotation_error = 0.0;
};

namespace detail {

inline Match make_match(const ReferenceMap& map, std::size_t i, double feature_distance,
                        const Pose* query_pose) {
  Match m{i, map.entry(i).id, feature_distance, 0.0, 0.0};
  if (query_pose != nullptr) {
    m.translation_error = translation_error(*query_pose, map.entry(i).pose);
    m.rotation_error = angular_error_deg(query_pose->q, map.entry(i).pose.q);
  }
  return m;
}

inline std::vector<Match> retrieve_impl(const Descriptor& query, const Pose* query_pose,
                                        const ReferenceMap& map, std::size_t k) {
  if (map.empty()) throw Error(ErrorCode::EmptyMap, "retrieve on empty map");
  if (static_cast<std::size_t>(query.size()) != map.dim()) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) +
                                            " != map dim " + std::to_string(map.dim()));
  }
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be positive");

  const std::size_t n = map.size();
  const std::size_t dim = map.dim();
  const double* q = query.data();
  const double* column = map.descriptors().data();
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i, column += dim) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = column[d] - q[d];
      acc += diff * diff;
    }
    sq[i] = acc;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t keep = std::min(k, n);
  auto less = [&](std::size_t a, std::size_t b) { return sq[a] < sq[b] || (sq[a] == sq[b] && a < b); };
  if (keep == 1) {
    order[0] = *std::min_element(order.begin(), order.end(), less);
  } else {
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      less);
  }

  std::vector<Match> out;
  out.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    out.push_back(make_match(map, order[r], std::sqrt(sq[order[r]]), query_pose));
  }
  return out;
}

}  // namespace detail

/// Exact k-NN by Euclidean feature distance; ties go to the lower entry index.
inline std::vector<Match> retrieve(const Descriptor& query, const ReferenceMap& map, std::size_t k) {
  return detail::retrieve_impl(query, nullptr, map, k);
}

/// As above, with translation/rotation errors filled in against `query_pose`.
inline std::vector<Match> retrieve(const Descriptor& query, const Pose& query_pose,
                                   const ReferenceMap& map, std::size_t k) {
  return detail::retrieve_impl(query, &query_pose, map, k);
}

/// Physically closest entry by translation; ties go to the lower entry index.
inline Match oracle_retrieve(const Pose& query_pose, const ReferenceMap& map) {
  if (map.empty()) throw Error(ErrorCode::EmptyMap, "oracle_retrieve on empty map");
  std::size_t best = 0;
  double best_sq = (map.entry(0).pose.t - query_pose.t).squaredNorm();
  for (std::size_t i = 1; i < map.size(); ++i) {
    const double d = (map.entry(i).pose.t - query_pose.t).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best = i;
    }
  }
  Match m = detail::make_match(map, best, 0.0, &query_pose);
  m.feature_distance = 0.0;
  return m;
}

}  // namespace copr
