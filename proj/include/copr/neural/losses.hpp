#pragma once

// Encoder training losses: margin triplet on L2-normalized descriptors,
// relative-pose residual norm, and feature-vs-translation distance mismatch.
// Each has a value-only form and a form returning input gradients.

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "copr/error.hpp"
#include "copr/geometry.hpp"

namespace copr::nn {

namespace detail {

inline void check_same_dim(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimMismatch, what);
}

inline double checked_norm(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw Error(ErrorCode::ZeroVector, "cannot L2-normalize a zero descriptor");
  return n;
}

/// d/dv of ||a - b|| w.r.t. a; zero when a == b.
inline Eigen::VectorXd distance_grad(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double dist) {
  if (dist == 0.0) return Eigen::VectorXd::Zero(a.size());
  return (a - b) / dist;
}

/// Pull a gradient on u = v/||v|| back to v.
inline Eigen::VectorXd normalize_backward(const Eigen::VectorXd& u, double norm, const Eigen::VectorXd& g) {
  return (g - u * u.dot(g)) / norm;
}

}  // namespace detail

struct TripletGrad {
  double loss = 0.0;
  Eigen::VectorXd d_query, d_positive, d_negative;
};

inline TripletGrad loss_triplet_grad(const Eigen::VectorXd& f_q, const Eigen::VectorXd& f_p,
                                     const Eigen::VectorXd& f_n, double margin) {
  detail::check_same_dim(f_q, f_p, "triplet positive dim");
  detail::check_same_dim(f_q, f_n, "triplet negative dim");
  const double nq = detail::checked_norm(f_q);
  const double np = detail::checked_norm(f_p);
  const double nn = detail::checked_norm(f_n);
  const Eigen::VectorXd uq = f_q / nq;
  const Eigen::VectorXd up = f_p / np;
  const Eigen::VectorXd un = f_n / nn;
  const double dp = (uq - up).norm();
  const double dn = (uq - un).norm();
  TripletGrad g;
  const double raw = dp - dn + margin;
  g.loss = std::max(raw, 0.0);
  g.d_query = Eigen::VectorXd::Zero(f_q.size());
  g.d_positive = Eigen::VectorXd::Zero(f_q.size());
  g.d_negative = Eigen::VectorXd::Zero(f_q.size());
  if (raw > 0.0) {
    const Eigen::VectorXd gp = detail::distance_grad(uq, up, dp);
    const Eigen::VectorXd gn = detail::distance_grad(uq, un, dn);
    g.d_query = detail::normalize_backward(uq, nq, gp - gn);
    g.d_positive = detail::normalize_backward(up, np, -gp);
    g.d_negative = detail::normalize_backward(un, nn, gn);
  }
  return g;
}

/// max{d(q,p) - d(q,n) + m, 0} on L2-normalized inputs.
inline double loss_triplet(const Eigen::VectorXd& f_q, const Eigen::VectorXd& f_p, const Eigen::VectorXd& f_n,
                           double margin) {
  return loss_triplet_grad(f_q, f_p, f_n, margin).loss;
}

/// ||Δp_hat - Δp_gt||₂ over the 7 stacked pose components, unweighted.
inline double loss_relative(const Eigen::VectorXd& dp_hat, const Eigen::VectorXd& dp_gt) {
  if (dp_hat.size() != 7 || dp_gt.size() != 7) {
    throw Error(ErrorCode::DimMismatch, "relative pose vectors must have length 7");
  }
  return (dp_hat - dp_gt).norm();
}

inline Eigen::VectorXd loss_relative_grad(const Eigen::VectorXd& dp_hat, const Eigen::VectorXd& dp_gt) {
  const double l = loss_relative(dp_hat, dp_gt);
  return detail::distance_grad(dp_hat, dp_gt, l);
}

struct DistanceGrad {
  double loss = 0.0;
  Eigen::VectorXd d_first, d_second;
};

inline DistanceGrad loss_distance_grad(const Eigen::VectorXd& f_1, const Eigen::VectorXd& f_2, const Vec3& t_1,
                                       const Vec3& t_2) {
  detail::check_same_dim(f_1, f_2, "distance loss descriptor dim");
  const double df = (f_1 - f_2).norm();
  const double dt = (t_1 - t_2).norm();
  DistanceGrad g;
  g.loss = std::abs(df - dt);
  const double sign = df > dt ? 1.0 : (df < dt ? -1.0 : 0.0);
  g.d_first = sign * detail::distance_grad(f_1, f_2, df);
  g.d_second = -g.d_first;
  return g;
}

/// | ||f_1 - f_2|| - ||t_1 - t_2|| |
inline double loss_distance(const Eigen::VectorXd& f_1, const Eigen::VectorXd& f_2, const Vec3& t_1,
                            const Vec3& t_2) {
  detail::check_same_dim(f_1, f_2, "distance loss descriptor dim");
  return std::abs((f_1 - f_2).norm() - (t_1 - t_2).norm());
}

}  // namespace copr::nn
