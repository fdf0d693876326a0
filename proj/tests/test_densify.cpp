#include <gtest/gtest.h>

#include <cmath>

#include "copr/densify.hpp"
#include "copr/rng.hpp"
#include "test_util.hpp"

using namespace copr;

namespace {

Descriptor vec(std::initializer_list<double> v) {
  Descriptor d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d[i++] = x;
  return d;
}

Pose at(double x, double y = 0, double z = 0) { return Pose{Vec3(x, y, z), Quaternion()}; }

ReferenceMap trajectory(std::size_t n, std::size_t dim = 2) {
  ReferenceMap m(dim);
  for (std::size_t i = 0; i < n; ++i) {
    m.add("r" + std::to_string(i), Descriptor::Constant(static_cast<Eigen::Index>(dim), double(i)), at(0.01 * i));
  }
  return m;
}

Descriptor affine(const Vec3& t) { return vec({2 * t.x() + 3 * t.y() + t.z() + 1, -t.x() + 0.5 * t.z()}); }

}  // namespace

TEST(Subsample, Counts) {
  const auto s = subsample_trajectory(trajectory(1000), 50);
  EXPECT_EQ(s.anchors.size(), 20u);
  EXPECT_EQ(s.dropped.size(), 980u);

  const auto big = subsample_trajectory(trajectory(10), 50);
  EXPECT_EQ(big.anchors.size(), 1u);
  EXPECT_EQ(big.anchor_indices, std::vector<std::size_t>{0});
  EXPECT_EQ(big.dropped.size(), 9u);

  const auto two = subsample_trajectory(trajectory(4), 2);
  EXPECT_EQ(two.anchor_indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(two.dropped[0].index, 1u);
  EXPECT_EQ(two.dropped[1].index, 3u);
}

TEST(Subsample, Errors) {
  test::expect_code(ErrorCode::EmptyMap, [] { subsample_trajectory(ReferenceMap(2), 2); });
  test::expect_code(ErrorCode::InvalidConfig, [] { subsample_trajectory(trajectory(4), 1); });
}

TEST(InterpTargets, Subdivision) {
  ReferenceMap a(1);
  a.add("a", vec({0}), at(0));
  a.add("b", vec({1}), at(1));
  const auto one = gen_interp_targets(a, 1);
  ASSERT_EQ(one.targets.size(), 1u);
  EXPECT_DOUBLE_EQ(one.targets[0].pose.t.x(), 0.5);
  EXPECT_EQ(one.targets[0].id, "a~b#k1");
  const auto three = gen_interp_targets(a, 3);
  ASSERT_EQ(three.targets.size(), 3u);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(three.targets[k].pose.t.x(), 0.25 * (k + 1));
  for (const auto& t : three.targets) EXPECT_EQ(t.anchor_ids.size(), 2u);
}

TEST(InterpTargets, SubdivisionSlerpsOrientation) {
  ReferenceMap a(1);
  a.add("a", vec({0}), Pose{Vec3(0, 0, 0), Quaternion()});
  a.add("b", vec({1}), Pose{Vec3(1, 0, 0), Quaternion::from_axis_angle(Vec3::UnitZ(), 1.0)});
  const auto plan = gen_interp_targets(a, 1);
  EXPECT_NEAR(angular_error_deg(plan.targets[0].pose.q, Quaternion()), 0.5 / std::numbers::pi * 180.0, 1e-9);
}

TEST(InterpTargets, DroppedPosesRoundTrip) {
  const auto s = subsample_trajectory(trajectory(103), 10);
  const auto plan = gen_interp_targets(s);
  ASSERT_EQ(plan.targets.size(), s.dropped.size());
  for (std::size_t i = 0; i < plan.targets.size(); ++i) {
    EXPECT_EQ(plan.targets[i].pose, s.dropped[i].pose);
    ASSERT_EQ(plan.targets[i].anchor_ids.size(), 2u);
  }
  EXPECT_EQ(plan.targets.front().anchor_ids, (std::vector<std::string>{"r0", "r10"}));
  // Poses after the last anchor use the final segment.
  EXPECT_EQ(plan.targets.back().anchor_ids, (std::vector<std::string>{"r90", "r100"}));
}

TEST(InterpTargets, TooFewAnchors) {
  test::expect_code(ErrorCode::TooFewAnchors, [] { gen_interp_targets(subsample_trajectory(trajectory(5), 10)); });
}

TEST(ExtrapGrid, Counts) {
  ReferenceMap one(1);
  one.add("a", vec({0}), at(0));
  EXPECT_EQ(gen_extrap_grid(one, DensifyConfig::with_step(0.05, 0.1)).targets.size(), 24u);
  EXPECT_EQ(gen_extrap_grid(one, DensifyConfig::with_step(0.05, 0.05)).targets.size(), 8u);

  ReferenceMap close(1);
  close.add("a", vec({0}), at(0));
  close.add("b", vec({0}), at(0.03));
  const auto plan = gen_extrap_grid(close, DensifyConfig::with_step(0.05, 0.1));
  EXPECT_LT(plan.targets.size(), 48u);
}

TEST(ExtrapGrid, FormulaForIsolatedAnchors) {
  for (double span : {0.05, 0.1, 0.2, 0.4}) {
    ReferenceMap m(1);
    for (int i = 0; i < 3; ++i) m.add("a" + std::to_string(i), vec({0}), at(10.0 * i));
    const auto cfg = DensifyConfig::with_step(0.05, span);
    const long h = static_cast<long>(std::floor(span / 0.05 + 1e-9));
    EXPECT_EQ(gen_extrap_grid(m, cfg).targets.size(), 3u * static_cast<std::size_t>((2 * h + 1) * (2 * h + 1) - 1));
  }
}

TEST(ExtrapGrid, CopiesAnchorOrientationAndHeight) {
  ReferenceMap m(1);
  const Quaternion q = Quaternion::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7);
  m.add("a", vec({0}), Pose{Vec3(1, 2, 1.5), q});
  for (const auto& t : gen_extrap_grid(m, DensifyConfig::with_step(0.05, 0.1)).targets) {
    EXPECT_EQ(t.pose.q, q);
    EXPECT_EQ(t.pose.t.z(), 1.5);
    EXPECT_EQ(t.anchor_ids, std::vector<std::string>{"a"});
    EXPECT_EQ(t.id.rfind("a#gx", 0), 0u);
  }
}

TEST(ExtrapGrid, ConfigValidation) {
  ReferenceMap m(1);
  m.add("a", vec({0}), at(0));
  DensifyConfig c;
  c.e_span = 0.01;
  test::expect_code(ErrorCode::InvalidConfig, [&] { gen_extrap_grid(m, c); });
  c = DensifyConfig{};
  c.O = 3;
  test::expect_code(ErrorCode::InvalidConfig, [&] { gen_extrap_grid(m, c); });
  c = DensifyConfig{};
  c.e_step = 0;
  test::expect_code(ErrorCode::InvalidConfig, [&] { gen_extrap_grid(m, c); });
}

TEST(OffsetTargets, OnePerAnchor) {
  ReferenceMap m(1);
  for (int i = 0; i < 4; ++i) m.add("a" + std::to_string(i), vec({0}), at(0, i));
  const auto plan = gen_offset_targets(m, {Vec3(1.8, 0, 0)}, 0.01);
  ASSERT_EQ(plan.targets.size(), 4u);
  EXPECT_DOUBLE_EQ(plan.targets[2].pose.t.x(), 1.8);
  EXPECT_DOUBLE_EQ(plan.targets[2].pose.t.y(), 2.0);
}

TEST(LinInterp, Examples) {
  const Vec3 t1(0, 0, 0), t2(1, 0, 0);
  const Descriptor f1 = vec({1, 0}), f2 = vec({0, 1});
  EXPECT_EQ(lin_interp(f1, f2, t1, t2, t1), f1);
  EXPECT_EQ(lin_interp(f1, f2, t1, t2, t2), f2);
  EXPECT_LE((lin_interp(f1, f2, t1, t2, Vec3(0.5, 0, 0)) - vec({0.5, 0.5})).norm(), 1e-12);
  EXPECT_LE((lin_interp(f1, f2, t1, t2, Vec3(0.25, 0, 0)) - vec({0.75, 0.25})).norm(), 1e-12);
}

TEST(LinInterp, Errors) {
  test::expect_code(ErrorCode::CoincidentAnchors,
                    [] { lin_interp(vec({1}), vec({2}), Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(0, 0, 0)); });
  test::expect_code(ErrorCode::DimMismatch,
                    [] { lin_interp(vec({1}), vec({2, 3}), Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(0, 0, 0)); });
}

TEST(LinInterp, WeightsSumToOneAndStayInHull) {
  Rng rng = make_rng(1, "lin-interp");
  for (int i = 0; i < 2000; ++i) {
    const Vec3 a = Vec3::Random(), b = Vec3::Random(), c = 3.0 * Vec3::Random();
    const auto w = lin_interp_weights(a, b, c);
    EXPECT_NEAR(w[0] + w[1], 1.0, 1e-12);
    const Descriptor f1 = vec({gaussian(rng), gaussian(rng)}), f2 = vec({gaussian(rng), gaussian(rng)});
    const Descriptor f = lin_interp(f1, f2, a, b, c);
    for (Eigen::Index k = 0; k < 2; ++k) {
      EXPECT_GE(f[k], std::min(f1[k], f2[k]) - 1e-12);
      EXPECT_LE(f[k], std::max(f1[k], f2[k]) + 1e-12);
    }
  }
}

TEST(PlaneFit, Examples) {
  std::vector<Neighbor> n{{vec({1}), Vec3(0, 0, 0)}, {vec({3}), Vec3(1, 0, 0)},
                          {vec({4}), Vec3(0, 1, 0)}, {vec({2}), Vec3(0, 0, 1)}};
  EXPECT_NEAR(plane_fit_regress(n, Vec3(0.5, 0.5, 0.5))[0], 4.0, 1e-12);

  std::vector<Neighbor> flat;
  for (int i = 0; i < 6; ++i) flat.push_back({vec({2.5, -1}), Vec3(i, i * i, 0.3 * i)});
  EXPECT_LE((plane_fit_regress(flat, Vec3(9, -4, 2)) - vec({2.5, -1})).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PlaneFit, DegenerateAnchorsStayFinite) {
  std::vector<Neighbor> line, plane;
  for (int i = 0; i < 5; ++i) {
    line.push_back({vec({double(i), 1.0 - i}), Vec3(i, 0, 0)});
    plane.push_back({vec({double(i * i), 2.0}), Vec3(i, i % 2, 0)});
  }
  const Descriptor l = plane_fit_regress(line, Vec3(2.5, 3, -1));
  const Descriptor p = plane_fit_regress(plane, Vec3(2.5, 3, -1));
  EXPECT_TRUE(l.allFinite());
  EXPECT_TRUE(p.allFinite());
  // Along the line the linear field is still recovered.
  EXPECT_NEAR(plane_fit_regress(line, Vec3(2.5, 0, 0))[0], 2.5, 1e-9);
}

TEST(PlaneFit, RecoversAffineFields) {
  Rng rng = make_rng(2, "plane-affine");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Neighbor> n;
    for (int i = 0; i < 4 + trial % 4; ++i) {
      const Vec3 t(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
      n.push_back({affine(t), t});
    }
    const Vec3 q(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -3, 3));
    EXPECT_LE((plane_fit_regress(n, q) - affine(q)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(PlaneFit, TooFewNeighbors) {
  test::expect_code(ErrorCode::TooFewNeighbors,
                    [] { plane_fit_regress({{vec({1}), Vec3::Zero()}}, Vec3::Zero()); });
}

namespace {

ReferenceMap affine_anchors(std::size_t n) {
  ReferenceMap m(2);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = 0.5 * double(i);
    const Vec3 t(std::cos(th) * (1 + 0.1 * i), std::sin(th), 0.05 * i);
    m.add("a" + std::to_string(i), affine(t), Pose{t, Quaternion()});
  }
  return m;
}

}  // namespace

TEST(DensifyMap, EmptyPlanIsIdentity) {
  const auto m = affine_anchors(5);
  EXPECT_TRUE(densify_map(m, TargetPlan{}, Method::LinReg) == m);
}

TEST(DensifyMap, KeepsSparseEntriesAndAppendsTargets) {
  const auto m = affine_anchors(20);
  const auto plan = gen_extrap_grid(m, DensifyConfig::with_step(0.05, 0.1));
  const auto dense = densify_map(m, plan, Method::LinReg);
  EXPECT_EQ(dense.size(), 20u + plan.targets.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(dense.entry(i), m.entry(i));
    EXPECT_EQ(dense.descriptor(i), m.descriptor(i));
  }
  for (std::size_t i = m.size(); i < dense.size(); ++i) {
    EXPECT_EQ(dense.entry(i).origin, Origin::Regressed);
    EXPECT_LE((Descriptor(dense.descriptor(i)) - affine(dense.entry(i).pose.t)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(DensifyMap, LinInterpOnInterpolationPlan) {
  ReferenceMap m(2);
  m.add("a", vec({1, 0}), at(0));
  m.add("b", vec({0, 1}), at(1));
  const auto dense = densify_map(m, gen_interp_targets(m, 3), Method::LinInterp);
  ASSERT_EQ(dense.size(), 5u);
  EXPECT_LE((Descriptor(dense.descriptor(2)) - vec({0.75, 0.25})).norm(), 1e-12);
}

TEST(DensifyMap, NonLinRegUsesModel) {
  const auto m = affine_anchors(6);
  nn::MlpModel h = nn::make_regressor(2, 1);
  for (auto& l : h.layers()) {
    l.weights.setZero();
    l.bias.setZero();
  }
  h.layers().back().bias << 0.25, -0.75;
  const auto dense = densify_map(m, gen_extrap_grid(m, DensifyConfig::with_step(0.05, 0.05)), Method::NonLinReg, &h);
  for (std::size_t i = m.size(); i < dense.size(); ++i) EXPECT_EQ(Descriptor(dense.descriptor(i)), vec({0.25, -0.75}));
}

TEST(DensifyMap, Errors) {
  const auto m = affine_anchors(6);
  const auto grid = gen_extrap_grid(m, DensifyConfig::with_step(0.05, 0.05));
  test::expect_code(ErrorCode::MethodPlanMismatch, [&] { densify_map(m, grid, Method::LinInterp); });
  test::expect_code(ErrorCode::MethodPlanMismatch, [&] { densify_map(m, grid, Method::NonLinReg); });
  const nn::MlpModel wrong = nn::make_regressor(3, 1);
  test::expect_code(ErrorCode::DimMismatch, [&] { densify_map(m, grid, Method::NonLinReg, &wrong); });
  TargetPlan bad{Scheme::Extrapolation, {{"x", at(0), {"nope"}}}};
  test::expect_code(ErrorCode::UnknownId, [&] { densify_map(m, bad, Method::LinReg); });
  ReferenceMap three = affine_anchors(3);
  test::expect_code(ErrorCode::TooFewNeighbors,
                    [&] { densify_map(three, gen_extrap_grid(three, DensifyConfig::with_step(0.05, 0.05)), Method::LinReg); });
}

TEST(PlanJson, RoundTrip) {
  const auto m = affine_anchors(3);
  for (const auto& plan : {gen_extrap_grid(m, DensifyConfig::with_step(0.05, 0.1)), gen_interp_targets(m, 2)}) {
    const auto back = plan_from_json(nlohmann::json::parse(plan_to_json(plan).dump()));
    EXPECT_EQ(back.scheme, plan.scheme);
    ASSERT_EQ(back.targets.size(), plan.targets.size());
    for (std::size_t i = 0; i < plan.targets.size(); ++i) {
      EXPECT_EQ(back.targets[i].id, plan.targets[i].id);
      EXPECT_EQ(back.targets[i].pose, plan.targets[i].pose);
      EXPECT_EQ(back.targets[i].anchor_ids, plan.targets[i].anchor_ids);
    }
  }
  test::expect_code(ErrorCode::ParseError,
                    [] { plan_from_json(nlohmann::json{{"scheme", "sideways"}, {"targets", nlohmann::json::array()}}); });
}
