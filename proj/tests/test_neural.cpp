#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "copr/map_io.hpp"
#include "copr/neural/encoder.hpp"
#include "copr/neural/losses.hpp"
#include "copr/neural/mlp.hpp"
#include "copr/neural/regressor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace copr;
using namespace copr::nn;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d[i++] = x;
  return d;
}

MlpModel scalar_model(double w, double b, Activation a) {
  return MlpModel({Layer{Matrix::Constant(1, 1, w), Vector::Constant(1, b), a}});
}

TrainConfig quick_config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.lr = 1e-3;
  c.epochs = 30;
  c.batch_size = 16;
  c.seed = seed;
  return c;
}

std::vector<RegressionPair> affine_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, "affine-pairs");
  std::vector<Descriptor> desc;
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 t(uniform(rng, -1, 1), uniform(rng, -1, 1), 0.0);
    poses.push_back(Pose{t, Quaternion()});
    desc.push_back(vec({0.5 * t.x() - 0.2 * t.y() + 0.1, 0.3 * t.y() + 0.4 * t.x()}));
  }
  return make_regression_pairs(desc, poses, PairSampling{0.6, 2000, seed});
}

}  // namespace

TEST(Gelu, ReferenceValues) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(10.0), 10.0, 1e-6);
  EXPECT_NEAR(gelu(1.0), 0.841192, 1e-6);
}

TEST(Gelu, MonotoneEitherSideOfItsMinimum) {
  // The tanh form dips to about -0.17 near x = -0.7518, so it is monotone
  // only on each side of that point.
  const double x_min = -0.7518;
  double prev = gelu(-3.0);
  for (double x = -3.0 + 0.01; x <= x_min; x += 0.01) {
    EXPECT_LE(gelu(x), prev + 1e-12) << x;
    prev = gelu(x);
  }
  prev = gelu(x_min);
  for (double x = x_min + 0.01; x <= 10.0; x += 0.01) {
    EXPECT_GE(gelu(x), prev - 1e-12) << x;
    prev = gelu(x);
  }
}

TEST(Gelu, DerivativeMatchesFiniteDifference) {
  for (double x = -4.0; x <= 4.0; x += 0.25) {
    const double fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
    EXPECT_NEAR(gelu_derivative(x), fd, 1e-8) << x;
  }
}

TEST(MlpForward, ZeroWeightsGiveZeroOutput) {
  MlpModel m({Layer{Matrix::Zero(4, 3), Vector::Zero(4), Activation::GeLU},
              Layer{Matrix::Zero(2, 4), Vector::Zero(2), Activation::Identity}});
  EXPECT_EQ(mlp_forward(m, vec({1, 2, 3})), Vector::Zero(2));
}

TEST(MlpForward, IdentityLayerReturnsInput) {
  MlpModel m({Layer{Matrix::Identity(3, 3), Vector::Zero(3), Activation::Identity}});
  EXPECT_EQ(mlp_forward(m, vec({1, -2, 3})), vec({1, -2, 3}));
}

TEST(MlpForward, SingleGeluUnit) {
  EXPECT_NEAR(mlp_forward(scalar_model(1, 0, Activation::GeLU), vec({1}))[0], 0.841192, 1e-6);
}

TEST(MlpForward, DimMismatch) {
  test::expect_code(ErrorCode::DimMismatch, [] { mlp_forward(scalar_model(1, 0, Activation::Identity), vec({1, 2})); });
}

TEST(MlpModel, RejectsBrokenChains) {
  test::expect_code(ErrorCode::ShapeMismatch, [] {
    MlpModel({Layer{Matrix::Zero(4, 3), Vector::Zero(4), Activation::GeLU},
              Layer{Matrix::Zero(2, 5), Vector::Zero(2), Activation::Identity}});
  });
}

TEST(MlpGrad, ZeroAtExactTarget) {
  Rng rng = make_rng(4, "zero-grad");
  const MlpModel m = oracle::random_model(rng);
  Vector x = Vector::Ones(static_cast<Eigen::Index>(m.input_dim()));
  auto [loss, g] = mlp_grad(m, x, mlp_forward(m, x));
  EXPECT_EQ(loss, 0.0);
  for (const auto& w : g.weights) EXPECT_EQ(w.norm(), 0.0);
  for (const auto& b : g.biases) EXPECT_EQ(b.norm(), 0.0);
}

TEST(MlpGrad, MatchesFiniteDifferences) { EXPECT_LE(oracle::worst_gradient_error(99, 100), 1e-6); }

TEST(MlpGrad, LossIsQuadraticInResidual) {
  const MlpModel m = scalar_model(2.0, 0.5, Activation::Identity);
  const Vector x = vec({1.5});
  const double out = mlp_forward(m, x)[0];
  const double l1 = mlp_grad(m, x, vec({out - 0.3})).first;
  const double l2 = mlp_grad(m, x, vec({out - 0.6})).first;
  EXPECT_NEAR(l2, 4.0 * l1, 1e-12);
}

TEST(MlpGrad, BatchGradientIsMeanOfSingles) {
  Rng rng = make_rng(6, "batch-grad");
  const MlpModel m = oracle::random_model(rng);
  Matrix x(m.input_dim(), 3), y(m.output_dim(), 3);
  for (auto& v : x.reshaped()) v = gaussian(rng);
  for (auto& v : y.reshaped()) v = gaussian(rng);
  auto [loss, g] = mse_grad_batch(m, x, y);
  double loss_sum = 0.0;
  Gradients sum = Gradients::zeros_like(m);
  for (Eigen::Index c = 0; c < 3; ++c) {
    auto [l, gc] = mlp_grad(m, x.col(c), y.col(c));
    loss_sum += l;
    sum += gc;
  }
  sum *= 1.0 / 3.0;
  EXPECT_NEAR(loss, loss_sum / 3.0, 1e-12);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    EXPECT_LE((g.weights[l] - sum.weights[l]).norm(), 1e-12);
    EXPECT_LE((g.biases[l] - sum.biases[l]).norm(), 1e-12);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng = make_rng(8, "adam-zero");
  MlpModel m = oracle::random_model(rng);
  const MlpModel before = m;
  auto state = AdamState::for_model(m, 5e-4);
  for (int i = 0; i < 5; ++i) adam_step(state, m, Gradients::zeros_like(m));
  EXPECT_EQ(state.step_count, 5u);
  EXPECT_TRUE(m == before);
}

TEST(Adam, FirstStepUnitGradient) {
  MlpModel m = scalar_model(0.0, 0.0, Activation::Identity);
  auto state = AdamState::for_model(m, 5e-4);
  Gradients g = Gradients::zeros_like(m);
  g.weights[0](0, 0) = 1.0;
  adam_step(state, m, g);
  EXPECT_NEAR(m.layers()[0].weights(0, 0), -5e-4 / (1.0 + 1e-8), 1e-18);
  EXPECT_EQ(m.layers()[0].bias[0], 0.0);
}

TEST(Adam, TwoStepsMatchHandRecurrence) {
  const double gw[2] = {1.0, 1.0};
  const double gb[2] = {-0.3, 2.5};
  EXPECT_LE(oracle::adam_two_step_deviation(5e-4, 0.2, -0.1, gw, gb), 1e-12);
}

TEST(Adam, ShapeMismatch) {
  MlpModel m = scalar_model(0, 0, Activation::Identity);
  auto state = AdamState::for_model(m, 1e-3);
  Gradients g = Gradients::zeros_like(MlpModel({Layer{Matrix::Zero(2, 1), Vector::Zero(2), Activation::Identity}}));
  test::expect_code(ErrorCode::ShapeMismatch, [&] { adam_step(state, m, g); });
}

TEST(ModelIo, RoundTripIsBitwise) {
  test::TempDir dir;
  MlpModel m = MlpModel::build({5, 7, 3}, Activation::GeLU, 12);
  m.round_to_f32();
  save_model(m, dir / "a.cprm");
  const MlpModel back = load_model(dir / "a.cprm");
  EXPECT_TRUE(back == m);
  save_model(back, dir / "b.cprm");
  EXPECT_EQ(test::read_text(dir / "a.cprm"), test::read_text(dir / "b.cprm"));
}

TEST(ModelIo, FileLayout) {
  test::TempDir dir;
  const MlpModel m = MlpModel::build({2, 3}, Activation::GeLU, 1);
  save_model(m, dir / "m.cprm");
  const std::string bytes = test::read_text(dir / "m.cprm");
  // magic, version, count, then in, out, activation, 6 weights, 3 biases
  EXPECT_EQ(bytes.size(), 4u + 4 + 4 + 12 + 4 * 6 + 4 * 3);
  EXPECT_EQ(bytes.substr(0, 4), "CPRM");
}

TEST(ModelIo, Errors) {
  test::TempDir dir;
  test::expect_code(ErrorCode::IoError, [&] { load_model(dir / "missing.cprm"); });
  test::write_text(dir / "bad.cprm", "XXXX\1\0\0\0\0\0\0\0");
  test::expect_code(ErrorCode::BadMagic, [&] { load_model(dir / "bad.cprm"); });

  MlpModel m = MlpModel::build({2, 2}, Activation::GeLU, 1);
  save_model(m, dir / "ok.cprm");
  std::string bytes = test::read_text(dir / "ok.cprm");
  test::write_text(dir / "trunc.cprm", bytes.substr(0, bytes.size() - 2));
  test::expect_code(ErrorCode::ParseError, [&] { load_model(dir / "trunc.cprm"); });
  test::write_text(dir / "extra.cprm", bytes + "z");
  test::expect_code(ErrorCode::ParseError, [&] { load_model(dir / "extra.cprm"); });
  std::string bad_act = bytes;
  bad_act[20] = 7;  // activation code of layer 0
  test::write_text(dir / "act.cprm", bad_act);
  test::expect_code(ErrorCode::ParseError, [&] { load_model(dir / "act.cprm"); });

  m.layers()[0].bias[0] = NAN;
  test::expect_code(ErrorCode::RefusedNonFinite, [&] { save_model(m, dir / "nan.cprm"); });
  EXPECT_FALSE(std::filesystem::exists(dir / "nan.cprm"));
}

TEST(Regressor, ArchitectureWidths) {
  const std::vector<std::size_t> expect{15, 15, 15, 15, 15, 15, 15, 15, 8};
  EXPECT_EQ(regressor_widths(8), expect);
  EXPECT_EQ(make_regressor(512, 1).input_dim(), 519u);
  EXPECT_EQ(make_regressor(8, 1).widths(), expect);
}

TEST(Regressor, ZeroModelGivesZeroDescriptor) {
  MlpModel h = make_regressor(4, 1);
  for (auto& l : h.layers()) {
    l.weights.setZero();
    l.bias.setZero();
  }
  const RelativePose dp = relative_pose(Pose{}, Pose{Vec3(1, 2, 3), Quaternion()});
  EXPECT_EQ(regress_nonlinear(h, vec({1, 2, 3, 4}), dp), Vector::Zero(4));
}

TEST(Regressor, DimMismatch) {
  const MlpModel h = make_regressor(4, 1);
  test::expect_code(ErrorCode::DimMismatch, [&] { regress_nonlinear(h, vec({1, 2, 3}), RelativePose{}); });
}

TEST(Regressor, EmptyTrainingSet) {
  test::expect_code(ErrorCode::EmptyTrainingSet, [] { train_regressor({}, TrainConfig{}, 4); });
}

TEST(Regressor, ConstantFieldIsLearned) {
  std::vector<Descriptor> desc;
  std::vector<Pose> poses;
  Rng rng = make_rng(2, "const");
  for (int i = 0; i < 120; ++i) {
    poses.push_back(Pose{Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), 0), Quaternion()});
    desc.push_back(vec({0.7, -0.4}));
  }
  const auto pairs = make_regression_pairs(desc, poses, PairSampling{0.5, 1500, 2});
  auto res = train_regressor(pairs, TrainConfig{}, 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs.size(); i += 97) {
    worst = std::max(worst, (regress_nonlinear(res.model, pairs[i].anchor, pairs[i].dp) - vec({0.7, -0.4})).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(Regressor, AffineFieldHeldOutError) {
  auto res = train_regressor(affine_pairs(200, 3), TrainConfig{}, 2);
  EXPECT_LT(res.history.best(), res.history.initial());
  double worst = 0.0;
  for (const auto& p : affine_pairs(60, 77)) {
    worst = std::max(worst, (regress_nonlinear(res.model, p.anchor, p.dp) - p.target).squaredNorm() / 2.0);
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(Regressor, TrainingIsDeterministic) {
  const auto pairs = affine_pairs(80, 5);
  const auto a = train_regressor(pairs, quick_config(9), 2);
  const auto b = train_regressor(pairs, quick_config(9), 2);
  EXPECT_TRUE(a.model == b.model);
  EXPECT_EQ(a.history.validation_loss, b.history.validation_loss);
}

TEST(Regressor, PairsRespectTranslationCap) {
  std::vector<Pose> poses;
  std::vector<Descriptor> desc;
  for (int i = 0; i < 10; ++i) {
    poses.push_back(Pose{Vec3(0.1 * i, 0, 0), Quaternion()});
    desc.push_back(vec({double(i)}));
  }
  const auto pairs = make_regression_pairs(desc, poses, PairSampling{0.15, 100, 1});
  EXPECT_EQ(pairs.size(), 18u);  // each neighbor pair in both orders
  for (const auto& p : pairs) EXPECT_LE(p.dp.dt.norm(), 0.15 + 1e-12);
}

TEST(Regressor, TrainConfigValidation) {
  TrainConfig c;
  c.validation_fraction = 1.0;
  test::expect_code(ErrorCode::InvalidConfig, [&] { c.validate(); });
  c = TrainConfig{};
  c.lr = 0.0;
  test::expect_code(ErrorCode::InvalidConfig, [&] { c.validate(); });
}

TEST(Losses, TripletExamples) {
  const Vector q = vec({1, 0}), n = vec({0, 1});
  EXPECT_EQ(loss_triplet(q, q, n, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(loss_triplet(q, n, n, 0.3), 0.3);
  // On the unit circle, chord length 2 sin(θ/2) sets each distance.
  auto at = [](double d) { const double th = 2 * std::asin(d / 2); return vec({std::cos(th), std::sin(th)}); };
  EXPECT_NEAR(loss_triplet(q, at(0.5), at(0.4), 0.3), 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(loss_triplet(3.0 * q, 2.0 * at(0.5), 5.0 * at(0.4), 0.3), loss_triplet(q, at(0.5), at(0.4), 0.3));
}

TEST(Losses, TripletZeroVector) {
  test::expect_code(ErrorCode::ZeroVector, [] { loss_triplet(vec({0, 0}), vec({1, 0}), vec({0, 1}), 0.3); });
}

TEST(Losses, RelativeExamples) {
  Vector a = Vector::Zero(7), b = Vector::Zero(7);
  EXPECT_EQ(loss_relative(a, a), 0.0);
  b[0] = 1.0;
  EXPECT_DOUBLE_EQ(loss_relative(b, a), 1.0);
  EXPECT_NEAR(loss_relative(Vector::Constant(7, 0.1), a), 0.264575, 1e-6);
  test::expect_code(ErrorCode::DimMismatch, [] { loss_relative(Vector::Zero(6), Vector::Zero(7)); });
}

TEST(Losses, DistanceExamples) {
  EXPECT_EQ(loss_distance(vec({1, 2}), vec({1, 2}), Vec3(1, 1, 1), Vec3(1, 1, 1)), 0.0);
  EXPECT_NEAR(loss_distance(vec({0, 0}), vec({0.3, 0.4}), Vec3(0, 0, 0), Vec3(0.2, 0, 0)), 0.3, 1e-12);
  EXPECT_EQ(loss_distance(vec({0, 0}), vec({0.3, 0.4}), Vec3(0, 0, 0), Vec3(0.2, 0, 0)),
            loss_distance(vec({0.3, 0.4}), vec({0, 0}), Vec3(0.2, 0, 0), Vec3(0, 0, 0)));
}

TEST(Losses, NonNegativeOnRandomInputs) {
  Rng rng = make_rng(10, "loss-sign");
  for (int i = 0; i < 500; ++i) {
    Vector a(5), b(5), c(5), r(7), s(7);
    for (auto* v : {&a, &b, &c}) for (auto& x : *v) x = gaussian(rng);
    for (auto* v : {&r, &s}) for (auto& x : *v) x = gaussian(rng);
    EXPECT_GE(loss_triplet(a, b, c, uniform(rng, 0, 1)), 0.0);
    EXPECT_GE(loss_relative(r, s), 0.0);
    EXPECT_GE(loss_distance(a, b, Vec3::Random(), Vec3::Random()), 0.0);
  }
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  Rng rng = make_rng(11, "loss-grad");
  Vector q(4), p(4), n(4);
  for (auto* v : {&q, &p, &n}) for (auto& x : *v) x = gaussian(rng);
  const double m = 2.0;  // keeps the hinge active
  const auto g = loss_triplet_grad(q, p, n, m);
  ASSERT_GT(g.loss, 0.0);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < 4; ++k) {
    Vector up = q, dn = q;
    up[k] += h;
    dn[k] -= h;
    EXPECT_NEAR(g.d_query[k], (loss_triplet(up, p, n, m) - loss_triplet(dn, p, n, m)) / (2 * h), 1e-6);
    up = n;
    dn = n;
    up[k] += h;
    dn[k] -= h;
    EXPECT_NEAR(g.d_negative[k], (loss_triplet(q, p, up, m) - loss_triplet(q, p, dn, m)) / (2 * h), 1e-6);
  }
  const Vec3 t1(0, 0, 0), t2(5, 0, 0);
  const auto dg = loss_distance_grad(q, p, t1, t2);
  for (Eigen::Index k = 0; k < 4; ++k) {
    Vector up = q, dn = q;
    up[k] += h;
    dn[k] -= h;
    EXPECT_NEAR(dg.d_first[k], (loss_distance(up, p, t1, t2) - loss_distance(dn, p, t1, t2)) / (2 * h), 1e-6);
  }
}

namespace {

EncoderDataset toy_dataset(int scenes) {
  EncoderDataset d;
  Rng rng = make_rng(12, "toy-enc");
  for (int s = 0; s < scenes; ++s) {
    for (int i = 0; i < 30; ++i) {
      const Vec3 t(10.0 * s + uniform(rng, -1, 1), uniform(rng, -1, 1), 0);
      d.poses.push_back(Pose{t, Quaternion()});
      d.observations.push_back(vec({t.x(), t.y(), gaussian(rng, 0.1), double(s)}));
      d.labels.push_back(s);
    }
  }
  return d;
}

EncoderConfig toy_encoder(double lr) {
  EncoderConfig c;
  c.descriptor_dim = 3;
  c.hidden = {8};
  c.rpe_hidden = {8};
  c.train = quick_config(3);
  c.train.lr = lr;
  return c;
}

}  // namespace

TEST(Encoder, TripletNeedsTwoScenes) {
  test::expect_code(ErrorCode::InsufficientScenes,
                    [] { train_encoder(toy_dataset(1), EncoderLoss::Triplet, toy_encoder(1e-3)); });
}

TEST(Encoder, InputValidation) {
  EncoderDataset d = toy_dataset(2);
  d.labels.pop_back();
  test::expect_code(ErrorCode::CountMismatch, [&] { train_encoder(d, EncoderLoss::Distance, toy_encoder(1e-3)); });
  test::expect_code(ErrorCode::EmptyTrainingSet,
                    [] { train_encoder(EncoderDataset{}, EncoderLoss::Distance, toy_encoder(1e-3)); });
}

TEST(Encoder, EveryVariantReducesValidationLoss) {
  for (auto v : {EncoderLoss::Triplet, EncoderLoss::Relative, EncoderLoss::Distance}) {
    const auto r = train_encoder(toy_dataset(2), v, toy_encoder(3e-3));
    EXPECT_LT(r.history.best(), r.history.initial()) << to_string(v);
    EXPECT_EQ(r.encoder.output_dim(), 3u);
    EXPECT_EQ(encode(r.encoder, {vec({0, 0, 0, 0})}).rows(), 3);
  }
}

TEST(Encoder, Deterministic) {
  const auto a = train_encoder(toy_dataset(2), EncoderLoss::Relative, toy_encoder(1e-3));
  const auto b = train_encoder(toy_dataset(2), EncoderLoss::Relative, toy_encoder(1e-3));
  EXPECT_TRUE(a.encoder == b.encoder);
}

TEST(Encoder, DefaultLearningRates) {
  EXPECT_EQ(default_encoder_lr(EncoderLoss::Triplet), 1e-5);
  EXPECT_EQ(default_encoder_lr(EncoderLoss::Relative), 1e-4);
  EXPECT_EQ(default_encoder_lr(EncoderLoss::Distance), 5e-5);
}
