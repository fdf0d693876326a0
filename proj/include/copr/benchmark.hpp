#pragma once

// The fixed synthetic benchmark: every seed and size used by the acceptance
// suite lives here.

#include <cstdint>
#include <vector>

#include "copr/densify.hpp"
#include "copr/eval.hpp"
#include "copr/synth.hpp"

namespace copr::benchmark {

inline constexpr std::uint64_t kFieldSeed = 7;
inline constexpr std::uint64_t kLoopSeed = 11;
inline constexpr std::uint64_t kLanesSeed = 13;
inline constexpr std::uint64_t kAffineSeed = 17;
inline constexpr std::uint64_t kMultiSeed = 19;
inline constexpr std::uint64_t kRegressorSeed = 3;
inline constexpr std::uint64_t kPairSeed = 5;
inline constexpr std::uint64_t kEncoderSeed = 23;
inline constexpr std::size_t kDescriptorDim = 16;
inline constexpr std::size_t kStrayCases = 4;
inline constexpr double kStraySimilarity = 0.9;
inline const std::vector<double> kStepSweep = {0.4, 0.2, 0.1, 0.05};

inline FieldConfig fourier_field(double freq_scale = 1.5) {
  FieldConfig f;
  f.dim = kDescriptorDim;
  f.kind = FieldKind::RandomFourier;
  f.num_waves = 3;
  f.freq_scale = freq_scale;
  f.orientation_weight = 0.1;
  f.noise_sigma = 0.05;
  f.seed = kFieldSeed;
  return f;
}

inline FieldConfig affine_field() {
  FieldConfig f = fourier_field();
  f.kind = FieldKind::Affine;
  f.noise_sigma = 0.0;
  return f;
}

/// Looped trajectory of radius 2 m, query loop 0.3 m outside it.
inline SceneConfig loop_scene(std::uint64_t seed = kLoopSeed) {
  SceneConfig s;
  s.layout = Layout::LoopTrajectory;
  s.n_refs = 1000;
  s.extent_m = 2.0;
  s.query_offset_m = 0.3;
  s.n_queries = 200;
  s.n_training = 1500;
  s.training_band_m = 0.45;
  s.seed = seed;
  return s;
}

/// Two 30 m lanes 1.8 m apart; references on one, queries on the other.
inline SceneConfig lanes_scene() {
  SceneConfig s;
  s.layout = Layout::ParallelLanes;
  s.n_per_lane = 337;
  s.lane_offset_m = 1.8;
  s.lane_length_m = 30.0;
  s.n_queries = 330;
  s.n_training = 1000;
  s.seed = kLanesSeed;
  return s;
}

inline FieldConfig lanes_field() { return fourier_field(0.5); }

/// Four disjoint loops with encoder observations.
inline SceneConfig multi_scene() {
  SceneConfig s;
  s.layout = Layout::MultiScene;
  s.n_scenes = 4;
  s.extent_m = 1.5;
  s.scene_spacing_m = 10.0;
  s.n_refs = 400;
  s.n_queries = 50;
  s.n_training = 800;
  s.with_observations = true;
  s.nuisance_sigma = 0.3;
  s.seed = kMultiSeed;
  return s;
}

/// Two disjoint loops for the perceptual-aliasing cases.
inline SceneConfig stray_scene() {
  SceneConfig s;
  s.layout = Layout::MultiScene;
  s.n_scenes = 2;
  s.extent_m = 1.5;
  s.scene_spacing_m = 10.0;
  s.n_refs = 400;
  s.n_queries = 50;
  s.n_training = 600;
  s.training_band_m = 0.9;
  s.stray_ref_distance_m = 0.5;
  s.seed = kMultiSeed;
  return s;
}

inline nn::TrainConfig regressor_training() {
  nn::TrainConfig t;
  t.lr = 5e-4;
  t.seed = kRegressorSeed;
  return t;
}

inline nn::PairSampling pair_sampling(double max_translation) {
  return nn::PairSampling{max_translation, 8000, kPairSeed};
}

inline DensifyConfig extrap_config(std::size_t K = 50) { return DensifyConfig::with_step(0.05, 0.4, K); }

inline EncoderExperimentConfig encoder_experiment() {
  EncoderExperimentConfig c;
  c.encoder.descriptor_dim = kDescriptorDim;
  c.encoder.hidden = {64};
  c.encoder.rpe_hidden = {32};
  c.encoder.margin = 0.3;
  c.encoder.distance_same_scene = 0.9;
  c.encoder.train.seed = kEncoderSeed;
  c.encoder.train.lr = 1e-3;
  c.default_encoder_lr = false;
  c.pairs = pair_sampling(0.6);
  c.regressor = regressor_training();
  return c;
}

inline const std::vector<nn::EncoderLoss> kEncoderVariants = {nn::EncoderLoss::Triplet, nn::EncoderLoss::Relative,
                                                              nn::EncoderLoss::Distance};

struct SuiteResult {
  ExperimentReport loop_extrap;
  ExperimentReport loop_interp;
  ExperimentReport sweep;
  ExperimentReport lanes_extrap;
  ExperimentReport affine_interp;
  ExperimentReport encoders;
  std::vector<StrayResult> stray;
  nn::MlpModel loop_regressor;
  double seconds_loop_and_lanes = 0.0;

  ExperimentReport all_rows() const {
    ExperimentReport r;
    for (const auto* part : {&loop_extrap, &loop_interp, &sweep, &lanes_extrap, &affine_interp, &encoders}) r.append(*part);
    return r;
  }
};

inline TrainedRegressor train_for(const SyntheticScene& scene, double max_translation) {
  return train_scene_regressor(scene.training_descriptors(), scene.training_poses(), pair_sampling(max_translation),
                               regressor_training());
}

inline std::vector<StrayCase> stray_cases() {
  std::vector<StrayCase> cases;
  for (std::size_t i = 0; i < kStrayCases; ++i) {
    cases.push_back(make_stray_case(stray_scene(), fourier_field(), kStraySimilarity, i));
  }
  return cases;
}

/// Runs every benchmark experiment once.
inline SuiteResult run_suite() {
  SuiteResult out;
  const auto t0 = detail::Clock::now();
  {
    const SyntheticScene loop = gen_scene(loop_scene(), fourier_field());
    const TrainedRegressor h = train_for(loop, 0.6);
    out.loop_extrap = exp_extrapolation(loop, extrap_config(), {Method::LinReg, Method::NonLinReg}, &h);
    out.sweep = exp_extrapolation(loop, extrap_config(), {Method::NonLinReg}, &h, kStepSweep);
    out.loop_interp = exp_interpolation(loop, 50, {Method::LinInterp, Method::LinReg, Method::NonLinReg}, &h);
    out.loop_regressor = h.model;
  }
  {
    const SyntheticScene lanes = gen_scene(lanes_scene(), lanes_field());
    const TrainedRegressor h = train_for(lanes, 2.0);
    out.lanes_extrap = exp_extrapolation(lanes, extrap_config(), {Method::LinReg, Method::NonLinReg}, &h);
  }
  out.seconds_loop_and_lanes = detail::ms_since(t0) / 1000.0;
  {
    const SyntheticScene affine = gen_scene(loop_scene(kAffineSeed), affine_field());
    out.affine_interp = exp_interpolation(affine, 50, {Method::LinInterp, Method::LinReg});
  }
  {
    const SyntheticScene multi = gen_scene(multi_scene(), fourier_field());
    out.encoders = exp_encoders(multi, kEncoderVariants, extrap_config(25), encoder_experiment());
  }
  {
    const SyntheticScene stray = gen_scene(stray_scene(), fourier_field());
    const TrainedRegressor h = train_for(stray, 0.6);
    out.stray = exp_stray(stray_cases(), h.model);
  }
  return out;
}

}  // namespace copr::benchmark
