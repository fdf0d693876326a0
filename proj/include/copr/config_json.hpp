#pragma once

// JSON forms of the configuration structs. Missing keys keep their defaults;
// unknown keys are rejected by from_json_strict.

#include <string>
#include <utility>

#include "json.hpp"

#include "copr/densify.hpp"
#include "copr/error.hpp"
#include "copr/neural/encoder.hpp"
#include "copr/neural/regressor.hpp"
#include "copr/neural/train.hpp"
#include "copr/synth.hpp"

namespace copr {

namespace detail {

template <class E, std::size_t N>
void enum_to_json(nlohmann::json& j, E v, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [e, name] : table) {
    if (e == v) {
      j = name;
      return;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unnamed enum value");
}

template <class E, std::size_t N>
void enum_from_json(const nlohmann::json& j, E& v, const std::pair<E, const char*> (&table)[N]) {
  const std::string s = j.get<std::string>();
  for (const auto& [e, name] : table) {
    if (s == name) {
      v = e;
      return;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown enum value '" + s + "'");
}

}  // namespace detail

#define COPR_JSON_ENUM(E, ...)                                                                       \
  inline constexpr std::pair<E, const char*> kNames_##E[] = __VA_ARGS__;                            \
  inline void to_json(nlohmann::json& j, E v) { ::copr::detail::enum_to_json(j, v, kNames_##E); }   \
  inline void from_json(const nlohmann::json& j, E& v) { ::copr::detail::enum_from_json(j, v, kNames_##E); }

COPR_JSON_ENUM(FieldKind, {{FieldKind::Affine, "affine"}, {FieldKind::RandomFourier, "random_fourier"}})
COPR_JSON_ENUM(Layout, {{Layout::LoopTrajectory, "loop"},
                                      {Layout::ParallelLanes, "lanes"},
                                      {Layout::MultiScene, "multi"}})
COPR_JSON_ENUM(Method, {{Method::LinInterp, "lin_interp"},
                                      {Method::LinReg, "lin_reg"},
                                      {Method::NonLinReg, "nonlin_reg"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FieldConfig, dim, kind, num_waves, freq_scale, orientation_weight,
                                                noise_sigma, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SceneConfig, layout, n_refs, extent_m, n_per_lane, lane_offset_m,
                                                lane_length_m, n_scenes, scene_spacing_m, query_offset_m, n_queries,
                                                n_training, training_band_m, yaw_jitter_deg, with_observations,
                                                nuisance_sigma, stray_ref_distance_m, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DensifyConfig, K, e_step, e_span, O, dedupe_radius)

namespace nn {

COPR_JSON_ENUM(EncoderLoss, {{EncoderLoss::Triplet, "triplet"},
                                           {EncoderLoss::Relative, "relative"},
                                           {EncoderLoss::Distance, "distance"}})

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, lr, epochs, batch_size, seed, validation_fraction,
                                                early_stop_patience)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EncoderConfig, descriptor_dim, hidden, rpe_hidden, margin,
                                                distance_same_scene, train)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PairSampling, max_translation, max_pairs, seed)

}  // namespace nn

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& where) {
  if (!given.is_object()) throw Error(ErrorCode::InvalidConfig, where + ": expected an object");
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidConfig, where + ": unknown key '" + key + "'");
    if (known[key].is_object()) reject_unknown_keys(value, known[key], where + "." + key);
  }
}

}  // namespace detail

/// Parses `j` over the defaults of T, refusing keys T does not have.
template <class T>
T from_json_strict(const nlohmann::json& j, const std::string& where) {
  detail::reject_unknown_keys(j, nlohmann::json(T{}), where);
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, where + ": " + e.what());
  }
}

}  // namespace copr
