#pragma once

// Localization metrics (median translation / rotation error), the experiment
// protocols built on synthetic scenes, and report emission.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "copr/config_json.hpp"
#include "copr/densify.hpp"
#include "copr/error.hpp"
#include "copr/geometry.hpp"
#include "copr/neural/encoder.hpp"
#include "copr/neural/regressor.hpp"
#include "copr/synth.hpp"
#include "copr/vpr_map.hpp"

namespace copr {

struct QueryError {
  double translation_error = 0.0;
  double rotation_error = 0.0;
  std::string matched_id;
  Origin matched_origin = Origin::Anchor;
};

struct ErrorSummary {
  double mte_m = 0.0;
  double mre_deg = 0.0;
  std::vector<QueryError> per_query;
};

/// Median with the even-count convention: mean of the two middle values.
inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::InvalidConfig, "median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline ErrorSummary summarize(std::vector<QueryError> per_query) {
  ErrorSummary s;
  if (per_query.empty()) return s;
  std::vector<double> te, re;
  for (const auto& q : per_query) {
    te.push_back(q.translation_error);
    re.push_back(q.rotation_error);
  }
  s.mte_m = median(std::move(te));
  s.mre_deg = median(std::move(re));
  s.per_query = std::move(per_query);
  return s;
}

/// Each query takes the pose of its k=1 feature-space match.
inline ErrorSummary localize_and_summarize(const std::vector<Observation>& queries, const ReferenceMap& map) {
  if (map.empty()) throw Error(ErrorCode::EmptyMap, "cannot localize against an empty map");
  std::vector<QueryError> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const Match m = retrieve(q.descriptor, q.pose, map, 1).front();
    out.push_back({m.translation_error, m.rotation_error, m.ref_id, map.entry(m.index).origin});
  }
  return summarize(std::move(out));
}

/// Same summary with the physically closest reference as the match.
inline ErrorSummary oracle_summarize(const std::vector<Observation>& queries, const ReferenceMap& map) {
  if (map.empty()) throw Error(ErrorCode::EmptyMap, "cannot localize against an empty map");
  std::vector<QueryError> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const Match m = oracle_retrieve(q.pose, map);
    out.push_back({m.translation_error, m.rotation_error, m.ref_id, map.entry(m.index).origin});
  }
  return summarize(std::move(out));
}

// ---------------------------------------------------------------------------

struct Timings {
  double t_train_s = 0.0;
  double t_dense_ms = 0.0;
  double t_enc_ms = 0.0;    // per query
  double t_match_ms = 0.0;  // per query
  double t_retr_ms = 0.0;   // t_enc + t_match
};

struct ReportRow {
  std::string experiment;
  std::string map_label;      // M_sparse, M_dense or GT
  std::string densification;  // "-", "gt", lin_interp, lin_reg, nonlin_reg
  std::string retrieval;      // VPR or Oracle
  double mte_m = 0.0;
  double mre_deg = 0.0;
  std::size_t map_size = 0;
  Timings timings;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const ReportRow&) const = default;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;

  void append(const ExperimentReport& o) { rows.insert(rows.end(), o.rows.begin(), o.rows.end()); }
  bool operator==(const ExperimentReport&) const = default;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Per-query cost of producing query descriptors from the field.
inline double field_encode_ms(const DescriptorField& field, const std::vector<Observation>& queries) {
  if (queries.empty()) return 0.0;
  const auto t0 = Clock::now();
  double sink = 0.0;
  for (const auto& q : queries) sink += field(q.pose)[0];
  const double ms = ms_since(t0);
  volatile double keep = sink;
  (void)keep;
  return ms / static_cast<double>(queries.size());
}

struct RowSpec {
  std::string experiment, map_label, densification;
  bool oracle = false;
  double t_train_s = 0.0;
  double t_dense_ms = 0.0;
  double t_enc_ms = 0.0;
};

inline ReportRow make_row(const RowSpec& spec, const std::vector<Observation>& queries, const ReferenceMap& map,
                          std::uint64_t seed, const nlohmann::json& config) {
  const auto t0 = Clock::now();
  const ErrorSummary s = spec.oracle ? oracle_summarize(queries, map) : localize_and_summarize(queries, map);
  const double match_ms = queries.empty() ? 0.0 : ms_since(t0) / static_cast<double>(queries.size());
  ReportRow r;
  r.experiment = spec.experiment;
  r.map_label = spec.map_label;
  r.densification = spec.densification;
  r.retrieval = spec.oracle ? "Oracle" : "VPR";
  r.mte_m = s.mte_m;
  r.mre_deg = s.mre_deg;
  r.map_size = map.size();
  r.timings.t_train_s = spec.t_train_s;
  r.timings.t_dense_ms = spec.t_dense_ms;
  r.timings.t_enc_ms = spec.oracle ? 0.0 : spec.t_enc_ms;
  r.timings.t_match_ms = match_ms;
  r.timings.t_retr_ms = r.timings.t_enc_ms + r.timings.t_match_ms;
  r.seed = seed;
  r.config = config;
  return r;
}

/// Pose-only copy of a plan's target set appended to `base`, for oracle rows
/// where descriptor values are irrelevant.
inline ReferenceMap with_target_poses(const ReferenceMap& base, const TargetPlan& plan) {
  ReferenceMap out = base;
  const Descriptor zero = Descriptor::Zero(static_cast<Eigen::Index>(base.dim()));
  for (const auto& t : plan.targets) out.add(t.id, zero, t.pose, Origin::Regressed);
  return out;
}

inline std::vector<std::string> method_names(const std::vector<Method>& methods) {
  std::vector<std::string> out;
  for (Method m : methods) out.emplace_back(to_string(m));
  return out;
}

}  // namespace detail

/// A trained H and the wall time spent training it.
struct TrainedRegressor {
  nn::MlpModel model;
  double t_train_s = 0.0;
};

/// Trains H on pairs drawn from the scene's training observations.
inline TrainedRegressor train_scene_regressor(const std::vector<Descriptor>& descriptors, const std::vector<Pose>& poses,
                                              const nn::PairSampling& sampling, const nn::TrainConfig& cfg) {
  const auto t0 = detail::Clock::now();
  const auto pairs = nn::make_regression_pairs(descriptors, poses, sampling);
  if (pairs.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training pairs within the translation cap");
  auto result = nn::train_regressor(pairs, cfg, static_cast<std::size_t>(descriptors.front().size()));
  return {std::move(result.model), detail::ms_since(t0) / 1000.0};
}

/// Sparse map = every K-th reference; interpolation targets = the dropped
/// references. Rows: Oracle and VPR on the GT dense map, VPR on the sparse map,
/// then VPR on each densified map. Methods needing more anchors than the
/// sparse map holds are skipped.
inline ExperimentReport exp_interpolation(const SyntheticScene& scene, std::size_t K, const std::vector<Method>& methods,
                                          const TrainedRegressor* model_h = nullptr, std::size_t O = 4) {
  const std::uint64_t seed = scene.scene_config.seed;
  const nlohmann::json config = {{"scene", scene.scene_config},
                                 {"field", scene.field_config},
                                 {"K", K},
                                 {"O", O},
                                 {"methods", detail::method_names(methods)}};
  const double t_enc = detail::field_encode_ms(scene.field, scene.queries);
  const std::string exp = "interp";
  ExperimentReport report;
  report.rows.push_back(detail::make_row({exp, "M_dense", "-", true}, scene.queries, scene.gt_dense, seed, config));
  report.rows.push_back(detail::make_row({exp, "GT", "gt", false, 0.0, 0.0, t_enc}, scene.queries, scene.gt_dense, seed, config));

  const Subsampled sub = subsample_trajectory(scene.gt_dense, K);
  report.rows.push_back(detail::make_row({exp, "M_sparse", "-", false, 0.0, 0.0, t_enc}, scene.queries, sub.anchors, seed, config));
  if (sub.anchors.size() < 2) return report;

  const TargetPlan plan = gen_interp_targets(sub);
  for (Method m : methods) {
    if (m == Method::LinReg && sub.anchors.size() < O) continue;
    if (m == Method::NonLinReg && model_h == nullptr) {
      throw Error(ErrorCode::MethodPlanMismatch, "non-linear regression requested without a trained model");
    }
    const auto t0 = detail::Clock::now();
    const ReferenceMap dense = densify_map(sub.anchors, plan, m, model_h ? &model_h->model : nullptr, O);
    const double t_dense = detail::ms_since(t0);
    const double t_train = m == Method::NonLinReg ? model_h->t_train_s : 0.0;
    report.rows.push_back(
        detail::make_row({exp, "M_dense", to_string(m), false, t_train, t_dense, t_enc}, scene.queries, dense, seed, config));
  }
  return report;
}

enum class ExtrapPlan { Grid, LaneOffset };

/// Grid around every K-th reference for loop/multi scenes; a single lane
/// offset from every reference for ParallelLanes.
inline ExtrapPlan default_extrap_plan(const SyntheticScene& scene) {
  return scene.scene_config.layout == Layout::ParallelLanes ? ExtrapPlan::LaneOffset : ExtrapPlan::Grid;
}

inline TargetPlan make_extrap_plan(const SyntheticScene& scene, const ReferenceMap& sparse, const DensifyConfig& cfg,
                                   ExtrapPlan kind, ReferenceMap* anchors_out = nullptr) {
  cfg.validate();
  if (kind == ExtrapPlan::LaneOffset) {
    if (anchors_out) *anchors_out = sparse;
    return gen_offset_targets(sparse, {Vec3(scene.scene_config.lane_offset_m, 0.0, 0.0)}, cfg.dedupe_radius);
  }
  const Subsampled sub = subsample_trajectory(sparse, cfg.K);
  if (anchors_out) *anchors_out = sub.anchors;
  return gen_extrap_grid(sub.anchors, cfg);
}

namespace detail {

inline void extrap_group(ExperimentReport& report, const std::string& exp, const std::vector<Observation>& queries,
                         const ReferenceMap& sparse, const TargetPlan& plan, const std::vector<Method>& methods,
                         const TrainedRegressor* model_h, const DensifyConfig& cfg, double t_enc, std::uint64_t seed,
                         const nlohmann::json& config) {
  report.rows.push_back(make_row({exp, "M_dense", "-", true}, queries, with_target_poses(sparse, plan), seed, config));
  report.rows.push_back(make_row({exp, "M_sparse", "-", false, 0.0, 0.0, t_enc}, queries, sparse, seed, config));
  for (Method m : methods) {
    if (m == Method::LinInterp) throw Error(ErrorCode::MethodPlanMismatch, "extrapolation does not support lin_interp");
    if (m == Method::NonLinReg && model_h == nullptr) {
      throw Error(ErrorCode::MethodPlanMismatch, "non-linear regression requested without a trained model");
    }
    const auto t0 = Clock::now();
    const ReferenceMap dense = densify_map(sparse, plan, m, model_h ? &model_h->model : nullptr, cfg.O);
    const double t_dense = ms_since(t0);
    const double t_train = m == Method::NonLinReg ? model_h->t_train_s : 0.0;
    report.rows.push_back(make_row({exp, "M_dense", to_string(m), false, t_train, t_dense, t_enc}, queries, dense, seed, config));
  }
}

inline std::string step_label(double step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", step);
  return buf;
}

}  // namespace detail

/// Sparse map = the full reference trajectory; targets around anchors are
/// regressed and appended. Rows: Oracle, sparse, then each method. With a
/// step list, one row group per e_step (dedupe radius e_step/2).
inline ExperimentReport exp_extrapolation(const SyntheticScene& scene, const DensifyConfig& cfg,
                                          const std::vector<Method>& methods, const TrainedRegressor* model_h = nullptr,
                                          const std::vector<double>& step_list = {}) {
  cfg.validate();
  const std::uint64_t seed = scene.scene_config.seed;
  const ExtrapPlan kind = default_extrap_plan(scene);
  const double t_enc = detail::field_encode_ms(scene.field, scene.queries);
  ExperimentReport report;
  auto run = [&](const std::string& exp, const DensifyConfig& c) {
    const nlohmann::json config = {{"scene", scene.scene_config},
                                   {"field", scene.field_config},
                                   {"densify", c},
                                   {"plan", kind == ExtrapPlan::Grid ? "grid" : "lane_offset"},
                                   {"methods", detail::method_names(methods)}};
    const TargetPlan plan = make_extrap_plan(scene, scene.gt_dense, c, kind);
    detail::extrap_group(report, exp, scene.queries, scene.gt_dense, plan, methods, model_h, c, t_enc, seed, config);
  };
  if (step_list.empty()) {
    run("extrap", cfg);
  } else {
    for (double step : step_list) {
      DensifyConfig c = cfg;
      c.e_step = step;
      c.dedupe_radius = step / 2.0;
      run("sweep_e" + detail::step_label(step), c);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

struct EncoderExperimentConfig {
  nn::EncoderConfig encoder;
  bool default_encoder_lr = true;  // per-objective rates instead of encoder.train.lr
  nn::PairSampling pairs;
  nn::TrainConfig regressor;
};

/// Per variant: train E on the scene's training observations, re-encode
/// references and queries, train H on E's descriptors, then compare the
/// sparse map with its grid-extrapolated densification.
inline ExperimentReport exp_encoders(const SyntheticScene& scene, const std::vector<nn::EncoderLoss>& variants,
                                     const DensifyConfig& densify_cfg, const EncoderExperimentConfig& cfg) {
  if (scene.scene_config.layout != Layout::MultiScene) {
    throw Error(ErrorCode::InsufficientScenes, "encoder experiments need a MultiScene dataset");
  }
  densify_cfg.validate();
  const std::uint64_t seed = scene.scene_config.seed;
  const nn::EncoderDataset train_data = encoder_dataset(scene.training);
  std::vector<nn::Vector> query_obs, ref_obs = scene.gt_observations;
  for (const auto& q : scene.queries) query_obs.push_back(q.observation);
  if (ref_obs.size() != scene.gt_dense.size()) throw Error(ErrorCode::InvalidConfig, "scene has no reference observations");

  ExperimentReport report;
  for (nn::EncoderLoss v : variants) {
    nn::EncoderConfig ec = cfg.encoder;
    if (cfg.default_encoder_lr) ec.train.lr = nn::default_encoder_lr(v);
    const auto t0 = detail::Clock::now();
    const nn::EncoderTrainResult enc = nn::train_encoder(train_data, v, ec);
    const double t_enc_train = detail::ms_since(t0) / 1000.0;

    const auto te = detail::Clock::now();
    const nn::Matrix fq = nn::encode(enc.encoder, query_obs);
    const double t_enc = query_obs.empty() ? 0.0 : detail::ms_since(te) / static_cast<double>(query_obs.size());
    const nn::Matrix fr = nn::encode(enc.encoder, ref_obs);
    const nn::Matrix ft = nn::encode(enc.encoder, train_data.observations);

    std::vector<Observation> queries = scene.queries;
    for (std::size_t i = 0; i < queries.size(); ++i) queries[i].descriptor = fq.col(static_cast<Eigen::Index>(i));
    ReferenceMap sparse(ec.descriptor_dim);
    sparse.reserve(scene.gt_dense.size());
    for (std::size_t i = 0; i < scene.gt_dense.size(); ++i) {
      const auto& e = scene.gt_dense.entry(i);
      sparse.add(e.id, fr.col(static_cast<Eigen::Index>(i)), e.pose, e.origin);
    }
    std::vector<Descriptor> train_desc;
    for (Eigen::Index i = 0; i < ft.cols(); ++i) train_desc.push_back(ft.col(i));
    TrainedRegressor h = train_scene_regressor(train_desc, scene.training_poses(), cfg.pairs, cfg.regressor);
    h.t_train_s += t_enc_train;

    const nlohmann::json config = {{"scene", scene.scene_config},  {"field", scene.field_config},
                                   {"densify", densify_cfg},       {"variant", nn::to_string(v)},
                                   {"encoder", ec},                {"pairs", cfg.pairs},
                                   {"regressor", cfg.regressor}};
    const TargetPlan plan = make_extrap_plan(scene, sparse, densify_cfg, ExtrapPlan::Grid);
    detail::extrap_group(report, std::string("encoders_") + nn::to_string(v), queries, sparse, plan, {Method::NonLinReg},
                         &h, densify_cfg, t_enc, seed, config);
  }
  return report;
}

// ---------------------------------------------------------------------------

struct StrayResult {
  std::size_t case_index = 0;
  std::size_t rank_before = 0;  // 1-based rank of the stray among the five references
  std::size_t rank_after = 0;   // ... after adding the regressed descriptor at the query pose
  double stray_distance = 0.0;
  double regressed_distance = 0.0;
  std::string anchor_id;

  bool operator==(const StrayResult&) const = default;
};

namespace detail {

inline std::size_t rank_of(const Descriptor& query, const ReferenceMap& map, std::size_t index) {
  const auto matches = retrieve(query, map, map.size());
  for (std::size_t r = 0; r < matches.size(); ++r) {
    if (matches[r].index == index) return r + 1;
  }
  return 0;
}

}  // namespace detail

/// Ranks the stray before and after inserting H(nearest anchor, Δp) at the
/// query pose as an extra reference.
inline std::vector<StrayResult> exp_stray(const std::vector<StrayCase>& cases, const nn::MlpModel& model_h) {
  std::vector<StrayResult> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const StrayCase& sc = cases[c];
    StrayResult r;
    r.case_index = c;
    r.rank_before = detail::rank_of(sc.query, sc.refs, sc.stray_index);
    r.stray_distance = (Descriptor(sc.refs.descriptor(sc.stray_index)) - sc.query).norm();

    std::vector<std::size_t> pool(sc.refs.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    const std::size_t a = detail::nearest_by_translation(sc.refs, pool, sc.query_pose.t, 1).front();
    const auto& anchor = sc.refs.entry(a);
    r.anchor_id = anchor.id;
    const Descriptor reg = nn::regress_nonlinear(model_h, sc.refs.descriptor(a), relative_pose(anchor.pose, sc.query_pose));
    r.regressed_distance = (reg - sc.query).norm();

    ReferenceMap dense = sc.refs;
    dense.add("regressed@query", reg, sc.query_pose, Origin::Regressed);
    r.rank_after = detail::rank_of(sc.query, dense, sc.stray_index);
    out.push_back(r);
  }
  return out;
}

inline nlohmann::json stray_to_json(const std::vector<StrayResult>& results) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : results) {
    rows.push_back({{"case", r.case_index},
                    {"rank_before", r.rank_before},
                    {"rank_after", r.rank_after},
                    {"stray_distance", r.stray_distance},
                    {"regressed_distance", r.regressed_distance},
                    {"anchor_id", r.anchor_id}});
  }
  return {{"cases", rows}};
}

// ---------------------------------------------------------------------------
// Report emission

enum class ReportFormat { CSV, JSON };

inline constexpr const char* kReportCsvHeader =
    "experiment,map,densification,retrieval,mte_m,mre_deg,map_size,t_train_s,t_dense_ms,t_enc_ms,t_match_ms,t_retr_ms,"
    "seed";

namespace detail {

inline std::string sig6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline nlohmann::json report_row_to_json(const ReportRow& r, bool with_timings = true) {
  nlohmann::json j = {{"experiment", r.experiment}, {"map", r.map_label},     {"densification", r.densification},
                      {"retrieval", r.retrieval},   {"mte_m", r.mte_m},       {"mre_deg", r.mre_deg},
                      {"map_size", r.map_size},     {"seed", r.seed},         {"config", r.config}};
  if (with_timings) {
    j["t_train_s"] = r.timings.t_train_s;
    j["t_dense_ms"] = r.timings.t_dense_ms;
    j["t_enc_ms"] = r.timings.t_enc_ms;
    j["t_match_ms"] = r.timings.t_match_ms;
    j["t_retr_ms"] = r.timings.t_retr_ms;
  }
  return j;
}

inline nlohmann::json report_to_json(const ExperimentReport& report, bool with_timings = true) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) rows.push_back(report_row_to_json(r, with_timings));
  return {{"rows", rows}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport report;
  try {
    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.experiment = r.at("experiment").get<std::string>();
      row.map_label = r.at("map").get<std::string>();
      row.densification = r.at("densification").get<std::string>();
      row.retrieval = r.at("retrieval").get<std::string>();
      row.mte_m = r.at("mte_m").get<double>();
      row.mre_deg = r.at("mre_deg").get<double>();
      row.map_size = r.at("map_size").get<std::size_t>();
      row.seed = r.at("seed").get<std::uint64_t>();
      row.config = r.value("config", nlohmann::json::object());
      row.timings.t_train_s = r.value("t_train_s", 0.0);
      row.timings.t_dense_ms = r.value("t_dense_ms", 0.0);
      row.timings.t_enc_ms = r.value("t_enc_ms", 0.0);
      row.timings.t_match_ms = r.value("t_match_ms", 0.0);
      row.timings.t_retr_ms = r.value("t_retr_ms", 0.0);
      report.rows.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report json: ") + e.what());
  }
  return report;
}

/// Serialization with timings removed: equal fingerprints mean bitwise-equal
/// results.
inline std::string report_fingerprint(const ExperimentReport& report) { return report_to_json(report, false).dump(); }

inline std::string report_to_csv(const ExperimentReport& report) {
  std::string out = kReportCsvHeader;
  out += '\n';
  for (const auto& r : report.rows) {
    using detail::csv_field;
    using detail::sig6;
    out += csv_field(r.experiment) + ',' + csv_field(r.map_label) + ',' + csv_field(r.densification) + ',' +
           csv_field(r.retrieval) + ',' + sig6(r.mte_m) + ',' + sig6(r.mre_deg) + ',' + std::to_string(r.map_size) +
           ',' + sig6(r.timings.t_train_s) + ',' + sig6(r.timings.t_dense_ms) + ',' + sig6(r.timings.t_enc_ms) + ',' +
           sig6(r.timings.t_match_ms) + ',' + sig6(r.timings.t_retr_ms) + ',' + std::to_string(r.seed) + '\n';
  }
  return out;
}

inline void emit_report(const ExperimentReport& report, ReportFormat format, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  if (format == ReportFormat::CSV) {
    os << report_to_csv(report);
  } else {
    os << report_to_json(report).dump(2) << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline ExperimentReport read_report_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report json: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace copr
