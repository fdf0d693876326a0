// copr: scene generation, regressor training, densification, retrieval and
// experiments from the command line.
//
// Exit status: 0 success, 1 validation or usage error, 2 I/O error.
// stdout carries JSON lines only; diagnostics go to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "copr/copr.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using namespace copr;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  std::string format;
  std::vector<std::string> sets;
};

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

/// Writes `value` at a dot path that must already exist in `j`.
void set_path(json& j, const std::string& path, const json& value) {
  json* node = &j;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (!node->is_object() || !node->contains(key)) {
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + path + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  *node = value;
}

/// defaults <- config file <- command flags <- --set overrides.
json resolve(json defaults, const Globals& g, const std::vector<std::pair<std::string, json>>& flags) {
  if (!g.config.empty()) {
    const json file = read_json_file(g.config);
    detail::reject_unknown_keys(file, defaults, "config");
    defaults.merge_patch(file);
  }
  for (const auto& [path, value] : flags) set_path(defaults, path, value);
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key.path=value, got '" + s + "'");
    set_path(defaults, s.substr(0, eq), parse_value(s.substr(eq + 1)));
  }
  return defaults;
}

template <class T>
T typed(const json& cfg, const std::string& key) {
  return from_json_strict<T>(cfg.at(key), key);
}

template <class T>
T scalar(const json& cfg, const std::string& key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, key + ": " + e.what());
  }
}

template <class E>
E enum_value(const json& cfg, const std::string& key) {
  E e{};
  from_json(cfg.at(key), e);
  return e;
}

/// Output location: a path with an extension is a file whose directory receives
/// `<stem>.config.json`; anything else is a directory with config.json.
struct OutTarget {
  fs::path dir;
  fs::path file;
  fs::path echo;
};

OutTarget out_target(const std::string& out, const std::string& default_file) {
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");
  const fs::path p(out);
  if (p.has_extension()) {
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    return {dir, p, dir / (p.stem().string() + ".config.json")};
  }
  return {p, p / default_file, p / "config.json"};
}

void prepare(const OutTarget& t) {
  std::error_code ec;
  fs::create_directories(t.dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + t.dir.string() + ": " + ec.message());
}

void echo_config(const OutTarget& t, const std::string& command, const json& inputs, const json& cfg) {
  write_json_file(t.echo, {{"command", command}, {"inputs", inputs}, {"config", cfg}});
}

ReportFormat report_format(const Globals& g, const fs::path& file) {
  if (g.format == "json") return ReportFormat::JSON;
  if (g.format == "csv") return ReportFormat::CSV;
  if (!g.format.empty()) throw Error(ErrorCode::InvalidConfig, "--format must be csv or json");
  return file.extension() == ".json" ? ReportFormat::JSON : ReportFormat::CSV;
}

void emit_line(const json& j) { std::cout << j.dump() << '\n'; }

json fs_str(const std::string& s) { return s.empty() ? json(nullptr) : json(s); }

nn::PairSampling default_pairs(const SyntheticScene& scene) {
  return benchmark::pair_sampling(scene.scene_config.layout == Layout::ParallelLanes ? 2.0 : 0.6);
}

// synth ----------------------------------------------------------------------

struct SynthArgs {
  std::string preset;
};

std::pair<SceneConfig, FieldConfig> preset_configs(const std::string& name) {
  using namespace benchmark;
  if (name.empty() || name == "loop") return {loop_scene(), fourier_field()};
  if (name == "lanes") return {lanes_scene(), lanes_field()};
  if (name == "multi") return {multi_scene(), fourier_field()};
  if (name == "stray") return {stray_scene(), fourier_field()};
  if (name == "affine") return {loop_scene(kAffineSeed), affine_field()};
  throw Error(ErrorCode::InvalidConfig, "unknown preset '" + name + "' (loop, lanes, multi, stray, affine)");
}

int run_synth(const Globals& g, const SynthArgs& a) {
  const auto [sc0, fc0] = preset_configs(a.preset);
  std::vector<std::pair<std::string, json>> flags;
  if (g.seed) flags.emplace_back("scene.seed", *g.seed);
  const json cfg = resolve({{"scene", sc0}, {"field", fc0}}, g, flags);
  const auto sc = typed<SceneConfig>(cfg, "scene");
  const auto fc = typed<FieldConfig>(cfg, "field");
  sc.validate();
  fc.validate();
  const OutTarget out = out_target(g.out, "");
  const SyntheticScene scene = gen_scene(sc, fc);
  prepare(out);
  save_scene(scene, out.dir);
  echo_config(out, "synth", {{"preset", a.preset.empty() ? "loop" : a.preset}}, cfg);
  emit_line({{"command", "synth"},
             {"out", out.dir.string()},
             {"references", scene.gt_dense.size()},
             {"queries", scene.queries.size()},
             {"training", scene.training.size()}});
  return 0;
}

// train-h ------------------------------------------------------------------

struct TrainHArgs {
  std::string scene;
};

int run_train_h(const Globals& g, const TrainHArgs& a) {
  const SyntheticScene scene = load_scene(a.scene);
  std::vector<std::pair<std::string, json>> flags;
  if (g.seed) {
    flags.emplace_back("train.seed", *g.seed);
    flags.emplace_back("pairs.seed", *g.seed);
  }
  const json cfg = resolve({{"pairs", default_pairs(scene)}, {"train", benchmark::regressor_training()}}, g, flags);
  const auto pairs_cfg = typed<nn::PairSampling>(cfg, "pairs");
  const auto train_cfg = typed<nn::TrainConfig>(cfg, "train");
  train_cfg.validate();
  const OutTarget out = out_target(g.out, "h.cprm");

  const auto pairs = nn::make_regression_pairs(scene.training_descriptors(), scene.training_poses(), pairs_cfg);
  const auto result = nn::train_regressor(pairs, train_cfg, scene.field.dim());
  prepare(out);
  nn::save_model(result.model, out.file);
  echo_config(out, "train-h", {{"scene", a.scene}}, cfg);
  emit_line({{"command", "train-h"},
             {"model", out.file.string()},
             {"pairs", pairs.size()},
             {"epochs_run", result.history.epochs_run},
             {"best_epoch", result.history.best_epoch},
             {"initial_validation_mse", result.history.initial()},
             {"best_validation_mse", result.history.best()}});
  return 0;
}

// train-encoder --------------------------------------------------------------

struct TrainEncoderArgs {
  std::string scene;
  std::string variant;
};

int run_train_encoder(const Globals& g, const TrainEncoderArgs& a) {
  const SyntheticScene scene = load_scene(a.scene);
  const auto bench = benchmark::encoder_experiment();
  std::vector<std::pair<std::string, json>> flags;
  if (g.seed) flags.emplace_back("encoder.train.seed", *g.seed);
  if (!a.variant.empty()) flags.emplace_back("variant", a.variant);
  const json cfg = resolve({{"variant", "distance"}, {"default_lr", false}, {"encoder", bench.encoder}}, g, flags);
  const auto variant = enum_value<nn::EncoderLoss>(cfg, "variant");
  auto enc_cfg = typed<nn::EncoderConfig>(cfg, "encoder");
  if (scalar<bool>(cfg, "default_lr")) enc_cfg.train.lr = nn::default_encoder_lr(variant);
  enc_cfg.train.validate();
  const OutTarget out = out_target(g.out, "encoder.cprm");

  const auto result = nn::train_encoder(encoder_dataset(scene.training), variant, enc_cfg);
  prepare(out);
  nn::save_model(result.encoder, out.file);
  echo_config(out, "train-encoder", {{"scene", a.scene}}, cfg);
  emit_line({{"command", "train-encoder"},
             {"model", out.file.string()},
             {"variant", nn::to_string(variant)},
             {"epochs_run", result.history.epochs_run},
             {"best_epoch", result.history.best_epoch},
             {"initial_validation_loss", result.history.initial()},
             {"best_validation_loss", result.history.best()}});
  return 0;
}

// densify ------------------------------------------------------------------

struct DensifyArgs {
  std::string map;
  std::string model;
  std::string scheme;
  std::string method;
  std::optional<double> e_step;
  std::optional<std::size_t> k;
};

int run_densify(const Globals& g, const DensifyArgs& a) {
  std::vector<std::pair<std::string, json>> flags;
  if (!a.scheme.empty()) flags.emplace_back("scheme", a.scheme);
  if (!a.method.empty()) flags.emplace_back("method", a.method);
  if (a.e_step) {
    flags.emplace_back("densify.e_step", *a.e_step);
    flags.emplace_back("densify.e_span", std::max(*a.e_step, DensifyConfig{}.e_span));
    flags.emplace_back("densify.dedupe_radius", *a.e_step / 2.0);
  }
  if (a.k) flags.emplace_back("densify.K", *a.k);
  const json cfg = resolve({{"scheme", "extrapolation"},
                            {"method", "nonlin_reg"},
                            {"plan", "grid"},
                            {"lane_offset", {1.8, 0.0, 0.0}},
                            {"subdivisions", 0},
                            {"densify", DensifyConfig{}}},
                           g, flags);
  const auto dcfg = typed<DensifyConfig>(cfg, "densify");
  dcfg.validate();
  const auto method = enum_value<Method>(cfg, "method");
  const auto scheme = scalar<std::string>(cfg, "scheme");
  const auto plan_kind = scalar<std::string>(cfg, "plan");
  const auto offset = scalar<std::vector<double>>(cfg, "lane_offset");
  const auto subdivisions = scalar<std::size_t>(cfg, "subdivisions");
  if (scheme != "interpolation" && scheme != "extrapolation") {
    throw Error(ErrorCode::InvalidConfig, "scheme must be interpolation or extrapolation");
  }
  if (plan_kind != "grid" && plan_kind != "offset") throw Error(ErrorCode::InvalidConfig, "plan must be grid or offset");
  if (offset.size() != 3) throw Error(ErrorCode::InvalidConfig, "lane_offset needs 3 components");
  if (method == Method::NonLinReg && a.model.empty()) {
    throw Error(ErrorCode::MethodPlanMismatch, "nonlin_reg needs --model");
  }
  const OutTarget out = out_target(g.out, "");

  const auto paths = map_paths(a.map);
  const ReferenceMap map = load_map(paths.poses, paths.descriptors);
  std::optional<nn::MlpModel> model;
  if (method == Method::NonLinReg) model = nn::load_model(a.model);

  ReferenceMap base(map.dim());
  TargetPlan plan;
  if (scheme == "interpolation") {
    if (subdivisions > 0) {
      base = map;
      plan = gen_interp_targets(map, subdivisions);
    } else {
      const Subsampled sub = subsample_trajectory(map, dcfg.K);
      base = sub.anchors;
      plan = gen_interp_targets(sub);
    }
  } else {
    base = map;
    if (plan_kind == "offset") {
      plan = gen_offset_targets(map, {Vec3(offset[0], offset[1], offset[2])}, dcfg.dedupe_radius);
    } else {
      plan = gen_extrap_grid(subsample_trajectory(map, dcfg.K).anchors, dcfg);
    }
  }
  const ReferenceMap dense = densify_map(base, plan, method, model ? &*model : nullptr, dcfg.O);

  prepare(out);
  const auto dense_paths = map_paths(out.dir);
  save_map(dense, dense_paths.poses, dense_paths.descriptors);
  write_json_file(out.dir / "plan.json", plan_to_json(plan));
  echo_config(out, "densify", {{"map", a.map}, {"model", fs_str(a.model)}}, cfg);
  emit_line({{"command", "densify"},
             {"out", out.dir.string()},
             {"base_size", base.size()},
             {"targets", plan.targets.size()},
             {"map_size", dense.size()}});
  return 0;
}

// retrieve -----------------------------------------------------------------

struct RetrieveArgs {
  std::string map;
  std::string query;
  std::optional<std::size_t> k;
};

int run_retrieve(const Globals& g, const RetrieveArgs& a) {
  std::vector<std::pair<std::string, json>> flags;
  if (a.k) flags.emplace_back("k", *a.k);
  const json cfg = resolve({{"k", 1}, {"l2_normalize", false}}, g, flags);
  const auto k = scalar<std::size_t>(cfg, "k");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  const bool l2 = scalar<bool>(cfg, "l2_normalize");

  const auto paths = map_paths(a.map);
  const ReferenceMap map = load_map(paths.poses, paths.descriptors, l2);
  const DescriptorBlock queries = read_descriptor_bin(a.query);
  std::vector<json> lines;
  for (std::size_t qi = 0; qi < queries.rows.size(); ++qi) {
    Descriptor q = queries.rows[qi];
    if (l2 && q.norm() > 0.0) q.normalize();
    const auto matches = retrieve(q, map, k);
    for (std::size_t r = 0; r < matches.size(); ++r) {
      const auto& m = matches[r];
      lines.push_back({{"query", qi},
                       {"rank", r + 1},
                       {"index", m.index},
                       {"id", m.ref_id},
                       {"distance", m.feature_distance},
                       {"pose", pose_to_json(map.entry(m.index).pose)}});
    }
  }
  if (!g.out.empty()) {
    const OutTarget out = out_target(g.out, "matches.jsonl");
    prepare(out);
    std::ofstream os(out.file, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + out.file.string() + " for writing");
    for (const auto& l : lines) os << l.dump() << '\n';
    echo_config(out, "retrieve", {{"map", a.map}, {"query", a.query}}, cfg);
  }
  for (const auto& l : lines) emit_line(l);
  return 0;
}

// eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string scene;
  std::string map;
};

int run_eval(const Globals& g, const EvalArgs& a) {
  const json cfg = resolve(json::object(), g, {});
  const SyntheticScene scene = load_scene(a.scene);
  ReferenceMap map = scene.gt_dense;
  std::string label = "GT";
  if (!a.map.empty()) {
    const auto paths = map_paths(a.map);
    map = load_map(paths.poses, paths.descriptors);
    label = a.map;
  }
  ExperimentReport report;
  const nlohmann::json row_cfg = {{"scene", a.scene}, {"map", fs_str(a.map)}};
  report.rows.push_back(detail::make_row({"eval", label, "-", true}, scene.queries, map, scene.scene_config.seed, row_cfg));
  report.rows.push_back(detail::make_row({"eval", label, "-", false}, scene.queries, map, scene.scene_config.seed, row_cfg));
  if (!g.out.empty()) {
    const OutTarget out = out_target(g.out, "eval.csv");
    const ReportFormat fmt = report_format(g, out.file);
    prepare(out);
    emit_report(report, fmt, out.file.string());
    echo_config(out, "eval", {{"scene", a.scene}, {"map", fs_str(a.map)}}, cfg);
  }
  for (const auto& r : report.rows) {
    json j = report_row_to_json(r);
    j.erase("config");
    emit_line(j);
  }
  return 0;
}

// exp ----------------------------------------------------------------------

struct ExpArgs {
  std::string scene;
  std::string model;
  std::optional<double> e_step;
  std::optional<std::size_t> k;
};

json method_list(std::initializer_list<Method> ms) {
  json j = json::array();
  for (Method m : ms) j.push_back(to_string(m));
  return j;
}

std::vector<Method> methods_of(const json& cfg) {
  std::vector<Method> out;
  for (const auto& m : cfg.at("methods")) {
    Method v{};
    from_json(m, v);
    out.push_back(v);
  }
  return out;
}

std::optional<TrainedRegressor> regressor_for(const SyntheticScene& scene, const json& cfg, const std::string& model,
                                              bool needed) {
  if (!needed) return std::nullopt;
  if (!model.empty()) return TrainedRegressor{nn::load_model(model), 0.0};
  const auto pairs = typed<nn::PairSampling>(cfg, "pairs");
  const auto train = typed<nn::TrainConfig>(cfg, "train");
  return train_scene_regressor(scene.training_descriptors(), scene.training_poses(), pairs, train);
}

void write_report(const Globals& g, const ExperimentReport& report, const std::string& command, const json& inputs,
                  const json& cfg) {
  if (!g.out.empty()) {
    const OutTarget out = out_target(g.out, "report.csv");
    const ReportFormat fmt = report_format(g, out.file);
    prepare(out);
    emit_report(report, fmt, out.file.string());
    echo_config(out, command, inputs, cfg);
  }
  for (const auto& r : report.rows) {
    json j = report_row_to_json(r);
    j.erase("config");
    emit_line(j);
  }
}

json encoder_experiment_json(const EncoderExperimentConfig& e) {
  return {{"encoder", e.encoder}, {"default_lr", e.default_encoder_lr}, {"pairs", e.pairs}, {"regressor", e.regressor}};
}

EncoderExperimentConfig encoder_experiment_from(const json& j) {
  EncoderExperimentConfig e;
  e.encoder = typed<nn::EncoderConfig>(j, "encoder");
  e.default_encoder_lr = scalar<bool>(j, "default_lr");
  e.pairs = typed<nn::PairSampling>(j, "pairs");
  e.regressor = typed<nn::TrainConfig>(j, "regressor");
  return e;
}

int run_exp(const Globals& g, const std::string& kind, const ExpArgs& a) {
  const SyntheticScene scene = load_scene(a.scene);
  const json inputs = {{"scene", a.scene}, {"model", fs_str(a.model)}};
  std::vector<std::pair<std::string, json>> flags;
  const bool has_densify = kind == "extrap" || kind == "sweep" || kind == "encoders";
  if (g.seed && kind != "encoders") flags.emplace_back("train.seed", *g.seed);
  if (g.seed && kind == "encoders") flags.emplace_back("encoder.encoder.train.seed", *g.seed);
  if (a.e_step && has_densify) {
    flags.emplace_back("densify.e_step", *a.e_step);
    flags.emplace_back("densify.dedupe_radius", *a.e_step / 2.0);
  }
  if (a.k) flags.emplace_back(has_densify ? "densify.K" : "K", *a.k);

  const json regressor = {{"pairs", default_pairs(scene)}, {"train", benchmark::regressor_training()}};
  json defaults;
  if (kind == "interp") {
    defaults = {{"K", 50}, {"O", 4}, {"methods", method_list({Method::LinInterp, Method::LinReg, Method::NonLinReg})}};
  } else if (kind == "extrap") {
    defaults = {{"densify", benchmark::extrap_config()}, {"methods", method_list({Method::LinReg, Method::NonLinReg})}};
  } else if (kind == "sweep") {
    defaults = {{"densify", benchmark::extrap_config()}, {"steps", benchmark::kStepSweep}};
  } else if (kind == "encoders") {
    json variants = json::array();
    for (auto v : benchmark::kEncoderVariants) variants.push_back(nn::to_string(v));
    defaults = {{"densify", benchmark::extrap_config(25)},
                {"variants", variants},
                {"encoder", encoder_experiment_json(benchmark::encoder_experiment())}};
  } else if (kind == "stray") {
    defaults = {{"similarity", benchmark::kStraySimilarity}, {"cases", benchmark::kStrayCases}};
  }
  if (kind != "encoders") defaults.update(regressor);
  const json cfg = resolve(defaults, g, flags);
  if (cfg.contains("train")) typed<nn::TrainConfig>(cfg, "train").validate();
  if (cfg.contains("densify")) typed<DensifyConfig>(cfg, "densify").validate();

  if (kind == "interp") {
    const auto methods = methods_of(cfg);
    const bool need_h = std::find(methods.begin(), methods.end(), Method::NonLinReg) != methods.end();
    const auto h = regressor_for(scene, cfg, a.model, need_h);
    const auto report = exp_interpolation(scene, scalar<std::size_t>(cfg, "K"), methods, h ? &*h : nullptr,
                                          scalar<std::size_t>(cfg, "O"));
    write_report(g, report, "exp interp", inputs, cfg);
  } else if (kind == "extrap" || kind == "sweep") {
    const auto d = typed<DensifyConfig>(cfg, "densify");
    const auto methods = kind == "sweep" ? std::vector<Method>{Method::NonLinReg} : methods_of(cfg);
    const bool need_h = std::find(methods.begin(), methods.end(), Method::NonLinReg) != methods.end();
    const auto h = regressor_for(scene, cfg, a.model, need_h);
    const auto steps = kind == "sweep" ? scalar<std::vector<double>>(cfg, "steps") : std::vector<double>{};
    if (kind == "sweep" && steps.empty()) throw Error(ErrorCode::InvalidConfig, "steps must not be empty");
    const auto report = exp_extrapolation(scene, d, methods, h ? &*h : nullptr, steps);
    write_report(g, report, "exp " + kind, inputs, cfg);
  } else if (kind == "encoders") {
    std::vector<nn::EncoderLoss> variants;
    for (const auto& v : cfg.at("variants")) {
      nn::EncoderLoss e{};
      from_json(v, e);
      variants.push_back(e);
    }
    const auto report = exp_encoders(scene, variants, typed<DensifyConfig>(cfg, "densify"),
                                     encoder_experiment_from(cfg.at("encoder")));
    write_report(g, report, "exp encoders", inputs, cfg);
  } else {
    const double similarity = scalar<double>(cfg, "similarity");
    const auto n_cases = scalar<std::size_t>(cfg, "cases");
    std::vector<StrayCase> cases;
    for (std::size_t i = 0; i < n_cases; ++i) {
      cases.push_back(make_stray_case(scene.scene_config, scene.field_config, similarity, i));
    }
    const auto h = regressor_for(scene, cfg, a.model, true);
    const auto results = exp_stray(cases, h->model);
    const json doc = stray_to_json(results);
    if (!g.out.empty()) {
      const OutTarget out = out_target(g.out, "stray.json");
      prepare(out);
      if (report_format(g, out.file) == ReportFormat::JSON) {
        write_json_file(out.file, doc);
      } else {
        std::ofstream os(out.file, std::ios::binary);
        if (!os) throw Error(ErrorCode::IoError, "cannot open " + out.file.string() + " for writing");
        os << "case,rank_before,rank_after,stray_distance,regressed_distance,anchor_id\n";
        for (const auto& r : results) {
          os << r.case_index << ',' << r.rank_before << ',' << r.rank_after << ',' << detail::sig6(r.stray_distance)
             << ',' << detail::sig6(r.regressed_distance) << ',' << detail::csv_field(r.anchor_id) << '\n';
        }
        if (!os) throw Error(ErrorCode::IoError, "write failed for " + out.file.string());
      }
      echo_config(out, "exp stray", inputs, cfg);
    }
    for (const auto& c : doc.at("cases")) emit_line(c);
  }
  return 0;
}

int exit_code(const Error& e) { return e.code() == ErrorCode::IoError ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"copr: continuous place-descriptor regression for visual place recognition maps"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed override for the command's random streams");
  app.add_option("--out", g.out, "Output directory, or a file path with an extension");
  app.add_option("--config", g.config, "JSON config file merged over the command defaults");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--set", g.sets, "Config override key.path=value (repeatable)");

  std::function<int()> action;

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic scene");
  c_synth->add_option("--preset", synth.preset, "loop, lanes, multi, stray or affine");
  c_synth->callback([&] { action = [&] { return run_synth(g, synth); }; });

  TrainHArgs th;
  auto* c_th = app.add_subcommand("train-h", "Train the non-linear regressor on a scene's training set");
  c_th->add_option("--scene", th.scene, "Scene directory")->required();
  c_th->callback([&] { action = [&] { return run_train_h(g, th); }; });

  TrainEncoderArgs te;
  auto* c_te = app.add_subcommand("train-encoder", "Train an encoder on a scene's observations");
  c_te->add_option("--scene", te.scene, "Scene directory (generated with observations)")->required();
  c_te->add_option("--variant", te.variant, "triplet, relative or distance");
  c_te->callback([&] { action = [&] { return run_train_encoder(g, te); }; });

  DensifyArgs da;
  auto* c_d = app.add_subcommand("densify", "Densify a map");
  c_d->add_option("--map", da.map, "Map directory (poses.csv, descriptors.bin)")->required();
  c_d->add_option("--model", da.model, "Regressor model for nonlin_reg");
  c_d->add_option("--scheme", da.scheme, "interpolation or extrapolation");
  c_d->add_option("--method", da.method, "lin_interp, lin_reg or nonlin_reg");
  c_d->add_option("--e-step", da.e_step, "Grid step in meters");
  c_d->add_option("--k", da.k, "Anchor stride");
  c_d->callback([&] { action = [&] { return run_densify(g, da); }; });

  RetrieveArgs ra;
  auto* c_r = app.add_subcommand("retrieve", "Nearest-neighbor retrieval of query descriptors");
  c_r->add_option("--map", ra.map, "Map directory")->required();
  c_r->add_option("--query", ra.query, "Query descriptor binary")->required();
  c_r->add_option("--k", ra.k, "Matches per query");
  c_r->callback([&] { action = [&] { return run_retrieve(g, ra); }; });

  EvalArgs ea;
  auto* c_e = app.add_subcommand("eval", "Localize a scene's queries against a map");
  c_e->add_option("--scene", ea.scene, "Scene directory providing the queries")->required();
  c_e->add_option("--map", ea.map, "Map directory (defaults to the scene references)");
  c_e->callback([&] { action = [&] { return run_eval(g, ea); }; });

  ExpArgs xa;
  auto* c_x = app.add_subcommand("exp", "Run an experiment on a scene");
  c_x->require_subcommand(1);
  c_x->fallthrough();
  const std::pair<const char*, const char*> kinds[] = {
      {"interp", "Interpolation densification (LinInterp, LinReg, NonLinReg)"},
      {"extrap", "Extrapolation densification on a grid or lane-offset plan"},
      {"sweep", "Extrapolation error as a function of the grid step"},
      {"encoders", "Train each encoder loss variant and densify with it"},
      {"stray", "Stray-reference demotion after densification"}};
  for (const auto& [kind, help] : kinds) {
    auto* sub = c_x->add_subcommand(kind, help);
    sub->fallthrough();
    sub->add_option("--scene", xa.scene, "Scene directory")->required();
    sub->add_option("--model", xa.model, "Pre-trained regressor; trained from the scene when absent");
    sub->add_option("--e-step", xa.e_step, "Grid step in meters");
    sub->add_option("--k", xa.k, "Anchor stride");
    const std::string k = kind;
    sub->callback([&, k] { action = [&, k] { return run_exp(g, k, xa); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  try {
    return action ? action() : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
