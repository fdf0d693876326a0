#pragma once

// On-disk scenes: the reference map in the standard map files plus queries
// and training observations in the same formats, and a JSON sidecar holding
// configs, seeds and labels.
//
//   dir/poses.csv, dir/descriptors.bin            references (a loadable map)
//   dir/queries_poses.csv, dir/queries.bin
//   dir/training_poses.csv, dir/training.bin
//   dir/scene.json

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "copr/config_json.hpp"
#include "copr/error.hpp"
#include "copr/map_io.hpp"
#include "copr/synth.hpp"

namespace copr {

namespace fs = std::filesystem;

struct MapPaths {
  fs::path poses, descriptors;
};

inline MapPaths map_paths(const fs::path& dir, const std::string& stem = "") {
  if (stem.empty()) return {dir / "poses.csv", dir / "descriptors.bin"};
  return {dir / (stem + "_poses.csv"), dir / (stem + ".bin")};
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace detail {

inline void save_observations(const std::vector<Observation>& obs, std::size_t dim, const MapPaths& p) {
  std::vector<PoseRow> rows;
  std::vector<Descriptor> desc;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    rows.push_back({std::to_string(i), obs[i].pose});
    desc.push_back(obs[i].descriptor);
  }
  write_descriptor_bin(p.descriptors, dim, desc);
  write_pose_csv(p.poses, rows);
}

inline std::vector<Observation> load_observations(const MapPaths& p, const std::vector<int>& labels) {
  auto rows = read_pose_csv(p.poses);
  auto block = read_descriptor_bin(p.descriptors);
  if (rows.size() != block.rows.size() || rows.size() != labels.size()) {
    throw Error(ErrorCode::CountMismatch, p.poses.string() + ": poses, descriptors and labels disagree in count");
  }
  std::vector<Observation> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({block.rows[i], rows[i].pose, labels[i], {}});
  return out;
}

inline std::vector<int> labels_of(const std::vector<Observation>& obs) {
  std::vector<int> out;
  for (const auto& o : obs) out.push_back(o.label);
  return out;
}

}  // namespace detail

inline void save_scene(const SyntheticScene& scene, const fs::path& dir) {
  fs::create_directories(dir);
  const auto refs = map_paths(dir);
  save_map(scene.gt_dense, refs.poses, refs.descriptors);
  detail::save_observations(scene.queries, scene.field.dim(), map_paths(dir, "queries"));
  detail::save_observations(scene.training, scene.field.dim(), map_paths(dir, "training"));
  write_json_file(dir / "scene.json", {{"scene", scene.scene_config},
                                       {"field", scene.field_config},
                                       {"labels",
                                        {{"references", scene.labels},
                                         {"queries", detail::labels_of(scene.queries)},
                                         {"training", detail::labels_of(scene.training)}}}});
}

/// Descriptors come from the files (f32 precision). The field is rebuilt from
/// its config; encoder observations, when enabled, are regenerated from the
/// recorded seeds.
inline SyntheticScene load_scene(const fs::path& dir) {
  const nlohmann::json side = read_json_file(dir / "scene.json");
  SyntheticScene scene;
  try {
    scene.scene_config = from_json_strict<SceneConfig>(side.at("scene"), "scene");
    scene.field_config = from_json_strict<FieldConfig>(side.at("field"), "field");
    scene.labels = side.at("labels").at("references").get<std::vector<int>>();
    const auto& refs = map_paths(dir);
    scene.gt_dense = load_map(refs.poses, refs.descriptors);
    scene.queries = detail::load_observations(map_paths(dir, "queries"),
                                              side.at("labels").at("queries").get<std::vector<int>>());
    scene.training = detail::load_observations(map_paths(dir, "training"),
                                               side.at("labels").at("training").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, (dir / "scene.json").string() + ": " + e.what());
  }
  if (scene.labels.size() != scene.gt_dense.size()) throw Error(ErrorCode::CountMismatch, "reference labels");
  if (scene.gt_dense.dim() != scene.field_config.dim) throw Error(ErrorCode::DimMismatch, "scene descriptor dim");
  scene.field = make_field(scene.field_config);
  if (scene.scene_config.with_observations) {
    SyntheticScene regen = gen_scene(scene.scene_config, scene.field_config);
    if (regen.queries.size() != scene.queries.size() || regen.training.size() != scene.training.size()) {
      throw Error(ErrorCode::CountMismatch, "scene files disagree with their recorded config");
    }
    scene.observation_model = regen.observation_model;
    scene.gt_observations = std::move(regen.gt_observations);
    for (std::size_t i = 0; i < scene.queries.size(); ++i) scene.queries[i].observation = regen.queries[i].observation;
    for (std::size_t i = 0; i < scene.training.size(); ++i) {
      scene.training[i].observation = regen.training[i].observation;
    }
  }
  return scene;
}

}  // namespace copr
