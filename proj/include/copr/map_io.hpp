#pragma once

// On-disk map format: a pose CSV (`id,tx,ty,tz,qw,qx,qy,qz`) paired with a
// `CPRD` descriptor binary (u32 version, u32 count, u32 dim, f32 payload, all
// little-endian, rows in pose-file order). Entry provenance is not stored;
// ids containing '#' load as Regressed.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "copr/binary_io.hpp"
#include "copr/error.hpp"
#include "copr/vpr_map.hpp"

namespace copr {

inline constexpr std::uint32_t kDescriptorFormatVersion = 1;
inline constexpr std::string_view kPoseCsvHeader = "id,tx,ty,tz,qw,qx,qy,qz";

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line, std::size_t field) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", field " +
                                           std::to_string(field) + ": bad number '" +
                                           std::string(s) + "'");
  }
  return v;
}

inline bool fits_f32(double v) {
  return std::isfinite(v) && std::abs(v) <= static_cast<double>(std::numeric_limits<float>::max());
}

}  // namespace detail

struct PoseRow {
  std::string id;
  Pose pose;
};

inline void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os << kPoseCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& c = r.pose.q.coeffs();
    os << r.id << ',' << detail::format_double(r.pose.t.x()) << ','
       << detail::format_double(r.pose.t.y()) << ',' << detail::format_double(r.pose.t.z());
    for (double v : c) os << ',' << detail::format_double(v);
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline std::vector<PoseRow> read_pose_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kPoseCsvHeader) {
    throw Error(ErrorCode::ParseError, "line 1: expected header '" + std::string(kPoseCsvHeader) + "'");
  }
  std::vector<PoseRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 8) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 8 fields, got " +
                                             std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty id");
    double v[7];
    for (std::size_t i = 0; i < 7; ++i) v[i] = detail::parse_double(fields[i + 1], line_no, i + 2);
    try {
      rows.push_back({std::string(fields[0]), Pose{Vec3(v[0], v[1], v[2]), Quaternion(v[3], v[4], v[5], v[6])}});
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": zero quaternion");
    }
  }
  return rows;
}

/// Descriptor rows as stored on disk (f32 widened to double).
struct DescriptorBlock {
  std::size_t dim = 0;
  std::vector<Descriptor> rows;
};

inline void write_descriptor_bin(const std::filesystem::path& path, std::size_t dim,
                                 const std::vector<const double*>& rows) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t d = 0; d < dim; ++d) {
      if (!detail::fits_f32(rows[r][d])) {
        throw Error(ErrorCode::RefusedNonFinite, "row " + std::to_string(r) + ", component " +
                                                     std::to_string(d) + " is not a finite f32");
      }
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  os.write("CPRD", 4);
  binary::put_u32(os, kDescriptorFormatVersion);
  binary::put_u32(os, static_cast<std::uint32_t>(rows.size()));
  binary::put_u32(os, static_cast<std::uint32_t>(dim));
  for (const double* row : rows) {
    for (std::size_t d = 0; d < dim; ++d) binary::put_f32(os, static_cast<float>(row[d]));
  }
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline void write_descriptor_bin(const std::filesystem::path& path, std::size_t dim,
                                 const std::vector<Descriptor>& rows) {
  std::vector<const double*> ptrs;
  ptrs.reserve(rows.size());
  for (const auto& r : rows) {
    if (static_cast<std::size_t>(r.size()) != dim) throw Error(ErrorCode::DimMismatch, "descriptor row");
    ptrs.push_back(r.data());
  }
  write_descriptor_bin(path, dim, ptrs);
}

inline DescriptorBlock read_descriptor_bin(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  binary::expect_magic(is, "CPRD");
  const auto version = binary::get_u32(is, "version");
  if (version != kDescriptorFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported, "descriptor format version " + std::to_string(version));
  }
  const auto count = binary::get_u32(is, "count");
  const auto dim = binary::get_u32(is, "dim");
  if (dim == 0) throw Error(ErrorCode::ParseError, "offset 12: descriptor dim is 0");
  DescriptorBlock block{dim, {}};
  block.rows.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    Descriptor d(dim);
    for (std::uint32_t c = 0; c < dim; ++c) {
      const std::size_t offset = 16 + (static_cast<std::size_t>(r) * dim + c) * 4;
      d[c] = binary::get_f32(is, "payload at offset " + std::to_string(offset));
    }
    block.rows.push_back(std::move(d));
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::ParseError, "trailing bytes after offset " +
                                           std::to_string(16 + static_cast<std::size_t>(count) * dim * 4));
  }
  return block;
}

inline void save_map(const ReferenceMap& map, const std::filesystem::path& pose_path,
                     const std::filesystem::path& descriptor_path) {
  std::vector<const double*> rows;
  std::vector<PoseRow> poses;
  rows.reserve(map.size());
  poses.reserve(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    rows.push_back(map.descriptor(i).data());
    poses.push_back({map.entry(i).id, map.entry(i).pose});
  }
  // the descriptor writer validates every value before creating the file
  write_descriptor_bin(descriptor_path, map.dim(), rows);
  write_pose_csv(pose_path, poses);
}

inline ReferenceMap load_map(const std::filesystem::path& pose_path,
                             const std::filesystem::path& descriptor_path, bool l2_normalize = false) {
  auto poses = read_pose_csv(pose_path);
  auto block = read_descriptor_bin(descriptor_path);
  if (poses.size() != block.rows.size()) {
    throw Error(ErrorCode::CountMismatch, std::to_string(poses.size()) + " pose rows vs " +
                                              std::to_string(block.rows.size()) + " descriptors");
  }
  ReferenceMap map(block.dim);
  map.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Origin origin =
        poses[i].id.find('#') == std::string::npos ? Origin::Anchor : Origin::Regressed;
    map.add(std::move(poses[i].id), block.rows[i], poses[i].pose, origin);
  }
  if (l2_normalize) map.l2_normalize();
  return map;
}

}  // namespace copr
