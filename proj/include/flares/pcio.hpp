// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "flares/config.hpp"
#include "flares/error.hpp"

// All on-disk formats are little-endian; the decoders below memcpy raw bytes.
static_assert(std::endian::native == std::endian::little,
              "flares file IO assumes a little-endian host");

namespace flares::pcio {

/// Train id meaning "no ignore class configured".
inline constexpr std::uint32_t kNoIgnore = 0xFFFFFFFFu;

/// Columnar LiDAR sweep. All arrays share the same length; labels may be
/// empty (unlabeled cloud). Points with x = y = z = 0 never survive loading,
/// so range() is strictly positive for file-backed clouds.
struct PointCloud {
  std::vector<float> xs, ys, zs;
  std::vector<float> intensities;
  std::vector<std::uint32_t> labels;  // empty when unlabeled

  std::size_t size() const { return xs.size(); }
  bool empty() const { return xs.empty(); }
  bool has_labels() const { return !labels.empty(); }

  double range(std::size_t i) const {
    const double x = xs[i], y = ys[i], z = zs[i];
    return std::sqrt(x * x + y * y + z * z);
  }

  void reserve(std::size_t n) {
    xs.reserve(n);
    ys.reserve(n);
    zs.reserve(n);
    intensities.reserve(n);
  }

  void append(float x, float y, float z, float intensity) {
    xs.push_back(x);
    ys.push_back(y);
    zs.push_back(z);
    intensities.push_back(intensity);
  }
};

/// Vertical field of view and range limits of the sensor. Angles in radians;
/// beams doubles as the default range-image height.
struct SensorSpec {
  double theta_max = 3.0 * M_PI / 180.0;
  double theta_min = -25.0 * M_PI / 180.0;
  int beams = 64;
  double range_min = 2.0;
  double range_max = 50.0;
  std::string name = "hdl-64e";

  void validate() const {
    if (!(theta_max > theta_min))
      throw Error("pcio", "sensor '" + name + "': theta_max must exceed theta_min");
    if (!(range_max > range_min && range_min > 0.0))
      throw Error("pcio", "sensor '" + name + "': need range_max > range_min > 0");
    if (beams < 1) throw Error("pcio", "sensor '" + name + "': beams must be >= 1");
  }
};

/// Raw-to-train label mapping plus per-class statistics. Train ids are
/// contiguous [0, size); the first raw id of each class is the inverse-map
/// representative used when writing label files.
struct ClassMap {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::uint32_t>> raw_ids;  // per train id, first = writer choice
  std::vector<double> frequencies;                  // in [0,1], sum 1 over non-ignored
  std::vector<double> weight_overrides;             // NaN where the config gave none
  std::uint32_t ignore_id = kNoIgnore;
  std::unordered_map<std::uint32_t, std::uint32_t> raw_to_train;

  std::size_t num_classes() const { return class_names.size(); }

  void validate() const {
    const std::size_t c = class_names.size();
    if (raw_ids.size() != c || frequencies.size() != c || weight_overrides.size() != c)
      throw Error("pcio", "class map: per-class arrays disagree in length");
    if (ignore_id != kNoIgnore && ignore_id >= c)
      throw Error("pcio", "class map: ignore_id " + std::to_string(ignore_id) + " out of range");
    double sum = 0.0;
    for (std::size_t i = 0; i < c; ++i)
      if (i != ignore_id) sum += frequencies[i];
    if (c > (ignore_id == kNoIgnore ? 0u : 1u) && std::abs(sum - 1.0) > 1e-9)
      throw Error("pcio", "class map: frequencies of non-ignored classes sum to " +
                              std::to_string(sum) + ", expected 1");
  }
};

/// What read_point_cloud did besides returning points: how many records the
/// file held and which were dropped as zero-norm sensor returns. Needed to
/// keep a companion label file aligned with the filtered cloud.
struct LoadReport {
  std::size_t file_points = 0;
  std::vector<std::uint32_t> dropped;  // original file indices, ascending

  std::size_t dropped_count() const { return dropped.size(); }
};

struct LabelReadStats {
  std::size_t unknown_raw = 0;  // raw ids absent from the map, sent to ignore_id
};

namespace detail {

inline std::vector<char> read_all(const std::string& path, const char* module) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(module, "cannot open file: " + path);
  const std::streamsize size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(bytes.data(), size))
    throw Error(module, "short read on file: " + path);
  return bytes;
}

}  // namespace detail

/// Reads a raw point file: little-endian float32 quadruples (x, y, z,
/// intensity), the SemanticKITTI layout. Zero-norm returns are dropped;
/// `report`, when given, records the file record count and dropped indices.
inline PointCloud read_point_cloud(const std::string& path, LoadReport* report = nullptr) {
  const auto bytes = detail::read_all(path, "pcio");
  if (bytes.size() % 16 != 0)
    throw Error("pcio", "point file '" + path + "': length " + std::to_string(bytes.size()) +
                            " is not a multiple of 16 (stray data at byte offset " +
                            std::to_string(bytes.size() - bytes.size() % 16) + ")");
  const std::size_t n = bytes.size() / 16;
  PointCloud cloud;
  cloud.reserve(n);
  LoadReport local;
  local.file_points = n;
  for (std::size_t i = 0; i < n; ++i) {
    float rec[4];
    std::memcpy(rec, bytes.data() + i * 16, 16);
    if (rec[0] == 0.0f && rec[1] == 0.0f && rec[2] == 0.0f) {
      local.dropped.push_back(static_cast<std::uint32_t>(i));
      continue;
    }
    cloud.append(rec[0], rec[1], rec[2], rec[3]);
  }
  if (report) *report = std::move(local);
  return cloud;
}

/// Writes the raw float32-quadruple point file. Labels, if any, are not
/// written here; pair with write_labels.
inline void write_point_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("pcio", "cannot open file for writing: " + path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float rec[4] = {cloud.xs[i], cloud.ys[i], cloud.zs[i], cloud.intensities[i]};
    out.write(reinterpret_cast<const char*>(rec), 16);
  }
  if (!out) throw Error("pcio", "write failed: " + path);
}

/// Decodes a label file in file order: little-endian uint32 per point,
/// semantic id in the low 16 bits (high bits carry instance ids). Unknown raw
/// ids map to ignore_id and bump the warning counter.
inline std::vector<std::uint32_t> read_labels(const std::string& path, const ClassMap& map,
                                              LabelReadStats* stats = nullptr) {
  const auto bytes = detail::read_all(path, "pcio");
  if (bytes.size() % 4 != 0)
    throw Error("pcio", "label file '" + path + "': length " + std::to_string(bytes.size()) +
                            " is not a multiple of 4");
  const std::size_t n = bytes.size() / 4;
  std::vector<std::uint32_t> out(n);
  LabelReadStats local;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, bytes.data() + i * 4, 4);
    raw &= 0xFFFFu;
    auto it = map.raw_to_train.find(raw);
    if (it == map.raw_to_train.end()) {
      ++local.unknown_raw;
      out[i] = map.ignore_id;
    } else {
      out[i] = it->second;
    }
  }
  if (stats) *stats = local;
  return out;
}

/// Attaches a file-order label array to a filtered cloud, dropping the
/// entries of zero-norm points recorded in the load report.
inline void attach_labels(PointCloud& cloud, const std::vector<std::uint32_t>& file_labels,
                          const LoadReport& report) {
  if (file_labels.size() != report.file_points)
    throw Error("pcio", "label array length " + std::to_string(file_labels.size()) +
                            " does not match companion cloud file with " +
                            std::to_string(report.file_points) + " points");
  cloud.labels.clear();
  cloud.labels.reserve(cloud.size());
  std::size_t drop_pos = 0;
  for (std::size_t i = 0; i < file_labels.size(); ++i) {
    if (drop_pos < report.dropped.size() && report.dropped[drop_pos] == i) {
      ++drop_pos;
      continue;
    }
    cloud.labels.push_back(file_labels[i]);
  }
  if (cloud.labels.size() != cloud.size())
    throw Error("pcio", "label array does not cover companion cloud after filtering");
}

/// Writes train ids back as raw ids (the representative raw id per class).
/// Round trip: read_labels(write_labels(x)) == x.
inline void write_labels(const std::vector<std::uint32_t>& labels, const ClassMap& map,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("pcio", "cannot open file for writing: " + path);
  for (const std::uint32_t train : labels) {
    if (train >= map.num_classes() || map.raw_ids[train].empty())
      throw Error("pcio", "train id " + std::to_string(train) + " has no raw id to write");
    const std::uint32_t raw = map.raw_ids[train][0];
    out.write(reinterpret_cast<const char*>(&raw), 4);
  }
  if (!out) throw Error("pcio", "write failed: " + path);
}

// --- configuration files ---------------------------------------------------

/// Sensor file keys: name, theta_max_deg, theta_min_deg, beams, range_min_m,
/// range_max_m. Flat key-value, no section required.
inline SensorSpec load_sensor_spec(const std::string& path) {
  const Config cfg = load_config(path);
  const ConfigSection* s = cfg.find("sensor");
  if (!s) s = &cfg.globals;
  SensorSpec spec;
  spec.name = s->get("name", spec.name);
  spec.theta_max = s->get_double("theta_max_deg", spec.theta_max * 180.0 / M_PI) * M_PI / 180.0;
  spec.theta_min = s->get_double("theta_min_deg", spec.theta_min * 180.0 / M_PI) * M_PI / 180.0;
  spec.beams = static_cast<int>(s->get_int("beams", spec.beams));
  spec.range_min = s->get_double("range_min_m", spec.range_min);
  spec.range_max = s->get_double("range_max_m", spec.range_max);
  spec.validate();
  return spec;
}

inline void save_sensor_spec(const SensorSpec& spec, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("pcio", "cannot open file for writing: " + path);
  out.precision(17);
  out << "[sensor]\n";
  out << "name = " << spec.name << "\n";
  out << "theta_max_deg = " << spec.theta_max * 180.0 / M_PI << "\n";
  out << "theta_min_deg = " << spec.theta_min * 180.0 / M_PI << "\n";
  out << "beams = " << spec.beams << "\n";
  out << "range_min_m = " << spec.range_min << "\n";
  out << "range_max_m = " << spec.range_max << "\n";
}

/// Class map file: a global `ignore_id`, then one `[class]` block per train
/// id in order, each with `name`, `raw_ids` (comma list), `frequency`, and an
/// optional `weight` override for the paste-drop augmentation.
inline ClassMap load_class_map(const std::string& path) {
  const Config cfg = load_config(path);
  ClassMap map;
  const long ignore = cfg.globals.get_int("ignore_id", -1);
  map.ignore_id = ignore < 0 ? kNoIgnore : static_cast<std::uint32_t>(ignore);
  for (const ConfigSection* s : cfg.all("class")) {
    const auto train = static_cast<std::uint32_t>(map.class_names.size());
    map.class_names.push_back(s->get("name", "class" + std::to_string(train)));
    std::vector<std::uint32_t> raws;
    for (const std::string& r : split_list(s->get("raw_ids", "")))
      raws.push_back(static_cast<std::uint32_t>(std::stoul(r)));
    if (raws.empty())
      throw Error("pcio", "class map '" + path + "': class '" + map.class_names.back() +
                              "' lists no raw_ids");
    for (const std::uint32_t r : raws) {
      if (map.raw_to_train.count(r))
        throw Error("pcio", "class map '" + path + "': raw id " + std::to_string(r) +
                                " mapped twice");
      map.raw_to_train[r] = train;
    }
    map.raw_ids.push_back(std::move(raws));
    map.frequencies.push_back(s->get_double("frequency", 0.0));
    map.weight_overrides.push_back(
        s->get_double("weight", std::numeric_limits<double>::quiet_NaN()));
  }
  if (map.class_names.empty())
    throw Error("pcio", "class map '" + path + "': no [class] sections");
  map.validate();
  return map;
}

inline void save_class_map(const ClassMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("pcio", "cannot open file for writing: " + path);
  out.precision(17);
  if (map.ignore_id != kNoIgnore) out << "ignore_id = " << map.ignore_id << "\n";
  for (std::size_t c = 0; c < map.num_classes(); ++c) {
    out << "\n[class]\n";
    out << "name = " << map.class_names[c] << "\n";
    out << "raw_ids = ";
    for (std::size_t i = 0; i < map.raw_ids[c].size(); ++i)
      out << (i ? ", " : "") << map.raw_ids[c][i];
    out << "\n";
    out << "frequency = " << map.frequencies[c] << "\n";
    if (!std::isnan(map.weight_overrides[c])) out << "weight = " << map.weight_overrides[c] << "\n";
  }
}

}  // namespace flares::pcio
