// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "flares/pcio.hpp"
#include "flares/random.hpp"

namespace testutil {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("flares_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

inline void write_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
void append_raw(std::vector<char>& bytes, const T& value) {
  const char* p = reinterpret_cast<const char*>(&value);
  bytes.insert(bytes.end(), p, p + sizeof(T));
}

/// Random cloud with ranges in [1, 50]; intensity stores the original point
/// index so partition tests can recover identities after splitting.
inline flares::pcio::PointCloud random_cloud(flares::Rng& rng, std::size_t count,
                                             bool labeled = false, std::uint32_t num_classes = 4) {
  flares::pcio::PointCloud cloud;
  cloud.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = rng.uniform(1.0, 50.0);
    const double az = rng.uniform(-M_PI, M_PI);
    const double el = rng.uniform(-25.0 * M_PI / 180.0, 3.0 * M_PI / 180.0);
    cloud.append(static_cast<float>(r * std::cos(el) * std::cos(az)),
                 static_cast<float>(r * std::cos(el) * std::sin(az)),
                 static_cast<float>(r * std::sin(el)), static_cast<float>(i));
    if (labeled) cloud.labels.push_back(static_cast<std::uint32_t>(rng.index(num_classes)));
  }
  return cloud;
}

/// Two-class map used across IO tests: raw 10 -> train 0, raw 20 -> train 1.
inline flares::pcio::ClassMap tiny_map() {
  flares::pcio::ClassMap map;
  map.class_names = {"a", "b"};
  map.raw_ids = {{10}, {20}};
  map.frequencies = {0.5, 0.5};
  map.weight_overrides = {std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN()};
  map.ignore_id = flares::pcio::kNoIgnore;
  map.raw_to_train = {{10, 0}, {20, 1}};
  return map;
}

}  // namespace testutil
