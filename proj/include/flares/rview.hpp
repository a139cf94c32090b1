// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "flares/error.hpp"
#include "flares/pcio.hpp"

namespace flares::rview {

/// Range channel value at unoccupied pixels. Negative so it can never be
/// mistaken for a real range; the other channels sentinel to 0.
inline constexpr float kUnoccupiedRange = -1.0f;

/// Label plane value at pixels that carry no label.
inline constexpr std::uint32_t kUnlabeledPixel = pcio::kNoIgnore;

/// Five-channel raster of one (sub-)cloud: per-pixel x, y, z, intensity and
/// range of the winning (closest) point, plus an occupancy mask and an
/// optional label plane.
struct RangeImage {
  int height = 0;
  int width = 0;
  std::vector<float> x, y, z, intensity, range;  // H*W each, row-major
  std::vector<std::uint8_t> occupancy;           // 0/1
  std::vector<std::uint32_t> labels;             // empty when the cloud was unlabeled

  static RangeImage empty(int height, int width, bool with_labels) {
    RangeImage img;
    img.height = height;
    img.width = width;
    const std::size_t n = static_cast<std::size_t>(height) * width;
    img.x.assign(n, 0.0f);
    img.y.assign(n, 0.0f);
    img.z.assign(n, 0.0f);
    img.intensity.assign(n, 0.0f);
    img.range.assign(n, kUnoccupiedRange);
    img.occupancy.assign(n, 0);
    if (with_labels) img.labels.assign(n, kUnlabeledPixel);
    return img;
  }

  std::size_t pixel(int v, int u) const { return static_cast<std::size_t>(v) * width + u; }
  bool occupied(int v, int u) const { return occupancy[pixel(v, u)] != 0; }
  bool has_labels() const { return !labels.empty(); }

  std::size_t occupied_count() const {
    std::size_t n = 0;
    for (const auto o : occupancy) n += o;
    return n;
  }

  /// Clears one pixel back to the unoccupied sentinel.
  void clear_pixel(std::size_t p) {
    x[p] = y[p] = z[p] = intensity[p] = 0.0f;
    range[p] = kUnoccupiedRange;
    occupancy[p] = 0;
    if (!labels.empty()) labels[p] = kUnlabeledPixel;
  }
};

/// Per-point record linking 3D points to 2D cells: pixel coordinates, the
/// owning sub-cloud, the point's range, and whether it won its pixel.
/// Ordered by original point index.
struct ProjectionIndex {
  int height = 0;
  int width = 0;
  int subclouds = 1;  // N
  std::vector<std::int32_t> us, vs;
  std::vector<std::uint32_t> subcloud_id;
  std::vector<float> ranges;
  std::vector<std::uint8_t> winner;

  std::size_t size() const { return us.size(); }
};

/// One row of unproject_coords: everything post-processing needs per point.
struct PointCoord {
  std::uint32_t subcloud;
  std::int32_t u;
  std::int32_t v;
  float range;
};

struct SubcloudValidity {
  std::size_t total = 0;
  std::size_t projected = 0;
  double validity = 0.0;
};

/// 3D validity (share of points that win a pixel) and 2D occupancy (share of
/// pixels holding a point) of one projection.
struct ValidityReport {
  std::size_t total_points = 0;
  std::size_t projected_points = 0;
  double validity = 0.0;
  double occupancy_2d = 0.0;
  std::vector<SubcloudValidity> per_subcloud;
};

struct SplitResult {
  std::vector<pcio::PointCloud> subclouds;
  std::vector<std::uint32_t> subcloud_of;   // per original point
  std::vector<std::uint32_t> local_index;   // position within its sub-cloud
};

struct Projection {
  RangeImage image;
  ProjectionIndex index;
};

struct MultiProjection {
  std::vector<RangeImage> images;
  ProjectionIndex index;  // covers every original point exactly once
};

/// Splits a sweep into N sub-clouds by point index modulo N. Relies on file
/// order being the sensor's firing order: index modulo then walks the scan
/// pattern, which keeps each sub-cloud a thinned copy of the full sweep.
inline SplitResult split_cloud(const pcio::PointCloud& cloud, int n) {
  if (n < 1) throw Error("rview", "partition count must be >= 1, got " + std::to_string(n));
  if (static_cast<std::size_t>(n) > cloud.size())
    throw Error("rview", "partition count " + std::to_string(n) + " exceeds point count " +
                             std::to_string(cloud.size()) + " (empty sub-clouds)");
  SplitResult out;
  out.subclouds.resize(n);
  const std::size_t count = cloud.size();
  for (int i = 0; i < n; ++i) out.subclouds[i].reserve(count / n + 1);
  out.subcloud_of.resize(count);
  out.local_index.resize(count);
  const bool labeled = cloud.has_labels();
  for (std::size_t j = 0; j < count; ++j) {
    const int s = static_cast<int>(j % n);
    auto& sub = out.subclouds[s];
    out.subcloud_of[j] = static_cast<std::uint32_t>(s);
    out.local_index[j] = static_cast<std::uint32_t>(sub.size());
    sub.append(cloud.xs[j], cloud.ys[j], cloud.zs[j], cloud.intensities[j]);
    if (labeled) sub.labels.push_back(cloud.labels[j]);
  }
  return out;
}

namespace detail {

/// Pixel of one point under the spherical projection. Azimuth uses the
/// two-argument arctangent (full quadrant, result in (-pi, pi]); elevation
/// asin(z/d). Both indices floor then clamp, so out-of-FoV points land on
/// edge rows instead of vanishing.
inline void project_point(double x, double y, double z, double d, const pcio::SensorSpec& spec,
                          int height, int width, std::int32_t& u, std::int32_t& v) {
  const double azimuth = std::atan2(y, x);
  double sin_el = z / d;
  if (sin_el > 1.0 || sin_el < -1.0) {
    if (std::abs(sin_el) > 1.0 + 1e-9)
      throw Error("rview", "elevation sine " + std::to_string(sin_el) + " outside [-1, 1]");
    sin_el = std::clamp(sin_el, -1.0, 1.0);
  }
  const double elevation = std::asin(sin_el);
  const double uf = 0.5 * width - (width / (2.0 * M_PI)) * azimuth;
  const double vf = height / (spec.theta_max - spec.theta_min) * (spec.theta_max - elevation);
  u = static_cast<std::int32_t>(std::clamp(std::floor(uf), 0.0, static_cast<double>(width - 1)));
  v = static_cast<std::int32_t>(std::clamp(std::floor(vf), 0.0, static_cast<double>(height - 1)));
}

}  // namespace detail

/// Projects one cloud into an H x W range image. Per pixel the closest point
/// wins and fills all five channels; ties in range break toward the lower
/// point index so results never depend on iteration internals.
inline Projection project(const pcio::PointCloud& cloud, const pcio::SensorSpec& spec, int height,
                          int width) {
  if (height < 1 || width < 1)
    throw Error("rview", "image dimensions must be >= 1, got " + std::to_string(height) + "x" +
                             std::to_string(width));
  Projection out;
  out.image = RangeImage::empty(height, width, cloud.has_labels());
  auto& index = out.index;
  index.height = height;
  index.width = width;
  index.subclouds = 1;
  const std::size_t n = cloud.size();
  index.us.resize(n);
  index.vs.resize(n);
  index.subcloud_id.assign(n, 0);
  index.ranges.resize(n);
  index.winner.assign(n, 0);

  // Winner per pixel: minimal (range, original index).
  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  std::vector<std::int64_t> best(pixels, -1);
  std::vector<double> best_range(pixels, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const double d = cloud.range(i);
    if (!(d > 0.0))
      throw Error("rview", "point " + std::to_string(i) + " has non-positive range");
    std::int32_t u, v;
    detail::project_point(cloud.xs[i], cloud.ys[i], cloud.zs[i], d, spec, height, width, u, v);
    index.us[i] = u;
    index.vs[i] = v;
    index.ranges[i] = static_cast<float>(d);
    const std::size_t p = static_cast<std::size_t>(v) * width + u;
    if (best[p] < 0 || d < best_range[p]) {
      best[p] = static_cast<std::int64_t>(i);
      best_range[p] = d;
    }
  }

  auto& img = out.image;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (best[p] < 0) continue;
    const auto i = static_cast<std::size_t>(best[p]);
    index.winner[i] = 1;
    img.x[p] = cloud.xs[i];
    img.y[p] = cloud.ys[i];
    img.z[p] = cloud.zs[i];
    img.intensity[p] = cloud.intensities[i];
    img.range[p] = index.ranges[i];
    img.occupancy[p] = 1;
    if (cloud.has_labels()) img.labels[p] = cloud.labels[i];
  }
  return out;
}

/// split_cloud followed by project on each partition. The returned index is
/// re-merged to original point order and covers every input point once.
inline MultiProjection project_multi(const pcio::PointCloud& cloud, const pcio::SensorSpec& spec,
                                     int height, int width, int n) {
  const SplitResult split = split_cloud(cloud, n);
  MultiProjection out;
  out.images.reserve(n);
  std::vector<ProjectionIndex> sub_indices;
  sub_indices.reserve(n);
  for (int s = 0; s < n; ++s) {
    Projection p = project(split.subclouds[s], spec, height, width);
    out.images.push_back(std::move(p.image));
    sub_indices.push_back(std::move(p.index));
  }
  auto& index = out.index;
  index.height = height;
  index.width = width;
  index.subclouds = n;
  const std::size_t count = cloud.size();
  index.us.resize(count);
  index.vs.resize(count);
  index.subcloud_id.resize(count);
  index.ranges.resize(count);
  index.winner.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    const std::uint32_t s = split.subcloud_of[j];
    const std::uint32_t l = split.local_index[j];
    index.us[j] = sub_indices[s].us[l];
    index.vs[j] = sub_indices[s].vs[l];
    index.subcloud_id[j] = s;
    index.ranges[j] = sub_indices[s].ranges[l];
    index.winner[j] = sub_indices[s].winner[l];
  }
  return out;
}

/// Counts winners and occupied pixels for a projection. occupancy_2d is the
/// occupied fraction over all N*H*W pixels, i.e. the mean per-sub-cloud 2D
/// occupancy.
inline ValidityReport validity_stats(const ProjectionIndex& index,
                                     const std::vector<RangeImage>& images) {
  if (images.size() != static_cast<std::size_t>(index.subclouds))
    throw Error("rview", "validity_stats: index covers " + std::to_string(index.subclouds) +
                             " sub-clouds but " + std::to_string(images.size()) +
                             " images were given");
  ValidityReport report;
  report.total_points = index.size();
  report.per_subcloud.assign(index.subclouds, {});
  for (std::size_t j = 0; j < index.size(); ++j) {
    auto& sub = report.per_subcloud[index.subcloud_id[j]];
    ++sub.total;
    if (index.winner[j]) {
      ++sub.projected;
      ++report.projected_points;
    }
  }
  for (auto& sub : report.per_subcloud)
    sub.validity = sub.total ? static_cast<double>(sub.projected) / sub.total : 0.0;
  report.validity =
      report.total_points ? static_cast<double>(report.projected_points) / report.total_points : 0.0;
  std::size_t occupied = 0;
  std::size_t pixels = 0;
  for (const auto& img : images) {
    occupied += img.occupied_count();
    pixels += static_cast<std::size_t>(img.height) * img.width;
  }
  report.occupancy_2d = pixels ? static_cast<double>(occupied) / pixels : 0.0;
  return report;
}

/// Flattens the index into one row per original point.
inline std::vector<PointCoord> unproject_coords(const ProjectionIndex& index) {
  std::vector<PointCoord> rows(index.size());
  for (std::size_t j = 0; j < index.size(); ++j)
    rows[j] = {index.subcloud_id[j], index.us[j], index.vs[j], index.ranges[j]};
  return rows;
}

// --- range image dump ------------------------------------------------------
//
// Binary layout: magic "FLRI", then uint32 height, width, channel count (5),
// label flag; float32 planes x, y, z, intensity, range; one occupancy byte
// per pixel; uint32 label plane when the flag is set. Little-endian.

inline constexpr char kRangeImageMagic[4] = {'F', 'L', 'R', 'I'};

inline void write_range_image(const RangeImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("rview", "cannot open file for writing: " + path);
  out.write(kRangeImageMagic, 4);
  const std::uint32_t header[4] = {static_cast<std::uint32_t>(img.height),
                                   static_cast<std::uint32_t>(img.width), 5u,
                                   img.has_labels() ? 1u : 0u};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  const auto plane_bytes = static_cast<std::streamsize>(img.x.size() * sizeof(float));
  for (const auto* plane : {&img.x, &img.y, &img.z, &img.intensity, &img.range})
    out.write(reinterpret_cast<const char*>(plane->data()), plane_bytes);
  out.write(reinterpret_cast<const char*>(img.occupancy.data()),
            static_cast<std::streamsize>(img.occupancy.size()));
  if (img.has_labels())
    out.write(reinterpret_cast<const char*>(img.labels.data()),
              static_cast<std::streamsize>(img.labels.size() * sizeof(std::uint32_t)));
  if (!out) throw Error("rview", "write failed: " + path);
}

inline RangeImage read_range_image(const std::string& path) {
  const auto bytes = pcio::detail::read_all(path, "rview");
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kRangeImageMagic, 4) != 0)
    throw Error("rview", "not a range image dump: " + path);
  std::uint32_t header[4];
  std::memcpy(header, bytes.data() + 4, sizeof(header));
  const std::uint32_t height = header[0], width = header[1], channels = header[2],
                      has_labels = header[3];
  if (channels != 5)
    throw Error("rview", "unsupported channel count " + std::to_string(channels) + ": " + path);
  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  const std::size_t expect =
      20 + pixels * (5 * sizeof(float) + 1) + (has_labels ? pixels * sizeof(std::uint32_t) : 0);
  if (bytes.size() != expect)
    throw Error("rview", "range image dump truncated or oversized: " + path);
  RangeImage img = RangeImage::empty(static_cast<int>(height), static_cast<int>(width),
                                     has_labels != 0);
  std::size_t off = 20;
  for (auto* plane : {&img.x, &img.y, &img.z, &img.intensity, &img.range}) {
    std::memcpy(plane->data(), bytes.data() + off, pixels * sizeof(float));
    off += pixels * sizeof(float);
  }
  std::memcpy(img.occupancy.data(), bytes.data() + off, pixels);
  off += pixels;
  if (has_labels) std::memcpy(img.labels.data(), bytes.data() + off, pixels * sizeof(std::uint32_t));
  return img;
}

}  // namespace flares::rview
