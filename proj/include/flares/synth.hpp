// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "flares/error.hpp"
#include "flares/pcio.hpp"
#include "flares/postproc.hpp"
#include "flares/random.hpp"
#include "flares/rview.hpp"

namespace flares::synth {

/// Train ids of the synthetic class map (see synth_class_map).
struct SynthClasses {
  std::uint32_t ignore = 0;
  std::uint32_t ground = 1;
  std::uint32_t vehicle = 2;
  std::uint32_t pole = 3;
  std::uint32_t sign = 4;
  std::uint32_t pedestrian = 5;
};

/// Small deliberately long-tailed class map for desk-scale experiments:
/// pole / sign / pedestrian land in the paste set under the default 0.1
/// threshold, ground / vehicle in the drop set.
inline pcio::ClassMap synth_class_map() {
  pcio::ClassMap map;
  map.class_names = {"unlabeled", "ground", "vehicle", "pole", "sign", "pedestrian"};
  map.frequencies = {0.0, 0.70, 0.22, 0.04, 0.015, 0.025};
  const double nan = std::numeric_limits<double>::quiet_NaN();
  map.weight_overrides.assign(6, nan);
  map.ignore_id = 0;
  for (std::uint32_t c = 0; c < 6; ++c) {
    map.raw_ids.push_back({c});
    map.raw_to_train[c] = c;
  }
  map.validate();
  return map;
}

/// Recipe for one procedurally generated scene. The virtual sensor sits at
/// the origin; the ground plane lies at z = -sensor_height. One ray fires per
/// (beam, azimuth step) cell of the sensor's angular grid, through the pixel
/// centers of a beams x azimuth_steps projection.
struct SceneSpec {
  std::uint64_t seed = 0;
  double ground_extent = 60.0;  // half side length of the ground square, meters
  double sensor_height = 1.8;
  int vehicles = 8;
  int poles = 6;
  int signs = 4;
  int pedestrians = 6;
  SynthClasses classes;
  pcio::SensorSpec sensor;  // defaults match the 64-beam KITTI-style sensor
  int beams = 64;
  int azimuth_steps = 512;

  void validate() const {
    sensor.validate();
    if (beams < 1 || azimuth_steps < 1)
      throw Error("synth", "ray grid must be at least 1 x 1");
    if (vehicles < 0 || poles < 0 || signs < 0 || pedestrians < 0)
      throw Error("synth", "object counts must be >= 0");
    if (!(ground_extent > 0.0) || !(sensor_height > 0.0))
      throw Error("synth", "ground extent and sensor height must be > 0");
  }
};

// --- analytic primitives -----------------------------------------------------

struct Box {
  Eigen::Vector3d lo, hi;
  std::uint32_t label;
};

struct Cylinder {
  double cx, cy;      // axis position
  double z0, z1;      // vertical extent
  double radius;
  std::uint32_t label;
};

/// A placed scene: bounded ground square plus labeled primitives, all in the
/// sensor frame.
struct Scene {
  double ground_z = -1.8;
  double ground_extent = 60.0;
  std::uint32_t ground_label = 1;
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
};

struct RayHit {
  double t;  // distance along the unit direction
  std::uint32_t label;
};

namespace detail {

inline constexpr double kRayEps = 1e-12;

/// Slab-method ray / axis-aligned box intersection from the origin.
inline std::optional<double> ray_box(const Eigen::Vector3d& dir, const Box& box) {
  double t_near = 0.0, t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < kRayEps) {
      if (box.lo[a] > 0.0 || box.hi[a] < 0.0) return std::nullopt;  // origin outside the slab
      continue;
    }
    double t0 = box.lo[a] / dir[a];
    double t1 = box.hi[a] / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  return t_near > kRayEps ? std::optional<double>(t_near) : std::nullopt;
}

/// Finite vertical cylinder: side surface plus end caps.
inline std::optional<double> ray_cylinder(const Eigen::Vector3d& dir, const Cylinder& cyl) {
  double best = std::numeric_limits<double>::infinity();
  const double a = dir.x() * dir.x() + dir.y() * dir.y();
  if (a > kRayEps) {
    const double b = -2.0 * (dir.x() * cyl.cx + dir.y() * cyl.cy);
    const double c = cyl.cx * cyl.cx + cyl.cy * cyl.cy - cyl.radius * cyl.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (const double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
        if (t <= kRayEps || t >= best) continue;
        const double z = t * dir.z();
        if (z >= cyl.z0 && z <= cyl.z1) best = t;
      }
    }
  }
  if (std::abs(dir.z()) > kRayEps) {
    for (const double zc : {cyl.z0, cyl.z1}) {
      const double t = zc / dir.z();
      if (t <= kRayEps || t >= best) continue;
      const double px = t * dir.x() - cyl.cx;
      const double py = t * dir.y() - cyl.cy;
      if (px * px + py * py <= cyl.radius * cyl.radius) best = t;
    }
  }
  if (std::isinf(best)) return std::nullopt;
  return best;
}

inline std::optional<double> ray_ground(const Eigen::Vector3d& dir, const Scene& scene) {
  if (dir.z() >= -kRayEps) return std::nullopt;  // sensor above the plane, needs a downward ray
  const double t = scene.ground_z / dir.z();
  const double px = t * dir.x(), py = t * dir.y();
  if (std::abs(px) > scene.ground_extent || std::abs(py) > scene.ground_extent)
    return std::nullopt;
  return t;
}

}  // namespace detail

/// Closest intersection of a unit ray from the sensor origin with the scene.
/// Hits closer than range_min or beyond range_max produce no return: the beam
/// still terminated there, so nothing behind it is visible either.
inline std::optional<RayHit> cast_ray(const Scene& scene, const Eigen::Vector3d& dir,
                                      double range_min, double range_max) {
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t label = 0;
  if (const auto t = detail::ray_ground(dir, scene); t && *t < best) {
    best = *t;
    label = scene.ground_label;
  }
  for (const auto& box : scene.boxes) {
    if (const auto t = detail::ray_box(dir, box); t && *t < best) {
      best = *t;
      label = box.label;
    }
  }
  for (const auto& cyl : scene.cylinders) {
    if (const auto t = detail::ray_cylinder(dir, cyl); t && *t < best) {
      best = *t;
      label = cyl.label;
    }
  }
  if (std::isinf(best) || best < range_min || best > range_max) return std::nullopt;
  return RayHit{best, label};
}

/// Elevation of ray grid row v: the center of projection pixel row v.
inline double beam_elevation(const pcio::SensorSpec& sensor, int beams, int v) {
  return sensor.theta_max - (v + 0.5) * (sensor.theta_max - sensor.theta_min) / beams;
}

/// Azimuth of ray grid column u: the center of projection pixel column u.
inline double step_azimuth(int azimuth_steps, int u) {
  return (0.5 * azimuth_steps - u - 0.5) * (2.0 * M_PI / azimuth_steps);
}

namespace detail {

inline float class_intensity(const SynthClasses& cls, std::uint32_t label) {
  if (label == cls.ground) return 0.20f;
  if (label == cls.vehicle) return 0.50f;
  if (label == cls.pole) return 0.40f;
  if (label == cls.sign) return 0.90f;
  if (label == cls.pedestrian) return 0.30f;
  return 0.0f;
}

}  // namespace detail

/// Places the primitives for a spec. Deterministic per seed; object draws
/// never depend on the ray grid, so the same seed yields the same scene at
/// any resolution.
inline Scene build_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.ground_z = -spec.sensor_height;
  scene.ground_extent = spec.ground_extent;
  scene.ground_label = spec.classes.ground;
  Rng rng(spec.seed);
  const double r_max = std::min(spec.ground_extent - 3.0, spec.sensor.range_max * 0.9);
  auto place = [&](double r_lo) {
    const double r = rng.uniform(r_lo, std::max(r_lo + 1.0, r_max));
    const double phi = rng.uniform(-M_PI, M_PI);
    return std::pair<double, double>{r * std::cos(phi), r * std::sin(phi)};
  };
  for (int i = 0; i < spec.vehicles; ++i) {
    const auto [cx, cy] = place(6.0);
    const double hl = rng.uniform(1.9, 2.5), hw = rng.uniform(0.8, 1.0), h = rng.uniform(1.4, 1.8);
    scene.boxes.push_back({{cx - hl, cy - hw, scene.ground_z},
                           {cx + hl, cy + hw, scene.ground_z + h},
                           spec.classes.vehicle});
  }
  for (int i = 0; i < spec.poles; ++i) {
    const auto [cx, cy] = place(5.0);
    const double radius = rng.uniform(0.10, 0.25), h = rng.uniform(2.5, 6.0);
    scene.cylinders.push_back({cx, cy, scene.ground_z, scene.ground_z + h, radius,
                               spec.classes.pole});
  }
  for (int i = 0; i < spec.signs; ++i) {
    const auto [cx, cy] = place(5.0);
    const double side = rng.uniform(0.6, 0.9), bottom = rng.uniform(1.5, 2.2);
    const bool thin_x = rng.bernoulli(0.5);
    const double hx = thin_x ? 0.025 : side / 2.0;
    const double hy = thin_x ? side / 2.0 : 0.025;
    scene.boxes.push_back({{cx - hx, cy - hy, scene.ground_z + bottom},
                           {cx + hx, cy + hy, scene.ground_z + bottom + side},
                           spec.classes.sign});
  }
  for (int i = 0; i < spec.pedestrians; ++i) {
    const auto [cx, cy] = place(4.0);
    const double hx = rng.uniform(0.2, 0.3), hy = rng.uniform(0.2, 0.3), h = rng.uniform(1.5, 1.85);
    scene.boxes.push_back({{cx - hx, cy - hy, scene.ground_z},
                           {cx + hx, cy + hy, scene.ground_z + h},
                           spec.classes.pedestrian});
  }
  return scene;
}

/// Fires the full ray grid over a generated scene. Rays pass through pixel
/// centers, so projecting the result at (H = beams, W = azimuth_steps) with
/// the same sensor puts one point in every hit pixel: validity 1.0 by
/// construction, the controlled fixture for projection tests. Points arrive
/// in scan order (row-major over the grid); misses leave no point.
inline pcio::PointCloud generate_scene(const SceneSpec& spec) {
  const Scene scene = build_scene(spec);
  pcio::PointCloud cloud;
  cloud.reserve(static_cast<std::size_t>(spec.beams) * spec.azimuth_steps);
  for (int v = 0; v < spec.beams; ++v) {
    const double elevation = beam_elevation(spec.sensor, spec.beams, v);
    const double cos_el = std::cos(elevation), sin_el = std::sin(elevation);
    for (int u = 0; u < spec.azimuth_steps; ++u) {
      const double azimuth = step_azimuth(spec.azimuth_steps, u);
      const Eigen::Vector3d dir(cos_el * std::cos(azimuth), cos_el * std::sin(azimuth), sin_el);
      const auto hit = cast_ray(scene, dir, spec.sensor.range_min, spec.sensor.range_max);
      if (!hit) continue;
      const Eigen::Vector3d p = hit->t * dir;
      cloud.append(static_cast<float>(p.x()), static_cast<float>(p.y()),
                   static_cast<float>(p.z()), detail::class_intensity(spec.classes, hit->label));
      cloud.labels.push_back(hit->label);
    }
  }
  return cloud;
}

// --- mock predictor ----------------------------------------------------------

/// Stands in for the trained 2D network: turns a ground-truth label plane
/// into a softmax-like score slice, optionally corrupting labels first.
struct MockPredictorConfig {
  double noise_rate = 0.0;   // probability a pixel's label flips to a wrong class
  double temperature = 0.1;  // softness of the emitted distribution
  std::uint64_t seed = 0;

  void validate() const {
    if (noise_rate < 0.0 || noise_rate > 1.0)
      throw Error("synth", "noise_rate must lie in [0, 1]");
    if (!(temperature > 0.0)) throw Error("synth", "temperature must be > 0");
  }
};

struct MockSlice {
  std::vector<float> scores;          // C x H x W
  std::vector<std::uint32_t> labels;  // post-corruption plane, unlabeled sentinel where empty
};

/// Emits, per occupied pixel, a distribution peaked at the (possibly
/// corrupted) label: softmax of a one-hot divided by temperature. Corruption
/// flips to a uniformly drawn wrong class, skipping the ignore class whenever
/// another candidate exists. Unoccupied pixels emit zeros. The argmax of the
/// slice equals the returned plane.
inline MockSlice mock_predict(const std::vector<std::uint32_t>& label_plane,
                              const std::vector<std::uint8_t>& occupancy, int height, int width,
                              int num_classes, const MockPredictorConfig& cfg, Rng& rng,
                              std::uint32_t ignore_id = pcio::kNoIgnore) {
  cfg.validate();
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  if (label_plane.size() != plane || occupancy.size() != plane)
    throw Error("synth", "mock_predict: plane shape mismatch");
  if (num_classes < 1) throw Error("synth", "mock_predict: need at least one class");
  MockSlice out;
  out.scores.assign(plane * num_classes, 0.0f);
  out.labels.assign(plane, rview::kUnlabeledPixel);

  // softmax(one_hot / T): peak 1 / (1 + (C-1) e), rest e / (1 + (C-1) e),
  // with e = exp(-1/T). Underflows cleanly to a one-hot as T -> 0.
  const double e = std::exp(-1.0 / cfg.temperature);
  const double denom = 1.0 + (num_classes - 1) * e;
  const float peak = static_cast<float>(1.0 / denom);
  const float rest = static_cast<float>(e / denom);

  for (std::size_t p = 0; p < plane; ++p) {
    if (!occupancy[p]) continue;
    std::uint32_t label = label_plane[p];
    if (label >= static_cast<std::uint32_t>(num_classes))
      throw Error("synth", "mock_predict: pixel label " + std::to_string(label) +
                               " outside [0, C)");
    if (cfg.noise_rate > 0.0 && rng.bernoulli(cfg.noise_rate) && num_classes > 1) {
      // uniformly drawn wrong class, preferring non-ignore candidates
      std::uint32_t n_candidates = 0;
      for (std::uint32_t c = 0; c < static_cast<std::uint32_t>(num_classes); ++c)
        if (c != label && c != ignore_id) ++n_candidates;
      if (n_candidates == 0) {
        label = label == 0 ? 1 : 0;  // only the ignore class remains; flip anyway
      } else {
        std::uint32_t pick = static_cast<std::uint32_t>(rng.index(n_candidates));
        for (std::uint32_t c = 0; c < static_cast<std::uint32_t>(num_classes); ++c) {
          if (c == label || c == ignore_id) continue;
          if (pick == 0) {
            label = c;
            break;
          }
          --pick;
        }
      }
    }
    out.labels[p] = label;
    for (std::uint32_t c = 0; c < static_cast<std::uint32_t>(num_classes); ++c)
      out.scores[c * plane + p] = (c == label) ? peak : rest;
  }
  return out;
}

inline MockSlice mock_predict(const std::vector<std::uint32_t>& label_plane,
                              const std::vector<std::uint8_t>& occupancy, int height, int width,
                              int num_classes, const MockPredictorConfig& cfg,
                              std::uint32_t ignore_id = pcio::kNoIgnore) {
  Rng rng(cfg.seed);
  return mock_predict(label_plane, occupancy, height, width, num_classes, cfg, rng, ignore_id);
}

/// Runs the mock predictor over every labeled sub-cloud image and assembles
/// the N x C x H x W score volume `postprocess` consumes. One random stream
/// drives all images in order.
inline postproc::ScoreVolume mock_predict_volume(const std::vector<rview::RangeImage>& images,
                                                 int num_classes, const MockPredictorConfig& cfg,
                                                 std::uint32_t ignore_id = pcio::kNoIgnore) {
  if (images.empty()) throw Error("synth", "mock_predict_volume: no images");
  const int height = images[0].height, width = images[0].width;
  postproc::ScoreVolume volume = postproc::ScoreVolume::zeros(
      static_cast<int>(images.size()), num_classes, height, width);
  Rng rng(cfg.seed);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.height != height || img.width != width)
      throw Error("synth", "mock_predict_volume: image shapes disagree");
    if (!img.has_labels()) throw Error("synth", "mock_predict_volume: image lacks labels");
    const MockSlice slice =
        mock_predict(img.labels, img.occupancy, height, width, num_classes, cfg, rng, ignore_id);
    std::copy(slice.scores.begin(), slice.scores.end(),
              volume.scores.begin() + n * plane * num_classes);
    std::copy(img.occupancy.begin(), img.occupancy.end(), volume.occupancy.begin() + n * plane);
  }
  return volume;
}

}  // namespace flares::synth
