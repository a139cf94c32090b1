// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "flares/error.hpp"
#include "flares/pcio.hpp"
#include "flares/random.hpp"
#include "flares/rview.hpp"

namespace flares::augment {

/// Geometric data augmentation ranges. Each transform fires independently
/// with `probability`; angles are degrees, translations meters.
struct GdaParams {
  bool flip_x = true;
  std::array<double, 2> translate_x{-5.0, 5.0};
  std::array<double, 2> translate_y{-3.0, 3.0};
  std::array<double, 2> translate_z{-1.0, 0.0};
  std::array<double, 2> yaw_deg{-5.0, 5.0};
  std::array<double, 2> pitch_deg{-5.0, 5.0};
  std::array<double, 2> roll_deg{-5.0, 5.0};
  double probability = 0.5;

  void validate() const {
    if (probability < 0.0 || probability > 1.0)
      throw Error("augment", "probability must lie in [0, 1]");
    for (const auto& r : {translate_x, translate_y, translate_z, yaw_deg, pitch_deg, roll_deg})
      if (r[0] > r[1]) throw Error("augment", "range low exceeds high");
  }
};

/// Weighted Paste-Drop+ configuration. Classes with weight above `threshold`
/// form the paste set (copied in from pool frames); the rest form the drop
/// set (removed from the current frame). The weight doubles as the paste /
/// drop probability.
struct WpdConfig {
  std::vector<double> weights;  // per train id, in [0, 1]
  double threshold = 0.1;
  int sample_frames = 6;
  std::vector<pcio::PointCloud> paste_pool;  // labeled source frames
  bool per_point = false;  // Bernoulli per point instead of per class instance set
  std::uint32_t ignore_id = pcio::kNoIgnore;

  bool is_paste_class(std::uint32_t c) const {
    return c != ignore_id && c < weights.size() && weights[c] > threshold;
  }
  bool is_drop_class(std::uint32_t c) const {
    return c != ignore_id && c < weights.size() && weights[c] <= threshold;
  }
};

/// Default per-class weights: inverse frequency scaled so the rarest class
/// gets 1. Classes never observed get 1 outright; an ignore class gets 0.
/// Per-class `weight` keys in the class map file override these.
inline std::vector<double> default_weights(const pcio::ClassMap& map) {
  const std::size_t c = map.num_classes();
  std::vector<double> weights(c, 0.0);
  double max_inv = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    if (i == map.ignore_id || map.frequencies[i] <= 0.0) continue;
    max_inv = std::max(max_inv, 1.0 / map.frequencies[i]);
  }
  for (std::size_t i = 0; i < c; ++i) {
    if (i == map.ignore_id) continue;
    if (map.frequencies[i] <= 0.0)
      weights[i] = 1.0;
    else
      weights[i] = max_inv > 0.0 ? (1.0 / map.frequencies[i]) / max_inv : 1.0;
    if (!std::isnan(map.weight_overrides[i])) weights[i] = map.weight_overrides[i];
  }
  return weights;
}

/// Random flip / translation / rotation of the whole cloud. Labels ride along
/// untouched. Draw order is fixed (flip coin, translate coin + offsets,
/// rotate coin + angles) so a seed fully determines the output.
inline pcio::PointCloud geometric_augment(const pcio::PointCloud& cloud, const GdaParams& params,
                                          Rng& rng) {
  params.validate();
  pcio::PointCloud out = cloud;
  if (params.flip_x && rng.bernoulli(params.probability)) {
    for (auto& x : out.xs) x = -x;
  }
  if (rng.bernoulli(params.probability)) {
    const float dx = static_cast<float>(rng.uniform(params.translate_x[0], params.translate_x[1]));
    const float dy = static_cast<float>(rng.uniform(params.translate_y[0], params.translate_y[1]));
    const float dz = static_cast<float>(rng.uniform(params.translate_z[0], params.translate_z[1]));
    for (auto& x : out.xs) x += dx;
    for (auto& y : out.ys) y += dy;
    for (auto& z : out.zs) z += dz;
  }
  if (rng.bernoulli(params.probability)) {
    const double to_rad = M_PI / 180.0;
    const double yaw = rng.uniform(params.yaw_deg[0], params.yaw_deg[1]) * to_rad;
    const double pitch = rng.uniform(params.pitch_deg[0], params.pitch_deg[1]) * to_rad;
    const double roll = rng.uniform(params.roll_deg[0], params.roll_deg[1]) * to_rad;
    const Eigen::Matrix3d rot = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                                 Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                                 Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                                    .toRotationMatrix();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Eigen::Vector3d p = rot * Eigen::Vector3d(out.xs[i], out.ys[i], out.zs[i]);
      out.xs[i] = static_cast<float>(p.x());
      out.ys[i] = static_cast<float>(p.y());
      out.zs[i] = static_cast<float>(p.z());
    }
  }
  return out;
}

/// Weighted Paste-Drop+ in 3D space. Drop-set points of the current frame are
/// removed with their class weight as probability; paste-set points of
/// `sample_frames` randomly drawn pool frames are copied in verbatim, no
/// spatial transform. Surviving originals come first, pasted points append in
/// draw order.
inline pcio::PointCloud wpd_plus(const pcio::PointCloud& cloud, const WpdConfig& cfg, Rng& rng) {
  if (!cloud.has_labels()) throw Error("augment", "wpd_plus needs a labeled cloud");
  for (const double w : cfg.weights)
    if (!(w >= 0.0 && w <= 1.0)) throw Error("augment", "class weights must lie in [0, 1]");
  bool any_paste = false;
  for (std::size_t c = 0; c < cfg.weights.size(); ++c)
    any_paste |= cfg.is_paste_class(static_cast<std::uint32_t>(c));
  if (any_paste && cfg.paste_pool.empty())
    throw Error("augment", "paste set is non-empty but the paste pool holds no frames");
  if (cfg.sample_frames < 0) throw Error("augment", "sample_frames must be >= 0");

  const std::size_t num_classes = cfg.weights.size();

  // Drop phase: one decision per drop class (or per point with per_point).
  std::vector<std::uint8_t> drop_class(num_classes, 0);
  if (!cfg.per_point) {
    for (std::uint32_t c = 0; c < num_classes; ++c)
      if (cfg.is_drop_class(c) && rng.bernoulli(cfg.weights[c])) drop_class[c] = 1;
  }
  pcio::PointCloud out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::uint32_t c = cloud.labels[i];
    bool dropped = false;
    if (c < num_classes && cfg.is_drop_class(c))
      dropped = cfg.per_point ? rng.bernoulli(cfg.weights[c]) : drop_class[c] != 0;
    if (dropped) continue;
    out.append(cloud.xs[i], cloud.ys[i], cloud.zs[i], cloud.intensities[i]);
    out.labels.push_back(c);
  }

  // Paste phase: per sampled frame, each paste class comes over whole (or
  // point-wise) with its weight as probability.
  for (int f = 0; f < cfg.sample_frames && !cfg.paste_pool.empty(); ++f) {
    const pcio::PointCloud& frame = cfg.paste_pool[rng.index(cfg.paste_pool.size())];
    if (!frame.has_labels()) throw Error("augment", "paste pool frame lacks labels");
    std::vector<std::uint8_t> paste_class(num_classes, 0);
    if (!cfg.per_point) {
      for (std::uint32_t c = 0; c < num_classes; ++c)
        if (cfg.is_paste_class(c) && rng.bernoulli(cfg.weights[c])) paste_class[c] = 1;
    }
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const std::uint32_t c = frame.labels[i];
      if (!(c < num_classes && cfg.is_paste_class(c))) continue;
      const bool take = cfg.per_point ? rng.bernoulli(cfg.weights[c]) : paste_class[c] != 0;
      if (!take) continue;
      out.append(frame.xs[i], frame.ys[i], frame.zs[i], frame.intensities[i]);
      out.labels.push_back(c);
    }
  }
  return out;
}

/// SemanticKITTI-style cleanup: pixels labeled ignore_id (annotations stop at
/// 50 m, leaving far returns unlabeled) turn unoccupied so they stop acting
/// as projection noise.
inline rview::RangeImage clean_unlabeled(const rview::RangeImage& image, std::uint32_t ignore_id) {
  if (!image.has_labels()) throw Error("augment", "clean_unlabeled needs a label plane");
  rview::RangeImage out = image;
  const std::size_t pixels = out.occupancy.size();
  for (std::size_t p = 0; p < pixels; ++p) {
    if (out.occupancy[p] && out.labels[p] == ignore_id) out.clear_pixel(p);
  }
  return out;
}

/// Multi-Cloud Fusion: fills target image i's empty pixels from sibling
/// sub-cloud images at the same coordinates. The donor is the occupied
/// candidate with minimal range (ties to the lowest image index), copied
/// whole: all five channels plus the label.
inline rview::RangeImage mcf(const std::vector<rview::RangeImage>& images, std::size_t target) {
  if (images.empty()) throw Error("augment", "mcf needs at least one image");
  if (target >= images.size()) throw Error("augment", "mcf target index out of range");
  const auto& base = images[target];
  for (const auto& img : images) {
    if (img.height != base.height || img.width != base.width)
      throw Error("augment", "mcf images disagree in shape");
    if (img.has_labels() != base.has_labels())
      throw Error("augment", "mcf images disagree in label presence");
  }
  rview::RangeImage out = base;
  const std::size_t pixels = out.occupancy.size();
  for (std::size_t p = 0; p < pixels; ++p) {
    if (out.occupancy[p]) continue;
    std::size_t donor = images.size();
    float donor_range = std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < images.size(); ++j) {
      if (j == target || !images[j].occupancy[p]) continue;
      if (images[j].range[p] < donor_range) {
        donor_range = images[j].range[p];
        donor = j;
      }
    }
    if (donor == images.size()) continue;
    const auto& src = images[donor];
    out.x[p] = src.x[p];
    out.y[p] = src.y[p];
    out.z[p] = src.z[p];
    out.intensity[p] = src.intensity[p];
    out.range[p] = src.range[p];
    out.occupancy[p] = 1;
    if (out.has_labels()) out.labels[p] = src.labels[p];
  }
  return out;
}

/// mcf applied to every target in turn, each against the original set.
inline std::vector<rview::RangeImage> mcf_all(const std::vector<rview::RangeImage>& images) {
  std::vector<rview::RangeImage> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) out.push_back(mcf(images, i));
  return out;
}

}  // namespace flares::augment
