// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "flares/error.hpp"
#include "flares/pcio.hpp"
#include "flares/rview.hpp"

namespace flares::postproc {

/// Per-class softmax scores for all sub-cloud images: N x C x H x W, plus the
/// occupancy of each image. Occupied pixels hold a distribution summing to 1;
/// unoccupied pixels are all zero.
struct ScoreVolume {
  int subclouds = 0;  // N
  int classes = 0;    // C
  int height = 0;     // H
  int width = 0;      // W
  std::vector<float> scores;           // [n][c][v][u]
  std::vector<std::uint8_t> occupancy;  // [n][v][u]

  static ScoreVolume zeros(int n, int c, int h, int w) {
    ScoreVolume v;
    v.subclouds = n;
    v.classes = c;
    v.height = h;
    v.width = w;
    v.scores.assign(static_cast<std::size_t>(n) * c * h * w, 0.0f);
    v.occupancy.assign(static_cast<std::size_t>(n) * h * w, 0);
    return v;
  }

  std::size_t score_index(int n, int c, int v, int u) const {
    return ((static_cast<std::size_t>(n) * classes + c) * height + v) * width + u;
  }
  std::size_t pixel_index(int n, int v, int u) const {
    return (static_cast<std::size_t>(n) * height + v) * width + u;
  }

  /// Enforces the distribution invariant; used at IO boundaries, not in the
  /// per-frame hot path.
  void validate(double tolerance = 1e-5) const {
    if (scores.size() != static_cast<std::size_t>(subclouds) * classes * height * width ||
        occupancy.size() != static_cast<std::size_t>(subclouds) * height * width)
      throw Error("postproc", "score volume arrays disagree with N x C x H x W header");
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    for (int n = 0; n < subclouds; ++n) {
      for (std::size_t p = 0; p < plane; ++p) {
        double sum = 0.0;
        for (int c = 0; c < classes; ++c)
          sum += scores[(static_cast<std::size_t>(n) * classes + c) * plane + p];
        const bool occ = occupancy[n * plane + p] != 0;
        if (occ && std::abs(sum - 1.0) > tolerance)
          throw Error("postproc", "occupied pixel scores sum to " + std::to_string(sum));
        if (!occ && sum != 0.0)
          throw Error("postproc", "unoccupied pixel carries nonzero scores");
      }
    }
  }
};

/// Nearest Neighbors Range Interpolation parameters. r_mean / r_std default
/// to NaN, meaning "use this scan's statistics over all point ranges";
/// dataset-level constants can be pinned through the config.
struct NnriParams {
  int kernel = 3;
  double alpha = 1.0;
  double r_mean = std::numeric_limits<double>::quiet_NaN();
  double r_std = std::numeric_limits<double>::quiet_NaN();

  int pad() const { return (kernel - 1) / 2; }

  void validate() const {
    if (kernel < 1 || kernel % 2 == 0)
      throw Error("postproc", "kernel size must be odd and >= 1, got " + std::to_string(kernel));
    if (!(alpha > 0.0)) throw Error("postproc", "alpha must be > 0");
    if (!std::isnan(r_std) && !(r_std > 0.0)) throw Error("postproc", "r_std must be > 0");
  }
};

/// KNN voting parameters (RangeNet++-style). sigma > 0 weights votes with a
/// Gaussian of the range difference; sigma <= 0 casts unit votes.
struct KnnParams {
  int kernel = 5;      // k: window size, odd
  int votes = 5;       // K: neighbors that actually vote
  double cutoff = 1.0;  // meters, constant range gate
  double sigma = 1.0;
  std::size_t num_classes = 0;  // C
  std::uint32_t ignore_id = pcio::kNoIgnore;

  void validate() const {
    if (kernel < 1 || kernel % 2 == 0)
      throw Error("postproc", "kernel size must be odd and >= 1, got " + std::to_string(kernel));
    if (votes < 1 || votes > kernel * kernel)
      throw Error("postproc", "vote count must lie in [1, k^2]");
    if (num_classes == 0) throw Error("postproc", "num_classes must be set");
  }
};

/// Adaptive neighbor cut-off: alpha * exp((r - r_mean) / r_std). Strictly
/// increasing in r, approximating how point density thins with distance.
inline double cutoff(double range_m, double r_mean, double r_std, double alpha) {
  return alpha * std::exp((range_m - r_mean) / r_std);
}

struct RangeStats {
  double mean = 0.0;
  double stddev = 0.0;
};

inline RangeStats per_scan_range_stats(const std::vector<rview::PointCoord>& coords) {
  RangeStats s;
  if (coords.empty()) return s;
  double sum = 0.0;
  for (const auto& c : coords) sum += c.range;
  s.mean = sum / coords.size();
  double var = 0.0;
  for (const auto& c : coords) {
    const double d = c.range - s.mean;
    var += d * d;
  }
  s.stddev = std::sqrt(var / coords.size());
  return s;
}

namespace detail {

inline int wrap_col(int u, int width) {
  const int m = u % width;
  return m < 0 ? m + width : m;
}

inline std::uint32_t argmax_class(const std::vector<double>& acc) {
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < acc.size(); ++c)
    if (acc[c] > acc[best]) best = c;  // ties keep the lower class id
  return best;
}

inline void check_coords(const std::vector<rview::PointCoord>& coords, int n, int h, int w,
                         const char* who) {
  for (const auto& c : coords) {
    if (c.subcloud >= static_cast<std::uint32_t>(n) || c.u < 0 || c.u >= w || c.v < 0 || c.v >= h)
      throw Error("postproc", std::string(who) + ": point coordinates out of bounds");
  }
}

}  // namespace detail

/// Nearest Neighbors Range Interpolation. For every point, gathers the k x k
/// neighborhood at its pixel in all N sub-cloud images, weights each
/// neighbor's class scores by 1 - min(|dr|, D) / D with the adaptive cut-off
/// D, and takes the argmax of the weighted sum. The window wraps across the
/// azimuth seam; rows outside the image and unoccupied pixels weigh zero.
inline std::vector<std::uint32_t> nnri(const ScoreVolume& volume,
                                       const std::vector<float>& image_ranges,
                                       const std::vector<rview::PointCoord>& coords,
                                       const NnriParams& params) {
  params.validate();
  const int n_images = volume.subclouds, classes = volume.classes;
  const int height = volume.height, width = volume.width;
  if (image_ranges.size() != volume.occupancy.size())
    throw Error("postproc", "nnri: range planes disagree with score volume shape");
  detail::check_coords(coords, n_images, height, width, "nnri");

  double r_mean = params.r_mean, r_std = params.r_std;
  if (std::isnan(r_mean) || std::isnan(r_std)) {
    const RangeStats stats = per_scan_range_stats(coords);
    if (std::isnan(r_mean)) r_mean = stats.mean;
    if (std::isnan(r_std)) r_std = std::max(stats.stddev, 1e-6);  // degenerate one-range scan
  }

  const int pad = params.pad();
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::vector<std::uint32_t> labels(coords.size());
  std::vector<double> acc(classes);

  for (std::size_t p = 0; p < coords.size(); ++p) {
    const auto& pc = coords[p];
    const double point_range = pc.range;
    const double cut = cutoff(point_range, r_mean, r_std, params.alpha);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int n = 0; n < n_images; ++n) {
      const std::size_t img_base = static_cast<std::size_t>(n) * plane;
      for (int dy = -pad; dy <= pad; ++dy) {
        const int vv = pc.v + dy;
        if (vv < 0 || vv >= height) continue;  // vertical padding: unoccupied
        const std::size_t row_base = img_base + static_cast<std::size_t>(vv) * width;
        for (int dx = -pad; dx <= pad; ++dx) {
          const int uu = detail::wrap_col(pc.u + dx, width);
          const std::size_t at = row_base + uu;
          if (!volume.occupancy[at]) continue;  // dr = +inf, weight 0
          const double dr = std::abs(static_cast<double>(image_ranges[at]) - point_range);
          if (dr >= cut) continue;  // clamped to D, weight 0
          const double w = 1.0 - dr / cut;
          const std::size_t score_base =
              (static_cast<std::size_t>(n) * classes) * plane + static_cast<std::size_t>(vv) * width + uu;
          for (int c = 0; c < classes; ++c) acc[c] += w * volume.scores[score_base + c * plane];
        }
      }
    }
    labels[p] = detail::argmax_class(acc);
  }
  return labels;
}

namespace detail {

struct Candidate {
  double delta;
  int scan_pos;  // deterministic tie-break: window scan order
  std::uint32_t label;
};

/// Adds one image's KNN votes for every point into `votes` (row-major point x
/// class) and marks points that received at least one vote.
inline void accumulate_knn_votes(const rview::RangeImage& image,
                                 const std::vector<std::uint32_t>& label_plane,
                                 const std::vector<rview::PointCoord>& coords,
                                 const KnnParams& params, std::vector<double>& votes,
                                 std::vector<std::uint8_t>& voted) {
  const int height = image.height, width = image.width;
  if (label_plane.size() != image.occupancy.size())
    throw Error("postproc", "knn: label plane disagrees with image shape");
  const int pad = (params.kernel - 1) / 2;
  const std::size_t classes = params.num_classes;
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(params.kernel) * params.kernel);

  for (std::size_t p = 0; p < coords.size(); ++p) {
    const auto& pc = coords[p];
    cands.clear();
    int scan_pos = 0;
    for (int dy = -pad; dy <= pad; ++dy) {
      const int vv = pc.v + dy;
      if (vv < 0 || vv >= height) {
        scan_pos += params.kernel;
        continue;
      }
      for (int dx = -pad; dx <= pad; ++dx, ++scan_pos) {
        const int uu = wrap_col(pc.u + dx, width);
        const std::size_t at = static_cast<std::size_t>(vv) * width + uu;
        if (!image.occupancy[at]) continue;
        const double dr = std::abs(static_cast<double>(image.range[at]) - pc.range);
        if (dr > params.cutoff) continue;
        const std::uint32_t label = label_plane[at];
        if (label >= classes)
          throw Error("postproc", "knn: occupied pixel labeled " + std::to_string(label) +
                                      " but only " + std::to_string(classes) + " classes exist");
        cands.push_back({dr, scan_pos, label});
      }
    }
    if (cands.empty()) continue;
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.delta != b.delta ? a.delta < b.delta : a.scan_pos < b.scan_pos;
    });
    const std::size_t take = std::min<std::size_t>(params.votes, cands.size());
    double* vote_row = votes.data() + p * classes;
    for (std::size_t i = 0; i < take; ++i) {
      const double d = cands[i].delta;
      const double w =
          params.sigma > 0.0 ? std::exp(-(d * d) / (2.0 * params.sigma * params.sigma)) : 1.0;
      vote_row[cands[i].label] += w;
    }
    voted[p] = 1;
  }
}

inline std::uint32_t own_pixel_label(const rview::RangeImage& image,
                                     const std::vector<std::uint32_t>& label_plane,
                                     const rview::PointCoord& pc, std::uint32_t ignore_id) {
  const std::size_t at = static_cast<std::size_t>(pc.v) * image.width + pc.u;
  return image.occupancy[at] ? label_plane[at] : ignore_id;
}

}  // namespace detail

/// Single-range KNN voting: the K window neighbors nearest in range (within
/// the constant cutoff) vote on the point's label. Points without any valid
/// neighbor fall back to their own pixel's label, or ignore_id if that pixel
/// is unoccupied too.
inline std::vector<std::uint32_t> knn_single(const rview::RangeImage& image,
                                             const std::vector<std::uint32_t>& label_plane,
                                             const std::vector<rview::PointCoord>& coords,
                                             const KnnParams& params) {
  params.validate();
  detail::check_coords(coords, 1, image.height, image.width, "knn_single");
  std::vector<double> votes(coords.size() * params.num_classes, 0.0);
  std::vector<std::uint8_t> voted(coords.size(), 0);
  detail::accumulate_knn_votes(image, label_plane, coords, params, votes, voted);
  std::vector<std::uint32_t> labels(coords.size());
  std::vector<double> row(params.num_classes);
  for (std::size_t p = 0; p < coords.size(); ++p) {
    if (!voted[p]) {
      labels[p] = detail::own_pixel_label(image, label_plane, coords[p], params.ignore_id);
      continue;
    }
    std::copy_n(votes.begin() + p * params.num_classes, params.num_classes, row.begin());
    labels[p] = detail::argmax_class(row);
  }
  return labels;
}

/// Multi-range KNN: per-image KNN votes accumulate over all N sub-cloud
/// images; each point takes the class with the highest total. Points with no
/// votes anywhere fall back to their pixel in their own sub-cloud's image.
inline std::vector<std::uint32_t> knn_multi(const std::vector<rview::RangeImage>& images,
                                            const std::vector<std::vector<std::uint32_t>>& label_planes,
                                            const std::vector<rview::PointCoord>& coords,
                                            const KnnParams& params) {
  params.validate();
  if (images.empty() || images.size() != label_planes.size())
    throw Error("postproc", "knn_multi: need one label plane per image");
  detail::check_coords(coords, static_cast<int>(images.size()), images[0].height, images[0].width,
                       "knn_multi");
  std::vector<double> votes(coords.size() * params.num_classes, 0.0);
  std::vector<std::uint8_t> voted(coords.size(), 0);
  for (std::size_t i = 0; i < images.size(); ++i)
    detail::accumulate_knn_votes(images[i], label_planes[i], coords, params, votes, voted);
  std::vector<std::uint32_t> labels(coords.size());
  std::vector<double> row(params.num_classes);
  for (std::size_t p = 0; p < coords.size(); ++p) {
    if (!voted[p]) {
      const auto& own = images[coords[p].subcloud];
      labels[p] = detail::own_pixel_label(own, label_planes[coords[p].subcloud], coords[p],
                                          params.ignore_id);
      continue;
    }
    std::copy_n(votes.begin() + p * params.num_classes, params.num_classes, row.begin());
    labels[p] = detail::argmax_class(row);
  }
  return labels;
}

/// Nearest Label Assignment: each point copies the label of the occupied
/// window neighbor closest in range, ties to the lower (row, col). An empty
/// window yields ignore_id.
inline std::vector<std::uint32_t> nla(const rview::RangeImage& image,
                                      const std::vector<std::uint32_t>& label_plane,
                                      const std::vector<rview::PointCoord>& coords, int kernel,
                                      std::uint32_t ignore_id) {
  if (kernel < 1 || kernel % 2 == 0)
    throw Error("postproc", "kernel size must be odd and >= 1, got " + std::to_string(kernel));
  detail::check_coords(coords, 1, image.height, image.width, "nla");
  if (label_plane.size() != image.occupancy.size())
    throw Error("postproc", "nla: label plane disagrees with image shape");
  const int pad = (kernel - 1) / 2;
  std::vector<std::uint32_t> labels(coords.size(), ignore_id);
  for (std::size_t p = 0; p < coords.size(); ++p) {
    const auto& pc = coords[p];
    double best_delta = std::numeric_limits<double>::infinity();
    int best_v = -1, best_u = -1;
    for (int dy = -pad; dy <= pad; ++dy) {
      const int vv = pc.v + dy;
      if (vv < 0 || vv >= image.height) continue;
      for (int dx = -pad; dx <= pad; ++dx) {
        const int uu = detail::wrap_col(pc.u + dx, image.width);
        const std::size_t at = static_cast<std::size_t>(vv) * image.width + uu;
        if (!image.occupancy[at]) continue;
        const double dr = std::abs(static_cast<double>(image.range[at]) - pc.range);
        const bool better = dr < best_delta ||
                            (dr == best_delta && (vv < best_v || (vv == best_v && uu < best_u)));
        if (better) {
          best_delta = dr;
          best_v = vv;
          best_u = uu;
        }
      }
    }
    if (best_v >= 0) labels[p] = label_plane[static_cast<std::size_t>(best_v) * image.width + best_u];
  }
  return labels;
}

// --- helpers bridging images and score volumes ------------------------------

/// Stacks the range channels of N images into the N*H*W array nnri consumes.
inline std::vector<float> collect_ranges(const std::vector<rview::RangeImage>& images) {
  std::vector<float> out;
  if (images.empty()) return out;
  out.reserve(images.size() * images[0].range.size());
  for (const auto& img : images) out.insert(out.end(), img.range.begin(), img.range.end());
  return out;
}

/// Hard label plane of image n: argmax over classes at occupied pixels,
/// unlabeled sentinel elsewhere. This is what the KNN and NLA baselines vote
/// with when fed network scores.
inline std::vector<std::uint32_t> argmax_plane(const ScoreVolume& volume, int n) {
  const std::size_t plane = static_cast<std::size_t>(volume.height) * volume.width;
  std::vector<std::uint32_t> labels(plane, rview::kUnlabeledPixel);
  for (std::size_t p = 0; p < plane; ++p) {
    if (!volume.occupancy[n * plane + p]) continue;
    std::uint32_t best = 0;
    float best_score = volume.scores[(static_cast<std::size_t>(n) * volume.classes) * plane + p];
    for (int c = 1; c < volume.classes; ++c) {
      const float s = volume.scores[(static_cast<std::size_t>(n) * volume.classes + c) * plane + p];
      if (s > best_score) {
        best_score = s;
        best = static_cast<std::uint32_t>(c);
      }
    }
    labels[p] = best;
  }
  return labels;
}

// --- score volume file -------------------------------------------------------
//
// Binary layout: magic "FLSV", uint32 N, C, H, W; N*C*H*W little-endian
// float32 scores; N*H*W occupancy bytes. Any training framework can export
// this to feed `postprocess`.

inline constexpr char kScoreVolumeMagic[4] = {'F', 'L', 'S', 'V'};

inline void write_score_volume(const ScoreVolume& volume, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("postproc", "cannot open file for writing: " + path);
  out.write(kScoreVolumeMagic, 4);
  const std::uint32_t header[4] = {
      static_cast<std::uint32_t>(volume.subclouds), static_cast<std::uint32_t>(volume.classes),
      static_cast<std::uint32_t>(volume.height), static_cast<std::uint32_t>(volume.width)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(volume.scores.data()),
            static_cast<std::streamsize>(volume.scores.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(volume.occupancy.data()),
            static_cast<std::streamsize>(volume.occupancy.size()));
  if (!out) throw Error("postproc", "write failed: " + path);
}

inline ScoreVolume read_score_volume(const std::string& path) {
  const auto bytes = pcio::detail::read_all(path, "postproc");
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kScoreVolumeMagic, 4) != 0)
    throw Error("postproc", "not a score volume file: " + path);
  std::uint32_t header[4];
  std::memcpy(header, bytes.data() + 4, sizeof(header));
  ScoreVolume volume = ScoreVolume::zeros(static_cast<int>(header[0]), static_cast<int>(header[1]),
                                          static_cast<int>(header[2]), static_cast<int>(header[3]));
  const std::size_t expect =
      20 + volume.scores.size() * sizeof(float) + volume.occupancy.size();
  if (bytes.size() != expect)
    throw Error("postproc", "score volume file truncated or oversized: " + path);
  std::memcpy(volume.scores.data(), bytes.data() + 20, volume.scores.size() * sizeof(float));
  std::memcpy(volume.occupancy.data(), bytes.data() + 20 + volume.scores.size() * sizeof(float),
              volume.occupancy.size());
  volume.validate();
  return volume;
}

}  // namespace flares::postproc
