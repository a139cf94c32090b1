// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#include "flares/synth.hpp"

#include <gtest/gtest.h>

#include "flares/augment.hpp"
#include "flares/postproc.hpp"
#include "flares/random.hpp"
#include "flares/rview.hpp"

using namespace flares;

namespace {

synth::SceneSpec empty_scene_spec() {
  synth::SceneSpec spec;
  spec.vehicles = spec.poles = spec.signs = spec.pedestrians = 0;
  spec.beams = 16;
  spec.azimuth_steps = 64;
  return spec;
}

}  // namespace

TEST(Synth, EmptySceneHitsOnlyGround) {
  auto spec = empty_scene_spec();
  spec.ground_extent = 2000.0;        // effectively infinite
  spec.sensor.range_max = 1000.0;     // no far clipping
  const pcio::PointCloud cloud = synth::generate_scene(spec);
  ASSERT_GT(cloud.size(), 0u);
  // every downward-tilted beam hits the plane; count them analytically
  std::size_t expected = 0;
  for (int v = 0; v < spec.beams; ++v) {
    const double el = synth::beam_elevation(spec.sensor, spec.beams, v);
    if (el >= 0.0) continue;
    const double dist = spec.sensor_height / std::sin(-el);
    if (dist >= spec.sensor.range_min && dist <= spec.sensor.range_max)
      expected += spec.azimuth_steps;
  }
  EXPECT_EQ(cloud.size(), expected);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(cloud.labels[i], spec.classes.ground);
    EXPECT_NEAR(cloud.zs[i], -spec.sensor_height, 1e-5);
  }
}

TEST(Synth, BoxReturnsAnalyticFrontFaceDistance) {
  synth::Scene scene;
  scene.ground_z = -1.8;
  scene.ground_extent = 50.0;
  scene.ground_label = 1;
  scene.boxes.push_back({{9.0, -2.0, -1.8}, {11.0, 2.0, 1.2}, 2});
  int checked = 0;
  for (double el = -0.10; el <= 0.10; el += 0.013) {
    for (double az = -0.20; az <= 0.20; az += 0.017) {
      const Eigen::Vector3d dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                                std::sin(el));
      const double t_front = 9.0 / (std::cos(el) * std::cos(az));
      const double y = t_front * dir.y(), z = t_front * dir.z();
      if (std::abs(y) > 1.95 || z < -1.75 || z > 1.15) continue;  // stay inside the face
      const auto hit = synth::cast_ray(scene, dir, 2.0, 50.0);
      ASSERT_TRUE(hit.has_value());
      EXPECT_EQ(hit->label, 2u);
      EXPECT_NEAR(hit->t, t_front, 1e-6);
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Synth, CylinderReturnsAnalyticDistance) {
  synth::Scene scene;
  scene.ground_z = -1.8;
  scene.ground_extent = 50.0;
  scene.ground_label = 1;
  scene.cylinders.push_back({10.0, 0.0, -1.8, 3.0, 0.5, 3});
  // horizontal ray straight at the axis: hits the near surface at 10 - 0.5
  const auto hit = synth::cast_ray(scene, {1.0, 0.0, 0.0}, 2.0, 50.0);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->label, 3u);
  EXPECT_NEAR(hit->t, 9.5, 1e-9);
}

TEST(Synth, SameSeedBitIdentical) {
  synth::SceneSpec spec;
  spec.seed = 17;
  spec.beams = 24;
  spec.azimuth_steps = 96;
  const pcio::PointCloud a = synth::generate_scene(spec);
  const pcio::PointCloud b = synth::generate_scene(spec);
  EXPECT_EQ(a.xs, b.xs);
  EXPECT_EQ(a.ys, b.ys);
  EXPECT_EQ(a.zs, b.zs);
  EXPECT_EQ(a.labels, b.labels);
  spec.seed = 18;
  const pcio::PointCloud c = synth::generate_scene(spec);
  EXPECT_NE(a.xs, c.xs);
}

TEST(Synth, RayGridProjectsWithValidityOne) {
  synth::SceneSpec spec;
  spec.seed = 4;
  spec.beams = 32;
  spec.azimuth_steps = 128;
  const pcio::PointCloud cloud = synth::generate_scene(spec);
  ASSERT_GT(cloud.size(), 0u);
  const auto res = rview::project(cloud, spec.sensor, spec.beams, spec.azimuth_steps);
  const auto report =
      rview::validity_stats(res.index, std::vector<rview::RangeImage>{res.image});
  EXPECT_DOUBLE_EQ(report.validity, 1.0);  // one ray per pixel, zero collisions
}

TEST(Synth, PointsLieOnPrimitiveSurfaces) {
  synth::SceneSpec spec;
  spec.seed = 9;
  spec.beams = 32;
  spec.azimuth_steps = 128;
  const pcio::PointCloud cloud = synth::generate_scene(spec);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double r = cloud.range(i);
    EXPECT_GE(r, spec.sensor.range_min - 1e-5);
    EXPECT_LE(r, spec.sensor.range_max + 1e-5);
    if (cloud.labels[i] == spec.classes.ground) {
      EXPECT_NEAR(cloud.zs[i], -spec.sensor_height, 1e-5);
    }
  }
}

TEST(Synth, ClassMapIsLongTailedUnderDefaultThreshold) {
  const pcio::ClassMap map = synth::synth_class_map();
  map.validate();
  const auto weights = augment::default_weights(map);
  augment::WpdConfig cfg;
  cfg.weights = weights;
  cfg.ignore_id = map.ignore_id;
  const synth::SynthClasses cls;
  EXPECT_TRUE(cfg.is_drop_class(cls.ground));
  EXPECT_TRUE(cfg.is_drop_class(cls.vehicle));
  EXPECT_TRUE(cfg.is_paste_class(cls.pole));
  EXPECT_TRUE(cfg.is_paste_class(cls.sign));
  EXPECT_TRUE(cfg.is_paste_class(cls.pedestrian));
  EXPECT_DOUBLE_EQ(weights[cls.sign], 1.0);  // rarest class
}

TEST(MockPredict, NoiseFreeLowTemperatureIsOneHot) {
  const std::vector<std::uint32_t> plane{2, 0};
  const std::vector<std::uint8_t> occ{1, 0};
  synth::MockPredictorConfig cfg;
  cfg.noise_rate = 0.0;
  cfg.temperature = 0.005;  // exp(-200) underflows float: exact one-hot
  const auto slice = synth::mock_predict(plane, occ, 1, 2, 3, cfg);
  EXPECT_FLOAT_EQ(slice.scores[2 * 2 + 0], 1.0f);  // class 2, pixel 0
  EXPECT_FLOAT_EQ(slice.scores[0 * 2 + 0], 0.0f);
  EXPECT_FLOAT_EQ(slice.scores[1 * 2 + 0], 0.0f);
  for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(slice.scores[c * 2 + 1], 0.0f);  // unoccupied
  EXPECT_EQ(slice.labels[0], 2u);
}

TEST(MockPredict, FullNoiseWithTwoClassesFlipsEveryPixel) {
  const int h = 4, w = 8;
  std::vector<std::uint32_t> plane(h * w);
  std::vector<std::uint8_t> occ(h * w, 1);
  Rng rng(5);
  for (auto& l : plane) l = static_cast<std::uint32_t>(rng.index(2));
  synth::MockPredictorConfig cfg;
  cfg.noise_rate = 1.0;
  const auto slice = synth::mock_predict(plane, occ, h, w, 2, cfg);
  for (std::size_t p = 0; p < plane.size(); ++p) EXPECT_EQ(slice.labels[p], 1u - plane[p]);
}

TEST(MockPredict, ArgmaxEqualsCorruptedPlane) {
  const int h = 8, w = 16;
  std::vector<std::uint32_t> plane(h * w);
  std::vector<std::uint8_t> occ(h * w);
  Rng rng(6);
  for (std::size_t p = 0; p < plane.size(); ++p) {
    occ[p] = rng.bernoulli(0.7);
    plane[p] = static_cast<std::uint32_t>(1 + rng.index(4));
  }
  synth::MockPredictorConfig cfg;
  cfg.noise_rate = 0.3;
  cfg.temperature = 0.7;
  cfg.seed = 11;
  const auto slice = synth::mock_predict(plane, occ, h, w, 5, cfg, /*ignore_id=*/0);
  for (std::size_t p = 0; p < plane.size(); ++p) {
    if (!occ[p]) continue;
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < 5; ++c)
      if (slice.scores[c * plane.size() + p] > slice.scores[best * plane.size() + p]) best = c;
    EXPECT_EQ(best, slice.labels[p]);
    EXPECT_NE(slice.labels[p], 0u) << "corruption must avoid the ignore class";
  }
}

TEST(MockPredict, CorruptionRateWithinBinomialBounds) {
  const int h = 100, w = 100;  // 10000 pixels
  std::vector<std::uint32_t> plane(h * w, 3);
  std::vector<std::uint8_t> occ(h * w, 1);
  synth::MockPredictorConfig cfg;
  cfg.noise_rate = 0.1;
  cfg.seed = 29;
  const auto slice = synth::mock_predict(plane, occ, h, w, 6, cfg);
  std::size_t corrupted = 0;
  for (std::size_t p = 0; p < plane.size(); ++p)
    if (slice.labels[p] != 3u) ++corrupted;
  const double fraction = static_cast<double>(corrupted) / plane.size();
  EXPECT_GE(fraction, 0.08);  // 99% binomial band around 0.1 at n = 10000
  EXPECT_LE(fraction, 0.12);
}

TEST(MockPredict, VolumeSatisfiesScoreInvariants) {
  synth::SceneSpec spec;
  spec.seed = 13;
  spec.beams = 32;
  spec.azimuth_steps = 128;
  const pcio::PointCloud cloud = synth::generate_scene(spec);
  const auto multi = rview::project_multi(cloud, spec.sensor, 32, 128, 2);
  synth::MockPredictorConfig cfg;
  cfg.noise_rate = 0.05;
  cfg.temperature = 0.5;
  const auto volume = synth::mock_predict_volume(multi.images, 6, cfg, 0);
  EXPECT_NO_THROW(volume.validate());
  EXPECT_EQ(volume.subclouds, 2);
  EXPECT_EQ(volume.classes, 6);
}

TEST(MockPredict, RejectsBadConfig) {
  synth::MockPredictorConfig cfg;
  cfg.noise_rate = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.noise_rate = 0.5;
  cfg.temperature = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}
