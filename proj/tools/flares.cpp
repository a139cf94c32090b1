// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: synth, split, project, stats, augment,
// mock-predict, postprocess, eval, bench. Every command is seeded and
// reproducible; frames process in a worker pool sized by --jobs with one
// output file per frame, so scheduling never affects results.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "flares/augment.hpp"
#include "flares/config.hpp"
#include "flares/error.hpp"
#include "flares/metrics.hpp"
#include "flares/pcio.hpp"
#include "flares/postproc.hpp"
#include "flares/random.hpp"
#include "flares/rview.hpp"
#include "flares/synth.hpp"

namespace fs = std::filesystem;
using namespace flares;

namespace {

// --- small helpers -----------------------------------------------------------

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::size_t>(jobs, count));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// A --input argument names either one point file or a directory of them.
std::vector<fs::path> expand_inputs(const std::string& input) {
  const fs::path p(input);
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.is_regular_file() && entry.path().extension() == ".bin")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("cli", "no .bin files under " + input);
    return files;
  }
  if (!fs::exists(p)) throw Error("cli", "input not found: " + input);
  return {p};
}

/// Pairs a cloud file with its label file: explicit path, or directory
/// lookup, or sibling file with the .label extension.
fs::path label_path_for(const fs::path& cloud, const std::string& labels_arg) {
  if (labels_arg.empty()) {
    fs::path sibling = cloud;
    sibling.replace_extension(".label");
    return sibling;
  }
  const fs::path p(labels_arg);
  if (fs::is_directory(p)) {
    fs::path named = p / cloud.filename();
    named.replace_extension(".label");
    return named;
  }
  return p;
}

pcio::PointCloud load_labeled_cloud(const fs::path& cloud_path, const fs::path& labels_path,
                                    const pcio::ClassMap& map) {
  pcio::LoadReport report;
  pcio::PointCloud cloud = pcio::read_point_cloud(cloud_path.string(), &report);
  pcio::LabelReadStats stats;
  const auto labels = pcio::read_labels(labels_path.string(), map, &stats);
  pcio::attach_labels(cloud, labels, report);
  if (stats.unknown_raw > 0)
    std::cerr << "warning: " << stats.unknown_raw << " unknown raw labels in "
              << labels_path.string() << " mapped to the ignore class\n";
  return cloud;
}

// --- configuration resolution --------------------------------------------------

/// Everything a pipeline run needs, resolved from (defaults <- config file <-
/// command-line flags), later wins.
struct PipelineSetup {
  Config file;  // parsed config file (possibly empty)
  std::string sensor_path, classmap_path;
  int height = 64, width = 512, subclouds = 3;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  std::uint64_t seed = 0;

  std::string post = "nnri";
  int kernel = 0;  // 0 = per-method default (3 for nnri/nla, 5 for knn)
  int votes = 5;
  double knn_cutoff = 1.0;
  double sigma = 1.0;
  double alpha = 1.0;
  double r_mean = std::numeric_limits<double>::quiet_NaN();
  double r_std = std::numeric_limits<double>::quiet_NaN();

  double wpd_threshold = 0.1;
  int sample_frames = 6;
  std::string pool_dir;
  bool per_point = false;
  augment::GdaParams gda;
  double noise_rate = 0.0;
  double temperature = 0.1;

  pcio::SensorSpec sensor() const {
    if (!sensor_path.empty()) return pcio::load_sensor_spec(sensor_path);
    return pcio::SensorSpec{};
  }
  pcio::ClassMap classmap() const {
    if (!classmap_path.empty()) return pcio::load_class_map(classmap_path);
    return synth::synth_class_map();
  }
};

std::array<double, 2> parse_range(const std::string& text, const std::array<double, 2>& fallback) {
  if (text.empty()) return fallback;
  const auto parts = split_list(text);
  if (parts.size() != 2) throw Error("cli", "expected 'low, high' range, got '" + text + "'");
  return {std::stod(parts[0]), std::stod(parts[1])};
}

/// Loads the config file (if any) and folds its sections into the defaults.
/// Relative paths inside the file resolve against the file's own directory.
PipelineSetup resolve_setup(const std::string& config_path) {
  PipelineSetup s;
  if (!config_path.empty()) s.file = load_config(config_path);
  const fs::path config_dir = config_path.empty() ? fs::path() : fs::path(config_path).parent_path();
  auto rebase = [&](const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute() || config_dir.empty()) return path;
    return (config_dir / path).string();
  };
  if (const ConfigSection* c = s.file.find("pcio")) {
    s.sensor_path = rebase(c->get("sensor", s.sensor_path));
    s.classmap_path = rebase(c->get("classmap", s.classmap_path));
  }
  if (const ConfigSection* c = s.file.find("rview")) {
    s.height = static_cast<int>(c->get_int("height", s.height));
    s.width = static_cast<int>(c->get_int("width", s.width));
    s.subclouds = static_cast<int>(c->get_int("subclouds", s.subclouds));
  }
  if (const ConfigSection* c = s.file.find("postproc")) {
    s.post = c->get("post", s.post);
    s.kernel = static_cast<int>(c->get_int("kernel", s.kernel));
    s.votes = static_cast<int>(c->get_int("votes", s.votes));
    s.knn_cutoff = c->get_double("cutoff", s.knn_cutoff);
    s.sigma = c->get_double("sigma", s.sigma);
    s.alpha = c->get_double("alpha", s.alpha);
    s.r_mean = c->get_double("r_mean", s.r_mean);
    s.r_std = c->get_double("r_std", s.r_std);
  }
  if (const ConfigSection* c = s.file.find("augment")) {
    s.wpd_threshold = c->get_double("threshold", s.wpd_threshold);
    s.sample_frames = static_cast<int>(c->get_int("sample_frames", s.sample_frames));
    s.pool_dir = rebase(c->get("pool_dir", s.pool_dir));
    s.per_point = c->get_bool("per_point", s.per_point);
    s.gda.probability = c->get_double("probability", s.gda.probability);
    s.gda.flip_x = c->get_bool("flip", s.gda.flip_x);
    s.gda.translate_x = parse_range(c->get("translate_x", ""), s.gda.translate_x);
    s.gda.translate_y = parse_range(c->get("translate_y", ""), s.gda.translate_y);
    s.gda.translate_z = parse_range(c->get("translate_z", ""), s.gda.translate_z);
    s.gda.yaw_deg = parse_range(c->get("yaw_deg", ""), s.gda.yaw_deg);
    s.gda.pitch_deg = parse_range(c->get("pitch_deg", ""), s.gda.pitch_deg);
    s.gda.roll_deg = parse_range(c->get("roll_deg", ""), s.gda.roll_deg);
  }
  if (const ConfigSection* c = s.file.find("synth")) {
    s.noise_rate = c->get_double("noise_rate", s.noise_rate);
    s.temperature = c->get_double("temperature", s.temperature);
  }
  if (const ConfigSection* c = s.file.find("cli")) {
    s.jobs = static_cast<int>(c->get_int("jobs", s.jobs));
    s.seed = static_cast<std::uint64_t>(c->get_int("seed", static_cast<long>(s.seed)));
  }
  return s;
}

int kernel_or_default(const PipelineSetup& s, const std::string& post) {
  if (s.kernel > 0) return s.kernel;
  return post.rfind("knn", 0) == 0 ? 5 : 3;
}

// --- shared pipeline pieces ------------------------------------------------------

struct ProjectedFrame {
  rview::MultiProjection multi;
  std::vector<rview::PointCoord> coords;
};

ProjectedFrame project_frame(const pcio::PointCloud& cloud, const pcio::SensorSpec& spec,
                             int height, int width, int subclouds) {
  ProjectedFrame frame;
  frame.multi = rview::project_multi(cloud, spec, height, width, subclouds);
  frame.coords = rview::unproject_coords(frame.multi.index);
  return frame;
}

std::vector<std::uint32_t> run_postprocessor(const std::string& post,
                                             const postproc::ScoreVolume& volume,
                                             const ProjectedFrame& frame,
                                             const PipelineSetup& setup,
                                             std::uint32_t ignore_id) {
  const auto& images = frame.multi.images;
  if (post == "nnri") {
    postproc::NnriParams params;
    params.kernel = kernel_or_default(setup, post);
    params.alpha = setup.alpha;
    params.r_mean = setup.r_mean;
    params.r_std = setup.r_std;
    return postproc::nnri(volume, postproc::collect_ranges(images), frame.coords, params);
  }
  postproc::KnnParams params;
  params.kernel = kernel_or_default(setup, post);
  params.votes = setup.votes;
  params.cutoff = setup.knn_cutoff;
  params.sigma = setup.sigma;
  params.num_classes = static_cast<std::size_t>(volume.classes);
  params.ignore_id = ignore_id;
  std::vector<std::vector<std::uint32_t>> planes;
  planes.reserve(images.size());
  for (int n = 0; n < volume.subclouds; ++n) planes.push_back(postproc::argmax_plane(volume, n));
  if (post == "knn-multi") return postproc::knn_multi(images, planes, frame.coords, params);

  // single-range methods run per sub-cloud: each point consults only the
  // image its own sub-cloud produced
  std::vector<std::uint32_t> labels(frame.coords.size(), ignore_id);
  for (std::uint32_t s = 0; s < images.size(); ++s) {
    std::vector<rview::PointCoord> subset;
    std::vector<std::size_t> back;
    for (std::size_t i = 0; i < frame.coords.size(); ++i) {
      if (frame.coords[i].subcloud != s) continue;
      auto c = frame.coords[i];
      c.subcloud = 0;
      subset.push_back(c);
      back.push_back(i);
    }
    std::vector<std::uint32_t> sub_labels;
    if (post == "knn") {
      sub_labels = postproc::knn_single(images[s], planes[s], subset, params);
    } else if (post == "nla") {
      sub_labels = postproc::nla(images[s], planes[s], subset, params.kernel, ignore_id);
    } else {
      throw Error("cli", "unknown post-processor '" + post + "'");
    }
    for (std::size_t i = 0; i < back.size(); ++i) labels[back[i]] = sub_labels[i];
  }
  return labels;
}

// --- commands ---------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int frames = 1;
  int beams = 64;
  int azimuth_steps = 512;
  int vehicles = 8, poles = 6, signs = 4, pedestrians = 6;
  double ground_extent = 60.0;
};

void cmd_synth(const PipelineSetup& setup, const SynthArgs& args) {
  fs::create_directories(args.out);
  const pcio::ClassMap map = synth::synth_class_map();
  synth::SceneSpec base;
  base.beams = args.beams;
  base.azimuth_steps = args.azimuth_steps;
  base.vehicles = args.vehicles;
  base.poles = args.poles;
  base.signs = args.signs;
  base.pedestrians = args.pedestrians;
  base.ground_extent = args.ground_extent;
  pcio::save_sensor_spec(base.sensor, (fs::path(args.out) / "sensor.cfg").string());
  pcio::save_class_map(map, (fs::path(args.out) / "classmap.cfg").string());
  parallel_for(static_cast<std::size_t>(args.frames), setup.jobs, [&](std::size_t f) {
    synth::SceneSpec spec = base;
    spec.seed = setup.seed + f;  // per-frame stream, independent of scheduling
    const pcio::PointCloud cloud = synth::generate_scene(spec);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu", f);
    pcio::write_point_cloud(cloud, (fs::path(args.out) / (std::string(name) + ".bin")).string());
    pcio::write_labels(cloud.labels, map,
                       (fs::path(args.out) / (std::string(name) + ".label")).string());
  });
  std::cout << "wrote " << args.frames << " synthetic frames to " << args.out << "\n";
}

void cmd_split(const PipelineSetup& setup, const std::string& input, const std::string& labels,
               const std::string& out, bool with_labels) {
  fs::create_directories(out);
  const auto files = expand_inputs(input);
  const pcio::ClassMap map = setup.classmap();
  parallel_for(files.size(), setup.jobs, [&](std::size_t i) {
    const fs::path& path = files[i];
    pcio::PointCloud cloud;
    if (with_labels) {
      cloud = load_labeled_cloud(path, label_path_for(path, labels), map);
    } else {
      cloud = pcio::read_point_cloud(path.string());
    }
    const auto split = rview::split_cloud(cloud, setup.subclouds);
    for (int s = 0; s < setup.subclouds; ++s) {
      const std::string stem = path.stem().string() + "_sc" + std::to_string(s);
      pcio::write_point_cloud(split.subclouds[s], (fs::path(out) / (stem + ".bin")).string());
      if (with_labels)
        pcio::write_labels(split.subclouds[s].labels, map,
                           (fs::path(out) / (stem + ".label")).string());
    }
  });
  std::cout << "split " << files.size() << " frame(s) into " << setup.subclouds
            << " sub-clouds each under " << out << "\n";
}

void cmd_project(const PipelineSetup& setup, const std::string& input, const std::string& labels,
                 const std::string& out, bool with_labels, bool clean, bool apply_mcf) {
  fs::create_directories(out);
  const auto files = expand_inputs(input);
  const pcio::SensorSpec spec = setup.sensor();
  const pcio::ClassMap map = setup.classmap();
  parallel_for(files.size(), setup.jobs, [&](std::size_t i) {
    const fs::path& path = files[i];
    pcio::PointCloud cloud = with_labels
                                 ? load_labeled_cloud(path, label_path_for(path, labels), map)
                                 : pcio::read_point_cloud(path.string());
    auto multi = rview::project_multi(cloud, spec, setup.height, setup.width, setup.subclouds);
    if (clean) {
      for (auto& img : multi.images) img = augment::clean_unlabeled(img, map.ignore_id);
    }
    if (apply_mcf) multi.images = augment::mcf_all(multi.images);
    for (std::size_t s = 0; s < multi.images.size(); ++s) {
      const std::string stem = path.stem().string() + "_sc" + std::to_string(s) + ".rimg";
      rview::write_range_image(multi.images[s], (fs::path(out) / stem).string());
    }
  });
  std::cout << "projected " << files.size() << " frame(s) at " << setup.height << "x"
            << setup.width << " with N=" << setup.subclouds << " into " << out << "\n";
}

void cmd_stats(const PipelineSetup& setup, const std::string& input,
               const std::vector<int>& heights, const std::vector<int>& widths,
               const std::vector<int>& subcloud_counts, const std::string& csv_path) {
  const auto files = expand_inputs(input);
  const pcio::SensorSpec spec = setup.sensor();
  struct Row {
    int h, w, n;
    rview::ValidityReport report;
  };
  std::vector<std::tuple<int, int, int>> grid;
  for (const int h : heights)
    for (const int w : widths)
      for (const int n : subcloud_counts) grid.emplace_back(h, w, n);

  std::ostringstream csv;
  csv << "file,height,width,subclouds,total_points,projected_points,validity,occupancy_2d\n";
  for (const auto& path : files) {
    const pcio::PointCloud cloud = pcio::read_point_cloud(path.string());
    std::vector<Row> rows(grid.size());
    parallel_for(grid.size(), setup.jobs, [&](std::size_t g) {
      const auto [h, w, n] = grid[g];
      const auto multi = rview::project_multi(cloud, spec, h, w, n);
      rows[g] = {h, w, n, rview::validity_stats(multi.index, multi.images)};
    });
    for (const auto& row : rows) {
      csv << path.filename().string() << "," << row.h << "," << row.w << "," << row.n << ","
          << row.report.total_points << "," << row.report.projected_points << ","
          << fmt_double(row.report.validity) << "," << fmt_double(row.report.occupancy_2d)
          << "\n";
    }
  }
  if (csv_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(csv_path, std::ios::trunc);
    out << csv.str();
    std::cout << "wrote validity grid to " << csv_path << "\n";
  }
}

void cmd_augment(const PipelineSetup& setup, const std::string& input, const std::string& labels,
                 const std::string& out, const std::string& pool_arg) {
  fs::create_directories(out);
  const auto files = expand_inputs(input);
  const pcio::ClassMap map = setup.classmap();

  augment::WpdConfig wpd;
  wpd.weights = augment::default_weights(map);
  wpd.threshold = setup.wpd_threshold;
  wpd.sample_frames = setup.sample_frames;
  wpd.per_point = setup.per_point;
  wpd.ignore_id = map.ignore_id;
  const std::string pool_dir = pool_arg.empty() ? setup.pool_dir : pool_arg;
  if (!pool_dir.empty()) {
    for (const auto& frame_path : expand_inputs(pool_dir))
      wpd.paste_pool.push_back(
          load_labeled_cloud(frame_path, label_path_for(frame_path, ""), map));
  }

  parallel_for(files.size(), setup.jobs, [&](std::size_t i) {
    const fs::path& path = files[i];
    const pcio::PointCloud cloud = load_labeled_cloud(path, label_path_for(path, labels), map);
    Rng rng = Rng(setup.seed).fork(i);
    // fixed augmentation order: paste-drop in 3D first, then the global
    // geometric transform
    pcio::PointCloud augmented = augment::wpd_plus(cloud, wpd, rng);
    augmented = augment::geometric_augment(augmented, setup.gda, rng);
    const std::string stem = path.stem().string() + "_aug";
    pcio::write_point_cloud(augmented, (fs::path(out) / (stem + ".bin")).string());
    pcio::write_labels(augmented.labels, map, (fs::path(out) / (stem + ".label")).string());
  });
  std::cout << "augmented " << files.size() << " frame(s) into " << out << "\n";
}

void cmd_mock_predict(const PipelineSetup& setup, const std::string& input,
                      const std::string& labels, const std::string& out) {
  const auto files = expand_inputs(input);
  const pcio::SensorSpec spec = setup.sensor();
  const pcio::ClassMap map = setup.classmap();
  const bool out_is_dir = files.size() > 1 || fs::is_directory(out);
  if (out_is_dir) fs::create_directories(out);
  parallel_for(files.size(), setup.jobs, [&](std::size_t i) {
    const fs::path& path = files[i];
    const pcio::PointCloud cloud = load_labeled_cloud(path, label_path_for(path, labels), map);
    const auto multi =
        rview::project_multi(cloud, spec, setup.height, setup.width, setup.subclouds);
    synth::MockPredictorConfig cfg;
    cfg.noise_rate = setup.noise_rate;
    cfg.temperature = setup.temperature;
    cfg.seed = setup.seed + i;
    const auto volume = synth::mock_predict_volume(
        multi.images, static_cast<int>(map.num_classes()), cfg, map.ignore_id);
    const fs::path target =
        out_is_dir ? fs::path(out) / (path.stem().string() + ".fsv") : fs::path(out);
    postproc::write_score_volume(volume, target.string());
  });
  std::cout << "wrote mock score volumes for " << files.size() << " frame(s)\n";
}

void cmd_postprocess(const PipelineSetup& setup, const std::string& scores_arg,
                     const std::string& input, const std::string& out,
                     int expect_height, int expect_width, int expect_subclouds) {
  const auto files = expand_inputs(input);
  const pcio::SensorSpec spec = setup.sensor();
  const pcio::ClassMap map = setup.classmap();
  const bool out_is_dir = files.size() > 1 || fs::is_directory(out);
  if (out_is_dir) fs::create_directories(out);
  parallel_for(files.size(), setup.jobs, [&](std::size_t i) {
    const fs::path& path = files[i];
    fs::path score_path(scores_arg);
    if (fs::is_directory(score_path)) score_path /= path.stem().string() + ".fsv";
    const postproc::ScoreVolume volume = postproc::read_score_volume(score_path.string());
    // the score file header is authoritative; explicit flags must agree
    if ((expect_height > 0 && expect_height != volume.height) ||
        (expect_width > 0 && expect_width != volume.width) ||
        (expect_subclouds > 0 && expect_subclouds != volume.subclouds))
      throw Error("cli", "score volume " + score_path.string() + " is " +
                             std::to_string(volume.subclouds) + "x" +
                             std::to_string(volume.height) + "x" + std::to_string(volume.width) +
                             ", which disagrees with the requested geometry");
    const pcio::PointCloud cloud = pcio::read_point_cloud(path.string());
    const ProjectedFrame frame =
        project_frame(cloud, spec, volume.height, volume.width, volume.subclouds);
    // the volume must describe this very projection
    const std::size_t plane = static_cast<std::size_t>(volume.height) * volume.width;
    for (std::size_t n = 0; n < frame.multi.images.size(); ++n) {
      for (std::size_t p = 0; p < plane; ++p) {
        if (frame.multi.images[n].occupancy[p] != volume.occupancy[n * plane + p])
          throw Error("cli", "score volume occupancy disagrees with the projection of " +
                                 path.string() + " (wrong cloud, sensor, or resolution?)");
      }
    }
    const auto labels = run_postprocessor(setup.post, volume, frame, setup, map.ignore_id);
    const fs::path target =
        out_is_dir ? fs::path(out) / (path.stem().string() + ".label") : fs::path(out);
    pcio::write_labels(labels, map, target.string());
  });
  std::cout << "post-processed " << files.size() << " frame(s) with " << setup.post << "\n";
}

void cmd_eval(const PipelineSetup& setup, const std::string& pred_arg, const std::string& gt_arg,
              const std::string& csv_path) {
  const pcio::ClassMap map = setup.classmap();
  const std::size_t classes = map.num_classes();

  std::vector<std::pair<fs::path, fs::path>> pairs;
  if (fs::is_directory(pred_arg)) {
    std::vector<fs::path> preds;
    for (const auto& entry : fs::directory_iterator(pred_arg))
      if (entry.is_regular_file() && entry.path().extension() == ".label")
        preds.push_back(entry.path());
    std::sort(preds.begin(), preds.end());
    if (preds.empty()) throw Error("cli", "no .label files under " + pred_arg);
    for (const auto& p : preds) {
      fs::path gt = fs::path(gt_arg) / p.filename();
      pairs.emplace_back(p, gt);
    }
  } else {
    pairs.emplace_back(pred_arg, gt_arg);
  }

  std::vector<metrics::ConfusionMatrix> per_frame(pairs.size());
  parallel_for(pairs.size(), setup.jobs, [&](std::size_t i) {
    const auto pred = pcio::read_labels(pairs[i].first.string(), map);
    const auto gt = pcio::read_labels(pairs[i].second.string(), map);
    per_frame[i] = metrics::confusion(pred, gt, classes, map.ignore_id);
  });
  metrics::ConfusionMatrix total(classes, map.ignore_id);
  for (const auto& m : per_frame) total += m;  // deterministic frame order
  const metrics::SegScores s = metrics::scores(total);

  std::ostringstream csv;
  csv << "class,name,iou,acc\n";
  std::printf("%-14s %8s %8s\n", "class", "IoU", "Acc");
  for (std::size_t c = 0; c < classes; ++c) {
    if (c == map.ignore_id) continue;
    const auto& sc = s.per_class[c];
    if (sc.in_miou)
      std::printf("%-14s %8.4f %8.4f\n", map.class_names[c].c_str(), sc.iou,
                  sc.in_macc ? sc.acc : 0.0);
    else
      std::printf("%-14s %8s %8s\n", map.class_names[c].c_str(), "-", "-");
    csv << c << "," << map.class_names[c] << "," << (sc.in_miou ? fmt_double(sc.iou) : "") << ","
        << (sc.in_macc ? fmt_double(sc.acc) : "") << "\n";
  }
  std::printf("%-14s %8.4f %8.4f\n", "mean", s.miou, s.macc);
  std::printf("overall acc    %8.4f over %llu points\n", s.overall_acc,
              static_cast<unsigned long long>(total.total()));
  csv << "mean,," << fmt_double(s.miou) << "," << fmt_double(s.macc) << "\n";
  csv << "overall,," << fmt_double(s.overall_acc) << ",\n";
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::trunc);
    out << csv.str();
  }
}

void cmd_bench(const PipelineSetup& setup, const std::string& input,
               const std::vector<std::string>& posts, int warmup, int iters,
               const std::string& csv_path) {
  const pcio::SensorSpec spec = setup.sensor();
  pcio::PointCloud cloud;
  std::function<void()> load_stage;
  if (input.empty()) {
    synth::SceneSpec scene_spec;
    scene_spec.seed = setup.seed;
    scene_spec.beams = 64;
    scene_spec.azimuth_steps = 1536;  // a full-frame point count
    cloud = synth::generate_scene(scene_spec);
    load_stage = [scene_spec] { (void)synth::generate_scene(scene_spec); };
  } else {
    const auto files = expand_inputs(input);
    cloud = pcio::read_point_cloud(files[0].string());
    const std::string path = files[0].string();
    load_stage = [path] { (void)pcio::read_point_cloud(path); };
  }

  const pcio::ClassMap map = setup.classmap();
  const ProjectedFrame frame =
      project_frame(cloud, spec, setup.height, setup.width, setup.subclouds);
  // label planes for the mock network: project the ground truth when present,
  // otherwise synthesize pseudo-labels from ranges so the kernels have input
  const int classes = static_cast<int>(map.num_classes());
  std::vector<rview::RangeImage> labeled = frame.multi.images;
  if (!cloud.has_labels()) {
    for (auto& img : labeled) {
      img.labels.assign(img.occupancy.size(), rview::kUnlabeledPixel);
      for (std::size_t p = 0; p < img.occupancy.size(); ++p)
        if (img.occupancy[p])
          img.labels[p] = 1 + static_cast<std::uint32_t>(img.range[p]) %
                                  static_cast<std::uint32_t>(classes - 1);
    }
  }
  synth::MockPredictorConfig mock_cfg;
  mock_cfg.noise_rate = 0.1;
  mock_cfg.seed = setup.seed;
  const auto volume = synth::mock_predict_volume(labeled, classes, mock_cfg, map.ignore_id);

  std::vector<metrics::BenchStage> stages;
  stages.push_back({"load", load_stage});
  stages.push_back({"project", [&cloud, &spec, &setup] {
                      (void)rview::project_multi(cloud, spec, setup.height, setup.width,
                                                 setup.subclouds);
                    }});
  for (const std::string& post : posts) {
    stages.push_back({"post:" + post, [&, post] {
                        (void)run_postprocessor(post, volume, frame, setup, map.ignore_id);
                      }});
  }
  const int kernel = kernel_or_default(setup, posts.empty() ? "nnri" : posts[0]);
  const auto report = metrics::bench(stages, warmup, iters,
                                     {{"subclouds", std::to_string(setup.subclouds)},
                                      {"height", std::to_string(setup.height)},
                                      {"width", std::to_string(setup.width)},
                                      {"kernel", std::to_string(kernel)},
                                      {"points", std::to_string(cloud.size())}});

  std::ostringstream csv;
  csv << "stage,mean_ms,min_ms,max_ms";
  for (const auto& [key, value] : report.config) csv << "," << key;
  csv << "\n";
  for (const auto& stage : report.stages) {
    csv << stage.name << "," << fmt_double(stage.mean_ms) << "," << fmt_double(stage.min_ms)
        << "," << fmt_double(stage.max_ms);
    for (const auto& [key, value] : report.config) csv << "," << value;
    csv << "\n";
    std::printf("%-16s mean %9.3f ms   min %9.3f   max %9.3f\n", stage.name.c_str(),
                stage.mean_ms, stage.min_ms, stage.max_ms);
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::trunc);
    out << csv.str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FLARES range-view LiDAR toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "pipeline config file")
      ->envname("FLARES_CONFIG")
      ->check(CLI::ExistingFile);

  // flag holders; applied over the config after parsing
  std::string input, labels, out, pool, scores, pred, gt, csv, post;
  std::string sensor_path, classmap_path;
  int height = -1, width = -1, subclouds = -1, jobs = -1, kernel = -1, votes = -1;
  long seed = -1;
  double alpha = std::nan(""), knn_cutoff = std::nan(""), sigma = std::nan("");
  double r_mean = std::nan(""), r_std = std::nan("");
  double noise = std::nan(""), temperature = std::nan("");
  bool with_labels = false, clean = false, apply_mcf = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--sensor", sensor_path, "sensor spec file");
    cmd->add_option("--classmap", classmap_path, "class map file");
    cmd->add_option("--jobs", jobs, "worker pool size (default: machine parallelism)");
    cmd->add_option("--seed", seed, "random seed");
  };
  auto add_resolution = [&](CLI::App* cmd) {
    cmd->add_option("--height", height, "range image height H");
    cmd->add_option("--width", width, "range image width W");
    cmd->add_option("--subclouds", subclouds, "partition count N");
  };

  SynthArgs synth_args;
  CLI::App* c_synth = app.add_subcommand("synth", "generate labeled synthetic frames");
  c_synth->add_option("--out", synth_args.out, "output directory")->required();
  c_synth->add_option("--frames", synth_args.frames, "number of frames");
  c_synth->add_option("--beams", synth_args.beams, "ray grid rows");
  c_synth->add_option("--azimuth-steps", synth_args.azimuth_steps, "ray grid columns");
  c_synth->add_option("--vehicles", synth_args.vehicles);
  c_synth->add_option("--poles", synth_args.poles);
  c_synth->add_option("--signs", synth_args.signs);
  c_synth->add_option("--pedestrians", synth_args.pedestrians);
  c_synth->add_option("--ground-extent", synth_args.ground_extent);
  add_common(c_synth);

  CLI::App* c_split = app.add_subcommand("split", "split sweeps into modulo sub-clouds");
  c_split->add_option("--input", input, "point file or directory")->required();
  c_split->add_option("--labels", labels, "label file or directory");
  c_split->add_option("--out", out, "output directory")->required();
  c_split->add_flag("--with-labels", with_labels, "also split label files");
  add_common(c_split);
  add_resolution(c_split);

  CLI::App* c_project = app.add_subcommand("project", "project sweeps to range image dumps");
  c_project->add_option("--input", input)->required();
  c_project->add_option("--labels", labels);
  c_project->add_option("--out", out)->required();
  c_project->add_flag("--with-labels", with_labels, "attach labels to the projection");
  c_project->add_flag("--clean", clean, "drop ignore-labeled pixels after projection");
  c_project->add_flag("--mcf", apply_mcf, "fill empty pixels from sibling sub-clouds");
  add_common(c_project);
  add_resolution(c_project);

  std::vector<int> stat_heights{32, 64}, stat_widths{512, 1024, 2048}, stat_subclouds{1};
  CLI::App* c_stats = app.add_subcommand("stats", "validity / occupancy grid");
  c_stats->add_option("--input", input)->required();
  c_stats->add_option("--height", stat_heights, "heights to sweep")->delimiter(',');
  c_stats->add_option("--width", stat_widths, "widths to sweep")->delimiter(',');
  c_stats->add_option("--subclouds", stat_subclouds, "partition counts to sweep")->delimiter(',');
  c_stats->add_option("--csv", csv, "write the grid as CSV");
  add_common(c_stats);

  CLI::App* c_augment = app.add_subcommand("augment", "WPD+ then geometric augmentation");
  c_augment->add_option("--input", input)->required();
  c_augment->add_option("--labels", labels);
  c_augment->add_option("--out", out)->required();
  c_augment->add_option("--pool", pool, "directory of labeled paste-pool frames");
  add_common(c_augment);

  CLI::App* c_mock = app.add_subcommand("mock-predict", "ground truth -> noisy score volume");
  c_mock->add_option("--input", input)->required();
  c_mock->add_option("--labels", labels);
  c_mock->add_option("--out", out, "output .fsv file (or directory)")->required();
  c_mock->add_option("--noise", noise, "label corruption probability");
  c_mock->add_option("--temperature", temperature, "distribution softness");
  add_common(c_mock);
  add_resolution(c_mock);

  CLI::App* c_post = app.add_subcommand("postprocess", "2D scores -> per-point labels");
  c_post->add_option("--scores", scores, "score volume .fsv file (or directory)")->required();
  c_post->add_option("--input", input, "companion point file or directory")->required();
  c_post->add_option("--out", out, "output .label file (or directory)")->required();
  c_post->add_option("--post", post, "nnri | knn | knn-multi | nla")
      ->check(CLI::IsMember({"nnri", "knn", "knn-multi", "nla"}));
  c_post->add_option("--kernel", kernel, "window size k");
  c_post->add_option("--votes", votes, "KNN vote count K");
  c_post->add_option("--cutoff", knn_cutoff, "KNN constant range gate, meters");
  c_post->add_option("--sigma", sigma, "KNN Gaussian width (0 = unit votes)");
  c_post->add_option("--alpha", alpha, "NNRI cut-off factor");
  c_post->add_option("--r-mean", r_mean, "NNRI range normalization mean");
  c_post->add_option("--r-std", r_std, "NNRI range normalization stddev");
  add_common(c_post);
  add_resolution(c_post);  // validated against the score file header

  CLI::App* c_eval = app.add_subcommand("eval", "confusion metrics between label files");
  c_eval->add_option("--pred", pred, "predicted labels file or directory")->required();
  c_eval->add_option("--gt", gt, "ground truth labels file or directory")->required();
  c_eval->add_option("--csv", csv, "write per-class scores as CSV");
  add_common(c_eval);

  std::vector<std::string> bench_posts{"nnri", "knn-multi"};
  int warmup = 100, iters = 100;
  CLI::App* c_bench = app.add_subcommand("bench", "latency protocol (warmup + measured)");
  c_bench->add_option("--input", input, "point file (default: synthetic frame)");
  c_bench->add_option("--post", bench_posts, "post-processors to time")->delimiter(',');
  c_bench->add_option("--warmup", warmup, "discarded iterations");
  c_bench->add_option("--iters", iters, "measured iterations");
  c_bench->add_option("--kernel", kernel, "window size k");
  c_bench->add_option("--csv", csv, "write timings as CSV");
  add_common(c_bench);
  add_resolution(c_bench);

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineSetup setup = resolve_setup(config_path);
    if (!sensor_path.empty()) setup.sensor_path = sensor_path;
    if (!classmap_path.empty()) setup.classmap_path = classmap_path;
    if (height > 0) setup.height = height;
    if (width > 0) setup.width = width;
    if (subclouds > 0) setup.subclouds = subclouds;
    if (jobs > 0) setup.jobs = jobs;
    if (seed >= 0) setup.seed = static_cast<std::uint64_t>(seed);
    if (!post.empty()) setup.post = post;
    if (kernel > 0) setup.kernel = kernel;
    if (votes > 0) setup.votes = votes;
    if (!std::isnan(alpha)) setup.alpha = alpha;
    if (!std::isnan(knn_cutoff)) setup.knn_cutoff = knn_cutoff;
    if (!std::isnan(sigma)) setup.sigma = sigma;
    if (!std::isnan(r_mean)) setup.r_mean = r_mean;
    if (!std::isnan(r_std)) setup.r_std = r_std;
    if (!std::isnan(noise)) setup.noise_rate = noise;
    if (!std::isnan(temperature)) setup.temperature = temperature;

    if (c_synth->parsed()) {
      cmd_synth(setup, synth_args);
    } else if (c_split->parsed()) {
      cmd_split(setup, input, labels, out, with_labels);
    } else if (c_project->parsed()) {
      cmd_project(setup, input, labels, out, with_labels || clean, clean, apply_mcf);
    } else if (c_stats->parsed()) {
      cmd_stats(setup, input, stat_heights, stat_widths, stat_subclouds, csv);
    } else if (c_augment->parsed()) {
      cmd_augment(setup, input, labels, out, pool);
    } else if (c_mock->parsed()) {
      cmd_mock_predict(setup, input, labels, out);
    } else if (c_post->parsed()) {
      cmd_postprocess(setup, scores, input, out, height, width, subclouds);
    } else if (c_eval->parsed()) {
      cmd_eval(setup, pred, gt, csv);
    } else if (c_bench->parsed()) {
      cmd_bench(setup, input, bench_posts, warmup, iters, csv);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: [cli] " << e.what() << "\n";
    return 1;
  }
  return 0;
}
