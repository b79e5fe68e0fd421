// wpd: command-line front end for weighted Poisson-disk resampling.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wpd/cloud.hpp"
#include "wpd/error.hpp"
#include "wpd/feature.hpp"
#include "wpd/io.hpp"
#include "wpd/metrics.hpp"
#include "wpd/pipeline.hpp"
#include "wpd/poisson.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitNonConvergence = 4;

using wpd::ErrorKind;
using Json = nlohmann::ordered_json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print(const Json& j) { std::cout << j.dump(2) << '\n'; }

// "labels:<path>", "labels", "detect", "detect:<k>,<tau>", "off"
void parse_sharp(const std::string& spec, wpd::ResampleConfig& config) {
  if (spec.empty() || spec == "off") {
    config.sharp = wpd::SharpMode::Off;
  } else if (spec == "labels") {
    config.sharp = wpd::SharpMode::Labels;
  } else if (spec.rfind("labels:", 0) == 0) {
    config.sharp = wpd::SharpMode::Labels;
    config.labels_path = spec.substr(7);
    if (config.labels_path.empty()) wpd::fail("--sharp labels: needs a path");
  } else if (spec == "detect") {
    config.sharp = wpd::SharpMode::Detector;
  } else if (spec.rfind("detect:", 0) == 0) {
    config.sharp = wpd::SharpMode::Detector;
    const auto args = spec.substr(7);
    const auto comma = args.find(',');
    if (comma == std::string::npos) wpd::fail("--sharp detect:<k>,<tau> needs both values");
    try {
      std::size_t used = 0;
      const auto k_str = args.substr(0, comma);
      const auto tau_str = args.substr(comma + 1);
      const long k = std::stol(k_str, &used);
      if (used != k_str.size() || k < 1) throw std::invalid_argument("k");
      config.detector_k = static_cast<std::size_t>(k);
      config.detector_tau = std::stod(tau_str, &used);
      if (used != tau_str.size()) throw std::invalid_argument("tau");
    } catch (const std::logic_error&) {
      wpd::fail("bad --sharp value '" + spec + "'");
    }
  } else {
    wpd::fail("bad --sharp value '" + spec + "' (expected off, labels[:<path>] or detect[:<k>,<tau>])");
  }
}

int run_resample(const std::string& in, const std::string& out, wpd::ResampleConfig config,
                 const std::string& sharp, const std::string& mu, const std::string& displacement,
                 bool ascii) {
  parse_sharp(sharp, config);
  if (displacement == "centroid") {
    config.displacement = wpd::Displacement::CellCentroid;
  } else if (displacement == "cotangent") {
    config.displacement = wpd::Displacement::RingAverage;
  } else {
    wpd::fail("--displacement must be 'centroid' or 'cotangent'");
  }
  if (mu == "relative") {
    config.mu_mode = wpd::MuMode::Relative;
  } else if (mu == "absolute") {
    config.mu_mode = wpd::MuMode::Absolute;
  } else {
    wpd::fail("--mu must be 'relative' or 'absolute'");
  }
  config.validate();
  auto format = wpd::format_for(out);
  if (ascii) {
    if (format != wpd::CloudFormat::PlyBinary) wpd::fail("--ascii applies to .ply output only");
    format = wpd::CloudFormat::PlyAscii;
  }

  auto t0 = std::chrono::steady_clock::now();
  const auto input = wpd::read_cloud(in);
  const double read_time = seconds_since(t0);

  try {
    auto result = wpd::resample(input, config);
    result.report.times.read = read_time;
    t0 = std::chrono::steady_clock::now();
    wpd::write_cloud(result.cloud, out, format);
    result.report.times.write = seconds_since(t0);
    print(wpd::to_json(result.report));
    return 0;
  } catch (const wpd::ResampleError& e) {
    auto partial = e.partial();
    partial.report.times.read = read_time;
    const std::string partial_path = out + ".partial";
    if (!partial.cloud.empty()) wpd::write_cloud(partial.cloud, partial_path, format);
    auto j = wpd::to_json(partial.report);
    j["error"] = e.what();
    j["partial_output"] = partial_path;
    print(j);
    std::cerr << "wpd: " << e.what() << " (best-effort cloud written to " << partial_path << ")\n";
    return kExitNonConvergence;
  }
}

int run_metrics(const std::string& original_path, const std::string& resampled_path,
                bool symmetric, std::size_t k, bool all_points) {
  const auto original = wpd::read_cloud(original_path);
  const auto resampled = wpd::read_cloud(resampled_path);
  Json j;
  j["original"] = original_path;
  j["resampled"] = resampled_path;
  j["original_count"] = original.size();
  j["resampled_count"] = resampled.size();
  j["consistency"] = wpd::to_json(wpd::consistency(resampled.points, original.points, symmetric));
  try {
    j["uniformity"] = wpd::to_json(wpd::uniformity(resampled.points, k, !all_points));
  } catch (const wpd::Error& e) {
    if (e.kind() != ErrorKind::InvalidArgument) throw;
    j["uniformity"] = nullptr;
    j["uniformity_error"] = e.what();
  }
  j["definitions"] = {
      {"hausdorff", symmetric ? "max of both directed nearest-neighbor maxima"
                              : "max over resampled points of the distance to the nearest original point"},
      {"mean", symmetric ? "average of both directed mean nearest-neighbor distances"
                         : "mean over resampled points of the distance to the nearest original point"},
      {"d_local", "max - min of the per-point mean distance to the k nearest neighbors"},
      {"d_voronoi", "max - min of tangent-plane Voronoi cell areas over bounded cells"},
  };
  print(j);
  return 0;
}

int run_detect(const std::string& in, const std::string& labels, std::size_t k, double tau) {
  const auto cloud = wpd::read_cloud(in);
  const auto result = wpd::detect_edges_covariance(cloud, k, tau);
  wpd::write_labels(labels, result.classes);
  std::size_t edges = 0;
  for (auto c : result.classes) edges += c == wpd::PointClass::Edge;
  print(Json{{"input_count", cloud.size()}, {"edge_count", edges}, {"k", k}, {"tau", tau}});
  return 0;
}

int run_voxel_info(const std::string& in, double voxel_factor, std::size_t n, double lambda) {
  const auto cloud = wpd::read_cloud(in);
  const auto bbox = wpd::compute_bbox(cloud);
  const auto grid = wpd::voxelize(cloud, wpd::default_voxel_length(bbox, voxel_factor));
  const auto ext = bbox.extents();
  Json j;
  j["input_count"] = cloud.size();
  j["bbox"] = {{"min", {bbox.min.x(), bbox.min.y(), bbox.min.z()}},
               {"max", {bbox.max.x(), bbox.max.y(), bbox.max.z()}},
               {"extents", {ext.x(), ext.y(), ext.z()}}};
  j["voxel_length"] = grid.voxel_length;
  j["voxel_count"] = grid.count();
  j["area_voxel"] = wpd::estimate_area_voxel(grid);
  j["area_bbox"] = wpd::estimate_area_bbox(bbox);
  if (n > 0) {
    const auto est = wpd::estimate_radius(grid, n, lambda);
    j["n"] = n;
    j["lambda"] = lambda;
    j["radius"] = est.radius;
  }
  print(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted Poisson-disk point cloud resampling"};
  app.require_subcommand(1);

  wpd::ResampleConfig config;
  std::string in, out, sharp = "off", mu = "relative", displacement = "centroid";
  bool ascii = false;
  auto* resample = app.add_subcommand("resample", "Resample a cloud to exactly n points");
  resample->add_option("input", in, "Input .ply or .xyz")->required();
  resample->add_option("output", out, "Output .ply or .xyz")->required();
  resample->add_option("--n", config.n, "Target point count")->required();
  resample->add_option("--seed", config.seed, "Random seed")->capture_default_str();
  resample->add_option("--lambda", config.lambda, "Disk overlap factor")->capture_default_str();
  resample->add_option("--voxel-factor", config.voxel_factor, "Voxel length / longest extent")
      ->capture_default_str();
  resample->add_option("--k", config.k_smooth, "Smoothing neighborhood size")->capture_default_str();
  resample->add_option("--iters", config.smooth_iterations, "Smoothing passes")->capture_default_str();
  resample->add_option("--displacement", displacement, "Smoothing target: centroid | cotangent")
      ->capture_default_str();
  resample->add_option("--sharp", sharp, "off | labels[:<path>] | detect[:<k>,<tau>]")
      ->capture_default_str();
  resample->add_flag("--snap-back", config.snap_back, "Snap smoothed points to the nearest input point");
  resample->add_option("--max-refine-iters", config.max_refine_iters, "Refinement pass limit")
      ->capture_default_str();
  resample->add_option("--tolerance", config.tolerance, "Allowed count overshoot")->capture_default_str();
  resample->add_option("--mu", mu, "Growth damping: relative | absolute")->capture_default_str();
  resample->add_flag("--metrics", config.compute_metrics, "Add metrics to the report");
  resample->add_flag("--ascii", ascii, "Write ASCII instead of binary PLY");

  std::string original, resampled;
  bool symmetric = false, all_points = false;
  std::size_t metric_k = wpd::kDefaultMetricK;
  auto* metrics = app.add_subcommand("metrics", "Compare a resampled cloud against its source");
  metrics->add_option("original", original, "Original cloud")->required();
  metrics->add_option("resampled", resampled, "Resampled cloud")->required();
  metrics->add_flag("--symmetric", symmetric, "Report symmetric distances");
  metrics->add_option("--k", metric_k, "Neighbors for uniformity metrics")->capture_default_str();
  metrics->add_flag("--all-points", all_points, "Include boundary points in d_local");

  std::string detect_in, labels;
  std::size_t detect_k = wpd::kDefaultDetectorK;
  double tau = wpd::kDefaultDetectorTau;
  auto* detect = app.add_subcommand("detect-edges", "Label edge points by surface variation");
  detect->add_option("input", detect_in, "Input cloud")->required();
  detect->add_option("labels", labels, "Output label file (one 0/1 per line)")->required();
  detect->add_option("--k", detect_k, "Neighborhood size")->capture_default_str();
  detect->add_option("--tau", tau, "Surface variation threshold")->capture_default_str();

  std::string info_in;
  double info_factor = 0.05, info_lambda = wpd::kDefaultLambda;
  std::size_t info_n = 0;
  auto* info = app.add_subcommand("voxel-info", "Voxel grid and radius estimate for a cloud");
  info->add_option("input", info_in, "Input cloud")->required();
  info->add_option("--voxel-factor", info_factor, "Voxel length / longest extent")->capture_default_str();
  info->add_option("--n", info_n, "Target count for a radius estimate");
  info->add_option("--lambda", info_lambda, "Disk overlap factor")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (resample->parsed()) return run_resample(in, out, config, sharp, mu, displacement, ascii);
    if (metrics->parsed()) return run_metrics(original, resampled, symmetric, metric_k, all_points);
    if (detect->parsed()) return run_detect(detect_in, labels, detect_k, tau);
    if (info->parsed()) return run_voxel_info(info_in, info_factor, info_n, info_lambda);
  } catch (const wpd::Error& e) {
    std::cerr << "wpd: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::Parse: return kExitParse;
      case ErrorKind::NonConvergence: return kExitNonConvergence;
      case ErrorKind::InvalidArgument:
      case ErrorKind::Io: return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "wpd: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
