#include "wpd/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "wpd/parallel.hpp"
#include "wpd/spatial_index.hpp"

namespace wpd {
namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

const char* sharp_name(SharpMode m) {
  switch (m) {
    case SharpMode::Off: return "off";
    case SharpMode::Labels: return "labels";
    case SharpMode::Detector: return "detect";
  }
  return "off";
}

std::vector<PointClass> classify(const PointCloud& input, const ResampleConfig& config) {
  switch (config.sharp) {
    case SharpMode::Off: return {};
    case SharpMode::Labels:
      if (!config.labels_path.empty()) return load_labels(config.labels_path, input.size()).classes;
      if (!input.has_classes()) fail("sharp mode 'labels' needs a label file or a class property");
      return input.classes;
    case SharpMode::Detector:
      return detect_edges_covariance(input, config.detector_k, config.detector_tau).classes;
  }
  return {};
}

// Indices of the nearest raw point for every output point.
std::vector<std::size_t> nearest_raw(std::span<const Point3> raw, std::span<const Point3> moved) {
  const KdTree tree(raw);
  std::vector<std::size_t> out(moved.size());
  parallel_for(moved.size(), [&](std::size_t i) { out[i] = tree.knn(moved[i], 1).front().index; });
  return out;
}

}  // namespace

void ResampleConfig::validate() const {
  if (n < 1) fail("n must be at least 1");
  if (!(tolerance > 0.0 && tolerance < 1.0)) fail("tolerance must lie in (0, 1)");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda must be positive");
  if (!(voxel_factor > 0.0) || !std::isfinite(voxel_factor)) fail("voxel factor must be positive");
  if (smooth_iterations > 0 && k_smooth < 3) fail("smoothing k must be at least 3");
  if (max_refine_iters < 1) fail("max refinement iterations must be at least 1");
  if (sharp == SharpMode::Detector) {
    if (detector_k < 1) fail("detector k must be at least 1");
    if (!(detector_tau >= 0.0 && detector_tau <= 1.0 / 3.0)) fail("detector tau must lie in [0, 1/3]");
  }
}

ResampleResult resample(const PointCloud& input, const ResampleConfig& config) {
  config.validate();
  input.validate();
  if (config.n > input.size()) fail("target exceeds input size");

  ResampleResult result;
  RunReport& rep = result.report;
  rep.config = config;
  rep.input_count = input.size();
  Stopwatch clock;

  const auto bbox = compute_bbox(input);
  const auto grid = voxelize(input, default_voxel_length(bbox, config.voxel_factor));
  const auto estimate = estimate_radius(grid, config.n, config.lambda);
  rep.voxel_length = grid.voxel_length;
  rep.voxel_count = grid.count();
  rep.surface_area = estimate.surface_area;
  rep.initial_radius = estimate.radius;
  rep.times.voxelize = clock.lap();

  const auto classes = classify(input, config);
  const auto scale = radius_scale(classes);
  for (auto c : classes) rep.edge_count += c == PointClass::Edge;
  rep.times.classify = clock.lap();

  RefineOptions options;
  options.max_iters = config.max_refine_iters;
  options.tolerance = config.tolerance;
  options.mu_mode = config.mu_mode;
  options.scale = scale;

  PointCloud working = input;
  if (config.sharp != SharpMode::Off) working.classes = classes;

  Refinement refined;
  try {
    refined = refine_count(input.points, config.n, estimate, config.seed, options);
  } catch (const RefinementError& e) {
    rep.times.refine = clock.lap();
    const auto& best = e.best();
    rep.final_radius = best.state.radius;
    rep.refinement_iterations = best.state.iterations;
    rep.history = best.state.history;
    rep.refined_count = best.indices.size();
    result.cloud = working.subset(best.indices);
    rep.output_count = result.cloud.size();
    throw ResampleError(e.what(), std::move(result));
  }
  rep.times.refine = clock.lap();
  rep.converged = true;
  rep.final_radius = refined.state.radius;
  rep.refinement_iterations = refined.state.iterations;
  rep.history = refined.state.history;
  rep.refined_count = refined.indices.size();

  std::vector<double> sub_scale;
  if (!scale.empty()) {
    sub_scale.reserve(refined.indices.size());
    for (auto i : refined.indices) sub_scale.push_back(scale[i]);
  }
  const auto keep = trim_indices(working.subset(refined.indices).points, config.n, sub_scale);
  std::vector<std::size_t> source(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) source[i] = refined.indices[keep[i]];
  PointCloud out = working.subset(source);
  rep.times.trim = clock.lap();

  if (config.smooth_iterations > 0) {
    if (out.size() < config.k_smooth + 1) fail("too few points to smooth with k = " +
                                                std::to_string(config.k_smooth));
    const std::span<const PointClass> freeze =
        config.sharp != SharpMode::Off ? std::span<const PointClass>(out.classes)
                                       : std::span<const PointClass>();
    for (std::size_t it = 0; it < config.smooth_iterations; ++it) {
      SmoothPassStats stats;
      out.points = smooth_pass(out.points, config.k_smooth, freeze, &stats, config.displacement);
      rep.smoothing.push_back(stats);
    }
    // Moved points no longer sit where their normals were measured.
    out.normals.clear();
  }
  rep.times.smooth = clock.lap();

  if (config.snap_back && config.smooth_iterations > 0) {
    const auto nearest = nearest_raw(input.points, out.points);
    PointCloud snapped = working.subset(nearest);
    if (config.sharp != SharpMode::Off) snapped.classes = out.classes;
    out = std::move(snapped);
  }
  rep.times.snap = clock.lap();

  if (config.compute_metrics) {
    rep.consistency = consistency(out.points, input.points, false);
    try {
      rep.uniformity = uniformity(out.points);
    } catch (const Error& e) {
      rep.uniformity_error = e.what();
    }
    rep.times.metrics = clock.lap();
  }

  rep.output_count = out.size();
  result.cloud = std::move(out);
  return result;
}

nlohmann::ordered_json to_json(const ResampleConfig& c) {
  nlohmann::ordered_json j;
  j["n"] = c.n;
  j["lambda"] = c.lambda;
  j["voxel_factor"] = c.voxel_factor;
  j["k_smooth"] = c.k_smooth;
  j["smooth_iterations"] = c.smooth_iterations;
  j["displacement"] = c.displacement == Displacement::CellCentroid ? "centroid" : "cotangent";
  j["sharp"] = sharp_name(c.sharp);
  if (c.sharp == SharpMode::Labels) j["labels"] = c.labels_path.string();
  if (c.sharp == SharpMode::Detector) {
    j["detector_k"] = c.detector_k;
    j["detector_tau"] = c.detector_tau;
  }
  j["seed"] = c.seed;
  j["snap_back"] = c.snap_back;
  j["max_refine_iters"] = c.max_refine_iters;
  j["tolerance"] = c.tolerance;
  j["mu"] = c.mu_mode == MuMode::Relative ? "relative" : "absolute";
  return j;
}

nlohmann::ordered_json to_json(const ConsistencyReport& r) {
  nlohmann::ordered_json j;
  j["direction"] = r.direction == Direction::Symmetric ? "symmetric" : "resampled_to_original";
  j["hausdorff"] = r.hausdorff;
  j["mean"] = r.mean;
  return j;
}

nlohmann::ordered_json to_json(const UniformityReport& r) {
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["interior_only"] = r.interior_only;
  j["d_local"] = r.d_local;
  j["d_voronoi"] = r.d_voronoi;
  j["evaluated"] = r.evaluated;
  j["interior_cells"] = r.interior_cells;
  j["d_voronoi_definition"] = "tangent-cell-area-spread";
  return j;
}

nlohmann::ordered_json to_json(const RunReport& r, bool include_times) {
  nlohmann::ordered_json j;
  j["input_count"] = r.input_count;
  j["output_count"] = r.output_count;
  j["converged"] = r.converged;
  j["seed"] = r.config.seed;
  j["voxel"] = {{"length", r.voxel_length}, {"count", r.voxel_count}, {"surface_area", r.surface_area}};
  j["initial_radius"] = r.initial_radius;
  j["final_radius"] = r.final_radius;
  j["refinement_iterations"] = r.refinement_iterations;
  j["refined_count"] = r.refined_count;
  auto history = nlohmann::ordered_json::array();
  for (const auto& s : r.history) history.push_back({{"radius", s.radius}, {"count", s.count}});
  j["history"] = std::move(history);
  j["edge_count"] = r.edge_count;
  auto passes = nlohmann::ordered_json::array();
  for (const auto& s : r.smoothing) {
    passes.push_back({{"moved", s.moved},
                      {"unclosed", s.unclosed},
                      {"degenerate", s.degenerate},
                      {"edge_frozen", s.edge_frozen}});
  }
  j["smoothing"] = std::move(passes);
  if (include_times) {
    const auto& t = r.times;
    j["times"] = {{"read", t.read},         {"voxelize", t.voxelize}, {"classify", t.classify},
                  {"refine", t.refine},     {"trim", t.trim},         {"smooth", t.smooth},
                  {"snap", t.snap},         {"metrics", t.metrics},   {"write", t.write},
                  {"total", t.read + t.voxelize + t.classify + t.refine + t.trim + t.smooth +
                                t.snap + t.metrics + t.write}};
  }
  j["config"] = to_json(r.config);
  if (r.consistency || r.uniformity || !r.uniformity_error.empty()) {
    nlohmann::ordered_json m;
    if (r.consistency) m["consistency"] = to_json(*r.consistency);
    if (r.uniformity) m["uniformity"] = to_json(*r.uniformity);
    if (!r.uniformity_error.empty()) m["uniformity_error"] = r.uniformity_error;
    j["metrics"] = std::move(m);
  }
  return j;
}

}  // namespace wpd
