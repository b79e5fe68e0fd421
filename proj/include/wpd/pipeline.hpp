#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpd/cloud.hpp"
#include "wpd/error.hpp"
#include "wpd/feature.hpp"
#include "wpd/metrics.hpp"
#include "wpd/poisson.hpp"
#include "wpd/tangent.hpp"

namespace wpd {

enum class SharpMode { Off, Labels, Detector };

struct ResampleConfig {
  std::size_t n = 0;
  double lambda = kDefaultLambda;
  double voxel_factor = 0.05;
  std::size_t k_smooth = kDefaultSmoothK;
  std::size_t smooth_iterations = kDefaultSmoothIterations;
  Displacement displacement = Displacement::CellCentroid;
  SharpMode sharp = SharpMode::Off;
  std::filesystem::path labels_path;  // SharpMode::Labels
  std::size_t detector_k = kDefaultDetectorK;
  double detector_tau = kDefaultDetectorTau;
  std::uint64_t seed = 0;
  bool snap_back = false;
  std::size_t max_refine_iters = 50;
  double tolerance = kDefaultTolerance;
  MuMode mu_mode = MuMode::Relative;
  bool compute_metrics = false;

  /// Throws InvalidArgument on out-of-range values.
  void validate() const;
};

struct StageTimes {
  double read = 0.0;
  double voxelize = 0.0;
  double classify = 0.0;
  double refine = 0.0;
  double trim = 0.0;
  double smooth = 0.0;
  double snap = 0.0;
  double metrics = 0.0;
  double write = 0.0;
};

struct RunReport {
  std::size_t input_count = 0;
  std::size_t output_count = 0;
  bool converged = false;
  double voxel_length = 0.0;
  std::size_t voxel_count = 0;
  double surface_area = 0.0;
  double initial_radius = 0.0;
  double final_radius = 0.0;
  std::size_t refinement_iterations = 0;
  std::size_t refined_count = 0;  // |P'| before trimming
  std::vector<RefinementStep> history;
  std::size_t edge_count = 0;
  std::vector<SmoothPassStats> smoothing;
  StageTimes times;
  ResampleConfig config;
  std::optional<ConsistencyReport> consistency;
  std::optional<UniformityReport> uniformity;
  std::string uniformity_error;
};

struct ResampleResult {
  PointCloud cloud;
  RunReport report;
};

/// Thrown when the count refinement never lands in the band.  `partial`
/// holds the closest subset found, untrimmed and unsmoothed.
class ResampleError : public Error {
 public:
  ResampleError(const std::string& what, ResampleResult partial)
      : Error(ErrorKind::NonConvergence, what), partial_(std::move(partial)) {}
  const ResampleResult& partial() const noexcept { return partial_; }

 private:
  ResampleResult partial_;
};

/// voxelize -> radius estimate -> classify -> refine -> trim -> smooth ->
/// optional snap-back.  Input class labels are only consulted in
/// SharpMode::Labels when no label file is given.
ResampleResult resample(const PointCloud& input, const ResampleConfig& config);

nlohmann::ordered_json to_json(const ResampleConfig& config);
nlohmann::ordered_json to_json(const RunReport& report, bool include_times = true);
nlohmann::ordered_json to_json(const ConsistencyReport& report);
nlohmann::ordered_json to_json(const UniformityReport& report);

}  // namespace wpd
