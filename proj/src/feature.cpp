#include "wpd/feature.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "wpd/error.hpp"
#include "wpd/parallel.hpp"
#include "wpd/spatial_index.hpp"

namespace wpd {

Classification load_labels(const std::filesystem::path& path, std::size_t expected_count) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open label file " + path.string());
  Classification out;
  out.source = ClassificationSource::ExternalLabels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    const auto token = line.substr(first, last - first + 1);
    if (token == "0") {
      out.classes.push_back(PointClass::Normal);
    } else if (token == "1") {
      out.classes.push_back(PointClass::Edge);
    } else {
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) +
                                        ": expected label 0 or 1, got '" + token + "'");
    }
  }
  if (out.classes.size() != expected_count) {
    throw Error(ErrorKind::InvalidArgument,
                "label/point count mismatch: " + std::to_string(out.classes.size()) +
                    " labels for " + std::to_string(expected_count) + " points");
  }
  return out;
}

void write_labels(const std::filesystem::path& path, std::span<const PointClass> classes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write label file " + path.string());
  for (auto c : classes) out << (c == PointClass::Edge ? "1\n" : "0\n");
  if (!out) throw Error(ErrorKind::Io, "failed writing label file " + path.string());
}

double surface_variation(std::span<const Point3> points) {
  if (points.empty()) return 0.0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  const Eigen::Vector3d ev =
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov, Eigen::EigenvaluesOnly).eigenvalues();
  const double total = ev.cwiseMax(0.0).sum();
  if (!(total > 0.0)) return 0.0;
  return std::max(ev[0], 0.0) / total;
}

Classification detect_edges_covariance(const PointCloud& cloud, std::size_t k, double tau) {
  if (k == 0) fail("k must be at least 1");
  if (cloud.size() < k + 1) fail("edge detection needs more than k points");
  const KdTree tree(cloud.points);
  Classification out;
  out.source = ClassificationSource::CovarianceDetector;
  out.classes.assign(cloud.size(), PointClass::Normal);
  out.variation.assign(cloud.size(), 0.0);
  parallel_for(cloud.size(), [&](std::size_t i) {
    std::vector<Point3> local;
    local.reserve(k + 1);
    local.push_back(cloud.points[i]);
    for (const auto& nb : tree.knn_of(i, k)) local.push_back(cloud.points[nb.index]);
    const double sigma = surface_variation(local);
    out.variation[i] = sigma;
    if (sigma > tau) out.classes[i] = PointClass::Edge;
  });
  return out;
}

std::vector<double> radius_scale(std::span<const PointClass> classes) {
  std::vector<double> scale(classes.size());
  std::transform(classes.begin(), classes.end(), scale.begin(),
                 [](PointClass c) { return c == PointClass::Edge ? 0.5 : 1.0; });
  return scale;
}

std::vector<double> assign_radii(std::span<const PointClass> classes, double r) {
  if (!(r > 0.0)) fail("radius must be positive");
  auto radii = radius_scale(classes);
  for (auto& v : radii) v *= r;
  return radii;
}

bool edge_freeze_predicate(std::size_t i, std::span<const PointClass> classes,
                           std::span<const std::size_t> neighbors) {
  if (classes[i] != PointClass::Edge) return false;
  return std::any_of(neighbors.begin(), neighbors.end(),
                     [&](std::size_t j) { return classes[j] == PointClass::Normal; });
}

}  // namespace wpd
