#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viewpcl/errors.hpp"
#include "viewpcl/geometry.hpp"

namespace viewpcl {

/// Per-pixel class probability vectors for one view. Rasters are float32,
/// pixel-major (C contiguous values per pixel); all accumulation is in double.
struct ClassProbabilityMap {
  int view_id = 0;
  int num_classes = 0;
  int width = 0;
  int height = 0;
  std::vector<float> probs;  // height*width*num_classes

  std::span<const float> at(PixelCoord p) const {
    const std::size_t base =
        (static_cast<std::size_t>(p.row) * width + p.col) * num_classes;
    return {probs.data() + base, static_cast<std::size_t>(num_classes)};
  }
  std::span<float> at(PixelCoord p) {
    const std::size_t base =
        (static_cast<std::size_t>(p.row) * width + p.col) * num_classes;
    return {probs.data() + base, static_cast<std::size_t>(num_classes)};
  }
};

/// A family {P^z}_{z in D}: one C-vector per pixel of an ordered region.
struct RegionProbabilityFamily {
  std::vector<PixelCoord> region;
  std::vector<std::vector<double>> maps;  // maps[k] belongs to region[k]
};

/// Probability q(z) that pixel z of D is the one selected.
struct SelectionDistribution {
  std::vector<PixelCoord> region;
  std::vector<double> weights;
};

/// Weighted discrete distribution over pixel coordinates, conditioned on a
/// class: mu = sum_z w_z delta_z with w_z = p^q(z|c).
struct PointCloudDistribution {
  std::vector<PixelCoord> points;
  std::vector<double> weights;
  int class_id = -1;

  std::size_t size() const { return points.size(); }
};

/// Arithmetic mean of MC dropout samples, per pixel and class.
inline ClassProbabilityMap mc_average(const std::vector<ClassProbabilityMap>& samples) {
  if (samples.empty()) throw DimensionMismatch("mc_average: no samples");
  const ClassProbabilityMap& first = samples.front();
  for (const auto& s : samples) {
    if (s.width != first.width || s.height != first.height ||
        s.num_classes != first.num_classes)
      throw DimensionMismatch("mc_average: sample dimensions differ");
  }
  ClassProbabilityMap out = first;
  if (samples.size() == 1) return out;
  const std::size_t n = first.probs.size();
  std::vector<double> acc(n, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < n; ++i) acc[i] += s.probs[i];
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < n; ++i)
    out.probs[i] = static_cast<float>(acc[i] * inv);
  return out;
}

/// Induced class probability p^q(c) = sum_z P^z(c) q(z).
inline std::vector<double> induced_class_prob(const RegionProbabilityFamily& family,
                                              const SelectionDistribution& q) {
  if (family.region != q.region)
    throw RegionMismatch("induced_class_prob: family and q regions differ");
  if (family.region.empty()) throw EmptyRegion("induced_class_prob: empty region");
  const std::size_t num_classes = family.maps.front().size();
  std::vector<double> p(num_classes, 0.0);
  for (std::size_t k = 0; k < family.region.size(); ++k)
    for (std::size_t c = 0; c < num_classes; ++c)
      p[c] += family.maps[k][c] * q.weights[k];
  return p;
}

/// Point cloud distribution of class c: w_z = P^z(c) q(z) / p^q(c).
/// Throws ClassAbsent when p^q(c) = 0; callers needing the Appendix escape
/// route should use maybe_point_cloud_distribution instead.
inline PointCloudDistribution point_cloud_distribution(
    const RegionProbabilityFamily& family, const SelectionDistribution& q, int c) {
  if (family.region != q.region)
    throw RegionMismatch("point_cloud_distribution: family and q regions differ");
  PointCloudDistribution mu;
  mu.class_id = c;
  double total = 0.0;
  for (std::size_t k = 0; k < family.region.size(); ++k) {
    const double w = family.maps[k][static_cast<std::size_t>(c)] * q.weights[k];
    if (w > 0.0) {
      mu.points.push_back(family.region[k]);
      mu.weights.push_back(w);
      total += w;
    }
  }
  if (!(total > 0.0))
    throw ClassAbsent("point_cloud_distribution: p^q(c) = 0 for class " +
                      std::to_string(c));
  for (double& w : mu.weights) w /= total;
  return mu;
}

inline std::optional<PointCloudDistribution> maybe_point_cloud_distribution(
    const RegionProbabilityFamily& family, const SelectionDistribution& q, int c) {
  try {
    return point_cloud_distribution(family, q, c);
  } catch (const ClassAbsent&) {
    return std::nullopt;
  }
}

/// Drops atoms with weight < weight_threshold and renormalizes. If everything
/// would be dropped, keeps the single max-weight atom (lowest index on ties).
inline PointCloudDistribution prune_and_renormalize(const PointCloudDistribution& mu,
                                                    double weight_threshold) {
  if (weight_threshold < 0 || weight_threshold >= 1)
    throw ValidationError("prune_and_renormalize: threshold must be in [0, 1)");
  PointCloudDistribution out;
  out.class_id = mu.class_id;
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    if (mu.weights[k] >= weight_threshold) {
      out.points.push_back(mu.points[k]);
      out.weights.push_back(mu.weights[k]);
      total += mu.weights[k];
    }
  }
  if (out.points.empty()) {
    const std::size_t best = static_cast<std::size_t>(
        std::max_element(mu.weights.begin(), mu.weights.end()) - mu.weights.begin());
    out.points.push_back(mu.points[best]);
    out.weights.push_back(1.0);
    return out;
  }
  for (double& w : out.weights) w /= total;
  return out;
}

/// q(z) = 1/|D|.
inline SelectionDistribution uniform_selection(const std::vector<PixelCoord>& region) {
  if (region.empty()) throw EmptyRegion("uniform_selection: empty region");
  SelectionDistribution q;
  q.region = region;
  q.weights.assign(region.size(), 1.0 / static_cast<double>(region.size()));
  return q;
}

}  // namespace viewpcl
