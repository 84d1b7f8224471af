#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "viewpcl/errors.hpp"

namespace viewpcl {

struct PixelCoord {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

/// Key of a superpixel across the whole dataset.
struct SuperpixelKey {
  int view_id = 0;
  int superpixel_id = 0;

  friend auto operator<=>(const SuperpixelKey&, const SuperpixelKey&) = default;
};

struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
};

/// Camera-to-world rigid transform.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

inline void validate_intrinsics(const Intrinsics& k, const std::string& ctx = {}) {
  if (!(k.fx > 0) || !(k.fy > 0) || !std::isfinite(k.cx) || !std::isfinite(k.cy))
    throw ValidationError("invalid intrinsics" + (ctx.empty() ? "" : " (" + ctx + ")"));
}

inline void validate_pose(const Pose& pose, const std::string& ctx = {}) {
  const Eigen::Matrix3d err =
      pose.rotation.transpose() * pose.rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(pose.rotation.determinant() - 1.0) > 1e-9)
    throw ValidationError("pose rotation is not a proper orthonormal matrix" +
                          (ctx.empty() ? "" : " (" + ctx + ")"));
}

/// One posed RGB-D view. Depth <= 0 is the invalid sentinel; such pixels never
/// produce or receive correspondences.
struct ViewRecord {
  int view_id = 0;
  int width = 0;
  int height = 0;
  Intrinsics intrinsics;
  Pose pose;
  std::vector<float> depth;  // height*width, row-major

  bool in_bounds(PixelCoord p) const {
    return p.row >= 0 && p.row < height && p.col >= 0 && p.col < width;
  }
  double depth_at(PixelCoord p) const {
    return depth[static_cast<std::size_t>(p.row) * width + p.col];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
};

/// target_pixel lives in the target view, source_pixel in the source view;
/// the pair passed the depth-consistency test.
struct PixelCorrespondence {
  PixelCoord target_pixel;
  PixelCoord source_pixel;

  friend bool operator==(const PixelCorrespondence&, const PixelCorrespondence&) = default;
};

/// Intersection of a superpixel in the target view with the cross-projection
/// of a source view. Target pixels are distinct and sorted row-major.
struct OverlapRegion {
  int target_view = 0;
  int source_view = 0;
  int superpixel_id = 0;
  std::vector<PixelCorrespondence> correspondences;
  double relative_size = 0.0;  // |D| / |R|
};

/// World point of a pixel: pose.rotation * (d * K^-1 [u v 1]^T) + translation,
/// with pixel-center coordinates u = col + 0.5, v = row + 0.5.
inline Eigen::Vector3d back_project(PixelCoord pixel, const ViewRecord& view) {
  if (!view.in_bounds(pixel))
    throw OutOfBounds("back_project: pixel (" + std::to_string(pixel.row) + "," +
                      std::to_string(pixel.col) + ") outside view " +
                      std::to_string(view.view_id));
  const double d = view.depth_at(pixel);
  if (!(d > 0))
    throw InvalidDepth("back_project: invalid depth at pixel (" +
                       std::to_string(pixel.row) + "," + std::to_string(pixel.col) + ")");
  const double u = pixel.col + 0.5;
  const double v = pixel.row + 0.5;
  const Eigen::Vector3d ray((u - view.intrinsics.cx) / view.intrinsics.fx,
                            (v - view.intrinsics.cy) / view.intrinsics.fy, 1.0);
  return view.pose.rotation * (d * ray) + view.pose.translation;
}

struct Projection {
  PixelCoord pixel;
  double depth = 0.0;  // camera-frame depth
};

/// Projects a world point into a view. nullopt when behind the camera or
/// outside the raster.
inline std::optional<Projection> project(const Eigen::Vector3d& world_point,
                                         const ViewRecord& view) {
  const Eigen::Vector3d cam =
      view.pose.rotation.transpose() * (world_point - view.pose.translation);
  if (!(cam.z() > 0)) return std::nullopt;
  const double u = view.intrinsics.fx * cam.x() / cam.z() + view.intrinsics.cx;
  const double v = view.intrinsics.fy * cam.y() / cam.z() + view.intrinsics.cy;
  const PixelCoord p{static_cast<int>(std::floor(v)), static_cast<int>(std::floor(u))};
  if (!view.in_bounds(p)) return std::nullopt;
  return Projection{p, cam.z()};
}

/// Cross-projects every valid-depth source pixel into the target view and
/// keeps pairs passing the relative depth-consistency test
///   |projected_depth - target_depth| <= depth_tolerance * target_depth.
/// When several source pixels land on one target pixel, the front-most
/// projected depth wins; ties go to the lexicographically smallest source
/// pixel. Output is sorted by target pixel, so no target pixel repeats.
inline std::vector<PixelCorrespondence> cross_project(const ViewRecord& source,
                                                      const ViewRecord& target,
                                                      double depth_tolerance) {
  struct Hit {
    double depth;
    PixelCoord source_pixel;
  };
  std::vector<std::optional<Hit>> best(target.pixel_count());

  const Eigen::Matrix3d rot = source.pose.rotation;
  const Intrinsics& k = source.intrinsics;
  for (int row = 0; row < source.height; ++row) {
    for (int col = 0; col < source.width; ++col) {
      const PixelCoord sp{row, col};
      const double d = source.depth_at(sp);
      if (!(d > 0)) continue;
      const Eigen::Vector3d ray((col + 0.5 - k.cx) / k.fx, (row + 0.5 - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d world = rot * (d * ray) + source.pose.translation;
      const auto proj = project(world, target);
      if (!proj) continue;
      const double target_depth = target.depth_at(proj->pixel);
      if (!(target_depth > 0)) continue;
      if (std::abs(proj->depth - target_depth) > depth_tolerance * target_depth) continue;

      auto& slot = best[static_cast<std::size_t>(proj->pixel.row) * target.width +
                        proj->pixel.col];
      if (!slot || proj->depth < slot->depth ||
          (proj->depth == slot->depth && sp < slot->source_pixel)) {
        slot = Hit{proj->depth, sp};
      }
    }
  }

  std::vector<PixelCorrespondence> out;
  for (int row = 0; row < target.height; ++row) {
    for (int col = 0; col < target.width; ++col) {
      const auto& slot = best[static_cast<std::size_t>(row) * target.width + col];
      if (slot) out.push_back({PixelCoord{row, col}, slot->source_pixel});
    }
  }
  return out;
}

/// Overlap regions of one superpixel (pixel set R in the target view) against
/// every other view. A region is emitted iff |D|/|R| >= min_relative_size.
inline std::vector<OverlapRegion> overlap_regions(
    const std::vector<PixelCoord>& superpixel, int superpixel_id,
    const ViewRecord& target, const std::vector<ViewRecord>& all_views,
    double depth_tolerance, double min_relative_size) {
  if (superpixel.empty()) throw EmptyRegion("overlap_regions: empty superpixel");
  if (!(min_relative_size > 0) || min_relative_size > 1)
    throw ValidationError("overlap_regions: min_relative_size must be in (0, 1]");

  std::vector<std::uint8_t> mask(target.pixel_count(), 0);
  for (const PixelCoord& p : superpixel)
    mask[static_cast<std::size_t>(p.row) * target.width + p.col] = 1;

  std::vector<OverlapRegion> out;
  for (const ViewRecord& source : all_views) {
    if (source.view_id == target.view_id) continue;
    OverlapRegion region;
    region.target_view = target.view_id;
    region.source_view = source.view_id;
    region.superpixel_id = superpixel_id;
    for (const PixelCorrespondence& c : cross_project(source, target, depth_tolerance)) {
      if (mask[static_cast<std::size_t>(c.target_pixel.row) * target.width +
               c.target_pixel.col])
        region.correspondences.push_back(c);
    }
    region.relative_size =
        static_cast<double>(region.correspondences.size()) / superpixel.size();
    if (region.relative_size >= min_relative_size) out.push_back(std::move(region));
  }
  return out;
}

}  // namespace viewpcl
