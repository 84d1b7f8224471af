#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "viewpcl/detail/rng.hpp"
#include "viewpcl/errors.hpp"
#include "viewpcl/scenebundle.hpp"

namespace viewpcl {

/// Axis-aligned rectangle on the world plane z = const, carrying one class.
struct SynthPlane {
  double z = 1.0;
  double x0 = -1.0, x1 = 1.0;
  double y0 = -1.0, y1 = 1.0;
  int class_id = 0;
};

struct SynthView {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double yaw_deg = 0.0;    // about world y
  double pitch_deg = 0.0;  // about world x
  double roll_deg = 0.0;   // about world z
};

/// A localized cross-view disagreement: the chosen view's probability maps
/// are pushed toward target_class on the chosen superpixel (all MC samples).
struct SynthInjection {
  int view_id = 0;
  int superpixel_id = 0;
  int target_class = 0;
  double magnitude = 1.0;
  bool half = false;  // perturb only the left half of the superpixel's bbox
};

struct SynthSpec {
  int width = 64;
  int height = 64;
  int num_classes = 3;
  int mc_samples = 1;
  int superpixel_count = 16;
  double noise = 0.0;  // blend weight of per-sample Dirichlet noise
  std::uint64_t rng_seed = 0;
  std::optional<Intrinsics> intrinsics;  // default: fx = fy = width, centered
  std::vector<SynthPlane> planes;
  std::vector<SynthView> views;
  std::vector<SynthInjection> injections;
};

namespace detail {

inline Eigen::Matrix3d rotation_ypr(double yaw_deg, double pitch_deg, double roll_deg) {
  const double y = yaw_deg * M_PI / 180.0;
  const double p = pitch_deg * M_PI / 180.0;
  const double r = roll_deg * M_PI / 180.0;
  return (Eigen::AngleAxisd(y, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(p, Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(r, Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

}  // namespace detail

/// Renders depth analytically from the plane layout (front-most hit along the
/// pixel-center ray; no hit leaves the 0 depth sentinel and a uniform class
/// distribution) and emits per-sample probability maps as ground-truth
/// one-hots blended with noise. Bit-reproducible from rng_seed.
inline SceneBundle synth_scene(const SynthSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.num_classes < 1 || spec.mc_samples < 1 ||
      spec.views.empty() || spec.planes.empty())
    throw InvalidSpec("synth_scene: dimensions, classes, samples, views and planes required");
  for (const SynthPlane& plane : spec.planes)
    if (plane.class_id < 0 || plane.class_id >= spec.num_classes)
      throw InvalidSpec("synth_scene: plane class out of range");

  const Intrinsics k = spec.intrinsics.value_or(
      Intrinsics{static_cast<double>(spec.width), static_cast<double>(spec.width),
                 spec.width / 2.0, spec.height / 2.0});

  SceneBundle bundle;
  bundle.num_classes = spec.num_classes;
  bundle.mc_samples = spec.mc_samples;

  for (std::size_t vi = 0; vi < spec.views.size(); ++vi) {
    const SynthView& sv = spec.views[vi];
    ViewRecord view;
    view.view_id = static_cast<int>(vi);
    view.width = spec.width;
    view.height = spec.height;
    view.intrinsics = k;
    view.pose.rotation = detail::rotation_ypr(sv.yaw_deg, sv.pitch_deg, sv.roll_deg);
    view.pose.translation = sv.translation;
    view.depth.assign(view.pixel_count(), 0.0f);

    std::vector<int> classes(view.pixel_count(), -1);
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        const Eigen::Vector3d ray((c + 0.5 - k.cx) / k.fx, (r + 0.5 - k.cy) / k.fy, 1.0);
        const Eigen::Vector3d dir = view.pose.rotation * ray;
        double best = 0.0;
        int best_class = -1;
        for (const SynthPlane& plane : spec.planes) {
          if (std::abs(dir.z()) < 1e-12) continue;
          const double s = (plane.z - view.pose.translation.z()) / dir.z();
          if (!(s > 1e-9)) continue;
          const Eigen::Vector3d hit = view.pose.translation + s * dir;
          if (hit.x() < plane.x0 || hit.x() > plane.x1 || hit.y() < plane.y0 ||
              hit.y() > plane.y1)
            continue;
          if (best_class < 0 || s < best) {
            best = s;
            best_class = plane.class_id;
          }
        }
        if (best_class >= 0) {
          const std::size_t z = static_cast<std::size_t>(r) * spec.width + c;
          view.depth[z] = static_cast<float>(best);
          classes[z] = best_class;
        }
      }
    }

    // Per-sample maps: one-hot ground truth blended with Dirichlet(1) noise.
    std::vector<ClassProbabilityMap> samples;
    for (int d = 0; d < spec.mc_samples; ++d) {
      ClassProbabilityMap map;
      map.view_id = view.view_id;
      map.num_classes = spec.num_classes;
      map.width = spec.width;
      map.height = spec.height;
      map.probs.assign(view.pixel_count() * spec.num_classes, 0.0f);
      detail::SplitMix rng(detail::mix64(spec.rng_seed ^
                                         detail::mix64(vi * 1000003ULL +
                                                       static_cast<std::uint64_t>(d))));
      for (std::size_t z = 0; z < view.pixel_count(); ++z) {
        float* out = map.probs.data() + z * spec.num_classes;
        if (classes[z] < 0) {
          for (int c = 0; c < spec.num_classes; ++c)
            out[c] = 1.0f / static_cast<float>(spec.num_classes);
          continue;
        }
        if (spec.noise <= 0.0) {
          out[classes[z]] = 1.0f;
          continue;
        }
        std::vector<double> dir_noise(static_cast<std::size_t>(spec.num_classes));
        double total = 0.0;
        for (int c = 0; c < spec.num_classes; ++c) {
          dir_noise[static_cast<std::size_t>(c)] =
              -std::log(1.0 - rng.next_unit());  // Exp(1)
          total += dir_noise[static_cast<std::size_t>(c)];
        }
        double sum = 0.0;
        for (int c = 0; c < spec.num_classes; ++c) {
          const double p = (c == classes[z] ? 1.0 - spec.noise : 0.0) +
                           spec.noise * dir_noise[static_cast<std::size_t>(c)] / total;
          out[c] = static_cast<float>(p);
          sum += out[c];
        }
        for (int c = 0; c < spec.num_classes; ++c)
          out[c] = static_cast<float>(out[c] / sum);
      }
      samples.push_back(std::move(map));
    }

    bundle.views.push_back(std::move(view));
    bundle.prob_samples.push_back(std::move(samples));
    bundle.superpixels.push_back(grid_superpixels(spec.width, spec.height,
                                                  spec.superpixel_count));
  }

  for (const SynthInjection& inj : spec.injections) {
    const int vi = bundle.view_index(inj.view_id);
    const SuperpixelMap& sp = *bundle.superpixels[static_cast<std::size_t>(vi)];
    if (inj.superpixel_id < 0 || inj.superpixel_id >= sp.num_superpixels())
      throw InvalidSpec("synth_scene: injection superpixel out of range");
    if (inj.target_class < 0 || inj.target_class >= spec.num_classes)
      throw InvalidSpec("synth_scene: injection class out of range");
    const std::vector<PixelCoord> pixels = sp.pixels_of(inj.superpixel_id);
    int c0 = pixels.front().col, c1 = c0;
    for (const PixelCoord& p : pixels) {
      c0 = std::min(c0, p.col);
      c1 = std::max(c1, p.col);
    }
    const int mid = (c0 + c1 + 1) / 2;
    for (ClassProbabilityMap& map : bundle.prob_samples[static_cast<std::size_t>(vi)]) {
      for (const PixelCoord& p : pixels) {
        if (inj.half && p.col >= mid) continue;
        auto probs = map.at(p);
        double sum = 0.0;
        for (int c = 0; c < spec.num_classes; ++c) {
          const double base = probs[static_cast<std::size_t>(c)];
          const double flipped = c == inj.target_class ? 1.0 : 0.0;
          probs[static_cast<std::size_t>(c)] = static_cast<float>(
              (1.0 - inj.magnitude) * base + inj.magnitude * flipped);
          sum += probs[static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < spec.num_classes; ++c)
          probs[static_cast<std::size_t>(c)] =
              static_cast<float>(probs[static_cast<std::size_t>(c)] / sum);
      }
    }
  }

  validate_bundle(bundle);
  return bundle;
}

/// Parses the synth spec JSON used by the CLI.
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec spec;
  try {
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.mc_samples = j.value("mc_samples", 1);
    spec.superpixel_count = j.value("superpixels", 16);
    spec.noise = j.value("noise", 0.0);
    spec.rng_seed = j.value("rng_seed", std::uint64_t{0});
    if (j.contains("intrinsics")) {
      const auto& jk = j.at("intrinsics");
      spec.intrinsics = Intrinsics{jk.at("fx").get<double>(), jk.at("fy").get<double>(),
                                   jk.at("cx").get<double>(), jk.at("cy").get<double>()};
    }
    for (const auto& jp : j.at("planes")) {
      SynthPlane plane;
      plane.z = jp.at("z").get<double>();
      plane.x0 = jp.at("x0").get<double>();
      plane.x1 = jp.at("x1").get<double>();
      plane.y0 = jp.at("y0").get<double>();
      plane.y1 = jp.at("y1").get<double>();
      plane.class_id = jp.at("class").get<int>();
      spec.planes.push_back(plane);
    }
    for (const auto& jv : j.at("views")) {
      SynthView view;
      const auto t = jv.at("translation").get<std::vector<double>>();
      if (t.size() != 3) throw InvalidSpec("view translation must have 3 entries");
      view.translation = Eigen::Vector3d(t[0], t[1], t[2]);
      view.yaw_deg = jv.value("yaw_deg", 0.0);
      view.pitch_deg = jv.value("pitch_deg", 0.0);
      view.roll_deg = jv.value("roll_deg", 0.0);
      spec.views.push_back(view);
    }
    if (j.contains("injections")) {
      for (const auto& ji : j.at("injections")) {
        SynthInjection inj;
        inj.view_id = ji.at("view").get<int>();
        inj.superpixel_id = ji.at("superpixel").get<int>();
        inj.target_class = ji.at("class").get<int>();
        inj.magnitude = ji.value("magnitude", 1.0);
        inj.half = ji.value("half", false);
        spec.injections.push_back(inj);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec(std::string("malformed synth spec: ") + e.what());
  }
  return spec;
}

}  // namespace viewpcl
