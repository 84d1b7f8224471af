#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "viewpcl/detail/parallel.hpp"
#include "viewpcl/errors.hpp"
#include "viewpcl/scenebundle.hpp"
#include "viewpcl/transport.hpp"

namespace viewpcl {

/// Knobs shared by the scoring pipeline and its callers.
struct PipelineConfig {
  double depth_tolerance = 0.03;    // relative depth-consistency tolerance
  double min_relative_size = 0.1;   // overlap-region cache threshold |D|/|R|
  double weight_threshold = 1e-3;   // point-cloud pruning threshold
  TransportConfig transport;
};

/// The (P1, P2, q) triple of one overlap subregion D; all three are indexed
/// by the same ordered pixel list.
struct SubregionScoreInput {
  RegionProbabilityFamily family_p1;  // target-view maps restricted to D
  RegionProbabilityFamily family_p2;  // maps cross-projected from the source view
  SelectionDistribution q;
};

/// Class probability maps cross-projected onto one pixel from other views.
struct CrossProjectionSet {
  PixelCoord pixel;
  std::vector<std::vector<double>> maps;
};

struct ScoreEntry {
  double viewpcl_score = 0.0;
  double view_entropy = 0.0;
  double view_divergence = 0.0;
  int coverage = 0;  // number of overlap regions feeding viewpcl_score
};

struct ScoreTable {
  std::map<SuperpixelKey, ScoreEntry> entries;
};

namespace detail {
inline void check_subregion_input(const SubregionScoreInput& input) {
  if (input.family_p1.region != input.family_p2.region ||
      input.family_p1.region != input.q.region)
    throw RegionMismatch("subregion input: P1, P2 and q must share one region");
  if (input.family_p1.region.empty())
    throw EmptyRegion("subregion input: empty region");
}

inline int argmax_class(const std::vector<double>& p) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(p.size()); ++c)
    if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)]) best = c;
  return best;
}
}  // namespace detail

/// Most probable class of each family under q; ties go to the lowest index.
inline std::pair<int, int> prominent_classes(const SubregionScoreInput& input) {
  detail::check_subregion_input(input);
  return {detail::argmax_class(induced_class_prob(input.family_p1, input.q)),
          detail::argmax_class(induced_class_prob(input.family_p2, input.q))};
}

/// s(D) = [W(mu1^{c1}, mu2^{c1}) + W(mu1^{c2}, mu2^{c2})] / 2 with the
/// absent-side escape routing of dissimilarity(); point clouds are pruned
/// before transport.
inline double subregion_score(const SubregionScoreInput& input,
                              const TransportConfig& transport_cfg,
                              double weight_threshold = 1e-3) {
  detail::check_subregion_input(input);
  const auto [c1, c2] = prominent_classes(input);

  const auto cloud = [&](const RegionProbabilityFamily& family, int c) {
    auto mu = maybe_point_cloud_distribution(family, input.q, c);
    if (mu) mu = prune_and_renormalize(*mu, weight_threshold);
    return mu;
  };
  const auto term = [&](int c) {
    return dissimilarity(cloud(input.family_p1, c), cloud(input.family_p2, c),
                         input.q.region, transport_cfg);
  };
  return 0.5 * (term(c1) + term(c2));
}

struct RegionScore {
  double relative_size = 0.0;  // w(D) = |D| / |R|
  double score = 0.0;          // s(D)
};

/// s(R): overlap-size-weighted mean of subregion scores; 0 with no regions.
inline double superpixel_viewpcl_score(const std::vector<RegionScore>& regions) {
  double weighted = 0.0, total = 0.0;
  for (const RegionScore& r : regions) {
    weighted += r.relative_size * r.score;
    total += r.relative_size;
  }
  return total > 0.0 ? weighted / total : 0.0;
}

/// Entropy of the mean cross-projected distribution Q_i^z.
inline double view_entropy(const CrossProjectionSet& omega) {
  if (omega.maps.empty()) throw EmptyOmega("view_entropy: empty omega");
  const std::size_t num_classes = omega.maps.front().size();
  double entropy = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    double q = 0.0;
    for (const auto& map : omega.maps) q += map[c];
    q /= static_cast<double>(omega.maps.size());
    if (q > 0.0) entropy -= q * std::log(q);
  }
  return entropy;
}

/// Mean KL divergence from the pixel's own map to each cross-projected map.
/// Zero-numerator terms contribute 0; denominators are clamped at 1e-12.
inline double view_divergence(std::span<const double> own_map,
                              const CrossProjectionSet& omega) {
  if (omega.maps.empty()) throw EmptyOmega("view_divergence: empty omega");
  double total = 0.0;
  for (const auto& map : omega.maps) {
    double kl = 0.0;
    for (std::size_t c = 0; c < own_map.size(); ++c) {
      const double a = own_map[c];
      if (a > 0.0) kl += a * std::log(a / std::max(map[c], 1e-12));
    }
    total += kl;
  }
  return total / static_cast<double>(omega.maps.size());
}

struct PixelBaseline {
  double view_entropy = 0.0;
  double view_divergence = 0.0;
  bool scored = false;  // false when omega was empty
};

/// Arithmetic means over the scored pixels of R; (0, 0) when none is scored.
inline std::pair<double, double> superpixel_baseline_scores(
    const std::vector<PixelBaseline>& pixels) {
  if (pixels.empty()) throw EmptyRegion("superpixel_baseline_scores: empty superpixel");
  double ve = 0.0, vd = 0.0;
  std::size_t n = 0;
  for (const PixelBaseline& p : pixels) {
    if (!p.scored) continue;
    ve += p.view_entropy;
    vd += p.view_divergence;
    ++n;
  }
  if (n == 0) return {0.0, 0.0};
  return {ve / static_cast<double>(n), vd / static_cast<double>(n)};
}

namespace detail {

inline std::vector<double> map_vector(const ClassProbabilityMap& map, PixelCoord p) {
  const auto row = map.at(p);
  return std::vector<double>(row.begin(), row.end());
}

/// Scores every superpixel of one view: viewpcl scores from the cached
/// overlap regions, ViewAL scores from the full correspondence set.
inline void score_one_view(const SceneBundle& bundle, const GeometryContext& ctx,
                           const OverlapCache& cache,
                           const std::vector<ClassProbabilityMap>& avg_maps,
                           const PipelineConfig& cfg, std::size_t vi,
                           std::map<SuperpixelKey, ScoreEntry>& out) {
  const ViewRecord& view = bundle.views[vi];
  const SuperpixelMap& sp = *bundle.superpixels[vi];
  const ClassProbabilityMap& own = avg_maps[vi];
  const int num_classes = own.num_classes;

  // ViewAL accumulators over the cross-projection sets Omega_i^z. VE needs
  // the per-class sum, VD the per-class sum of clamped logs.
  const std::size_t num_pixels = view.pixel_count();
  std::vector<std::uint32_t> omega_count(num_pixels, 0);
  std::vector<double> omega_sum(num_pixels * num_classes, 0.0);
  std::vector<double> omega_logsum(num_pixels * num_classes, 0.0);
  for (const ViewPairCorrespondences& pair : ctx.pairs) {
    if (pair.target_view != view.view_id) continue;
    const ClassProbabilityMap& source_map =
        avg_maps[static_cast<std::size_t>(bundle.view_index(pair.source_view))];
    for (const PixelCorrespondence& c : pair.correspondences) {
      const std::size_t z =
          static_cast<std::size_t>(c.target_pixel.row) * view.width + c.target_pixel.col;
      ++omega_count[z];
      const auto probs = source_map.at(c.source_pixel);
      for (int k = 0; k < num_classes; ++k) {
        omega_sum[z * num_classes + k] += probs[static_cast<std::size_t>(k)];
        omega_logsum[z * num_classes + k] +=
            std::log(std::max<double>(probs[static_cast<std::size_t>(k)], 1e-12));
      }
    }
  }

  for (int id = 0; id < sp.num_superpixels(); ++id) {
    ScoreEntry entry;

    // viewpcl inconsistency score over the cached overlap regions
    std::vector<RegionScore> region_scores;
    const auto it = cache.regions.find({view.view_id, id});
    if (it != cache.regions.end()) {
      for (const OverlapRegion& region : it->second) {
        const ClassProbabilityMap& source_map =
            avg_maps[static_cast<std::size_t>(bundle.view_index(region.source_view))];
        SubregionScoreInput input;
        input.family_p1.region.reserve(region.correspondences.size());
        for (const PixelCorrespondence& c : region.correspondences) {
          input.family_p1.region.push_back(c.target_pixel);
          input.family_p1.maps.push_back(map_vector(own, c.target_pixel));
          input.family_p2.maps.push_back(map_vector(source_map, c.source_pixel));
        }
        input.family_p2.region = input.family_p1.region;
        input.q = uniform_selection(input.family_p1.region);
        region_scores.push_back(
            {region.relative_size,
             subregion_score(input, cfg.transport, cfg.weight_threshold)});
      }
    }
    entry.viewpcl_score = superpixel_viewpcl_score(region_scores);
    entry.coverage = static_cast<int>(region_scores.size());

    // ViewAL superpixel scores: means over pixels with nonempty omega
    double ve = 0.0, vd = 0.0;
    std::size_t scored = 0;
    for (int r = 0; r < view.height; ++r) {
      for (int c = 0; c < view.width; ++c) {
        const std::size_t z = static_cast<std::size_t>(r) * view.width + c;
        if (sp.labels[z] != id || omega_count[z] == 0) continue;
        const double inv = 1.0 / omega_count[z];
        const auto own_probs = own.at({r, c});
        double entropy = 0.0, divergence = 0.0;
        for (int k = 0; k < num_classes; ++k) {
          const double q = omega_sum[z * num_classes + k] * inv;
          if (q > 0.0) entropy -= q * std::log(q);
          const double a = own_probs[static_cast<std::size_t>(k)];
          if (a > 0.0)
            divergence += a * (std::log(a) - omega_logsum[z * num_classes + k] * inv);
        }
        ve += entropy;
        vd += divergence;
        ++scored;
      }
    }
    if (scored > 0) {
      entry.view_entropy = ve / static_cast<double>(scored);
      entry.view_divergence = vd / static_cast<double>(scored);
    }
    out.emplace(SuperpixelKey{view.view_id, id}, entry);
  }
}

}  // namespace detail

/// Full score table over every superpixel of every view. Views are scored in
/// parallel; the table merge is the single synchronization point.
inline ScoreTable compute_score_table(const SceneBundle& bundle,
                                      const GeometryContext& ctx,
                                      const OverlapCache& cache,
                                      const std::vector<ClassProbabilityMap>& avg_maps,
                                      const PipelineConfig& cfg) {
  if (avg_maps.size() != bundle.views.size())
    throw DimensionMismatch("compute_score_table: one averaged map per view required");
  for (std::size_t vi = 0; vi < bundle.views.size(); ++vi)
    if (!bundle.superpixels[vi])
      throw ValidationError("view " + std::to_string(bundle.views[vi].view_id) +
                            " has no superpixel map");

  std::vector<std::map<SuperpixelKey, ScoreEntry>> partial(bundle.views.size());
  detail::parallel_for(bundle.views.size(), [&](std::size_t vi) {
    detail::score_one_view(bundle, ctx, cache, avg_maps, cfg, vi, partial[vi]);
  });

  ScoreTable table;
  for (auto& part : partial) table.entries.merge(part);
  return table;
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_score_csv(const ScoreTable& table, std::ostream& os) {
  os << "view_id,superpixel_id,viewpcl_score,view_entropy,view_divergence,coverage\n";
  for (const auto& [key, e] : table.entries) {
    os << key.view_id << ',' << key.superpixel_id << ','
       << detail::fmt_double(e.viewpcl_score) << ',' << detail::fmt_double(e.view_entropy)
       << ',' << detail::fmt_double(e.view_divergence) << ',' << e.coverage << '\n';
  }
}

inline nlohmann::json score_table_json(const ScoreTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, e] : table.entries) {
    rows.push_back({{"view_id", key.view_id},
                    {"superpixel_id", key.superpixel_id},
                    {"viewpcl_score", e.viewpcl_score},
                    {"view_entropy", e.view_entropy},
                    {"view_divergence", e.view_divergence},
                    {"coverage", e.coverage}});
  }
  return rows;
}

}  // namespace viewpcl
