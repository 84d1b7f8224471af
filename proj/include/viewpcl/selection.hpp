#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "viewpcl/detail/rng.hpp"
#include "viewpcl/errors.hpp"
#include "viewpcl/scoring.hpp"

namespace viewpcl {

enum class Policy { viewpcl, viewal, random };

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::viewpcl: return "viewpcl";
    case Policy::viewal: return "viewal";
    case Policy::random: return "random";
  }
  return "?";
}

inline Policy policy_from_string(const std::string& s) {
  if (s == "viewpcl") return Policy::viewpcl;
  if (s == "viewal") return Policy::viewal;
  if (s == "random") return Policy::random;
  throw ValidationError("unknown policy: " + s);
}

enum class BudgetMode { pixels, superpixels };

/// Labeling allowance for one selection batch.
struct Budget {
  BudgetMode mode = BudgetMode::pixels;
  std::uint64_t limit = 0;
  std::uint64_t consumed = 0;
};

struct RoundConfig {
  double budget_images = 1500.0;  // K image-equivalents selected per round
  double seed_fraction = 0.015;   // initially labeled fraction of images
  double min_projection_overlap = 0.25;  // C_R membership threshold
  std::uint64_t rng_seed = 0;
  BudgetMode budget_mode = BudgetMode::pixels;
};

/// Unlabeled candidates plus the already-labeled set; the two never overlap.
struct CandidatePool {
  std::set<SuperpixelKey> candidates;
  std::set<SuperpixelKey> labeled;
};

/// Cross-superpixel overlap counts derived from the overlap cache: for a
/// target superpixel R, overlaps[R][S] is the number of pixels of candidate
/// S that cross-project into R (depth-consistently).
struct SelectionGeometryIndex {
  std::map<SuperpixelKey, std::size_t> pixel_counts;
  std::map<SuperpixelKey, std::map<SuperpixelKey, std::size_t>> overlaps;
};

/// The index is exact for C_R membership as long as the cache's
/// min_relative_size does not exceed the selection threshold.
inline SelectionGeometryIndex build_selection_index(const SceneBundle& bundle,
                                                    const OverlapCache& cache) {
  SelectionGeometryIndex index;
  for (std::size_t vi = 0; vi < bundle.views.size(); ++vi) {
    if (!bundle.superpixels[vi])
      throw ValidationError("view " + std::to_string(bundle.views[vi].view_id) +
                            " has no superpixel map");
    const SuperpixelMap& sp = *bundle.superpixels[vi];
    for (int id = 0; id < sp.num_superpixels(); ++id)
      index.pixel_counts[{bundle.views[vi].view_id, id}] =
          sp.counts[static_cast<std::size_t>(id)];
  }
  for (const auto& [key, regions] : cache.regions) {
    for (const OverlapRegion& region : regions) {
      const SuperpixelMap& source_sp =
          *bundle.superpixels[static_cast<std::size_t>(bundle.view_index(region.source_view))];
      auto& row = index.overlaps[key];
      for (const PixelCorrespondence& c : region.correspondences)
        ++row[{region.source_view, source_sp.label_at(c.source_pixel)}];
    }
  }
  return index;
}

/// One policy step: the superpixel to annotate plus the redundant members of
/// C_R that leave the candidate pool with it.
struct SelectionStep {
  SuperpixelKey selected;
  std::vector<SuperpixelKey> removed;
};

namespace detail {

template <typename ScoreGetter>
SuperpixelKey argmax_candidate(const std::set<SuperpixelKey>& candidates,
                               const ScoreTable& scores, ScoreGetter&& get) {
  const SuperpixelKey* best = nullptr;
  double best_score = 0.0;
  for (const SuperpixelKey& key : candidates) {
    const auto it = scores.entries.find(key);
    if (it == scores.entries.end())
      throw ValidationError("score table does not cover candidate (" +
                            std::to_string(key.view_id) + "," +
                            std::to_string(key.superpixel_id) + ")");
    const double s = get(it->second);
    if (!best || s > best_score) {  // set iteration is ascending, so ties keep
      best = &key;                  // the lowest (view_id, superpixel_id)
      best_score = s;
    }
  }
  return *best;
}

/// Shared two-step policy: step-1 maximizer by `primary`, then the member of
/// C_R with the highest view divergence.
template <typename PrimaryGetter>
SelectionStep plan_two_step(const CandidatePool& pool, const ScoreTable& scores,
                            const SelectionGeometryIndex& index, const RoundConfig& cfg,
                            PrimaryGetter&& primary) {
  if (pool.candidates.empty()) throw EmptyPool("selection: empty candidate pool");
  const SuperpixelKey top = argmax_candidate(pool.candidates, scores, primary);

  std::set<SuperpixelKey> members;
  members.insert(top);  // self-overlap has relative size 1
  const auto row_it = index.overlaps.find(top);
  if (row_it != index.overlaps.end()) {
    const double top_size =
        static_cast<double>(index.pixel_counts.at(top));
    for (const auto& [candidate, count] : row_it->second) {
      if (!pool.candidates.contains(candidate)) continue;
      if (static_cast<double>(count) / top_size > cfg.min_projection_overlap)
        members.insert(candidate);
    }
  }

  const SuperpixelKey selected = argmax_candidate(
      members, scores, [](const ScoreEntry& e) { return e.view_divergence; });

  SelectionStep step;
  step.selected = selected;
  for (const SuperpixelKey& key : members)
    if (key != selected) step.removed.push_back(key);
  return step;
}

inline SuperpixelKey nth_candidate(const std::set<SuperpixelKey>& candidates,
                                   std::uint64_t n) {
  auto it = candidates.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(n));
  return *it;
}

}  // namespace detail

/// ViewPCL policy: highest viewpcl inconsistency score picks R*, then the
/// member of C_{R*} with the highest view divergence is annotated and the
/// rest of C_{R*} is dropped from further consideration.
inline SelectionStep plan_one_viewpcl(const CandidatePool& pool, const ScoreTable& scores,
                                      const SelectionGeometryIndex& index,
                                      const RoundConfig& cfg) {
  return detail::plan_two_step(pool, scores, index, cfg,
                               [](const ScoreEntry& e) { return e.viewpcl_score; });
}

/// ViewAL baseline: step (1) maximizes view entropy instead.
inline SelectionStep plan_one_viewal(const CandidatePool& pool, const ScoreTable& scores,
                                     const SelectionGeometryIndex& index,
                                     const RoundConfig& cfg) {
  return detail::plan_two_step(pool, scores, index, cfg,
                               [](const ScoreEntry& e) { return e.view_entropy; });
}

inline SelectionStep plan_one_random(const CandidatePool& pool, detail::SplitMix& rng) {
  if (pool.candidates.empty()) throw EmptyPool("selection: empty candidate pool");
  return {detail::nth_candidate(pool.candidates, rng.next_below(pool.candidates.size())),
          {}};
}

/// Removes the step's superpixels from the candidate set.
inline void apply_step(CandidatePool& pool, const SelectionStep& step) {
  pool.candidates.erase(step.selected);
  for (const SuperpixelKey& key : step.removed) pool.candidates.erase(key);
}

inline SelectionStep select_one_viewpcl(CandidatePool& pool, const ScoreTable& scores,
                                        const SelectionGeometryIndex& index,
                                        const RoundConfig& cfg) {
  const SelectionStep step = plan_one_viewpcl(pool, scores, index, cfg);
  apply_step(pool, step);
  return step;
}

inline SelectionStep select_one_viewal(CandidatePool& pool, const ScoreTable& scores,
                                       const SelectionGeometryIndex& index,
                                       const RoundConfig& cfg) {
  const SelectionStep step = plan_one_viewal(pool, scores, index, cfg);
  apply_step(pool, step);
  return step;
}

struct SelectionRecord {
  int round = 0;
  int rank = 0;
  SuperpixelKey key;
  std::uint64_t pixels = 0;
  double score = 0.0;  // the policy's primary score of the selected superpixel
};

/// Applies the policy until the budget would be exceeded or the pool empties.
/// Budget is consumed in pixels of the selected superpixels (pixel mode) or
/// per selection (superpixel mode); it never overshoots the limit.
inline std::vector<SelectionRecord> select_batch(CandidatePool& pool,
                                                 const ScoreTable& scores,
                                                 const SelectionGeometryIndex& index,
                                                 const RoundConfig& cfg, Budget& budget,
                                                 Policy policy, detail::SplitMix& rng) {
  std::vector<SelectionRecord> out;
  while (!pool.candidates.empty()) {
    SelectionStep step;
    switch (policy) {
      case Policy::viewpcl: step = plan_one_viewpcl(pool, scores, index, cfg); break;
      case Policy::viewal: step = plan_one_viewal(pool, scores, index, cfg); break;
      case Policy::random: step = plan_one_random(pool, rng); break;
    }
    const std::uint64_t pixels = index.pixel_counts.at(step.selected);
    const std::uint64_t cost = budget.mode == BudgetMode::pixels ? pixels : 1;
    if (budget.consumed + cost > budget.limit) break;
    budget.consumed += cost;
    apply_step(pool, step);
    pool.labeled.insert(step.selected);

    SelectionRecord record;
    record.rank = static_cast<int>(out.size()) + 1;
    record.key = step.selected;
    record.pixels = pixels;
    if (policy != Policy::random) {
      const ScoreEntry& e = scores.entries.at(step.selected);
      record.score = policy == Policy::viewpcl ? e.viewpcl_score : e.view_entropy;
    }
    out.push_back(record);
  }
  return out;
}

/// Source of per-view MC probability samples; stands in for the trained
/// network. Implementations may condition on the labeled set.
class ProbabilityProvider {
 public:
  virtual ~ProbabilityProvider() = default;
  virtual std::vector<std::vector<ClassProbabilityMap>> sample_maps(
      const std::set<SuperpixelKey>& labeled) = 0;
  virtual std::optional<double> quality_metric() { return std::nullopt; }
};

/// Serves the bundle's stored samples unchanged.
class StaticBundleProvider : public ProbabilityProvider {
 public:
  explicit StaticBundleProvider(const SceneBundle& bundle) : bundle_(bundle) {}
  std::vector<std::vector<ClassProbabilityMap>> sample_maps(
      const std::set<SuperpixelKey>&) override {
    return bundle_.prob_samples;
  }

 private:
  const SceneBundle& bundle_;
};

struct ScoreStats {
  double min = 0.0, mean = 0.0, max = 0.0;
};

struct RoundReport {
  int round = 0;
  double labeled_pixel_fraction = 0.0;
  std::uint64_t budget_limit = 0;
  std::uint64_t budget_consumed = 0;
  ScoreStats viewpcl_stats, entropy_stats, divergence_stats;
  std::vector<SelectionRecord> selections;
  std::optional<double> quality;
};

struct SimulationReport {
  std::string policy;
  std::vector<int> seed_views;
  std::vector<RoundReport> rounds;
};

namespace detail {

template <typename Getter>
ScoreStats candidate_stats(const ScoreTable& scores, const std::set<SuperpixelKey>& keys,
                           Getter&& get) {
  ScoreStats stats;
  if (keys.empty()) return stats;
  bool first = true;
  double total = 0.0;
  for (const SuperpixelKey& key : keys) {
    const double v = get(scores.entries.at(key));
    total += v;
    if (first || v < stats.min) stats.min = v;
    if (first || v > stats.max) stats.max = v;
    first = false;
  }
  stats.mean = total / static_cast<double>(keys.size());
  return stats;
}

inline std::uint64_t round_budget_limit(const SceneBundle& bundle, const RoundConfig& cfg) {
  if (cfg.budget_mode == BudgetMode::superpixels)
    return static_cast<std::uint64_t>(std::llround(cfg.budget_images));
  const double mean_pixels =
      static_cast<double>(bundle.total_pixels()) / static_cast<double>(bundle.views.size());
  return static_cast<std::uint64_t>(std::llround(cfg.budget_images * mean_pixels));
}

}  // namespace detail

/// Multi-round active-learning simulation: seed the labeled set, then per
/// round query the provider, average the MC samples, score, select a batch
/// and move it to the labeled set.
inline SimulationReport run_active_learning(const SceneBundle& bundle,
                                            ProbabilityProvider& provider, Policy policy,
                                            const RoundConfig& round_cfg,
                                            const PipelineConfig& pipeline_cfg,
                                            int num_rounds) {
  if (num_rounds < 1) throw ValidationError("num_rounds must be >= 1");
  validate_bundle(bundle);

  const GeometryContext ctx = build_geometry_context(bundle.views, pipeline_cfg.depth_tolerance);
  const OverlapCache cache =
      overlap_cache_from_context(bundle, ctx, pipeline_cfg.min_relative_size);
  const SelectionGeometryIndex index = build_selection_index(bundle, cache);

  detail::SplitMix rng(round_cfg.rng_seed);

  // Seed set: a random seed_fraction of the images, fully annotated.
  std::vector<int> view_ids;
  for (const ViewRecord& v : bundle.views) view_ids.push_back(v.view_id);
  std::sort(view_ids.begin(), view_ids.end());
  detail::shuffle(view_ids, rng);
  const auto num_seed = static_cast<std::size_t>(std::clamp<long long>(
      std::llround(round_cfg.seed_fraction * static_cast<double>(view_ids.size())), 0,
      static_cast<long long>(view_ids.size())));

  SimulationReport report;
  report.policy = to_string(policy);
  std::set<SuperpixelKey> labeled;
  for (std::size_t k = 0; k < num_seed; ++k) {
    report.seed_views.push_back(view_ids[k]);
    const int vi = bundle.view_index(view_ids[k]);
    for (int id = 0; id < bundle.superpixels[static_cast<std::size_t>(vi)]->num_superpixels(); ++id)
      labeled.insert({view_ids[k], id});
  }
  std::sort(report.seed_views.begin(), report.seed_views.end());

  const double total_pixels = static_cast<double>(bundle.total_pixels());
  const auto labeled_fraction = [&] {
    std::uint64_t n = 0;
    for (const SuperpixelKey& key : labeled) n += index.pixel_counts.at(key);
    return static_cast<double>(n) / total_pixels;
  };

  for (int round = 1; round <= num_rounds; ++round) {
    std::vector<std::vector<ClassProbabilityMap>> samples;
    std::optional<double> quality;
    try {
      samples = provider.sample_maps(labeled);
      quality = provider.quality_metric();
    } catch (const std::exception& e) {
      throw ProviderFailure("provider failed in round " + std::to_string(round) + ": " +
                            e.what());
    }
    if (samples.size() != bundle.views.size())
      throw ProviderFailure("provider returned " + std::to_string(samples.size()) +
                            " views in round " + std::to_string(round));

    std::vector<ClassProbabilityMap> avg_maps;
    avg_maps.reserve(samples.size());
    for (const auto& s : samples) avg_maps.push_back(mc_average(s));

    const ScoreTable scores = compute_score_table(bundle, ctx, cache, avg_maps, pipeline_cfg);

    CandidatePool pool;
    pool.labeled = labeled;
    for (const auto& [key, entry] : scores.entries)
      if (!labeled.contains(key)) pool.candidates.insert(key);

    RoundReport rr;
    rr.round = round;
    rr.quality = quality;
    rr.viewpcl_stats = detail::candidate_stats(
        scores, pool.candidates, [](const ScoreEntry& e) { return e.viewpcl_score; });
    rr.entropy_stats = detail::candidate_stats(
        scores, pool.candidates, [](const ScoreEntry& e) { return e.view_entropy; });
    rr.divergence_stats = detail::candidate_stats(
        scores, pool.candidates, [](const ScoreEntry& e) { return e.view_divergence; });

    Budget budget{round_cfg.budget_mode, detail::round_budget_limit(bundle, round_cfg), 0};
    rr.selections = select_batch(pool, scores, index, round_cfg, budget, policy, rng);
    for (SelectionRecord& rec : rr.selections) rec.round = round;
    for (const SelectionRecord& rec : rr.selections) labeled.insert(rec.key);

    rr.budget_limit = budget.limit;
    rr.budget_consumed = budget.consumed;
    rr.labeled_pixel_fraction = labeled_fraction();
    report.rounds.push_back(std::move(rr));
  }
  return report;
}

inline nlohmann::json stats_json(const ScoreStats& s) {
  return {{"min", s.min}, {"mean", s.mean}, {"max", s.max}};
}

inline nlohmann::json report_json(const SimulationReport& report) {
  nlohmann::json j;
  j["policy"] = report.policy;
  j["seed_views"] = report.seed_views;
  j["rounds"] = nlohmann::json::array();
  for (const RoundReport& rr : report.rounds) {
    nlohmann::json jr;
    jr["round"] = rr.round;
    jr["labeled_pixel_fraction"] = rr.labeled_pixel_fraction;
    jr["budget_limit"] = rr.budget_limit;
    jr["budget_consumed"] = rr.budget_consumed;
    jr["score_stats"] = {{"viewpcl", stats_json(rr.viewpcl_stats)},
                         {"view_entropy", stats_json(rr.entropy_stats)},
                         {"view_divergence", stats_json(rr.divergence_stats)}};
    jr["selections"] = nlohmann::json::array();
    for (const SelectionRecord& rec : rr.selections) {
      jr["selections"].push_back({{"rank", rec.rank},
                                  {"view_id", rec.key.view_id},
                                  {"superpixel_id", rec.key.superpixel_id},
                                  {"pixels", rec.pixels},
                                  {"score", rec.score}});
    }
    if (rr.quality)
      jr["quality"] = *rr.quality;
    else
      jr["quality"] = nullptr;
    j["rounds"].push_back(std::move(jr));
  }
  return j;
}

inline void write_selection_csv(const std::vector<SelectionRecord>& records,
                                std::ostream& os) {
  os << "round,rank,view_id,superpixel_id,pixels,score\n";
  for (const SelectionRecord& rec : records) {
    os << rec.round << ',' << rec.rank << ',' << rec.key.view_id << ','
       << rec.key.superpixel_id << ',' << rec.pixels << ','
       << detail::fmt_double(rec.score) << '\n';
  }
}

}  // namespace viewpcl
