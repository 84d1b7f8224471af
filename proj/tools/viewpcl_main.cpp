// viewpcl command line: bundle validation, superpixel generation, overlap
// precomputation, scoring, selection and multi-round simulation.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "viewpcl/viewpcl.hpp"

namespace {

struct CommonConfig {
  viewpcl::PipelineConfig pipeline;
  viewpcl::RoundConfig round;
};

void add_config_options(CLI::App* cmd, CommonConfig& cfg, std::string& config_path) {
  cmd->add_option("--policy-config", config_path,
                  "JSON file with pipeline/selection knobs (flags override it)");
  cmd->add_option("--depth-tol", cfg.pipeline.depth_tolerance,
                  "relative depth-consistency tolerance")
      ->capture_default_str();
  cmd->add_option("--min-overlap", cfg.pipeline.min_relative_size,
                  "minimum |D|/|R| for a cached overlap region")
      ->capture_default_str();
  cmd->add_option("--weight-threshold", cfg.pipeline.weight_threshold,
                  "point-cloud pruning threshold")
      ->capture_default_str();
  cmd->add_option("--order", cfg.pipeline.transport.order, "Wasserstein order p")
      ->capture_default_str();
  cmd->add_option("--projections", cfg.pipeline.transport.num_projections,
                  "sliced Wasserstein projection count")
      ->capture_default_str();
  cmd->add_option("--exact-cutoff", cfg.pipeline.transport.exact_cutoff,
                  "max atoms per side for the exact transport path")
      ->capture_default_str();
  cmd->add_option("--min-projection-overlap", cfg.round.min_projection_overlap,
                  "relative-size threshold for candidate removal")
      ->capture_default_str();
}

/// Applies config-file values, except where an explicit flag already set the
/// field (flags take precedence over the file).
void load_config_file(const CLI::App* cmd, const std::string& path, CommonConfig& cfg) {
  if (path.empty()) return;
  std::ifstream is(path);
  if (!is) throw viewpcl::MissingFile("missing config file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw viewpcl::ValidationError("cannot parse config " + path + ": " + e.what());
  }
  const auto apply = [&](const char* flag, const char* key, auto& field) {
    if (cmd->count(flag) == 0) field = j.value(key, field);
  };
  apply("--depth-tol", "depth_tolerance", cfg.pipeline.depth_tolerance);
  apply("--min-overlap", "min_relative_size", cfg.pipeline.min_relative_size);
  apply("--weight-threshold", "weight_threshold", cfg.pipeline.weight_threshold);
  apply("--order", "order", cfg.pipeline.transport.order);
  apply("--projections", "num_projections", cfg.pipeline.transport.num_projections);
  apply("--exact-cutoff", "exact_cutoff", cfg.pipeline.transport.exact_cutoff);
  cfg.pipeline.transport.rng_seed = j.value("rng_seed", cfg.pipeline.transport.rng_seed);
  apply("--min-projection-overlap", "min_projection_overlap",
        cfg.round.min_projection_overlap);
}

std::vector<viewpcl::ClassProbabilityMap> averaged_maps(const viewpcl::SceneBundle& bundle) {
  std::vector<viewpcl::ClassProbabilityMap> maps;
  maps.reserve(bundle.views.size());
  for (const auto& samples : bundle.prob_samples)
    maps.push_back(viewpcl::mc_average(samples));
  return maps;
}

viewpcl::ScoreTable score_bundle(const viewpcl::SceneBundle& bundle,
                                 const std::filesystem::path& dir,
                                 const CommonConfig& cfg) {
  const viewpcl::GeometryContext ctx =
      viewpcl::build_geometry_context(bundle.views, cfg.pipeline.depth_tolerance);
  const viewpcl::OverlapCache cache = viewpcl::precompute_overlaps(
      bundle, cfg.pipeline.depth_tolerance, cfg.pipeline.min_relative_size,
      dir / "overlaps.vpc");
  return viewpcl::compute_score_table(bundle, ctx, cache, averaged_maps(bundle),
                                      cfg.pipeline);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw viewpcl::MissingFile("cannot write " + path);
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viewpcl: multi-view inconsistency scoring and superpixel selection"};
  app.require_subcommand(1);

  std::string bundle_path, config_path, out_path, csv_path, json_path, spec_path;
  CommonConfig cfg;
  int superpixel_count = 40;
  std::string policy_name = "viewpcl";
  double budget = 1500.0;
  std::string budget_mode = "pixels";
  int rounds = 1;
  std::uint64_t seed = 0;
  double seed_fraction = 0.015;

  auto* validate = app.add_subcommand("validate", "check a bundle against all invariants");
  validate->add_option("bundle", bundle_path, "bundle directory")->required();

  auto* superpixels =
      app.add_subcommand("superpixels", "generate grid superpixels for every view");
  superpixels->add_option("bundle", bundle_path, "bundle directory")->required();
  superpixels->add_option("--count", superpixel_count, "superpixels per image")
      ->capture_default_str();

  auto* overlaps = app.add_subcommand("overlaps", "precompute the overlap-region cache");
  overlaps->add_option("bundle", bundle_path, "bundle directory")->required();
  std::string overlaps_config;
  add_config_options(overlaps, cfg, overlaps_config);

  auto* score = app.add_subcommand("score", "compute the per-superpixel score table");
  score->add_option("bundle", bundle_path, "bundle directory")->required();
  score->add_option("--csv", csv_path, "write CSV here (default: stdout)");
  score->add_option("--json", json_path, "also write JSON here");
  std::string score_config;
  add_config_options(score, cfg, score_config);

  auto* select = app.add_subcommand("select", "select superpixels to annotate");
  select->add_option("bundle", bundle_path, "bundle directory")->required();
  select->add_option("--policy", policy_name, "viewpcl | viewal | random")
      ->check(CLI::IsMember({"viewpcl", "viewal", "random"}))
      ->capture_default_str();
  select->add_option("--budget", budget, "image-equivalents to select (K)")
      ->capture_default_str();
  select->add_option("--budget-mode", budget_mode, "pixels | superpixels")
      ->check(CLI::IsMember({"pixels", "superpixels"}))
      ->capture_default_str();
  select->add_option("--seed", seed, "rng seed")->capture_default_str();
  select->add_option("--out", out_path, "write selection CSV here (default: stdout)");
  std::string select_config;
  add_config_options(select, cfg, select_config);

  auto* simulate = app.add_subcommand("simulate", "run active-learning rounds");
  simulate->add_option("bundle", bundle_path, "bundle directory")->required();
  simulate->add_option("--rounds", rounds, "number of rounds")->capture_default_str();
  simulate->add_option("--policy", policy_name, "viewpcl | viewal | random")
      ->check(CLI::IsMember({"viewpcl", "viewal", "random"}))
      ->capture_default_str();
  simulate->add_option("--seed", seed, "rng seed")->capture_default_str();
  simulate->add_option("--budget", budget, "image-equivalents per round (K)")
      ->capture_default_str();
  simulate->add_option("--budget-mode", budget_mode, "pixels | superpixels")
      ->check(CLI::IsMember({"pixels", "superpixels"}))
      ->capture_default_str();
  simulate->add_option("--seed-fraction", seed_fraction,
                       "fraction of images fully labeled as the seed set")
      ->capture_default_str();
  simulate->add_option("--out", out_path, "write the report JSON here (default: stdout)");
  std::string simulate_config;
  add_config_options(simulate, cfg, simulate_config);

  auto* synth = app.add_subcommand("synth", "render a synthetic bundle from a spec");
  synth->add_option("--spec", spec_path, "synth spec JSON")->required();
  synth->add_option("--out", out_path, "output bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (validate->parsed()) {
      const viewpcl::SceneBundle bundle = viewpcl::load_bundle(bundle_path);
      int with_sp = 0;
      for (const auto& sp : bundle.superpixels) with_sp += sp.has_value();
      std::cout << "ok: " << bundle.views.size() << " views, " << bundle.num_classes
                << " classes, " << bundle.mc_samples << " MC samples, " << with_sp
                << " superpixel maps\n";
      return 0;
    }

    if (superpixels->parsed()) {
      viewpcl::SceneBundle bundle = viewpcl::load_bundle(bundle_path);
      for (std::size_t vi = 0; vi < bundle.views.size(); ++vi)
        bundle.superpixels[vi] = viewpcl::grid_superpixels(
            bundle.views[vi].width, bundle.views[vi].height, superpixel_count);
      viewpcl::save_bundle(bundle, bundle_path);
      std::cout << "wrote " << superpixel_count << " superpixels per view for "
                << bundle.views.size() << " views\n";
      return 0;
    }

    if (overlaps->parsed()) {
      load_config_file(overlaps, overlaps_config, cfg);
      const viewpcl::SceneBundle bundle = viewpcl::load_bundle(bundle_path);
      const viewpcl::OverlapCache cache = viewpcl::precompute_overlaps(
          bundle, cfg.pipeline.depth_tolerance, cfg.pipeline.min_relative_size,
          std::filesystem::path(bundle_path) / "overlaps.vpc");
      std::size_t total = 0;
      for (const auto& [key, regions] : cache.regions) total += regions.size();
      std::cout << "cached " << total << " overlap regions for " << cache.regions.size()
                << " superpixels (depth-tol " << cache.depth_tolerance << ", min-overlap "
                << cache.min_relative_size << ")\n";
      return 0;
    }

    if (score->parsed()) {
      load_config_file(score, score_config, cfg);
      const viewpcl::SceneBundle bundle = viewpcl::load_bundle(bundle_path);
      const viewpcl::ScoreTable table = score_bundle(bundle, bundle_path, cfg);
      std::ostringstream csv;
      viewpcl::write_score_csv(table, csv);
      write_text(csv_path, csv.str());
      if (!json_path.empty())
        write_text(json_path, viewpcl::score_table_json(table).dump(2) + "\n");
      return 0;
    }

    if (select->parsed()) {
      load_config_file(select, select_config, cfg);
      const viewpcl::Policy policy = viewpcl::policy_from_string(policy_name);
      const viewpcl::SceneBundle bundle = viewpcl::load_bundle(bundle_path);
      const viewpcl::OverlapCache cache = viewpcl::precompute_overlaps(
          bundle, cfg.pipeline.depth_tolerance, cfg.pipeline.min_relative_size,
          std::filesystem::path(bundle_path) / "overlaps.vpc");
      const viewpcl::SelectionGeometryIndex index =
          viewpcl::build_selection_index(bundle, cache);

      viewpcl::ScoreTable table;
      if (policy == viewpcl::Policy::random) {
        for (const auto& [key, pixels] : index.pixel_counts)
          table.entries.emplace(key, viewpcl::ScoreEntry{});
      } else {
        const viewpcl::GeometryContext ctx = viewpcl::build_geometry_context(
            bundle.views, cfg.pipeline.depth_tolerance);
        table = viewpcl::compute_score_table(bundle, ctx, cache, averaged_maps(bundle),
                                             cfg.pipeline);
      }

      viewpcl::CandidatePool pool;
      for (const auto& [key, pixels] : index.pixel_counts) pool.candidates.insert(key);

      cfg.round.rng_seed = seed;
      cfg.round.budget_images = budget;
      cfg.round.budget_mode = budget_mode == "superpixels"
                                  ? viewpcl::BudgetMode::superpixels
                                  : viewpcl::BudgetMode::pixels;
      viewpcl::Budget b{cfg.round.budget_mode,
                        viewpcl::detail::round_budget_limit(bundle, cfg.round), 0};
      viewpcl::detail::SplitMix rng(seed);
      std::vector<viewpcl::SelectionRecord> records =
          viewpcl::select_batch(pool, table, index, cfg.round, b, policy, rng);

      std::ostringstream csv;
      viewpcl::write_selection_csv(records, csv);
      write_text(out_path, csv.str());
      return 0;
    }

    if (simulate->parsed()) {
      load_config_file(simulate, simulate_config, cfg);
      const viewpcl::Policy policy = viewpcl::policy_from_string(policy_name);
      const viewpcl::SceneBundle bundle = viewpcl::load_bundle(bundle_path);
      cfg.round.rng_seed = seed;
      cfg.round.budget_images = budget;
      cfg.round.seed_fraction = seed_fraction;
      cfg.round.budget_mode = budget_mode == "superpixels"
                                  ? viewpcl::BudgetMode::superpixels
                                  : viewpcl::BudgetMode::pixels;
      viewpcl::StaticBundleProvider provider(bundle);
      const viewpcl::SimulationReport report = viewpcl::run_active_learning(
          bundle, provider, policy, cfg.round, cfg.pipeline, rounds);
      write_text(out_path, viewpcl::report_json(report).dump(2) + "\n");
      return 0;
    }

    if (synth->parsed()) {
      std::ifstream is(spec_path);
      if (!is) throw viewpcl::MissingFile("missing spec file: " + spec_path);
      nlohmann::json j;
      try {
        is >> j;
      } catch (const nlohmann::json::exception& e) {
        throw viewpcl::InvalidSpec(std::string("cannot parse spec: ") + e.what());
      }
      const viewpcl::SceneBundle bundle =
          viewpcl::synth_scene(viewpcl::synth_spec_from_json(j));
      viewpcl::save_bundle(bundle, out_path);
      std::cout << "wrote bundle with " << bundle.views.size() << " views to " << out_path
                << "\n";
      return 0;
    }
  } catch (const viewpcl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
