#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "support/oracles.hpp"
#include "viewpcl/scoring.hpp"
#include "viewpcl/synth.hpp"

using viewpcl::CrossProjectionSet;
using viewpcl::PixelCoord;
using viewpcl::SubregionScoreInput;

namespace {

SubregionScoreInput make_input(std::vector<PixelCoord> region,
                               std::vector<std::vector<double>> p1,
                               std::vector<std::vector<double>> p2) {
  SubregionScoreInput input;
  input.family_p1.region = region;
  input.family_p1.maps = std::move(p1);
  input.family_p2.region = region;
  input.family_p2.maps = std::move(p2);
  input.q = viewpcl::uniform_selection(region);
  return input;
}

viewpcl::SynthSpec four_view_spec(double noise, std::uint64_t seed) {
  viewpcl::SynthSpec spec;
  spec.width = 48;
  spec.height = 48;
  spec.num_classes = 3;
  spec.mc_samples = 2;
  spec.superpixel_count = 16;
  spec.noise = noise;
  spec.rng_seed = seed;
  spec.planes = {{4.0, -4.0, 4.0, -4.0, 4.0, 0}, {2.0, -0.8, 0.3, -0.8, 0.3, 1}};
  spec.views.resize(4);
  spec.views[1].translation = Eigen::Vector3d(0.18, 0.0, 0.0);
  spec.views[2].translation = Eigen::Vector3d(-0.18, 0.05, 0.0);
  spec.views[3].translation = Eigen::Vector3d(0.0, -0.15, 0.0);
  return spec;
}

}  // namespace

TEST_CASE("prominent_classes") {
  const std::vector<PixelCoord> region{{0, 0}, {0, 1}};

  SECTION("identical families agree") {
    const auto input = make_input(region, {{0.7, 0.3}, {0.2, 0.8}}, {{0.7, 0.3}, {0.2, 0.8}});
    const auto [c1, c2] = viewpcl::prominent_classes(input);
    REQUIRE(c1 == c2);
  }

  SECTION("hand argmax") {
    const auto input = make_input(region, {{0.6, 0.4}, {0.6, 0.4}}, {{0.3, 0.7}, {0.3, 0.7}});
    const auto [c1, c2] = viewpcl::prominent_classes(input);
    REQUIRE(c1 == 0);
    REQUIRE(c2 == 1);
  }

  SECTION("exact tie prefers the lowest class") {
    const auto input = make_input(region, {{1.0, 0.0}, {0.0, 1.0}}, {{0.5, 0.5}, {0.5, 0.5}});
    REQUIRE(viewpcl::prominent_classes(input).first == 0);
  }
}

TEST_CASE("subregion_score") {
  viewpcl::TransportConfig cfg;

  SECTION("identical families score zero") {
    const std::vector<PixelCoord> region{{0, 0}, {0, 1}, {1, 0}};
    const std::vector<std::vector<double>> maps{{0.7, 0.3}, {0.2, 0.8}, {0.5, 0.5}};
    REQUIRE(viewpcl::subregion_score(make_input(region, maps, maps), cfg) ==
            Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("swapped one-hots move the full mass between the two pixels") {
    const std::vector<PixelCoord> region{{0, 0}, {0, 3}};
    const auto input = make_input(region, {{1.0, 0.0}, {0.0, 1.0}}, {{0.0, 1.0}, {1.0, 0.0}});
    // c1 = c2 = 0 by tie-break; mu1^0 = delta_z1, mu2^0 = delta_z2
    REQUIRE(viewpcl::subregion_score(input, cfg) == Catch::Approx(3.0).margin(1e-12));
  }

  SECTION("equal prominent classes average two equal terms") {
    const std::vector<PixelCoord> region{{0, 0}, {0, 2}};
    const auto input = make_input(region, {{0.9, 0.1}, {0.6, 0.4}}, {{0.6, 0.4}, {0.9, 0.1}});
    const auto [c1, c2] = viewpcl::prominent_classes(input);
    REQUIRE(c1 == c2);
    const auto mu1 = viewpcl::point_cloud_distribution(input.family_p1, input.q, c1);
    const auto mu2 = viewpcl::point_cloud_distribution(input.family_p2, input.q, c1);
    const double w = viewpcl::exact_wasserstein(mu1, mu2, cfg).first;
    REQUIRE(viewpcl::subregion_score(input, cfg) == Catch::Approx(w).margin(1e-12));
  }

  SECTION("absent class on one side routes to the escape cost") {
    // P1 is all class 1, P2 all class 0: both terms escape a uniform cloud.
    std::vector<PixelCoord> region;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) region.push_back({r, c});
    std::vector<std::vector<double>> p1(9, {0.0, 1.0}), p2(9, {1.0, 0.0});
    const auto input = make_input(region, p1, p2);
    const auto uniform = viewpcl::point_cloud_distribution(input.family_p1, input.q, 1);
    const double escape = viewpcl::escape_cost(uniform, region, cfg);
    REQUIRE(viewpcl::subregion_score(input, cfg) == Catch::Approx(escape).margin(1e-12));
    REQUIRE(escape > 0.0);
  }

  SECTION("symmetric under swapping P1 and P2 when both classes survive") {
    viewpcl::detail::SplitMix rng(17);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<PixelCoord> region;
      std::vector<std::vector<double>> p1, p2;
      for (int i = 0; i < 6; ++i) {
        region.push_back({i / 3, i % 3});
        const auto fill = [&] {
          std::vector<double> v(3);
          double total = 0.0;
          for (double& x : v) {
            x = 0.05 + rng.next_unit();
            total += x;
          }
          for (double& x : v) x /= total;
          return v;
        };
        p1.push_back(fill());
        p2.push_back(fill());
      }
      const auto fwd = make_input(region, p1, p2);
      const auto rev = make_input(region, p2, p1);
      REQUIRE(viewpcl::subregion_score(fwd, cfg) ==
              Catch::Approx(viewpcl::subregion_score(rev, cfg)).margin(1e-8));
    }
  }

  SECTION("invariant under class relabeling that keeps the argmax order") {
    const std::vector<PixelCoord> region{{0, 0}, {0, 1}, {1, 1}};
    const std::vector<std::vector<double>> p1{{0.7, 0.1, 0.2}, {0.1, 0.3, 0.6}, {0.5, 0.2, 0.3}};
    const std::vector<std::vector<double>> p2{{0.2, 0.5, 0.3}, {0.4, 0.4, 0.2}, {0.1, 0.8, 0.1}};
    const auto permute = [](const std::vector<std::vector<double>>& maps) {
      // permutation (0 1 2) -> (1 2 0) applied to class axes
      std::vector<std::vector<double>> out;
      for (const auto& m : maps) out.push_back({m[2], m[0], m[1]});
      return out;
    };
    const double base = viewpcl::subregion_score(make_input(region, p1, p2), cfg);
    const double relabeled =
        viewpcl::subregion_score(make_input(region, permute(p1), permute(p2)), cfg);
    REQUIRE(base == relabeled);  // bit-identical: same point clouds either way
  }

  SECTION("invariant under pixel enumeration order") {
    viewpcl::detail::SplitMix rng(23);
    std::vector<PixelCoord> region{{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 2}};
    std::vector<std::vector<double>> p1, p2;
    for (std::size_t i = 0; i < region.size(); ++i) {
      p1.push_back({0.2 + 0.1 * i, 0.8 - 0.1 * i});
      p2.push_back({0.7 - 0.1 * i, 0.3 + 0.1 * i});
    }
    const double base = viewpcl::subregion_score(make_input(region, p1, p2), cfg);

    std::vector<std::size_t> order{4, 2, 0, 3, 1};
    std::vector<PixelCoord> region2;
    std::vector<std::vector<double>> q1, q2;
    for (const std::size_t i : order) {
      region2.push_back(region[i]);
      q1.push_back(p1[i]);
      q2.push_back(p2[i]);
    }
    REQUIRE(viewpcl::subregion_score(make_input(region2, q1, q2), cfg) ==
            Catch::Approx(base).margin(1e-9));
  }
}

TEST_CASE("superpixel_viewpcl_score") {
  SECTION("single region passes through") {
    REQUIRE(viewpcl::superpixel_viewpcl_score({{0.4, 2.5}}) == Catch::Approx(2.5));
  }
  SECTION("hand weighted mean") {
    REQUIRE(viewpcl::superpixel_viewpcl_score({{0.5, 1.0}, {0.25, 4.0}}) ==
            Catch::Approx(2.0));
  }
  SECTION("zero scores and empty lists give zero") {
    REQUIRE(viewpcl::superpixel_viewpcl_score({{0.5, 0.0}, {1.0, 0.0}}) == 0.0);
    REQUIRE(viewpcl::superpixel_viewpcl_score({}) == 0.0);
  }
  SECTION("stays within the convex hull of the subregion scores") {
    viewpcl::detail::SplitMix rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<viewpcl::RegionScore> regions;
      double lo = 1e9, hi = -1e9;
      for (int i = 0; i < 5; ++i) {
        const double s = rng.next_unit() * 10.0;
        regions.push_back({0.1 + rng.next_unit(), s});
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
      const double v = viewpcl::superpixel_viewpcl_score(regions);
      REQUIRE(v >= lo - 1e-12);
      REQUIRE(v <= hi + 1e-12);
    }
  }
}

TEST_CASE("view_entropy") {
  SECTION("uniform mean distribution attains ln C") {
    CrossProjectionSet omega{{0, 0}, {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    REQUIRE(viewpcl::view_entropy(omega) == Catch::Approx(std::log(3.0)).margin(1e-12));
  }
  SECTION("one-hot mean has zero entropy") {
    CrossProjectionSet omega{{0, 0}, {{0.0, 1.0}, {0.0, 1.0}}};
    REQUIRE(viewpcl::view_entropy(omega) == Catch::Approx(0.0).margin(0.0));
  }
  SECTION("hand entropy of a half-half mean") {
    CrossProjectionSet omega{{0, 0}, {{0.5, 0.5, 0.0}}};
    REQUIRE(viewpcl::view_entropy(omega) == Catch::Approx(std::log(2.0)).margin(1e-12));
  }
  SECTION("empty omega is an error") {
    REQUIRE_THROWS_AS(viewpcl::view_entropy({{0, 0}, {}}), viewpcl::EmptyOmega);
  }
  SECTION("bounded by [0, ln C]") {
    viewpcl::detail::SplitMix rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      CrossProjectionSet omega;
      omega.pixel = {0, 0};
      for (int m = 0; m < 3; ++m) {
        std::vector<double> v(4);
        double total = 0.0;
        for (double& x : v) {
          x = rng.next_unit();
          total += x;
        }
        for (double& x : v) x /= total;
        omega.maps.push_back(std::move(v));
      }
      const double ve = viewpcl::view_entropy(omega);
      REQUIRE(ve >= 0.0);
      REQUIRE(ve <= std::log(4.0) + 1e-12);
    }
  }
}

TEST_CASE("view_divergence") {
  const std::vector<double> own{1.0, 0.0};

  SECTION("identical maps diverge by zero") {
    CrossProjectionSet omega{{0, 0}, {{1.0, 0.0}, {1.0, 0.0}}};
    REQUIRE(viewpcl::view_divergence(own, omega) == Catch::Approx(0.0).margin(0.0));
  }
  SECTION("hand KL against a half-half map") {
    CrossProjectionSet omega{{0, 0}, {{0.5, 0.5}}};
    REQUIRE(viewpcl::view_divergence(own, omega) ==
            Catch::Approx(std::log(2.0)).margin(1e-12));
  }
  SECTION("hand average over a matching and a divergent map") {
    CrossProjectionSet omega{{0, 0}, {{1.0, 0.0}, {0.5, 0.5}}};
    REQUIRE(viewpcl::view_divergence(own, omega) ==
            Catch::Approx(0.5 * std::log(2.0)).margin(1e-12));
  }
  SECTION("zero denominators are clamped, zero numerators ignored") {
    CrossProjectionSet omega{{0, 0}, {{0.0, 1.0}}};
    REQUIRE(viewpcl::view_divergence(own, omega) ==
            Catch::Approx(std::log(1e12)).margin(1e-6));
    const std::vector<double> own2{0.0, 1.0};
    CrossProjectionSet omega2{{0, 0}, {{0.0, 1.0}}};
    REQUIRE(viewpcl::view_divergence(own2, omega2) == Catch::Approx(0.0).margin(0.0));
  }
  SECTION("nonnegative on random inputs") {
    viewpcl::detail::SplitMix rng(41);
    for (int trial = 0; trial < 20; ++trial) {
      const auto simplex = [&] {
        std::vector<double> v(3);
        double total = 0.0;
        for (double& x : v) {
          x = 0.01 + rng.next_unit();
          total += x;
        }
        for (double& x : v) x /= total;
        return v;
      };
      CrossProjectionSet omega{{0, 0}, {simplex(), simplex()}};
      REQUIRE(viewpcl::view_divergence(simplex(), omega) >= -1e-12);
    }
  }
}

TEST_CASE("superpixel_baseline_scores") {
  SECTION("constant scores pass through") {
    const auto [ve, vd] = viewpcl::superpixel_baseline_scores(
        {{0.4, 0.2, true}, {0.4, 0.2, true}});
    REQUIRE(ve == Catch::Approx(0.4));
    REQUIRE(vd == Catch::Approx(0.2));
  }
  SECTION("arithmetic mean of two pixels") {
    const auto [ve, vd] = viewpcl::superpixel_baseline_scores(
        {{0.2, 0.1, true}, {0.6, 0.5, true}});
    REQUIRE(ve == Catch::Approx(0.4));
    REQUIRE(vd == Catch::Approx(0.3));
  }
  SECTION("unscored pixels are excluded from the mean") {
    const auto [ve, vd] = viewpcl::superpixel_baseline_scores(
        {{0.8, 0.3, true}, {0.0, 0.0, false}});
    REQUIRE(ve == Catch::Approx(0.8));
    REQUIRE(vd == Catch::Approx(0.3));
  }
  SECTION("all unscored gives zero") {
    const auto [ve, vd] = viewpcl::superpixel_baseline_scores({{0.0, 0.0, false}});
    REQUIRE(ve == 0.0);
    REQUIRE(vd == 0.0);
  }
}

TEST_CASE("score table pipeline") {
  viewpcl::PipelineConfig cfg;

  SECTION("noise-free consistent bundle scores zero everywhere") {
    const viewpcl::SceneBundle bundle = viewpcl::synth_scene(four_view_spec(0.0, 1));
    const auto ctx = viewpcl::build_geometry_context(bundle.views, cfg.depth_tolerance);
    const auto cache = viewpcl::overlap_cache_from_context(bundle, ctx, cfg.min_relative_size);
    std::vector<viewpcl::ClassProbabilityMap> avg;
    for (const auto& s : bundle.prob_samples) avg.push_back(viewpcl::mc_average(s));
    const auto table = viewpcl::compute_score_table(bundle, ctx, cache, avg, cfg);
    REQUIRE_FALSE(table.entries.empty());
    bool any_covered = false;
    for (const auto& [key, e] : table.entries) {
      REQUIRE(e.viewpcl_score <= 1e-9);
      any_covered = any_covered || e.coverage > 0;
    }
    REQUIRE(any_covered);
  }

  SECTION("superpixels with no overlap regions carry score 0 and coverage 0") {
    viewpcl::SynthSpec spec = four_view_spec(0.0, 2);
    spec.views.resize(1);  // single view: nothing can overlap
    const viewpcl::SceneBundle bundle = viewpcl::synth_scene(spec);
    const auto ctx = viewpcl::build_geometry_context(bundle.views, cfg.depth_tolerance);
    const auto cache = viewpcl::overlap_cache_from_context(bundle, ctx, cfg.min_relative_size);
    std::vector<viewpcl::ClassProbabilityMap> avg;
    for (const auto& s : bundle.prob_samples) avg.push_back(viewpcl::mc_average(s));
    const auto table = viewpcl::compute_score_table(bundle, ctx, cache, avg, cfg);
    for (const auto& [key, e] : table.entries) {
      REQUIRE(e.viewpcl_score == 0.0);
      REQUIRE(e.coverage == 0);
    }
  }

  SECTION("an injected cross-view disagreement attains the strict maximum") {
    viewpcl::SynthSpec spec = four_view_spec(0.0, 3);
    spec.injections = {{1, 5, 2, 1.0, false}};
    const viewpcl::SceneBundle bundle = viewpcl::synth_scene(spec);
    const auto ctx = viewpcl::build_geometry_context(bundle.views, cfg.depth_tolerance);
    const auto cache = viewpcl::overlap_cache_from_context(bundle, ctx, cfg.min_relative_size);
    std::vector<viewpcl::ClassProbabilityMap> avg;
    for (const auto& s : bundle.prob_samples) avg.push_back(viewpcl::mc_average(s));
    const auto table = viewpcl::compute_score_table(bundle, ctx, cache, avg, cfg);

    const viewpcl::SuperpixelKey site{1, 5};
    const double injected = table.entries.at(site).viewpcl_score;
    REQUIRE(injected > 0.0);
    for (const auto& [key, e] : table.entries) {
      if (key == site) continue;
      REQUIRE(e.viewpcl_score < injected);
      if (key.view_id == site.view_id) REQUIRE(e.viewpcl_score <= 1e-9);
    }
  }

  SECTION("pipeline VE/VD agree with the per-pixel operations") {
    const viewpcl::SceneBundle bundle = viewpcl::synth_scene(four_view_spec(0.3, 4));
    const auto ctx = viewpcl::build_geometry_context(bundle.views, cfg.depth_tolerance);
    const auto cache = viewpcl::overlap_cache_from_context(bundle, ctx, cfg.min_relative_size);
    std::vector<viewpcl::ClassProbabilityMap> avg;
    for (const auto& s : bundle.prob_samples) avg.push_back(viewpcl::mc_average(s));
    const auto table = viewpcl::compute_score_table(bundle, ctx, cache, avg, cfg);

    // Recompute one view's baseline scores from scratch with the unit ops.
    const int vi = 0;
    const viewpcl::ViewRecord& view = bundle.views[static_cast<std::size_t>(vi)];
    std::vector<CrossProjectionSet> omegas(view.pixel_count());
    for (const auto& pair : ctx.pairs) {
      if (pair.target_view != view.view_id) continue;
      const auto& src = avg[static_cast<std::size_t>(bundle.view_index(pair.source_view))];
      for (const auto& c : pair.correspondences) {
        const auto row = src.at(c.source_pixel);
        omegas[static_cast<std::size_t>(c.target_pixel.row) * view.width +
               c.target_pixel.col]
            .maps.emplace_back(row.begin(), row.end());
      }
    }
    const viewpcl::SuperpixelMap& sp = *bundle.superpixels[static_cast<std::size_t>(vi)];
    for (int id = 0; id < sp.num_superpixels(); ++id) {
      std::vector<viewpcl::PixelBaseline> pixels;
      for (int r = 0; r < view.height; ++r) {
        for (int c = 0; c < view.width; ++c) {
          if (sp.label_at({r, c}) != id) continue;
          const auto& omega = omegas[static_cast<std::size_t>(r) * view.width + c];
          viewpcl::PixelBaseline pb;
          if (!omega.maps.empty()) {
            const auto own = avg[static_cast<std::size_t>(vi)].at({r, c});
            const std::vector<double> own_d(own.begin(), own.end());
            pb.view_entropy = viewpcl::view_entropy(omega);
            pb.view_divergence = viewpcl::view_divergence(own_d, omega);
            pb.scored = true;
          }
          pixels.push_back(pb);
        }
      }
      const auto [ve, vd] = viewpcl::superpixel_baseline_scores(pixels);
      const auto& entry = table.entries.at({view.view_id, id});
      REQUIRE(entry.view_entropy == Catch::Approx(ve).margin(1e-9));
      REQUIRE(entry.view_divergence == Catch::Approx(vd).margin(1e-9));
    }
  }
}
