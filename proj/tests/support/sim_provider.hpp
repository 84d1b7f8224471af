#pragma once

// Test provider whose noise shrinks on labeled superpixels: unlabeled
// disagreement sites get their view's maps pushed toward a wrong class;
// once a site is labeled the perturbation disappears (the "model" learned it).

#include <map>
#include <set>
#include <vector>

#include "viewpcl/selection.hpp"

namespace simsupport {

struct Site {
  int target_class = 0;
  double magnitude = 1.0;
};

class DisagreementProvider : public viewpcl::ProbabilityProvider {
 public:
  DisagreementProvider(const viewpcl::SceneBundle& bundle,
                       std::map<viewpcl::SuperpixelKey, Site> sites)
      : bundle_(bundle), sites_(std::move(sites)) {}

  std::vector<std::vector<viewpcl::ClassProbabilityMap>> sample_maps(
      const std::set<viewpcl::SuperpixelKey>& labeled) override {
    auto samples = bundle_.prob_samples;
    for (const auto& [key, site] : sites_) {
      if (labeled.contains(key)) continue;
      const auto vi = static_cast<std::size_t>(bundle_.view_index(key.view_id));
      const auto pixels = bundle_.superpixels[vi]->pixels_of(key.superpixel_id);
      for (auto& map : samples[vi]) {
        for (const viewpcl::PixelCoord& p : pixels) {
          auto probs = map.at(p);
          double sum = 0.0;
          for (int c = 0; c < map.num_classes; ++c) {
            const double flipped = c == site.target_class ? 1.0 : 0.0;
            probs[static_cast<std::size_t>(c)] = static_cast<float>(
                (1.0 - site.magnitude) * probs[static_cast<std::size_t>(c)] +
                site.magnitude * flipped);
            sum += probs[static_cast<std::size_t>(c)];
          }
          for (int c = 0; c < map.num_classes; ++c)
            probs[static_cast<std::size_t>(c)] =
                static_cast<float>(probs[static_cast<std::size_t>(c)] / sum);
        }
      }
    }
    return samples;
  }

  /// Disagreement mass captured by a selection list.
  double selected_mass(const std::vector<viewpcl::SelectionRecord>& records) const {
    double mass = 0.0;
    for (const auto& rec : records) {
      const auto it = sites_.find(rec.key);
      if (it != sites_.end()) mass += it->second.magnitude;
    }
    return mass;
  }

 private:
  const viewpcl::SceneBundle& bundle_;
  std::map<viewpcl::SuperpixelKey, Site> sites_;
};

}  // namespace simsupport
