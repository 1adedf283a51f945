#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "contesta/cohort.hpp"
#include "contesta/models.hpp"
#include "contesta/rng.hpp"

namespace contesta {

struct FeatureImportance {
  Feature feature = Feature::Gen;
  double baseline_loss = 0.0;
  double permuted_loss = 0.0;  // mean over permutations
  double importance = 0.0;     // permuted_loss - baseline_loss
};

struct ImportanceReport {
  std::vector<FeatureImportance> features;  // model feature order
  int permutations = 0;
  std::uint64_t seed = 0;
  std::string loss = "1 - AUC";

  // Features by decreasing importance (ties: model feature order).
  std::vector<Feature> ranking() const;
};

inline constexpr int kDefaultPermutations = 10;
inline constexpr int kDefaultGridPoints = 51;
inline constexpr int kDefaultSurfacePoints = 21;

// Reorders the row indices of one column. The default is a seeded Fisher-Yates shuffle.
using PermutationFn = std::function<void(std::vector<std::size_t>&, Rng&)>;

// Loss is 1 - AUC; importance is the mean loss increase over B column
// permutations. Each feature's permutations draw from streams derived from
// (seed, feature), so results do not depend on evaluation order.
ImportanceReport permutation_importance(const Classifier& model, const Cohort& data,
                                        int permutations = kDefaultPermutations,
                                        std::uint64_t seed = 0,
                                        const PermutationFn& permute = {});

struct PdpCurve {
  Feature feature = Feature::Xc;
  std::vector<double> grid;
  std::vector<double> pd;
  std::vector<double> rug;  // observed values, sorted
};

struct PdpSurface {
  Feature static_feature = Feature::W;
  Feature dynamic_feature = Feature::Xc;
  std::vector<double> static_grid;
  std::vector<double> dynamic_grid;
  std::vector<std::vector<double>> pd;  // [static index][dynamic index]
};

// Equidistant grid over [min, max] of the observed values; endpoints are exact.
std::vector<double> observed_grid(const Cohort& data, Feature f, int points);

PdpCurve pdp_1d(const Classifier& model, Feature feature, const Cohort& data,
                int grid_points = kDefaultGridPoints);

PdpSurface pdp_2d(const Classifier& model, Feature static_feature, Feature dynamic_feature,
                  const Cohort& data, int static_points = kDefaultSurfacePoints,
                  int dynamic_points = kDefaultSurfacePoints);

nlohmann::json importance_json(const ImportanceReport& report);
nlohmann::json pdp_json(const PdpCurve& curve);
nlohmann::json pdp_json(const PdpSurface& surface);
ImportanceReport importance_from_json(const nlohmann::json& j);

}  // namespace contesta
