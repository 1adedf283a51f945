#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "contesta/cohort.hpp"
#include "contesta/global_explain.hpp"
#include "contesta/models.hpp"

namespace contesta {

// Latent space over the maturity and gender dimensions (ga, w, pna, gen).
struct LatentSpaceConfig {
  double weight_ga = 2.0;
  double weight_w = 2.0;
  double weight_pna = 2.0;
  double weight_gen = 1.0;
  int k = 10;
  std::vector<Feature> panel_features = {Feature::Xc, Feature::Sa};
  double overlap_cutoff = 0.30;  // max misclassified share for a conclusive boundary

  void validate() const;
};

struct LatentRanges {
  FeatureRange ga, w, pna;

  static LatentRanges from(const Cohort& cohort);
};

// Weighted Gower distance in [0, 1]. Numeric contributions are clamped to 1.
double gower_distance(const Demographics& a, const Demographics& b, const LatentRanges& ranges,
                      const LatentSpaceConfig& config);

struct Neighbor {
  const EpisodeRecord* record = nullptr;
  double distance = 0.0;
};

// k nearest records by distance, ties by ascending record_id. The record
// sharing the query's id is never returned.
std::vector<Neighbor> nearest_neighbors(const EpisodeRecord& query, const Cohort& reference,
                                        const LatentSpaceConfig& config);

struct LabeledValue {
  double value = 0.0;
  Label label = Label::Healthy;
};

struct BoundaryEstimate {
  bool conclusive = false;
  std::optional<double> boundary;
  std::optional<Label> above;  // class implied by values above the boundary
  int misclassified = 0;
  double error_rate = 0.0;
  std::string reason;  // why a panel is inconclusive
};

// Best single threshold between the two classes among the points; midpoints
// of adjacent distinct values, both orientations, ties to the smallest
// threshold.
BoundaryEstimate estimate_boundary(std::span<const LabeledValue> points, double overlap_cutoff = 0.30);

struct PanelPoint {
  std::string record_id;
  double distance = 0.0;
  double value = 0.0;
  Label label = Label::Healthy;
  Demographics demographics;
};

struct NeighborPanel {
  Feature feature = Feature::Xc;
  std::vector<PanelPoint> points;  // ascending distance
  double query_value = 0.0;
  BoundaryEstimate boundary;
  std::optional<Label> implied_class;

  bool conclusive() const { return boundary.conclusive; }
};

enum class Verdict { Justify, Contest, Inconclusive };
std::string_view verdict_name(Verdict v) noexcept;
Verdict parse_verdict(std::string_view text);

struct ContestReport {
  std::string query_id;
  std::string model_name;
  Label prediction = Label::Healthy;
  double score = 0.0;
  std::optional<Label> ground_truth;
  std::vector<NeighborPanel> panels;
  std::optional<Label> implied_class;
  Verdict verdict = Verdict::Inconclusive;
  LatentSpaceConfig config;
  std::string narrative;
};

// Verdict from panel implications: all conclusive panels agreeing on C imply
// C; disagreement or no conclusive panel is Inconclusive. Implied = prediction
// justifies, otherwise contests.
Verdict combine_panels(std::span<const NeighborPanel> panels, Label prediction,
                       std::optional<Label>* implied = nullptr);

ContestReport contest(const EpisodeRecord& query, const Classifier& model,
                      const std::string& model_name, const Cohort& reference,
                      const LatentSpaceConfig& config);

// Top-n dynamic features by importance.
std::vector<Feature> top_dynamic_features(const ImportanceReport& report, std::size_t n = 2);

nlohmann::json contest_json(const ContestReport& report);

}  // namespace contesta
