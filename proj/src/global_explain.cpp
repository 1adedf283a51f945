#include "contesta/global_explain.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "contesta/error.hpp"

namespace contesta {

using nlohmann::json;

std::vector<Feature> ImportanceReport::ranking() const {
  std::vector<std::size_t> idx(features.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return features[a].importance > features[b].importance;
  });
  std::vector<Feature> out;
  for (auto i : idx) out.push_back(features[i].feature);
  return out;
}

namespace {

std::size_t model_index(const Classifier& model, Feature f) {
  const auto& names = model.feature_names();
  const auto it = std::find(names.begin(), names.end(), f);
  if (it == names.end())
    fail(ErrorCode::UnknownFeature, fmt::format("model does not use feature '{}'", feature_name(f)));
  return static_cast<std::size_t>(it - names.begin());
}

double loss_of(const Classifier& model, const std::vector<std::vector<double>>& rows,
               std::span<const Label> labels) {
  std::vector<double> scores;
  scores.reserve(rows.size());
  for (const auto& r : rows) scores.push_back(model.predict_proba(std::span<const double>(r)));
  return 1.0 - auc(scores, labels);
}

double mean_prediction(const Classifier& model, std::vector<std::vector<double>>& rows) {
  double sum = 0.0;
  for (const auto& r : rows) sum += model.predict_proba(std::span<const double>(r));
  return sum / static_cast<double>(rows.size());
}

}  // namespace

ImportanceReport permutation_importance(const Classifier& model, const Cohort& data,
                                        int permutations, std::uint64_t seed,
                                        const PermutationFn& permute) {
  if (permutations < 1) fail(ErrorCode::InvalidArgument, "permutation count must be >= 1");
  if (data.empty()) fail(ErrorCode::InvalidArgument, "importance needs data");
  const auto& names = model.feature_names();
  const auto rows = data.feature_rows(names);
  const auto labels = data.labels();
  const double baseline = loss_of(model, rows, labels);

  ImportanceReport report;
  report.permutations = permutations;
  report.seed = seed;
  auto work = rows;
  for (std::size_t k = 0; k < names.size(); ++k) {
    Rng rng(derive_seed(seed, {hash_tag("importance"), static_cast<std::uint64_t>(names[k])}));
    double total = 0.0;
    for (int b = 0; b < permutations; ++b) {
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      if (permute)
        permute(order, rng);
      else
        rng.shuffle(std::span<std::size_t>(order));
      for (std::size_t i = 0; i < rows.size(); ++i) work[i][k] = rows[order[i]][k];
      total += loss_of(model, work, labels);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) work[i][k] = rows[i][k];
    const double permuted = total / permutations;
    report.features.push_back({names[k], baseline, permuted, permuted - baseline});
  }
  return report;
}

std::vector<double> observed_grid(const Cohort& data, Feature f, int points) {
  if (points < 1) fail(ErrorCode::InvalidArgument, "grid needs at least one point");
  if (data.empty()) fail(ErrorCode::InvalidArgument, "grid needs data");
  double lo = feature_value(data.records().front(), f);
  double hi = lo;
  for (const auto& r : data.records()) {
    lo = std::min(lo, feature_value(r, f));
    hi = std::max(hi, feature_value(r, f));
  }
  if (lo == hi || points == 1) return {lo};
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  grid.back() = hi;
  return grid;
}

PdpCurve pdp_1d(const Classifier& model, Feature feature, const Cohort& data, int grid_points) {
  if (is_static(feature))
    fail(ErrorCode::StaticFeatureRejected,
         fmt::format("one-dimensional PDP is restricted to dynamic features; '{}' is static",
                     feature_name(feature)));
  const auto k = model_index(model, feature);
  PdpCurve curve;
  curve.feature = feature;
  curve.grid = observed_grid(data, feature, grid_points);
  for (const auto& r : data.records()) curve.rug.push_back(feature_value(r, feature));
  std::sort(curve.rug.begin(), curve.rug.end());

  auto rows = data.feature_rows(model.feature_names());
  for (double v : curve.grid) {
    for (auto& r : rows) r[k] = v;
    curve.pd.push_back(mean_prediction(model, rows));
  }
  return curve;
}

PdpSurface pdp_2d(const Classifier& model, Feature static_feature, Feature dynamic_feature,
                  const Cohort& data, int static_points, int dynamic_points) {
  if (static_feature != Feature::Ga && static_feature != Feature::W && static_feature != Feature::Pna)
    fail(ErrorCode::UnknownFeature,
         fmt::format("'{}' is not one of the static features ga, w, pna", feature_name(static_feature)));
  if (!is_dynamic(dynamic_feature))
    fail(ErrorCode::UnknownFeature,
         fmt::format("'{}' is not a dynamic feature", feature_name(dynamic_feature)));
  const auto ks = model_index(model, static_feature);
  const auto kd = model_index(model, dynamic_feature);
  PdpSurface s;
  s.static_feature = static_feature;
  s.dynamic_feature = dynamic_feature;
  s.static_grid = observed_grid(data, static_feature, static_points);
  s.dynamic_grid = observed_grid(data, dynamic_feature, dynamic_points);
  auto rows = data.feature_rows(model.feature_names());
  for (double u : s.static_grid) {
    std::vector<double> line;
    for (double v : s.dynamic_grid) {
      for (auto& r : rows) {
        r[ks] = u;
        r[kd] = v;
      }
      line.push_back(mean_prediction(model, rows));
    }
    s.pd.push_back(std::move(line));
  }
  return s;
}

json importance_json(const ImportanceReport& report) {
  json features = json::array();
  for (const auto& f : report.features)
    features.push_back({{"feature", std::string(feature_name(f.feature))},
                        {"baseline_loss", f.baseline_loss},
                        {"permuted_loss", f.permuted_loss},
                        {"importance", f.importance}});
  json ranking = json::array();
  for (auto f : report.ranking()) ranking.push_back(std::string(feature_name(f)));
  return {{"loss", report.loss},
          {"permutations", report.permutations},
          {"seed", report.seed},
          {"features", features},
          {"ranking", ranking}};
}

ImportanceReport importance_from_json(const json& j) {
  ImportanceReport r;
  r.permutations = j.at("permutations").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& f : j.at("features")) {
    const auto feature = feature_from_name(f.at("feature").get<std::string>());
    if (!feature) fail(ErrorCode::UnknownFeature, f.at("feature").get<std::string>());
    r.features.push_back({*feature, f.at("baseline_loss").get<double>(),
                          f.at("permuted_loss").get<double>(), f.at("importance").get<double>()});
  }
  return r;
}

json pdp_json(const PdpCurve& c) {
  return {{"kind", "pdp_1d"},
          {"feature", std::string(feature_name(c.feature))},
          {"grid", c.grid},
          {"pd", c.pd},
          {"rug", c.rug}};
}

json pdp_json(const PdpSurface& s) {
  return {{"kind", "pdp_2d"},
          {"static_feature", std::string(feature_name(s.static_feature))},
          {"dynamic_feature", std::string(feature_name(s.dynamic_feature))},
          {"static_grid", s.static_grid},
          {"dynamic_grid", s.dynamic_grid},
          {"pd", s.pd}};
}

}  // namespace contesta
