#include "contesta/local_explain.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "contesta/error.hpp"

namespace contesta {

using nlohmann::json;

void LatentSpaceConfig::validate() const {
  if (!(weight_ga > 0 && weight_w > 0 && weight_pna > 0 && weight_gen > 0))
    fail(ErrorCode::InvalidConfig, "latent-space weights must be positive");
  if (k < 1) fail(ErrorCode::InvalidConfig, "k must be >= 1");
  if (!(overlap_cutoff >= 0.0 && overlap_cutoff < 0.5))
    fail(ErrorCode::InvalidConfig, "overlap cutoff must lie in [0, 0.5)");
  for (auto f : panel_features)
    if (!is_dynamic(f))
      fail(ErrorCode::InvalidConfig,
           fmt::format("panel feature '{}' is not dynamic", feature_name(f)));
}

LatentRanges LatentRanges::from(const Cohort& cohort) {
  return {cohort.range(Feature::Ga), cohort.range(Feature::W), cohort.range(Feature::Pna)};
}

namespace {

double numeric_delta(double a, double b, const FeatureRange& r, const char* name) {
  const double span = r.max - r.min;
  if (!(span > 0.0))
    fail(ErrorCode::DegenerateRange, fmt::format("range of {} has max == min", name));
  return std::min(1.0, std::abs(a - b) / span);
}

}  // namespace

double gower_distance(const Demographics& a, const Demographics& b, const LatentRanges& ranges,
                      const LatentSpaceConfig& c) {
  const double num = c.weight_ga * numeric_delta(a.ga, b.ga, ranges.ga, "ga") +
                     c.weight_w * numeric_delta(a.w, b.w, ranges.w, "w") +
                     c.weight_pna * numeric_delta(a.pna, b.pna, ranges.pna, "pna") +
                     c.weight_gen * (a.gen == b.gen ? 0.0 : 1.0);
  return num / (c.weight_ga + c.weight_w + c.weight_pna + c.weight_gen);
}

std::vector<Neighbor> nearest_neighbors(const EpisodeRecord& query, const Cohort& reference,
                                        const LatentSpaceConfig& config) {
  config.validate();
  const auto ranges = LatentRanges::from(reference);
  std::vector<Neighbor> all;
  for (const auto& r : reference.records()) {
    if (r.record_id == query.record_id) continue;
    all.push_back({&r, gower_distance(query.demographics, r.demographics, ranges, config)});
  }
  const auto k = static_cast<std::size_t>(config.k);
  if (all.size() < k)
    fail(ErrorCode::InsufficientReference,
         fmt::format("reference holds {} records besides the query; need {}", all.size(), k));
  const auto closer = [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.record->record_id < b.record->record_id;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

BoundaryEstimate estimate_boundary(std::span<const LabeledValue> points, double overlap_cutoff) {
  BoundaryEstimate out;
  const auto n = points.size();
  const auto n_losnec = static_cast<std::size_t>(std::count_if(
      points.begin(), points.end(), [](const auto& p) { return p.label == Label::LosNec; }));
  if (n_losnec == 0 || n_losnec == n) {
    out.reason = "neighbors contain a single class";
    return out;
  }
  std::vector<LabeledValue> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.value < b.value; });

  // Scan thresholds; errors when LosNec is above = LosNec at/below + Healthy above.
  std::size_t losnec_below = 0, healthy_below = 0;
  const std::size_t healthy_total = n - n_losnec;
  std::optional<std::size_t> best_errors;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    (sorted[i].label == Label::LosNec ? losnec_below : healthy_below) += 1;
    if (sorted[i].value == sorted[i + 1].value) continue;
    const double t = 0.5 * (sorted[i].value + sorted[i + 1].value);
    const std::size_t err_losnec_above = losnec_below + (healthy_total - healthy_below);
    const std::size_t err_healthy_above = n - err_losnec_above;
    const bool losnec_above = err_losnec_above <= err_healthy_above;
    const std::size_t err = std::min(err_losnec_above, err_healthy_above);
    if (!best_errors || err < *best_errors) {
      best_errors = err;
      out.boundary = t;
      out.above = losnec_above ? Label::LosNec : Label::Healthy;
    }
  }
  if (!best_errors) {
    out.reason = "all neighbor values are equal";
    return out;
  }
  out.misclassified = static_cast<int>(*best_errors);
  out.error_rate = static_cast<double>(*best_errors) / static_cast<double>(n);
  if (out.error_rate > overlap_cutoff) {
    out.reason = fmt::format("classes overlap: best split misclassifies {} of {}", *best_errors, n);
    out.boundary.reset();
    out.above.reset();
    return out;
  }
  out.conclusive = true;
  return out;
}

std::string_view verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::Justify: return "Justify";
    case Verdict::Contest: return "Contest";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "Justify") return Verdict::Justify;
  if (text == "Contest") return Verdict::Contest;
  if (text == "Inconclusive") return Verdict::Inconclusive;
  fail(ErrorCode::ParseError, fmt::format("unknown verdict '{}'", text));
}

Verdict combine_panels(std::span<const NeighborPanel> panels, Label prediction,
                       std::optional<Label>* implied) {
  std::optional<Label> agreed;
  bool any = false;
  for (const auto& p : panels) {
    if (!p.conclusive() || !p.implied_class) continue;
    if (any && *agreed != *p.implied_class) {
      if (implied) implied->reset();
      return Verdict::Inconclusive;
    }
    agreed = p.implied_class;
    any = true;
  }
  if (implied) *implied = agreed;
  if (!agreed) return Verdict::Inconclusive;
  return *agreed == prediction ? Verdict::Justify : Verdict::Contest;
}

ContestReport contest(const EpisodeRecord& query, const Classifier& model,
                      const std::string& model_name, const Cohort& reference,
                      const LatentSpaceConfig& config) {
  config.validate();
  if (config.panel_features.empty()) fail(ErrorCode::InvalidConfig, "no panel features");
  ContestReport rep;
  rep.query_id = query.record_id;
  rep.model_name = model_name;
  rep.score = model.predict_proba(query);
  rep.prediction = classify(rep.score);
  rep.ground_truth = query.label;
  rep.config = config;

  const auto neighbors = nearest_neighbors(query, reference, config);
  for (auto f : config.panel_features) {
    NeighborPanel panel;
    panel.feature = f;
    panel.query_value = feature_value(query, f);
    std::vector<LabeledValue> values;
    for (const auto& n : neighbors) {
      const double v = feature_value(*n.record, f);
      panel.points.push_back({n.record->record_id, n.distance, v, n.record->label,
                              n.record->demographics});
      values.push_back({v, n.record->label});
    }
    panel.boundary = estimate_boundary(values, config.overlap_cutoff);
    if (panel.boundary.conclusive) {
      const double b = *panel.boundary.boundary;
      const Label above = *panel.boundary.above;
      const Label below = above == Label::LosNec ? Label::Healthy : Label::LosNec;
      if (panel.query_value > b) panel.implied_class = above;
      else if (panel.query_value < b) panel.implied_class = below;
    }
    rep.panels.push_back(std::move(panel));
  }
  rep.verdict = combine_panels(rep.panels, rep.prediction, &rep.implied_class);

  std::string text = fmt::format("Model {} predicts {} (score {:.3f}). ", model_name,
                                 label_name(rep.prediction), rep.score);
  for (const auto& p : rep.panels) {
    if (p.conclusive() && p.implied_class)
      text += fmt::format("Among the {} latent-space neighbors, {} = {:.4g} lies on the {} side of the "
                          "boundary {:.4g}. ",
                          p.points.size(), feature_name(p.feature), p.query_value,
                          label_name(*p.implied_class), *p.boundary.boundary);
    else if (p.conclusive())
      text += fmt::format("{} = {:.4g} sits exactly on the boundary. ", feature_name(p.feature),
                          p.query_value);
    else
      text += fmt::format("{} panel is inconclusive ({}). ", feature_name(p.feature), p.boundary.reason);
  }
  switch (rep.verdict) {
    case Verdict::Justify: text += "Neighborhood evidence supports the model decision."; break;
    case Verdict::Contest:
      text += fmt::format("Neighborhood evidence points to {}; the decision is contestable.",
                          label_name(*rep.implied_class));
      break;
    case Verdict::Inconclusive: text += "Neighborhood evidence is inconclusive."; break;
  }
  rep.narrative = std::move(text);
  return rep;
}

std::vector<Feature> top_dynamic_features(const ImportanceReport& report, std::size_t n) {
  std::vector<Feature> out;
  for (auto f : report.ranking()) {
    if (out.size() == n) break;
    if (is_dynamic(f)) out.push_back(f);
  }
  return out;
}

namespace {

json round4(double v) { return std::round(v * 1e4) / 1e4; }

json demographics_json(const Demographics& d) {
  return {{"gen", std::string(gender_name(d.gen))}, {"ga_wk", d.ga}, {"bw_g", d.bw}, {"w_g", d.w},
          {"pna_wk", d.pna}};
}

}  // namespace

json contest_json(const ContestReport& r) {
  json panels = json::array();
  for (const auto& p : r.panels) {
    json points = json::array();
    for (const auto& pt : p.points)
      points.push_back({{"record_id", pt.record_id},
                        {"distance", round4(pt.distance)},
                        {"value", pt.value},
                        {"label", std::string(label_name(pt.label))},
                        {"demographics", demographics_json(pt.demographics)}});
    panels.push_back(
        {{"feature", std::string(feature_name(p.feature))},
         {"query_value", p.query_value},
         {"points", points},
         {"conclusive", p.conclusive()},
         {"boundary", p.boundary.boundary ? json(*p.boundary.boundary) : json(nullptr)},
         {"losnec_side", p.boundary.above
                             ? json(*p.boundary.above == Label::LosNec ? "above" : "below")
                             : json(nullptr)},
         {"misclassified", p.boundary.misclassified},
         {"error_rate", p.boundary.error_rate},
         {"reason", p.boundary.reason},
         {"implied_class", p.implied_class ? json(std::string(label_name(*p.implied_class))) : json(nullptr)}});
  }
  json panel_features = json::array();
  for (auto f : r.config.panel_features) panel_features.push_back(std::string(feature_name(f)));
  return {
      {"query_id", r.query_id},
      {"model", r.model_name},
      {"prediction", std::string(label_name(r.prediction))},
      {"score", r.score},
      {"ground_truth", r.ground_truth ? json(std::string(label_name(*r.ground_truth))) : json(nullptr)},
      {"panels", panels},
      {"implied_class", r.implied_class ? json(std::string(label_name(*r.implied_class))) : json(nullptr)},
      {"verdict", std::string(verdict_name(r.verdict))},
      {"combination_rule",
       "all conclusive panels agree on class C -> implied C; disagreement or no conclusive panel -> "
       "Inconclusive; implied == prediction -> Justify, else Contest"},
      {"config",
       {{"weights", {{"ga", r.config.weight_ga}, {"w", r.config.weight_w}, {"pna", r.config.weight_pna},
                     {"gen", r.config.weight_gen}}},
        {"k", r.config.k},
        {"panel_features", panel_features},
        {"overlap_cutoff", r.config.overlap_cutoff}}},
      {"narrative", r.narrative}};
}

}  // namespace contesta
