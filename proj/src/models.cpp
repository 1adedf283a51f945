#include "contesta/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "contesta/error.hpp"
#include "contesta/rng.hpp"

namespace contesta {

using nlohmann::json;

double Classifier::predict_proba(const EpisodeRecord& record) const {
  const auto x = feature_vector(record);
  return predict_proba(std::span<const double>(x));
}

std::vector<double> Classifier::feature_vector(const EpisodeRecord& record) const {
  std::vector<double> x;
  x.reserve(feature_names().size());
  for (auto f : feature_names()) x.push_back(feature_value(record, f));
  return x;
}

std::string_view algorithm_name(Algorithm a) noexcept {
  return a == Algorithm::RandomForest ? "rf" : "svm";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "rf" || text == "RandomForest") return Algorithm::RandomForest;
  if (text == "svm" || text == "RbfSvm") return Algorithm::RbfSvm;
  fail(ErrorCode::ParseError, fmt::format("unknown algorithm '{}' (expected rf or svm)", text));
}

void ClassifierSpec::validate() const {
  if (cv_folds < 2) fail(ErrorCode::InvalidConfig, "cv_folds must be >= 2");
  if (cv_repeats < 1) fail(ErrorCode::InvalidConfig, "cv_repeats must be >= 1");
  if (search_draws < 1) fail(ErrorCode::InvalidConfig, "search_draws must be >= 1");
  if (space.rf_trees.lo < 1 || space.rf_trees.hi < space.rf_trees.lo)
    fail(ErrorCode::InvalidConfig, "invalid tree-count range");
  if (space.rf_min_leaf.lo < 1 || space.rf_min_leaf.hi < space.rf_min_leaf.lo)
    fail(ErrorCode::InvalidConfig, "invalid min-leaf range");
  if (space.rf_features_per_split.lo < 1)
    fail(ErrorCode::InvalidConfig, "features-per-split must be >= 1");
  if (!(space.svm_c.lo > 0 && space.svm_c.hi >= space.svm_c.lo) ||
      !(space.svm_gamma.lo > 0 && space.svm_gamma.hi >= space.svm_gamma.lo))
    fail(ErrorCode::InvalidConfig, "invalid SVM hyperparameter range");
}

double TrainedModel::predict_proba(std::span<const double> x) const {
  if (x.size() != features.size())
    fail(ErrorCode::MissingFeature,
         fmt::format("model expects {} features, got {}", features.size(), x.size()));
  if (spec.algorithm == Algorithm::RandomForest) return forest.vote_fraction(x);
  return platt(decision_value(x));
}

double TrainedModel::decision_value(std::span<const double> x) const {
  if (spec.algorithm != Algorithm::RbfSvm)
    fail(ErrorCode::InvalidArgument, "decision values exist for SVM models only");
  const auto z = standardizer.apply(x);
  return svm.decision_value(z);
}

double predict_named(const Classifier& model,
                     const std::vector<std::pair<std::string, double>>& named) {
  std::vector<double> x;
  for (auto f : model.feature_names()) {
    const auto it = std::find_if(named.begin(), named.end(),
                                 [&](const auto& kv) { return kv.first == feature_name(f); });
    if (it == named.end())
      fail(ErrorCode::MissingFeature, fmt::format("record lacks feature '{}'", feature_name(f)));
    x.push_back(it->second);
  }
  return model.predict_proba(std::span<const double>(x));
}

std::vector<int> stratified_folds(std::span<const Label> labels, int folds, std::uint64_t seed) {
  std::vector<int> assignment(labels.size(), 0);
  std::size_t offset = 0;
  for (Label label : {Label::Healthy, Label::LosNec}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) idx.push_back(i);
    Rng rng(derive_seed(seed, {hash_tag("folds"), static_cast<std::uint64_t>(label)}));
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < idx.size(); ++k)
      assignment[idx[k]] = static_cast<int>((offset + k) % static_cast<std::size_t>(folds));
    offset += idx.size();
  }
  return assignment;
}

namespace {

struct Dataset {
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
};

Dataset subset(const Dataset& d, const std::vector<int>& folds, int fold, bool keep_fold) {
  Dataset out;
  for (std::size_t i = 0; i < d.rows.size(); ++i)
    if ((folds[i] == fold) == keep_fold) {
      out.rows.push_back(d.rows[i]);
      out.labels.push_back(d.labels[i]);
    }
  return out;
}

Hypers draw_hypers(const ClassifierSpec& spec, std::size_t num_features, Rng& rng) {
  const auto& s = spec.space;
  if (spec.algorithm == Algorithm::RandomForest) {
    const int hi_mtry = s.rf_features_per_split.hi > 0
                            ? std::min<int>(s.rf_features_per_split.hi, static_cast<int>(num_features))
                            : static_cast<int>(num_features);
    const int lo_mtry = std::min(s.rf_features_per_split.lo, hi_mtry);
    RandomForestHypers h;
    h.trees = static_cast<int>(rng.integer(s.rf_trees.lo, s.rf_trees.hi));
    h.features_per_split = static_cast<int>(rng.integer(lo_mtry, hi_mtry));
    h.min_leaf = static_cast<int>(rng.integer(s.rf_min_leaf.lo, s.rf_min_leaf.hi));
    return h;
  }
  SvmHypers h;
  h.c = rng.log_uniform(s.svm_c.lo, s.svm_c.hi);
  h.gamma = rng.log_uniform(s.svm_gamma.lo, s.svm_gamma.hi);
  return h;
}

// Scores for held-out rows: vote fraction (RF) or decision value (SVM).
std::vector<double> fit_and_score(Algorithm algo, const Hypers& hypers, const Dataset& train,
                                  const Dataset& held_out, std::uint64_t seed) {
  std::vector<double> scores;
  if (algo == Algorithm::RandomForest) {
    const auto forest = grow_forest(train.rows, train.labels, std::get<RandomForestHypers>(hypers), seed);
    for (const auto& r : held_out.rows) scores.push_back(forest.vote_fraction(r));
  } else {
    const auto scaler = Standardizer::fit(train.rows);
    std::vector<std::vector<double>> z;
    for (const auto& r : train.rows) z.push_back(scaler.apply(r));
    const auto sol = solve_svm(z, train.labels, std::get<SvmHypers>(hypers));
    for (const auto& r : held_out.rows) scores.push_back(sol.decision_value(scaler.apply(r)));
  }
  return scores;
}

void check_training_set(const Cohort& train) {
  if (train.count(Label::Healthy) == 0 || train.count(Label::LosNec) == 0)
    fail(ErrorCode::SingleClassTrainingSet, "training set must contain both classes");
  if (train.active_features().empty()) fail(ErrorCode::InvalidArgument, "no active features");
}

TrainedModel refit(Algorithm algo, const Hypers& hypers, const Dataset& data, std::uint64_t seed) {
  TrainedModel m;
  m.spec.algorithm = algo;
  m.chosen = hypers;
  if (algo == Algorithm::RandomForest) {
    m.forest = grow_forest(data.rows, data.labels, std::get<RandomForestHypers>(hypers), seed);
  } else {
    m.standardizer = Standardizer::fit(data.rows);
    std::vector<std::vector<double>> z;
    for (const auto& r : data.rows) z.push_back(m.standardizer.apply(r));
    m.svm = solve_svm(z, data.labels, std::get<SvmHypers>(hypers));
  }
  return m;
}

}  // namespace

TrainedModel fit(const ClassifierSpec& spec, const Cohort& train) {
  spec.validate();
  check_training_set(train);
  const auto min_class = std::min(train.count(Label::Healthy), train.count(Label::LosNec));
  if (min_class < static_cast<std::size_t>(spec.cv_folds))
    fail(ErrorCode::CvFoldTooSmall,
         fmt::format("smallest class has {} records, fewer than {} folds", min_class, spec.cv_folds));

  const auto& features = train.active_features();
  const Dataset data{train.feature_rows(features), train.labels()};

  std::vector<std::vector<int>> fold_sets;
  for (int r = 0; r < spec.cv_repeats; ++r)
    fold_sets.push_back(stratified_folds(
        data.labels, spec.cv_folds, derive_seed(spec.seed, {hash_tag("cv"), static_cast<std::uint64_t>(r)})));

  Rng draw_rng(derive_seed(spec.seed, {hash_tag("draws")}));
  std::vector<CandidateScore> candidates;
  std::vector<std::vector<double>> best_oof;  // per repeat, per record
  std::size_t best = 0;
  for (int d = 0; d < spec.search_draws; ++d) {
    const Hypers hypers = draw_hypers(spec, features.size(), draw_rng);
    double auc_sum = 0.0;
    int auc_count = 0;
    std::vector<std::vector<double>> oof(static_cast<std::size_t>(spec.cv_repeats),
                                         std::vector<double>(data.rows.size(), 0.0));
    for (int r = 0; r < spec.cv_repeats; ++r) {
      const auto& folds = fold_sets[static_cast<std::size_t>(r)];
      for (int f = 0; f < spec.cv_folds; ++f) {
        const auto fit_part = subset(data, folds, f, false);
        const auto held = subset(data, folds, f, true);
        const auto seed = derive_seed(spec.seed, {hash_tag("fold-fit"), static_cast<std::uint64_t>(d),
                                                  static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(f)});
        const auto scores = fit_and_score(spec.algorithm, hypers, fit_part, held, seed);
        auc_sum += auc(scores, held.labels);
        ++auc_count;
        for (std::size_t i = 0, k = 0; i < data.rows.size(); ++i)
          if (folds[i] == f) oof[static_cast<std::size_t>(r)][i] = scores[k++];
      }
    }
    // Selection uses the AUC of the pooled out-of-fold scores. Fold-wise AUC
    // ignores offsets between folds, so a nearly constant scorer whose ranking
    // is carried by the per-fold intercept can look excellent fold by fold and
    // still be useless (or inverted) once the Platt sigmoid is fit on the
    // pooled values. Mean fold AUC breaks ties.
    double pooled = 0.0;
    for (const auto& rep : oof) pooled += auc(rep, data.labels);
    candidates.push_back({hypers, auc_sum / auc_count, pooled / spec.cv_repeats});
    const auto& cand = candidates.back();
    if (d == 0 || cand.pooled_auc > candidates[best].pooled_auc ||
        (cand.pooled_auc == candidates[best].pooled_auc && cand.cv_auc > candidates[best].cv_auc)) {
      best = static_cast<std::size_t>(d);
      best_oof = std::move(oof);
    }
  }

  TrainedModel model = refit(spec.algorithm, candidates[best].hypers, data,
                             derive_seed(spec.seed, {hash_tag("final")}));
  model.spec = spec;
  model.features = features;
  model.search = candidates;
  model.cv_auc = candidates[best].cv_auc;
  if (spec.algorithm == Algorithm::RbfSvm) {
    std::vector<double> dec;
    std::vector<Label> lab;
    for (const auto& rep : best_oof)
      for (std::size_t i = 0; i < rep.size(); ++i) {
        dec.push_back(rep[i]);
        lab.push_back(data.labels[i]);
      }
    model.platt = fit_platt(dec, lab);
  }
  return model;
}

TrainedModel fit_fixed(Algorithm algorithm, const Hypers& hypers, const Cohort& train,
                       std::uint64_t seed) {
  check_training_set(train);
  const auto& features = train.active_features();
  const Dataset data{train.feature_rows(features), train.labels()};
  TrainedModel model = refit(algorithm, hypers, data, derive_seed(seed, {hash_tag("final")}));
  model.spec.algorithm = algorithm;
  model.spec.seed = seed;
  model.spec.search_draws = 1;
  model.features = features;
  if (algorithm == Algorithm::RbfSvm) {
    std::vector<double> dec;
    for (const auto& r : data.rows) dec.push_back(model.decision_value(r));
    model.platt = fit_platt(dec, data.labels);
  }
  return model;
}

// --- evaluation -----------------------------------------------------------------

double auc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) fail(ErrorCode::InvalidArgument, "scores/labels size mismatch");
  std::size_t n_pos = 0;
  for (auto l : labels) n_pos += l == Label::LosNec ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    fail(ErrorCode::SingleClassTestSet, "AUC is undefined without both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Average 1-based ranks over ties; ranks are half-integers, so sums are exact.
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == Label::LosNec) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

EvalReport evaluate(const Classifier& model, const Cohort& test, double threshold) {
  if (test.empty()) fail(ErrorCode::InvalidArgument, "empty test set");
  EvalReport rep;
  rep.threshold = threshold;
  rep.n = test.size();
  std::vector<double> scores;
  for (const auto& r : test.records()) {
    const double s = model.predict_proba(r);
    scores.push_back(s);
    const bool pred = classify(s, threshold) == Label::LosNec;
    const bool truth = r.label == Label::LosNec;
    if (pred && truth) ++rep.tp;
    else if (pred && !truth) ++rep.fp;
    else if (!pred && !truth) ++rep.tn;
    else ++rep.fn;
  }
  rep.accuracy = static_cast<double>(rep.tp + rep.tn) / static_cast<double>(rep.n);
  if (rep.tp + rep.fn > 0)
    rep.sensitivity = static_cast<double>(rep.tp) / static_cast<double>(rep.tp + rep.fn);
  if (rep.tn + rep.fp > 0)
    rep.specificity = static_cast<double>(rep.tn) / static_cast<double>(rep.tn + rep.fp);
  if (rep.sensitivity && rep.specificity) rep.auc = auc(scores, test.labels());
  return rep;
}

// --- serialization ------------------------------------------------------------------

namespace {

constexpr int kModelFormatVersion = 1;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<Feature> features_from_json(const json& j) {
  std::vector<Feature> out;
  for (const auto& name : j) {
    const auto f = feature_from_name(name.get<std::string>());
    if (!f) fail(ErrorCode::UnknownFeature, name.get<std::string>());
    out.push_back(*f);
  }
  return out;
}

Hypers hypers_from_json(Algorithm algo, const json& j) {
  if (algo == Algorithm::RandomForest)
    return RandomForestHypers{j.at("trees").get<int>(), j.at("features_per_split").get<int>(),
                              j.at("min_leaf").get<int>()};
  return SvmHypers{j.at("c").get<double>(), j.at("gamma").get<double>()};
}

}  // namespace

json hypers_json(const Hypers& hypers) {
  if (const auto* rf = std::get_if<RandomForestHypers>(&hypers))
    return {{"trees", rf->trees}, {"features_per_split", rf->features_per_split}, {"min_leaf", rf->min_leaf}};
  const auto& svm = std::get<SvmHypers>(hypers);
  return {{"c", svm.c}, {"gamma", svm.gamma}};
}

json spec_json(const ClassifierSpec& spec) {
  const auto& s = spec.space;
  return {{"algorithm", std::string(algorithm_name(spec.algorithm))},
          {"cv_repeats", spec.cv_repeats},
          {"cv_folds", spec.cv_folds},
          {"search_draws", spec.search_draws},
          {"seed", spec.seed},
          {"selection_metric", "cv_mean_auc"},
          {"hyper_space",
           {{"rf_trees", {s.rf_trees.lo, s.rf_trees.hi}},
            {"rf_features_per_split", {s.rf_features_per_split.lo, s.rf_features_per_split.hi}},
            {"rf_min_leaf", {s.rf_min_leaf.lo, s.rf_min_leaf.hi}},
            {"svm_c", {s.svm_c.lo, s.svm_c.hi}},
            {"svm_gamma", {s.svm_gamma.lo, s.svm_gamma.hi}}}}};
}

ClassifierSpec spec_from_json(const json& j) {
  ClassifierSpec spec;
  spec.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  spec.cv_repeats = j.value("cv_repeats", spec.cv_repeats);
  spec.cv_folds = j.value("cv_folds", spec.cv_folds);
  spec.search_draws = j.value("search_draws", spec.search_draws);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("hyper_space")) {
    const auto& h = j["hyper_space"];
    auto& s = spec.space;
    const auto ir = [&](const char* k, IntRange& r) {
      if (h.contains(k)) r = {h[k].at(0).get<int>(), h[k].at(1).get<int>()};
    };
    const auto lr = [&](const char* k, LogRange& r) {
      if (h.contains(k)) r = {h[k].at(0).get<double>(), h[k].at(1).get<double>()};
    };
    ir("rf_trees", s.rf_trees);
    ir("rf_features_per_split", s.rf_features_per_split);
    ir("rf_min_leaf", s.rf_min_leaf);
    lr("svm_c", s.svm_c);
    lr("svm_gamma", s.svm_gamma);
  }
  return spec;
}

json model_json(const TrainedModel& m) {
  json features = json::array();
  for (auto f : m.features) features.push_back(std::string(feature_name(f)));
  json search = json::array();
  for (const auto& c : m.search) search.push_back(
        {{"hypers", hypers_json(c.hypers)}, {"cv_auc", c.cv_auc}, {"pooled_auc", c.pooled_auc}});
  json j = {{"format", "contesta.model"},
            {"version", kModelFormatVersion},
            {"spec", spec_json(m.spec)},
            {"features", features},
            {"chosen_hypers", hypers_json(m.chosen)},
            {"cv_auc", m.cv_auc},
            {"search", search}};
  if (m.spec.algorithm == Algorithm::RandomForest) {
    json trees = json::array();
    for (const auto& t : m.forest.trees) {
      json nodes = json::array();
      for (const auto& n : t.nodes)
        nodes.push_back(n.feature < 0 ? json::array({-1, n.votes_losnec ? 1 : 0})
                                      : json::array({n.feature, n.threshold, n.left, n.right}));
      trees.push_back(std::move(nodes));
    }
    j["forest"] = {{"trees", trees}};
  } else {
    j["svm"] = {{"gamma", m.svm.gamma},
                {"bias", m.svm.bias},
                {"coefficients", m.svm.coefficients},
                {"support_vectors", m.svm.support_vectors},
                {"iterations", m.svm.iterations}};
    j["standardization"] = {{"mean", m.standardizer.mean}, {"sd", m.standardizer.sd}};
    j["platt"] = {{"a", m.platt.a}, {"b", m.platt.b}};
  }
  return j;
}

TrainedModel model_from_json(const json& j) {
  try {
    if (j.at("format") != "contesta.model") fail(ErrorCode::ParseError, "not a model artifact");
    if (j.at("version").get<int>() != kModelFormatVersion)
      fail(ErrorCode::ParseError, "unsupported model artifact version");
    TrainedModel m;
    m.spec = spec_from_json(j.at("spec"));
    m.features = features_from_json(j.at("features"));
    m.chosen = hypers_from_json(m.spec.algorithm, j.at("chosen_hypers"));
    m.cv_auc = j.value("cv_auc", 0.0);
    for (const auto& c : j.value("search", json::array()))
      m.search.push_back({hypers_from_json(m.spec.algorithm, c.at("hypers")), c.at("cv_auc").get<double>(),
                          c.value("pooled_auc", 0.0)});
    if (m.spec.algorithm == Algorithm::RandomForest) {
      for (const auto& t : j.at("forest").at("trees")) {
        DecisionTree tree;
        for (const auto& n : t) {
          TreeNode node;
          if (n.at(0).get<int>() < 0) {
            node.votes_losnec = n.at(1).get<int>() != 0;
          } else {
            node.feature = n.at(0).get<int>();
            node.threshold = n.at(1).get<double>();
            node.left = n.at(2).get<int>();
            node.right = n.at(3).get<int>();
          }
          tree.nodes.push_back(node);
        }
        m.forest.trees.push_back(std::move(tree));
      }
    } else {
      const auto& s = j.at("svm");
      m.svm.gamma = s.at("gamma").get<double>();
      m.svm.bias = s.at("bias").get<double>();
      m.svm.coefficients = s.at("coefficients").get<std::vector<double>>();
      m.svm.support_vectors = s.at("support_vectors").get<std::vector<std::vector<double>>>();
      m.svm.iterations = s.value("iterations", 0);
      m.standardizer.mean = j.at("standardization").at("mean").get<std::vector<double>>();
      m.standardizer.sd = j.at("standardization").at("sd").get<std::vector<double>>();
      m.platt = {j.at("platt").at("a").get<double>(), j.at("platt").at("b").get<double>()};
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("malformed model artifact: ") + e.what());
  }
}

json eval_json(const EvalReport& r) {
  return {{"n", r.n},
          {"threshold", r.threshold},
          {"positive_class", "LosNec"},
          {"confusion", {{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}}},
          {"accuracy", r.accuracy},
          {"sensitivity", optional_json(r.sensitivity)},
          {"specificity", optional_json(r.specificity)},
          {"auc", optional_json(r.auc)}};
}

EvalReport eval_from_json(const json& j) {
  const auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
  };
  EvalReport r;
  r.n = j.at("n").get<std::size_t>();
  r.threshold = j.value("threshold", kDecisionThreshold);
  const auto& c = j.at("confusion");
  r.tp = c.at("tp").get<std::size_t>();
  r.fp = c.at("fp").get<std::size_t>();
  r.tn = c.at("tn").get<std::size_t>();
  r.fn = c.at("fn").get<std::size_t>();
  r.accuracy = j.at("accuracy").get<double>();
  r.sensitivity = opt("sensitivity");
  r.specificity = opt("specificity");
  r.auc = opt("auc");
  return r;
}

}  // namespace contesta
