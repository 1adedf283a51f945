#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "contesta/cohort.hpp"

namespace contesta {

// Anything the explainers can score: an ordered feature list and a
// probability of LosNec for a vector in that order.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual const std::vector<Feature>& feature_names() const = 0;
  virtual double predict_proba(std::span<const double> x) const = 0;

  double predict_proba(const EpisodeRecord& record) const;
  std::vector<double> feature_vector(const EpisodeRecord& record) const;
};

inline constexpr double kDecisionThreshold = 0.5;

// Scores at the threshold count as LosNec.
inline Label classify(double score, double threshold = kDecisionThreshold) {
  return score >= threshold ? Label::LosNec : Label::Healthy;
}

// --- random forest -------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  bool votes_losnec = false;  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  bool votes_losnec(std::span<const double> x) const;
  bool uses_feature(int feature) const;
};

struct RandomForestHypers {
  int trees = 500;
  int features_per_split = 1;
  int min_leaf = 1;
};

// Trees are grown from per-tree streams derived from (seed, tree index), so a
// larger forest with the same seed extends a smaller one tree for tree.
struct Forest {
  std::vector<DecisionTree> trees;
  double vote_fraction(std::span<const double> x) const;
};

Forest grow_forest(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
                   const RandomForestHypers& hypers, std::uint64_t seed);

// --- RBF SVM ----------------------------------------------------------------------

struct SvmHypers {
  double c = 1.0;
  double gamma = 0.1;
};

inline constexpr double kSmoTolerance = 1e-3;

struct SvmSolution {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> coefficients;  // alpha_i * y_i, y = +1 for LosNec
  double bias = 0.0;
  double gamma = 0.1;
  int iterations = 0;

  double decision_value(std::span<const double> x) const;
};

// Sequential minimal optimization on the C-SVC dual with an RBF kernel.
SvmSolution solve_svm(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
                      const SvmHypers& hypers, double tolerance = kSmoTolerance);

// p(LosNec | f) = 1 / (1 + exp(a f + b)).
struct PlattSigmoid {
  double a = -1.0;
  double b = 0.0;
  double operator()(double decision_value) const;
};

PlattSigmoid fit_platt(std::span<const double> decision_values, std::span<const Label> labels);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;  // 1 for constant columns

  static Standardizer fit(const std::vector<std::vector<double>>& rows);
  std::vector<double> apply(std::span<const double> x) const;
};

// --- training contract -----------------------------------------------------------

enum class Algorithm { RandomForest, RbfSvm };

std::string_view algorithm_name(Algorithm a) noexcept;
Algorithm parse_algorithm(std::string_view text);

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct LogRange {
  double lo = 1.0;
  double hi = 1.0;
};

struct HyperSpace {
  IntRange rf_trees{200, 500};
  IntRange rf_features_per_split{1, 0};  // hi = 0 means "number of features"
  IntRange rf_min_leaf{1, 5};
  LogRange svm_c{0x1.0p-5, 0x1.0p10};
  LogRange svm_gamma{0x1.0p-10, 0x1.0p2};
};

struct ClassifierSpec {
  Algorithm algorithm = Algorithm::RandomForest;
  HyperSpace space;
  int cv_repeats = 2;
  int cv_folds = 10;
  int search_draws = 25;
  std::uint64_t seed = 0;

  void validate() const;
};

using Hypers = std::variant<RandomForestHypers, SvmHypers>;

struct CandidateScore {
  Hypers hypers;
  double cv_auc = 0.0;  // mean of per-fold AUCs; tie-break
  // AUC of the out-of-fold scores pooled across folds, averaged over repeats.
  // This is the selection criterion.
  double pooled_auc = 0.0;
};

class TrainedModel final : public Classifier {
 public:
  ClassifierSpec spec;
  Hypers chosen;
  std::vector<Feature> features;
  std::vector<CandidateScore> search;  // every evaluated candidate, in draw order
  double cv_auc = 0.0;

  // Exactly one of these is populated, per spec.algorithm.
  Forest forest;
  SvmSolution svm;
  Standardizer standardizer;
  PlattSigmoid platt;

  const std::vector<Feature>& feature_names() const override { return features; }
  double predict_proba(std::span<const double> x) const override;
  using Classifier::predict_proba;

  // Raw SVM decision value (standardization applied). SVM only.
  double decision_value(std::span<const double> x) const;
};

// Stratified fold assignment (fold index per record) for one CV repeat.
std::vector<int> stratified_folds(std::span<const Label> labels, int folds, std::uint64_t seed);

TrainedModel fit(const ClassifierSpec& spec, const Cohort& train);

// Fits one concrete hyperparameter set without search or CV. Platt
// calibration for the SVM then uses in-sample decision values.
TrainedModel fit_fixed(Algorithm algorithm, const Hypers& hypers, const Cohort& train,
                       std::uint64_t seed);

// Model that scores with a named-feature map; missing names raise MissingFeature.
double predict_named(const Classifier& model, const std::vector<std::pair<std::string, double>>& named);

// --- evaluation ---------------------------------------------------------------------

struct EvalReport {
  std::size_t n = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> auc;  // absent when the test set holds one class
  double threshold = kDecisionThreshold;
};

// Mann-Whitney concordance with half credit for ties. Throws SingleClassTestSet.
double auc(std::span<const double> scores, std::span<const Label> labels);

EvalReport evaluate(const Classifier& model, const Cohort& test,
                    double threshold = kDecisionThreshold);

// --- serialization ------------------------------------------------------------------

nlohmann::json model_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
nlohmann::json eval_json(const EvalReport& report);
EvalReport eval_from_json(const nlohmann::json& j);
nlohmann::json hypers_json(const Hypers& hypers);
nlohmann::json spec_json(const ClassifierSpec& spec);
ClassifierSpec spec_from_json(const nlohmann::json& j);

}  // namespace contesta
