#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "contesta/signals.hpp"

namespace contesta {

enum class Gender { Female, Male };
enum class Label { Healthy, LosNec };

std::string_view gender_name(Gender g) noexcept;
Gender parse_gender(std::string_view text);
std::string_view label_name(Label l) noexcept;
Label parse_label(std::string_view text);

struct Demographics {
  Gender gen = Gender::Female;
  double ga = 28.0;    // gestational age, weeks
  double bw = 1000.0;  // birth weight, g
  double w = 1100.0;   // current weight, g
  double pna = 10.0;   // postnatal age, weeks

  void validate() const;
};

struct EpisodeRecord {
  std::string record_id;
  Demographics demographics;
  DynamicFeatures features;
  Label label = Label::Healthy;
};

// Model features in the canonical (table) order. Ties during VIF pruning
// resolve toward the later entry of this order.
enum class Feature { Gen, Ga, Bw, W, Pna, Xc, Sa, Hrm, Spo2m, Hs, Brs, Ts };

inline constexpr std::array<Feature, 12> kAllFeatures = {
    Feature::Gen, Feature::Ga,  Feature::Bw,  Feature::W,     Feature::Pna, Feature::Xc,
    Feature::Sa,  Feature::Hrm, Feature::Spo2m, Feature::Hs, Feature::Brs, Feature::Ts};

std::string_view feature_name(Feature f) noexcept;
std::optional<Feature> feature_from_name(std::string_view name) noexcept;
bool is_dynamic(Feature f) noexcept;
inline bool is_static(Feature f) noexcept { return !is_dynamic(f); }
inline bool is_numeric(Feature f) noexcept { return f != Feature::Gen; }

// Gender is encoded Female = 0, Male = 1.
double feature_value(const EpisodeRecord& record, Feature f) noexcept;
void set_feature_value(EpisodeRecord& record, Feature f, double value) noexcept;

struct FeatureRange {
  double min = 0.0;
  double max = 0.0;
};

// An assembled, immutable collection of episode records.
class Cohort {
 public:
  Cohort() = default;

  // Validates records, sets every feature active and freezes per-feature ranges.
  static Cohort assemble(std::vector<EpisodeRecord> records);

  // Same ranges, different record subset or active set.
  Cohort with_records(std::vector<EpisodeRecord> records) const;
  Cohort with_active_features(std::vector<Feature> active) const;
  Cohort with_ranges(std::map<Feature, FeatureRange> ranges) const;

  const std::vector<EpisodeRecord>& records() const noexcept { return records_; }
  const std::vector<Feature>& active_features() const noexcept { return active_; }
  const std::map<Feature, FeatureRange>& feature_ranges() const noexcept { return ranges_; }
  FeatureRange range(Feature f) const;

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t count(Label label) const noexcept;
  const EpisodeRecord* find(std::string_view record_id) const noexcept;
  bool is_active(Feature f) const noexcept;

  // Row-major feature matrix over the given features.
  std::vector<std::vector<double>> feature_rows(std::span<const Feature> features) const;
  std::vector<Label> labels() const;

 private:
  std::vector<EpisodeRecord> records_;
  std::vector<Feature> active_;
  std::map<Feature, FeatureRange> ranges_;
};

// --- multicollinearity ------------------------------------------------------

// VIF of each column of a records x features matrix. Exact collinearity is
// reported as +infinity.
std::vector<double> vif(const Eigen::MatrixXd& data);

struct VifStep {
  std::vector<std::pair<Feature, double>> table;
  std::optional<Feature> removed;
};

struct PruneResult {
  Cohort cohort;
  std::vector<VifStep> log;  // one entry per removal; empty when nothing fired
  std::vector<std::pair<Feature, double>> final_table;
};

inline constexpr double kDefaultVifThreshold = 2.5;

// Gender is categorical and excluded from VIF; it stays active.
PruneResult prune_multicollinearity(const Cohort& cohort,
                                    double threshold = kDefaultVifThreshold);

nlohmann::json prune_log_json(const PruneResult& result, double threshold);

// --- splitting ----------------------------------------------------------------

struct SplitResult {
  Cohort train;
  Cohort test;
};

SplitResult stratified_split(const Cohort& cohort, double train_fraction, std::uint64_t seed);

// --- files --------------------------------------------------------------------

// Cohort CSV: record_id,gen,ga_wk,bw_g,w_g,pna_wk,xc,sa,hrm,spo2m,hs,brs,ts,label
std::string cohort_csv(const Cohort& cohort);
Cohort parse_cohort_csv(std::string_view text, const std::string& source_name);

// Sidecar holding active features and the frozen ranges.
nlohmann::json cohort_meta_json(const Cohort& cohort);

std::filesystem::path cohort_meta_path(const std::filesystem::path& csv_path);
void write_cohort(const std::filesystem::path& csv_path, const Cohort& cohort);
// Restricts the active set and restores frozen ranges from a sidecar document.
Cohort apply_cohort_meta(const Cohort& base, const nlohmann::json& meta, const std::string& source_name);
// Reads the CSV and, when present, applies its sidecar.
Cohort read_cohort(const std::filesystem::path& csv_path);

// Joins daily features with a demographics table
// (infant_id,gen,ga_wk,bw_g,w_g,pna_wk,label). record_id = infant_id + "_" + date.
struct DemographicsRow {
  std::string infant_id;
  Demographics demographics;
  Label label = Label::Healthy;
};
std::vector<DemographicsRow> read_demographics(const std::filesystem::path& path);
std::string demographics_csv(const std::vector<DemographicsRow>& rows);
Cohort assemble_cohort(const std::vector<DailyEpisode>& episodes,
                       const std::vector<DemographicsRow>& demographics);

}  // namespace contesta
