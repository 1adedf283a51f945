#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "contesta/cohort.hpp"
#include "contesta/local_explain.hpp"
#include "contesta/signals.hpp"

namespace contesta {

struct DemographicRange {
  double lo = 0.0;
  double median = 0.0;
  double hi = 0.0;
};

// Seeded generator parameters. Demographic ranges mirror a 48-infant NICU
// cohort; every LosNec infant gets a Healthy partner with near-identical
// maturity and the same gender.
struct SynthConfig {
  int n_per_class = 24;
  int epoch_seconds = 3600;
  std::string date = "2021-01-01";

  DemographicRange ga{24.0, 28.0, 32.0};
  DemographicRange bw{535.0, 1022.0, 1570.0};
  DemographicRange w{525.0, 1117.0, 1800.0};
  DemographicRange pna{4.0, 12.5, 40.0};
  double female_fraction = 25.0 / 48.0;
  double w_per_ga_week = 25.0;     // g
  double weight_noise_sd = 160.0;  // g
  double pna_log_sd = 0.5;         // pna is log-normal about its median
  double growth_per_week = 25.0;   // g gained per postnatal week
  double bw_noise_sd = 30.0;       // g

  // Matched partners differ by at most these amounts.
  double match_ga = 0.5;
  double match_bw = 40.0;
  double match_w = 185.0;
  double match_pna = 1.0;
  // Illness slows weight gain: within each pair the LosNec infant weighs
  // contrast * deficit grams less than its partner (inside match_w).
  double weight_deficit_losnec = 155.0;

  // Maturity index M = sum of coefficient * range-normalized value over ga, w, pna.
  double maturity_ga = 0.1;
  double maturity_w = 1.0;
  double maturity_pna = 0.1;

  // HR = baseline + variability(M) * shared oscillation + noise; the same
  // oscillation moves SpO2 by `spo2_coupling` percent per bpm.
  double hr_baseline_lo = 140.0;
  double hr_baseline_hi = 165.0;
  double spo2_baseline_lo = 86.0;
  double spo2_baseline_hi = 91.0;
  double variability_base = 1.0;   // bpm at M = 0
  double variability_slope = 4.0;  // bpm per unit of M
  double oscillation_tau_s = 10.0;
  double spo2_coupling = 0.08;
  double hr_noise_sd = 2.0;
  double spo2_noise_sd = 0.5;

  // Illness layer; rates are expected events per minute. LosNec parameters
  // are healthy + contrast * (losnec - healthy).
  double contrast = 1.0;
  // Maturity shaping of the LosNec excess, with m = M / max M - 0.5:
  // deceleration rate excess * (1 - slope * m), deceleration depth
  // * (1 + slope * m), desaturation depth * (1 - slope * m).
  double illness_maturity_slope = 0.75;
  double decel_depth_maturity_slope = 0.0;
  double desat_depth_maturity_slope = 1.75;
  double decel_rate_healthy = 0.03;
  double decel_rate_losnec = 0.15;
  double desat_prob_healthy = 0.1;
  double desat_prob_losnec = 0.68;
  // Healthy infants add benign spells (apnea of prematurity) at a per-infant
  // rate uniform on [0, max] (scaled by contrast), widening the Healthy class
  // toward LosNec.
  double benign_decel_rate_max = 0.065;
  double decel_depth_lo = 15.0;  // bpm
  double decel_depth_hi = 35.0;
  double decel_duration_lo = 15.0;  // s
  double decel_duration_hi = 45.0;
  double desat_depth_lo = 2.5;  // %
  double desat_depth_hi = 6.5;
  int desat_lag_s = 4;
  // Per-infant severity multipliers drawn from [1 - spread, 1 + spread].
  double decel_scale_spread = 0.2;
  double desat_scale_spread = 0.2;
  double desat_prob_spread = 0.4;  // per-infant multiplier on the desaturation probability

  // Benign accelerations with a small SpO2 rise; the per-infant rate is
  // uniform on [0, accel_rate_max] events per minute.
  double accel_rate_max = 0.5;
  double accel_height_lo = 8.0;  // bpm
  double accel_height_hi = 18.0;
  double accel_duration_lo = 10.0;  // s
  double accel_duration_hi = 30.0;
  double accel_spo2_lo = 1.0;  // %
  double accel_spo2_hi = 3.0;

  // Class-independent planted threshold episodes (events per minute).
  double brady_rate = 0.002;
  double brady_duration_lo = 2.0;
  double brady_duration_hi = 6.0;
  double tachy_rate_max = 0.1;    // at the top of the HR baseline band
  double tachy_duration_lo = 2.0;
  double tachy_duration_hi = 6.0;
  double hypoxia_rate_max = 0.005; // at the bottom of the SpO2 baseline band
  double hypoxia_duration_lo = 1.0;
  double hypoxia_duration_hi = 4.0;
  // Values written into episode seconds.
  double brady_value_lo = 75.0;
  double brady_value_hi = 84.0;
  double tachy_value_lo = 181.0;
  double tachy_value_hi = 188.0;
  double hypoxia_value_lo = 76.0;
  double hypoxia_value_hi = 79.0;

  std::uint64_t seed = 0;

  void validate() const;
};

struct PlantedDeceleration {
  int start_s = 0;
  int duration_s = 0;
  double depth_bpm = 0.0;
  bool desaturation = false;
  double desat_depth_pct = 0.0;
};

struct EpochTruth {
  std::string infant_id;
  Slot slot = Slot::Morning;
  Label label = Label::Healthy;
  double maturity = 0.0;
  int hypoxia_seconds = 0;
  int brady_seconds = 0;
  int tachy_seconds = 0;
  std::vector<PlantedDeceleration> decelerations;
};

struct SynthTruth {
  std::vector<EpochTruth> epochs;  // same order as SynthOutput::epochs
  std::vector<std::pair<std::string, std::string>> pairs;  // (LosNec id, Healthy id)
};

struct SynthOutput {
  std::vector<VitalSignEpoch> epochs;
  std::vector<DemographicsRow> demographics;
  SynthTruth truth;
};

SynthOutput generate_cohort(const SynthConfig& config);

// Extracts features from the generated epochs and assembles the cohort.
Cohort synth_cohort(const SynthOutput& output, int max_lag_s = kDefaultMaxLagSeconds);
Cohort synth_cohort(const SynthConfig& config, int max_lag_s = kDefaultMaxLagSeconds);

enum class ProbeMode { PatternViolating, PatternConsistent };

struct Probe {
  EpisodeRecord record;  // label is the class whose pattern the query carries
  Label pattern_class = Label::Healthy;
  // PatternViolating probes are scored by a model trained on flipped labels,
  // which then predicts the opposite of the planted pattern.
  bool train_with_flipped_labels = false;
  Verdict expected = Verdict::Inconclusive;
};

// A fresh infant (not part of the cohort) whose dynamics carry one class's
// pattern. With contrast 0 the expected verdict is Inconclusive.
Probe plant_misclassification_probe(const SynthConfig& config, ProbeMode mode, std::uint64_t seed);

Cohort flip_labels(const Cohort& cohort);

nlohmann::json truth_json(const SynthTruth& truth);
nlohmann::json synth_config_json(const SynthConfig& config);

// Writes epochs/*.csv, manifest.csv, demographics.csv and truth.json.
void write_synth_output(const std::filesystem::path& dir, const SynthOutput& output);

}  // namespace contesta
