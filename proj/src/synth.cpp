#include "contesta/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>

#include <fmt/format.h>

#include "contesta/error.hpp"
#include "contesta/io.hpp"
#include "contesta/rng.hpp"

namespace contesta {

using nlohmann::json;

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void check_range(const DemographicRange& r, const char* name, double floor, double ceil) {
  if (!(r.lo < r.median && r.median < r.hi && r.lo >= floor && r.hi <= ceil))
    fail(ErrorCode::InvalidConfig, fmt::format("{} range must satisfy {} <= lo < median < hi <= {}",
                                               name, floor, ceil));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_per_class < 1) fail(ErrorCode::InvalidConfig, "n_per_class must be >= 1");
  if (epoch_seconds < 2 * kDefaultMaxLagSeconds + 2)
    fail(ErrorCode::InvalidConfig, "epochs are too short for cross-correlation");
  check_range(ga, "ga", 20.0, 45.0);
  check_range(bw, "bw", 1e-9, 6000.0 - 1e-9);
  check_range(w, "w", 1e-9, 6000.0 - 1e-9);
  check_range(pna, "pna", 0.0, 1e6);
  if (!in_unit(female_fraction)) fail(ErrorCode::InvalidConfig, "female_fraction must lie in [0, 1]");
  for (double t : {match_ga, match_bw, match_w, match_pna})
    if (!(t >= 0.0)) fail(ErrorCode::InvalidConfig, "match tolerances must be >= 0");
  if (!(weight_deficit_losnec >= 0.0 && contrast * weight_deficit_losnec <= match_w))
    fail(ErrorCode::InvalidConfig, "contrast * weight deficit must lie in [0, match_w]");
  for (double s : {bw_noise_sd, weight_noise_sd, pna_log_sd, hr_noise_sd, spo2_noise_sd})
    if (!(s >= 0.0)) fail(ErrorCode::InvalidConfig, "noise levels must be >= 0");
  for (double m : {maturity_ga, maturity_w, maturity_pna})
    if (!(m >= 0.0)) fail(ErrorCode::InvalidConfig, "maturity coefficients must be >= 0");
  if (!(hr_baseline_lo < hr_baseline_hi && hr_baseline_lo > kBradycardiaHr + 10 &&
        hr_baseline_hi < kTachycardiaHr - 10))
    fail(ErrorCode::InvalidConfig, "HR baseline band must sit well inside (85, 180)");
  if (!(spo2_baseline_lo < spo2_baseline_hi && spo2_baseline_lo > kHypoxiaSpo2 + 5 &&
        spo2_baseline_hi <= 100.0))
    fail(ErrorCode::InvalidConfig, "SpO2 baseline band must sit inside (85, 100]");
  if (!(variability_base >= 0.0 && variability_slope >= 0.0 && oscillation_tau_s > 0.0 &&
        spo2_coupling >= 0.0))
    fail(ErrorCode::InvalidConfig, "variability parameters must be non-negative");
  if (!(contrast >= 0.0)) fail(ErrorCode::InvalidConfig, "contrast must be >= 0");
  if (!in_unit(decel_rate_healthy + benign_decel_rate_max))
    fail(ErrorCode::InvalidConfig, "healthy deceleration rate plus benign spells must lie in [0, 1]");
  for (double r : {benign_decel_rate_max, decel_rate_healthy, decel_rate_losnec, desat_prob_healthy, desat_prob_losnec,
                   accel_rate_max, brady_rate, tachy_rate_max, hypoxia_rate_max})
    if (!in_unit(r)) fail(ErrorCode::InvalidConfig, "rates and probabilities must lie in [0, 1]");
  for (double slope : {illness_maturity_slope, decel_depth_maturity_slope, desat_depth_maturity_slope})
    if (!(slope >= 0.0 && contrast * slope < 2.0))
      fail(ErrorCode::InvalidConfig, "maturity slopes must be >= 0 and keep severities positive");
  if (!in_unit(desat_prob_healthy + contrast * (desat_prob_losnec - desat_prob_healthy)))
    fail(ErrorCode::InvalidConfig, "contrast pushes the LosNec desaturation probability outside [0, 1]");
  for (double severity : {1.0 - 0.5 * illness_maturity_slope, 1.0 + 0.5 * illness_maturity_slope})
    if (!in_unit(decel_rate_healthy + contrast * severity * (decel_rate_losnec - decel_rate_healthy)))
      fail(ErrorCode::InvalidConfig, "contrast pushes the LosNec deceleration rate outside [0, 1]");
  const auto check_span = [](double lo, double hi, double min_lo, const char* what) {
    if (!(lo >= min_lo && lo <= hi)) fail(ErrorCode::InvalidConfig, fmt::format("bad {} range", what));
  };
  check_span(decel_depth_lo, decel_depth_hi, 0.0, "deceleration depth");
  check_span(decel_duration_lo, decel_duration_hi, 2.0, "deceleration duration");
  check_span(desat_depth_lo, desat_depth_hi, 0.0, "desaturation depth");
  check_span(accel_height_lo, accel_height_hi, 0.0, "acceleration height");
  check_span(accel_duration_lo, accel_duration_hi, 2.0, "acceleration duration");
  check_span(accel_spo2_lo, accel_spo2_hi, 0.0, "acceleration SpO2 rise");
  check_span(brady_duration_lo, brady_duration_hi, 1.0, "bradycardia duration");
  check_span(tachy_duration_lo, tachy_duration_hi, 1.0, "tachycardia duration");
  check_span(hypoxia_duration_lo, hypoxia_duration_hi, 1.0, "hypoxia duration");
  if (!(decel_scale_spread >= 0.0 && decel_scale_spread < 1.0 && desat_scale_spread >= 0.0 &&
        desat_scale_spread < 1.0 && desat_prob_spread >= 0.0 && desat_prob_spread < 1.0))
    fail(ErrorCode::InvalidConfig, "severity spreads must lie in [0, 1)");
  // Planted values must land strictly beyond the thresholds after rounding to 0.1.
  if (!(brady_value_lo > 0.0 && brady_value_lo <= brady_value_hi && brady_value_hi <= kBradycardiaHr - 0.1 &&
        tachy_value_lo >= kTachycardiaHr + 0.1 && tachy_value_lo <= tachy_value_hi && tachy_value_hi < 300.0 &&
        hypoxia_value_lo > 0.0 && hypoxia_value_lo <= hypoxia_value_hi && hypoxia_value_hi <= kHypoxiaSpo2 - 0.1))
    fail(ErrorCode::InvalidConfig, "planted episode values must lie strictly beyond their thresholds");
  if (desat_lag_s < 0) fail(ErrorCode::InvalidConfig, "desaturation lag must be >= 0");
  for (double d : {accel_duration_hi, brady_duration_hi, tachy_duration_hi, hypoxia_duration_hi, decel_duration_hi})
    if (d >= epoch_seconds) fail(ErrorCode::InvalidConfig, "event durations must fit in an epoch");
}

namespace {

// Half the mass on each side of the median, uniform within each half.
double two_piece(const DemographicRange& r, Rng& rng) {
  const double u = rng.uniform();
  return u < 0.5 ? r.lo + (r.median - r.lo) * (u / 0.5) : r.median + (r.hi - r.median) * ((u - 0.5) / 0.5);
}

double clip(double v, const DemographicRange& r) { return std::clamp(v, r.lo, r.hi); }

Demographics draw_demographics(const SynthConfig& c, Rng& rng) {
  Demographics d;
  d.gen = rng.bernoulli(c.female_fraction) ? Gender::Female : Gender::Male;
  d.ga = two_piece(c.ga, rng);
  d.w = clip(c.w.median + c.w_per_ga_week * (d.ga - c.ga.median) + rng.normal(0.0, c.weight_noise_sd), c.w);
  d.pna = clip(c.pna.median * std::exp(rng.normal(0.0, c.pna_log_sd)), c.pna);
  // Birth weight is current weight minus postnatal growth.
  d.bw = clip(c.bw.median + (d.w - c.w.median) - c.growth_per_week * (d.pna - c.pna.median) +
                  rng.normal(0.0, c.bw_noise_sd),
              c.bw);
  return d;
}

// Partner demographics: each member moves by at most half the tolerance, so
// partners differ by at most the tolerance (clipping cannot widen the gap).
// Weight is the exception: the LosNec partner sits contrast * deficit below
// the Healthy one and only the remaining tolerance is jitter. Jitter shrinks
// with contrast below 1, so at contrast 0 partners are demographic twins.
Demographics jitter(const Demographics& base, const SynthConfig& c, Label label, Rng& rng) {
  Demographics d = base;
  const double deficit = c.contrast * c.weight_deficit_losnec;
  const double shift = (label == Label::LosNec ? -0.5 : 0.5) * deficit;
  const double spread = std::min(c.contrast, 1.0);
  d.ga = clip(base.ga + spread * rng.uniform(-0.5, 0.5) * c.match_ga, c.ga);
  d.bw = clip(base.bw + spread * rng.uniform(-0.5, 0.5) * c.match_bw, c.bw);
  d.w = clip(base.w + shift + spread * rng.uniform(-0.5, 0.5) * (c.match_w - deficit), c.w);
  d.pna = clip(base.pna + spread * rng.uniform(-0.5, 0.5) * c.match_pna, c.pna);
  return d;
}

double normalized(double v, const DemographicRange& r) { return (v - r.lo) / (r.hi - r.lo); }

double round1(double v) { return std::round(v * 10.0) / 10.0; }

struct IllnessParams {
  double decel_rate = 0.0;
  double desat_prob = 0.0;
  double decel_depth_scale = 1.0;
  double desat_depth_scale = 1.0;
};

// LosNec parameters move from the healthy ones by `contrast`. Maturity shapes
// the excess: immature infants decelerate more often with deeper
// desaturations, while mature infants mount deeper decelerations.
IllnessParams illness(const SynthConfig& c, Label label, double maturity_fraction) {
  if (label == Label::Healthy) return {c.decel_rate_healthy, c.desat_prob_healthy, 1.0, 1.0};
  const double k = c.contrast;
  const double centered = maturity_fraction - 0.5;
  return {c.decel_rate_healthy +
              k * (1.0 - c.illness_maturity_slope * centered) * (c.decel_rate_losnec - c.decel_rate_healthy),
          c.desat_prob_healthy + k * (c.desat_prob_losnec - c.desat_prob_healthy),
          1.0 + k * c.decel_depth_maturity_slope * centered,
          1.0 - k * c.desat_depth_maturity_slope * centered};
}

double bump(double tau, double duration) {
  if (tau < 0.0 || tau > duration) return 0.0;
  const double s = std::sin(std::numbers::pi * tau / duration);
  return s * s;
}

struct EpochStreams {
  std::uint64_t physiology;  // shared oscillation and noise
  std::uint64_t events;      // decelerations, coupled across classes
  std::uint64_t planted;     // threshold episodes
};

struct SimulatedEpoch {
  VitalSignEpoch epoch;
  EpochTruth truth;
};

// Drawn once per infant-day so both epochs share them. Severity and
// acceleration traits are shared by matched partners; baselines are not.
struct DayBaseline {
  double hr = 0.0;
  double spo2 = 0.0;
  double decel_scale = 1.0;  // infant-level severity of decelerations
  double desat_scale = 1.0;  // and of the accompanying desaturations
  double desat_prob_scale = 1.0;
  double accel_rate = 0.0;  // benign accelerations per minute
  double benign_decel_rate = 0.0;  // extra decelerations of a Healthy infant
};

DayBaseline draw_baseline(const SynthConfig& c, Rng& rng, Rng& own) {
  DayBaseline b;
  b.hr = own.uniform(c.hr_baseline_lo, c.hr_baseline_hi);
  b.spo2 = own.uniform(c.spo2_baseline_lo, c.spo2_baseline_hi);
  b.decel_scale = rng.uniform(1.0 - c.decel_scale_spread, 1.0 + c.decel_scale_spread);
  b.desat_scale = rng.uniform(1.0 - c.desat_scale_spread, 1.0 + c.desat_scale_spread);
  b.desat_prob_scale = rng.uniform(1.0 - c.desat_prob_spread, 1.0 + c.desat_prob_spread);
  b.accel_rate = rng.uniform(0.0, c.accel_rate_max);
  b.benign_decel_rate = own.uniform(0.0, c.benign_decel_rate_max);
  return b;
}

SimulatedEpoch simulate_epoch(const SynthConfig& c, const EpochStreams& streams, const DayBaseline& base,
                              double maturity, Label label) {
  const auto n = static_cast<std::size_t>(c.epoch_seconds);
  const double minutes = c.epoch_seconds / 60.0;
  std::vector<double> hr(n), spo2(n);

  // Autonomic variability: a smooth AR(1) oscillation whose amplitude grows with maturity.
  Rng phys(streams.physiology);
  const double amplitude = c.variability_base + c.variability_slope * maturity;
  const double phi = std::exp(-1.0 / c.oscillation_tau_s);
  const double innovation = std::sqrt(1.0 - phi * phi);
  double s = phys.normal();
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) s = phi * s + innovation * phys.normal();
    hr[t] = base.hr + amplitude * s + phys.normal(0.0, c.hr_noise_sd);
    spo2[t] = base.spo2 + c.spo2_coupling * amplitude * s + phys.normal(0.0, c.spo2_noise_sd);
  }

  // Illness layer. Both classes read the same event stream; a higher rate or
  // desaturation probability only adds events, so LosNec events extend the
  // Healthy partner's.
  SimulatedEpoch out;
  out.truth.label = label;
  out.truth.maturity = maturity;
  Rng ev(streams.events);
  const double total = c.maturity_ga + c.maturity_w + c.maturity_pna;
  const auto p = illness(c, label, total > 0.0 ? maturity / total : 0.5);
  // Benign spells are part of the class contrast: at contrast 0 the classes coincide.
  const double rate = p.decel_rate + (label == Label::Healthy ? c.contrast * base.benign_decel_rate : 0.0);
  // Stochastic rounding keeps the count monotone in the rate for a shared draw.
  const int n_decel = static_cast<int>(std::floor(rate * minutes + ev.uniform()));
  for (int i = 0; i < n_decel; ++i) {
    PlantedDeceleration d;
    const double duration = ev.uniform(c.decel_duration_lo, c.decel_duration_hi);
    d.duration_s = static_cast<int>(std::round(duration));
    d.start_s = static_cast<int>(ev.below(n - static_cast<std::size_t>(d.duration_s)));
    d.depth_bpm = p.decel_depth_scale * base.decel_scale * ev.uniform(c.decel_depth_lo, c.decel_depth_hi);
    d.desaturation = ev.uniform() < std::min(1.0, base.desat_prob_scale * p.desat_prob);
    const double desat_depth = ev.uniform(c.desat_depth_lo, c.desat_depth_hi);
    d.desat_depth_pct = d.desaturation ? p.desat_depth_scale * base.desat_scale * desat_depth : 0.0;
    for (int k = 0; k <= d.duration_s; ++k) {
      const double b = bump(k, d.duration_s);
      const auto t = static_cast<std::size_t>(d.start_s + k);
      if (t < n) hr[t] -= d.depth_bpm * b;
      const auto td = t + static_cast<std::size_t>(c.desat_lag_s);
      if (d.desaturation && td < n) spo2[td] -= d.desat_depth_pct * b;
    }
    out.truth.decelerations.push_back(d);
  }

  // Benign accelerations with a matching SpO2 rise; class independent.
  Rng acc(derive_seed(streams.events, {hash_tag("accelerations")}));
  const int n_accel = static_cast<int>(std::floor(base.accel_rate * minutes + acc.uniform()));
  for (int i = 0; i < n_accel; ++i) {
    const int duration = static_cast<int>(std::round(acc.uniform(c.accel_duration_lo, c.accel_duration_hi)));
    const auto start = static_cast<std::size_t>(acc.below(n - static_cast<std::size_t>(duration)));
    const double height = acc.uniform(c.accel_height_lo, c.accel_height_hi);
    const double rise = acc.uniform(c.accel_spo2_lo, c.accel_spo2_hi);
    for (int k = 0; k <= duration; ++k) {
      const double b = bump(k, duration);
      const auto t = start + static_cast<std::size_t>(k);
      if (t < n) {
        hr[t] += height * b;
        spo2[t] += rise * b;
      }
    }
  }

  // Keep the continuous signal strictly away from the clinical thresholds so
  // that only planted episodes cross them.
  for (std::size_t t = 0; t < n; ++t) {
    hr[t] = round1(std::clamp(hr[t], kBradycardiaHr + 0.5, kTachycardiaHr - 0.5));
    spo2[t] = round1(std::clamp(spo2[t], kHypoxiaSpo2 + 0.5, 100.0));
  }

  // Planted threshold episodes; class independent. Tachycardia is more common
  // at high baselines and hypoxia at low baselines.
  Rng planted(streams.planted);
  std::vector<char> hr_mask(n, 0), spo2_mask(n, 0);
  const auto plant = [&](double rate, double dur_lo, double dur_hi, std::vector<char>& mask, char tag,
                         std::vector<double>& series, double v_lo, double v_hi, int& counter) {
    const int count = planted.poisson(rate * minutes);
    for (int i = 0; i < count; ++i) {
      const auto dur = static_cast<std::size_t>(std::round(planted.uniform(dur_lo, dur_hi)));
      const auto start = static_cast<std::size_t>(planted.below(n - dur + 1));
      for (std::size_t t = start; t < start + dur; ++t) {
        const double v = round1(planted.uniform(v_lo, v_hi));
        if (mask[t]) continue;
        mask[t] = tag;
        series[t] = v;
        ++counter;
      }
    }
  };
  const double hr_position = (base.hr - c.hr_baseline_lo) / (c.hr_baseline_hi - c.hr_baseline_lo);
  const double spo2_position =
      (c.spo2_baseline_hi - base.spo2) / (c.spo2_baseline_hi - c.spo2_baseline_lo);
  plant(c.brady_rate, c.brady_duration_lo, c.brady_duration_hi, hr_mask, 1, hr, c.brady_value_lo, c.brady_value_hi,
        out.truth.brady_seconds);
  plant(c.tachy_rate_max * hr_position, c.tachy_duration_lo, c.tachy_duration_hi, hr_mask, 2, hr,
        c.tachy_value_lo, c.tachy_value_hi, out.truth.tachy_seconds);
  plant(c.hypoxia_rate_max * spo2_position, c.hypoxia_duration_lo, c.hypoxia_duration_hi, spo2_mask,
        3, spo2, c.hypoxia_value_lo, c.hypoxia_value_hi, out.truth.hypoxia_seconds);

  out.epoch.hr = std::move(hr);
  out.epoch.spo2 = std::move(spo2);
  return out;
}

double maturity_index(const SynthConfig& c, const Demographics& d) {
  return c.maturity_ga * normalized(d.ga, c.ga) + c.maturity_w * normalized(d.w, c.w) +
         c.maturity_pna * normalized(d.pna, c.pna);
}

// Physiology and illness events come from the pair stream; threshold
// episodes from the infant's own stream.
EpochStreams streams_for(std::uint64_t pair, std::uint64_t own, std::uint64_t slot) {
  return {derive_seed(pair, {hash_tag("physiology"), slot}), derive_seed(pair, {hash_tag("events"), slot}),
          derive_seed(own, {hash_tag("planted"), slot})};
}

constexpr Slot kSlots[] = {Slot::Morning, Slot::Afternoon};

}  // namespace

SynthOutput generate_cohort(const SynthConfig& c) {
  c.validate();
  SynthOutput out;
  const int digits = c.n_per_class >= 100 ? 3 : 2;
  for (int i = 0; i < c.n_per_class; ++i) {
    const auto pair_seed = derive_seed(c.seed, {hash_tag("pair"), static_cast<std::uint64_t>(i)});
    Rng demo(derive_seed(pair_seed, {hash_tag("demographics")}));
    const Demographics base = draw_demographics(c, demo);
    const Demographics members[2] = {jitter(base, c, Label::LosNec, demo),
                                     jitter(base, c, Label::Healthy, demo)};
    // Pair-level maturity drives the physiology of both partners.
    const double m = maturity_index(c, base);

    const std::string ids[2] = {fmt::format("L{:0{}d}", i + 1, digits), fmt::format("H{:0{}d}", i + 1, digits)};
    const Label labels[2] = {Label::LosNec, Label::Healthy};
    for (int member = 0; member < 2; ++member) {
      out.demographics.push_back({ids[member], members[member], labels[member]});
      // At contrast 0 the label is the only difference between partners, so
      // they also share their own baseline and planted-episode streams.
      const auto member_tag = c.contrast > 0.0 ? static_cast<std::uint64_t>(member) : 0;
      const auto own_seed = derive_seed(pair_seed, {hash_tag("member"), member_tag});
      Rng day(derive_seed(pair_seed, {hash_tag("baseline")}));
      Rng own(derive_seed(own_seed, {hash_tag("baseline")}));
      const DayBaseline baseline = draw_baseline(c, day, own);
      for (std::uint64_t s = 0; s < 2; ++s) {
        auto sim = simulate_epoch(c, streams_for(pair_seed, own_seed, s), baseline, m, labels[member]);
        sim.epoch.infant_id = ids[member];
        sim.epoch.date = c.date;
        sim.epoch.slot = kSlots[s];
        sim.truth.infant_id = ids[member];
        sim.truth.slot = kSlots[s];
        out.epochs.push_back(std::move(sim.epoch));
        out.truth.epochs.push_back(std::move(sim.truth));
      }
    }
    out.truth.pairs.emplace_back(ids[0], ids[1]);
  }
  return out;
}

namespace {

std::vector<DailyEpisode> daily_episodes(const std::vector<VitalSignEpoch>& epochs, int max_lag_s) {
  std::map<std::pair<std::string, std::string>, std::pair<std::optional<DynamicFeatures>, std::optional<DynamicFeatures>>> days;
  for (const auto& e : epochs) {
    auto& slot = days[{e.infant_id, e.date}];
    (e.slot == Slot::Morning ? slot.first : slot.second) = epoch_features(e, max_lag_s);
  }
  std::vector<DailyEpisode> out;
  for (const auto& [key, slots] : days)
    out.push_back({key.first, key.second, daily_features(slots.first, slots.second)});
  return out;
}

}  // namespace

Cohort synth_cohort(const SynthOutput& output, int max_lag_s) {
  return assemble_cohort(daily_episodes(output.epochs, max_lag_s), output.demographics);
}

Cohort synth_cohort(const SynthConfig& config, int max_lag_s) {
  return synth_cohort(generate_cohort(config), max_lag_s);
}

Probe plant_misclassification_probe(const SynthConfig& c, ProbeMode mode, std::uint64_t seed) {
  c.validate();
  const auto probe_seed = derive_seed(c.seed, {hash_tag("probe"), seed});
  Rng rng(derive_seed(probe_seed, {hash_tag("demographics")}));
  Probe probe;
  probe.pattern_class = rng.bernoulli(0.5) ? Label::LosNec : Label::Healthy;
  Demographics d = draw_demographics(c, rng);
  d.w = clip(d.w + (probe.pattern_class == Label::LosNec ? -0.5 : 0.5) * c.contrast * c.weight_deficit_losnec,
             c.w);
  Rng day(derive_seed(probe_seed, {hash_tag("baseline")}));
  Rng own(derive_seed(probe_seed, {hash_tag("own-baseline")}));
  const DayBaseline baseline = draw_baseline(c, day, own);
  const double m = maturity_index(c, d);

  const std::string id = fmt::format("Q{:016x}", seed);
  std::vector<VitalSignEpoch> epochs;
  for (std::uint64_t s = 0; s < 2; ++s) {
    auto sim = simulate_epoch(c, streams_for(probe_seed, probe_seed, s), baseline, m, probe.pattern_class);
    sim.epoch.infant_id = id;
    sim.epoch.date = c.date;
    sim.epoch.slot = kSlots[s];
    epochs.push_back(std::move(sim.epoch));
  }
  const auto days = daily_episodes(epochs, kDefaultMaxLagSeconds);
  probe.record = {id + "_" + c.date, d, days.front().features, probe.pattern_class};
  probe.train_with_flipped_labels = mode == ProbeMode::PatternViolating;
  if (c.contrast == 0.0)
    probe.expected = Verdict::Inconclusive;
  else
    probe.expected = mode == ProbeMode::PatternViolating ? Verdict::Contest : Verdict::Justify;
  return probe;
}

Cohort flip_labels(const Cohort& cohort) {
  std::vector<EpisodeRecord> records = cohort.records();
  for (auto& r : records) r.label = r.label == Label::LosNec ? Label::Healthy : Label::LosNec;
  return cohort.with_records(std::move(records));
}

json truth_json(const SynthTruth& truth) {
  json epochs = json::array();
  for (const auto& e : truth.epochs) {
    json decels = json::array();
    for (const auto& d : e.decelerations)
      decels.push_back({{"start_s", d.start_s},
                        {"duration_s", d.duration_s},
                        {"depth_bpm", d.depth_bpm},
                        {"desaturation", d.desaturation},
                        {"desat_depth_pct", d.desat_depth_pct}});
    epochs.push_back({{"infant_id", e.infant_id},
                      {"slot", std::string(slot_name(e.slot))},
                      {"label", std::string(label_name(e.label))},
                      {"maturity", e.maturity},
                      {"hypoxia_seconds", e.hypoxia_seconds},
                      {"brady_seconds", e.brady_seconds},
                      {"tachy_seconds", e.tachy_seconds},
                      {"decelerations", decels}});
  }
  json pairs = json::array();
  for (const auto& [l, h] : truth.pairs) pairs.push_back({{"losnec", l}, {"healthy", h}});
  return {{"epochs", epochs}, {"pairs", pairs}};
}

json synth_config_json(const SynthConfig& c) {
  const auto range = [](const DemographicRange& r) {
    return json{{"lo", r.lo}, {"median", r.median}, {"hi", r.hi}};
  };
  return {{"n_per_class", c.n_per_class},
          {"epoch_seconds", c.epoch_seconds},
          {"date", c.date},
          {"ranges", {{"ga", range(c.ga)}, {"bw", range(c.bw)}, {"w", range(c.w)}, {"pna", range(c.pna)}}},
          {"female_fraction", c.female_fraction},
          {"w_per_ga_week", c.w_per_ga_week},
          {"weight_noise_sd", c.weight_noise_sd},
          {"pna_log_sd", c.pna_log_sd},
          {"growth_per_week", c.growth_per_week},
          {"bw_noise_sd", c.bw_noise_sd},
          {"match", {{"ga", c.match_ga}, {"bw", c.match_bw}, {"w", c.match_w}, {"pna", c.match_pna}}},
          {"weight_deficit_losnec", c.weight_deficit_losnec},
          {"maturity", {{"ga", c.maturity_ga}, {"w", c.maturity_w}, {"pna", c.maturity_pna}}},
          {"hr_baseline", {c.hr_baseline_lo, c.hr_baseline_hi}},
          {"spo2_baseline", {c.spo2_baseline_lo, c.spo2_baseline_hi}},
          {"variability_base", c.variability_base},
          {"variability_slope", c.variability_slope},
          {"oscillation_tau_s", c.oscillation_tau_s},
          {"spo2_coupling", c.spo2_coupling},
          {"hr_noise_sd", c.hr_noise_sd},
          {"spo2_noise_sd", c.spo2_noise_sd},
          {"contrast", c.contrast},
          {"illness_maturity_slope", c.illness_maturity_slope},
          {"decel_depth_maturity_slope", c.decel_depth_maturity_slope},
          {"desat_depth_maturity_slope", c.desat_depth_maturity_slope},
          {"decel_rate", {{"healthy", c.decel_rate_healthy}, {"losnec", c.decel_rate_losnec}}},
          {"benign_decel_rate_max", c.benign_decel_rate_max},
          {"desat_prob", {{"healthy", c.desat_prob_healthy}, {"losnec", c.desat_prob_losnec}}},
          {"decel_depth", {c.decel_depth_lo, c.decel_depth_hi}},
          {"decel_duration", {c.decel_duration_lo, c.decel_duration_hi}},
          {"desat_depth", {c.desat_depth_lo, c.desat_depth_hi}},
          {"desat_lag_s", c.desat_lag_s},
          {"decel_scale_spread", c.decel_scale_spread},
          {"desat_scale_spread", c.desat_scale_spread},
          {"desat_prob_spread", c.desat_prob_spread},
          {"accel_rate_max", c.accel_rate_max},
          {"accel_height", {c.accel_height_lo, c.accel_height_hi}},
          {"accel_duration", {c.accel_duration_lo, c.accel_duration_hi}},
          {"accel_spo2", {c.accel_spo2_lo, c.accel_spo2_hi}},
          {"brady_rate", c.brady_rate},
          {"brady_value", {c.brady_value_lo, c.brady_value_hi}},
          {"tachy_value", {c.tachy_value_lo, c.tachy_value_hi}},
          {"hypoxia_value", {c.hypoxia_value_lo, c.hypoxia_value_hi}},
          {"tachy_rate_max", c.tachy_rate_max},
          {"hypoxia_rate_max", c.hypoxia_rate_max},
          {"seed", c.seed}};
}

void write_synth_output(const std::filesystem::path& dir, const SynthOutput& output) {
  std::filesystem::create_directories(dir / "epochs");
  std::vector<ManifestEntry> manifest;
  for (const auto& e : output.epochs) {
    const auto rel = fmt::format("epochs/{}_{}_{}.csv", e.infant_id, e.date, slot_name(e.slot));
    io::atomic_write_text(dir / rel, epoch_csv(e));
    manifest.push_back({e.infant_id, e.date, e.slot, rel});
  }
  io::atomic_write_text(dir / "manifest.csv", manifest_csv(manifest));
  io::atomic_write_text(dir / "demographics.csv", demographics_csv(output.demographics));
  io::atomic_write_text(dir / "truth.json", truth_json(output.truth).dump(2) + "\n");
}

}  // namespace contesta
