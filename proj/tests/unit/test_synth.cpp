#include <cmath>
#include <map>

#include <doctest.h>

#include "contesta/synth.hpp"
#include "helpers.hpp"

using namespace contesta;

TEST_SUITE("synth") {
  TEST_CASE("same seed, same cohort; different seed, different cohort") {
    SynthConfig c;
    c.n_per_class = 4;
    const auto a = generate_cohort(c), b = generate_cohort(c);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
      CHECK(a.epochs[i].hr == b.epochs[i].hr);
      CHECK(a.epochs[i].spo2 == b.epochs[i].spo2);
    }
    CHECK(truth_json(a.truth) == truth_json(b.truth));
    c.seed = 1;
    CHECK(generate_cohort(c).epochs[0].hr != a.epochs[0].hr);
  }

  TEST_CASE("planted threshold episodes are recovered exactly") {
    SynthConfig c;
    c.n_per_class = 6;
    c.hypoxia_rate_max = 0.05;  // plenty of events
    c.brady_rate = 0.02;
    const auto out = generate_cohort(c);
    int with_events = 0;
    for (std::size_t i = 0; i < out.epochs.size(); ++i) {
      const auto f = threshold_fractions(out.epochs[i]);
      const auto& t = out.truth.epochs[i];
      CHECK(f.hs == t.hypoxia_seconds / 3600.0);
      CHECK(f.brs == t.brady_seconds / 3600.0);
      CHECK(f.ts == t.tachy_seconds / 3600.0);
      with_events += t.hypoxia_seconds > 0 && t.brady_seconds > 0;
    }
    CHECK(with_events > 0);
  }

  TEST_CASE("emitted epochs satisfy their invariants") {
    SynthConfig c;
    c.n_per_class = 5;
    for (const auto& e : generate_cohort(c).epochs) {
      CHECK_NOTHROW(e.validate());
      CHECK(e.hr.size() == 3600);
    }
  }

  TEST_CASE("LosNec raises SA and XC on average") {
    for (std::uint64_t seed : {0, 3, 11}) {
      SynthConfig c;
      c.seed = seed;
      const auto cohort = synth_cohort(c);
      double sa[2] = {0, 0}, xc[2] = {0, 0};
      for (const auto& r : cohort.records()) {
        const int k = r.label == Label::LosNec;
        sa[k] += r.features.sa_hr, xc[k] += r.features.xc_hr_spo2;
      }
      CHECK(sa[1] > sa[0]);
      CHECK(xc[1] > xc[0]);
    }
  }

  TEST_CASE("matched partners share gender and stay within tolerance") {
    const SynthConfig c;
    const auto out = generate_cohort(c);
    std::map<std::string, const DemographicsRow*> by_id;
    for (const auto& d : out.demographics) by_id[d.infant_id] = &d;
    REQUIRE(out.truth.pairs.size() == static_cast<std::size_t>(c.n_per_class));
    for (const auto& [sick, well] : out.truth.pairs) {
      const auto& a = *by_id.at(sick);
      const auto& b = *by_id.at(well);
      CHECK(a.label == Label::LosNec);
      CHECK(b.label == Label::Healthy);
      CHECK(a.demographics.gen == b.demographics.gen);
      CHECK(std::fabs(a.demographics.ga - b.demographics.ga) <= c.match_ga + 1e-9);
      CHECK(std::fabs(a.demographics.bw - b.demographics.bw) <= c.match_bw + 1e-9);
      CHECK(std::fabs(a.demographics.w - b.demographics.w) <= c.match_w + 1e-9);
      CHECK(std::fabs(a.demographics.pna - b.demographics.pna) <= c.match_pna + 1e-9);
      CHECK(a.demographics.ga >= c.ga.lo);
      CHECK(a.demographics.ga <= c.ga.hi);
      CHECK(a.demographics.w >= c.w.lo);
      CHECK(a.demographics.w <= c.w.hi);
    }
  }

  TEST_CASE("invalid configurations are rejected") {
    SynthConfig c;
    c.n_per_class = 0;
    CHECK_ERROR_CODE(generate_cohort(c), ErrorCode::InvalidConfig);
    c = {};
    c.contrast = -1;
    CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidConfig);
    c = {};
    c.desat_prob_losnec = 1.5;
    CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidConfig);
    c = {};
    c.ga = {18, 28, 32};
    CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidConfig);
    c = {};
    c.epoch_seconds = 30;
    CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidConfig);
  }

  TEST_CASE("probes carry their expected verdicts") {
    SynthConfig c;
    const auto v = plant_misclassification_probe(c, ProbeMode::PatternViolating, 3);
    CHECK(v.train_with_flipped_labels);
    CHECK(v.expected == Verdict::Contest);
    CHECK(v.record.label == v.pattern_class);
    const auto j = plant_misclassification_probe(c, ProbeMode::PatternConsistent, 3);
    CHECK(!j.train_with_flipped_labels);
    CHECK(j.expected == Verdict::Justify);
    CHECK(plant_misclassification_probe(c, ProbeMode::PatternConsistent, 3).record.features == j.record.features);
    c.contrast = 0;
    CHECK(plant_misclassification_probe(c, ProbeMode::PatternViolating, 3).expected == Verdict::Inconclusive);
  }

  TEST_CASE("zero contrast leaves partners indistinguishable") {
    SynthConfig c;
    c.contrast = 0;
    c.n_per_class = 4;
    const auto cohort = synth_cohort(c);
    const auto out = generate_cohort(c);
    for (const auto& [sick, well] : out.truth.pairs) {
      const auto* a = cohort.find(sick + "_" + c.date);
      const auto* b = cohort.find(well + "_" + c.date);
      REQUIRE(a);
      REQUIRE(b);
      CHECK(a->features == b->features);
    }
  }

  TEST_CASE("written output reads back through the extraction path") {
    testing::TempDir dir("contesta-synth");
    SynthConfig c;
    c.n_per_class = 3;
    const auto out = generate_cohort(c);
    write_synth_output(dir.path(), out);
    const auto episodes = extract_daily_episodes(dir.path() / "manifest.csv");
    const auto cohort = assemble_cohort(episodes, read_demographics(dir.path() / "demographics.csv"));
    const auto direct = synth_cohort(out);
    REQUIRE(cohort.size() == direct.size());
    for (const auto& r : direct.records()) {
      const auto* back = cohort.find(r.record_id);
      REQUIRE(back);
      CHECK(back->features == r.features);
      CHECK(back->label == r.label);
    }
    CHECK(std::filesystem::exists(dir.path() / "truth.json"));
  }
}
