#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <doctest.h>

#include "../oracle.hpp"
#include "contesta/cohort.hpp"
#include "contesta/synth.hpp"
#include "helpers.hpp"

using namespace contesta;
using testing::make_record;

namespace {

std::vector<EpisodeRecord> random_records(std::uint64_t seed, int per_class) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<EpisodeRecord> out;
  for (int i = 0; i < 2 * per_class; ++i) {
    auto r = make_record("r" + std::to_string(100 + i), i % 2 ? Label::LosNec : Label::Healthy, 24 + 8 * u(g),
                         600 + 1100 * u(g), 4 + 30 * u(g), u(g) < 0.5 ? Gender::Male : Gender::Female);
    r.demographics.bw = 500 + 1000 * u(g);
    r.features = {u(g), 1 + u(g), 140 + 20 * u(g), 88 + 5 * u(g), 0.01 * u(g), 0.01 * u(g), 0.01 * u(g)};
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_SUITE("cohort") {
  TEST_CASE("VIF of orthogonal centered columns is 1") {
    Eigen::MatrixXd m(4, 2);
    m << 1, 1, -1, 1, 1, -1, -1, -1;
    const auto v = vif(m);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("exact collinearity reports +infinity") {
    Eigen::MatrixXd m(5, 2);
    m << 1, 2, 2, 4, 3, 6, 4, 8, 6, 12;
    const auto v = vif(m);
    CHECK(std::isinf(v[0]));
    CHECK(std::isinf(v[1]));
  }

  TEST_CASE("VIF matches a normal-equations solve") {
    std::mt19937_64 g(42);
    std::normal_distribution<double> z(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
      const int n = 30 + rep;
      Eigen::MatrixXd m(n, 3);
      std::vector<std::vector<double>> rows;
      for (int r = 0; r < n; ++r) {
        const double a = z(g), b = z(g), c = z(g);
        rows.push_back({a, 0.6 * a + 0.8 * b, 0.3 * a - 0.5 * b + c});
        for (int k = 0; k < 3; ++k) m(r, k) = rows.back()[k];
      }
      const auto v = vif(m);
      for (int k = 0; k < 3; ++k) CHECK(v[k] == doctest::Approx(oracle::vif(rows, k)).epsilon(1e-9));
    }
  }

  TEST_CASE("VIF preconditions") {
    Eigen::MatrixXd constant(4, 2);
    constant << 1, 5, 2, 5, 3, 5, 4, 5;
    CHECK_ERROR_CODE(vif(constant), ErrorCode::ConstantColumn);
    Eigen::MatrixXd square(2, 2);
    square << 1, 2, 3, 5;
    CHECK_ERROR_CODE(vif(square), ErrorCode::Underdetermined);
    Eigen::MatrixXd single(4, 1);
    single << 1, 2, 3, 4;
    CHECK_THROWS_AS(vif(single), Error);
  }

  TEST_CASE("pruning leaves a sub-threshold cohort alone") {
    const auto c = Cohort::assemble(random_records(1, 30));
    const auto pr = prune_multicollinearity(c, 2.5);
    CHECK(pr.log.empty());
    CHECK(pr.cohort.active_features() == c.active_features());
  }

  TEST_CASE("pruning follows the recomputed VIF sequence") {
    auto recs = random_records(2, 30);
    std::mt19937_64 g(3);
    std::normal_distribution<double> z(0, 15);
    for (auto& r : recs) r.demographics.bw = 0.95 * r.demographics.w + z(g);
    const auto c = Cohort::assemble(recs);
    const auto pr = prune_multicollinearity(c, 2.5);
    REQUIRE(!pr.log.empty());
    REQUIRE(pr.log.front().removed);
    CHECK((*pr.log.front().removed == Feature::Bw || *pr.log.front().removed == Feature::W));

    // Replay every step with the reference VIF.
    std::vector<Feature> active;
    for (auto f : c.active_features())
      if (is_numeric(f)) active.push_back(f);
    for (const auto& step : pr.log) {
      std::vector<std::vector<double>> rows = c.feature_rows(active);
      Feature worst = active.front();
      double worst_v = -1;
      for (std::size_t k = 0; k < active.size(); ++k) {
        const double v = oracle::vif(rows, k);
        if (v >= worst_v) worst_v = v, worst = active[k];  // ties go to the later feature
      }
      REQUIRE(step.removed);
      CHECK(*step.removed == worst);
      CHECK(worst_v > 2.5);
      active.erase(std::find(active.begin(), active.end(), worst));
    }
    for (const auto& [f, v] : pr.final_table) CHECK(v <= 2.5);
    CHECK(pr.cohort.is_active(Feature::Gen));
  }

  TEST_CASE("pruning the synthetic cohort drops birth weight and respects the threshold") {
    const auto c = synth_cohort(SynthConfig{});
    const auto pr = prune_multicollinearity(c, 2.5);
    CHECK(!pr.cohort.is_active(Feature::Bw));
    for (const auto& step : pr.log) {
      double max_v = 0;
      for (const auto& [f, v] : step.table) max_v = std::max(max_v, v);
      CHECK(max_v > 2.5);
      for (const auto& [f, v] : step.table)
        if (f == *step.removed) CHECK(v == max_v);
    }
    for (const auto& [f, v] : pr.final_table) CHECK(v <= 2.5);
    const auto log = prune_log_json(pr, 2.5);
    CHECK(log["iterations"].size() == pr.log.size());
    CHECK(log["removed"].size() == pr.log.size());
  }

  TEST_CASE("stratified split sizes") {
    const auto c10 = Cohort::assemble(random_records(4, 10));
    const auto s = stratified_split(c10, 0.7, 1);
    CHECK(s.train.count(Label::Healthy) == 7);
    CHECK(s.train.count(Label::LosNec) == 7);
    CHECK(s.test.count(Label::Healthy) == 3);
    CHECK(s.test.count(Label::LosNec) == 3);

    const auto c24 = Cohort::assemble(random_records(5, 24));
    const auto t = stratified_split(c24, 0.7, 1);
    CHECK(t.train.count(Label::Healthy) == 17);
    CHECK(t.train.count(Label::LosNec) == 17);
    CHECK(t.test.count(Label::Healthy) == 7);
    CHECK(t.test.count(Label::LosNec) == 7);
  }

  TEST_CASE("splits are deterministic, disjoint and complete") {
    const auto c = Cohort::assemble(random_records(6, 13));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto a = stratified_split(c, 0.7, seed);
      const auto b = stratified_split(c, 0.7, seed);
      std::vector<std::string> ia, ib;
      for (auto& r : a.train.records()) ia.push_back(r.record_id);
      for (auto& r : b.train.records()) ib.push_back(r.record_id);
      CHECK(ia == ib);
      std::set<std::string> all;
      for (auto& r : a.train.records()) all.insert(r.record_id);
      for (auto& r : a.test.records()) CHECK(all.insert(r.record_id).second);
      CHECK(all.size() == c.size());
      CHECK(a.test.count(Label::Healthy) >= 1);
      CHECK(a.test.count(Label::LosNec) >= 1);
    }
  }

  TEST_CASE("split rejects tiny classes") {
    auto recs = random_records(7, 5);
    recs.erase(std::remove_if(recs.begin(), recs.end(), [](auto& r) { return r.label == Label::LosNec; }), recs.end());
    recs.push_back(make_record("only", Label::LosNec, 28, 1000, 10));
    CHECK_ERROR_CODE(stratified_split(Cohort::assemble(recs), 0.7, 0), ErrorCode::ClassTooSmall);
  }

  TEST_CASE("record validation") {
    auto recs = random_records(8, 3);
    recs[0].demographics.ga = 50;
    CHECK_ERROR_CODE(Cohort::assemble(recs), ErrorCode::InvalidRecord);
    recs = random_records(8, 3);
    recs[1].record_id = recs[0].record_id;
    CHECK_ERROR_CODE(Cohort::assemble(recs), ErrorCode::InvalidRecord);
    recs = random_records(8, 3);
    recs[2].demographics.w = 0;
    CHECK_ERROR_CODE(Cohort::assemble(recs), ErrorCode::InvalidRecord);
  }

  TEST_CASE("frozen ranges are consistent with the records") {
    const auto c = Cohort::assemble(random_records(9, 12));
    for (auto f : kAllFeatures) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (auto& r : c.records()) lo = std::min(lo, feature_value(r, f)), hi = std::max(hi, feature_value(r, f));
      CHECK(c.range(f).min == lo);
      CHECK(c.range(f).max == hi);
    }
    // Subsets keep the frozen ranges.
    const auto sub = c.with_records({c.records()[0], c.records()[1]});
    CHECK(sub.range(Feature::W).min == c.range(Feature::W).min);
  }

  TEST_CASE("cohort CSV and sidecar round trip") {
    testing::TempDir dir("contesta-cohort");
    const auto pr = prune_multicollinearity(synth_cohort(SynthConfig{}));
    write_cohort(dir.path() / "c.csv", pr.cohort);
    const auto back = read_cohort(dir.path() / "c.csv");
    CHECK(back.active_features() == pr.cohort.active_features());
    REQUIRE(back.size() == pr.cohort.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back.records()[i].record_id == pr.cohort.records()[i].record_id);
      CHECK(back.records()[i].features == pr.cohort.records()[i].features);
      CHECK(back.records()[i].label == pr.cohort.records()[i].label);
    }
    CHECK(cohort_csv(back) == cohort_csv(pr.cohort));
    CHECK_ERROR_CODE(parse_cohort_csv("record_id,gen\nx,Female\n", "bad"), ErrorCode::ParseError);
  }

  TEST_CASE("feature names round trip") {
    for (auto f : kAllFeatures) CHECK(feature_from_name(feature_name(f)) == f);
    CHECK(!feature_from_name("nope"));
    CHECK(is_static(Feature::W));
    CHECK(is_dynamic(Feature::Xc));
    CHECK(!is_numeric(Feature::Gen));
  }
}
