#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "../oracle.hpp"
#include "contesta/global_explain.hpp"
#include "contesta/synth.hpp"
#include "helpers.hpp"

using namespace contesta;
using testing::FunctionModel;
using testing::make_record;

namespace {

const std::vector<Feature> kFeatures = {Feature::W, Feature::Xc, Feature::Sa};

Cohort small_cohort(int n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < n; ++i) {
    auto r = make_record("p" + std::to_string(100 + i), i % 2 ? Label::LosNec : Label::Healthy, 25 + 6 * u(g),
                         600 + 1000 * u(g), 5 + 20 * u(g));
    r.features.xc_hr_spo2 = u(g);
    r.features.sa_hr = 0.5 + 2 * u(g);
    recs.push_back(r);
  }
  return Cohort::assemble(recs);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_SUITE("global_explain") {
  TEST_CASE("a feature the model ignores has zero importance") {
    const auto c = small_cohort(40, 1);
    FunctionModel m(kFeatures, [](const std::vector<double>& x) { return logistic(3 * x[1] - 1.5); });
    const auto rep = permutation_importance(m, c, 10, 4);
    REQUIRE(rep.features.size() == kFeatures.size());
    CHECK(rep.features[0].importance == 0.0);
    CHECK(rep.features[2].importance == 0.0);
    CHECK(rep.features[1].importance != 0.0);
  }

  TEST_CASE("identity permutations give zero importance everywhere") {
    const auto c = small_cohort(30, 2);
    FunctionModel m(kFeatures, [](const std::vector<double>& x) { return logistic(x[1] + x[2] - x[0] / 1000); });
    const auto rep = permutation_importance(m, c, 5, 0, [](std::vector<std::size_t>&, Rng&) {});
    for (const auto& f : rep.features) CHECK(f.importance == 0.0);
  }

  TEST_CASE("zero permutations are rejected") {
    const auto c = small_cohort(10, 3);
    FunctionModel m(kFeatures, [](const std::vector<double>&) { return 0.5; });
    CHECK_ERROR_CODE(permutation_importance(m, c, 0, 0), ErrorCode::InvalidArgument);
  }

  TEST_CASE("a perfect single-feature threshold model loses about half its AUC") {
    std::vector<EpisodeRecord> recs;
    for (int i = 0; i < 200; ++i) {
      auto r = make_record("t" + std::to_string(1000 + i), i < 100 ? Label::Healthy : Label::LosNec, 28, 1000, 10);
      r.features.xc_hr_spo2 = i / 200.0;
      recs.push_back(r);
    }
    const auto c = Cohort::assemble(recs);
    FunctionModel m({Feature::Xc}, [](const std::vector<double>& x) { return x[0] >= 0.5 ? 1.0 : 0.0; });
    const auto rep = permutation_importance(m, c, 50, 12);
    CHECK(rep.features[0].baseline_loss == 0.0);
    CHECK(std::fabs(rep.features[0].importance - 0.5) <= 0.1);
  }

  TEST_CASE("importance is deterministic and independent of feature order") {
    const auto c = small_cohort(30, 4);
    auto fn = [](double w, double xc, double sa) { return logistic(2 * xc + sa - w / 800); };
    FunctionModel a(kFeatures, [&](const std::vector<double>& x) { return fn(x[0], x[1], x[2]); });
    FunctionModel b({Feature::Sa, Feature::W, Feature::Xc},
                    [&](const std::vector<double>& x) { return fn(x[1], x[2], x[0]); });
    const auto ra = permutation_importance(a, c, 7, 9);
    const auto rb = permutation_importance(b, c, 7, 9);
    CHECK(importance_json(ra) == importance_json(permutation_importance(a, c, 7, 9)));
    CHECK(ra.features[0].importance == rb.features[1].importance);
    CHECK(ra.features[1].importance == rb.features[2].importance);
    CHECK(ra.features[2].importance == rb.features[0].importance);
    const auto back = importance_from_json(importance_json(ra));
    CHECK(back.ranking() == ra.ranking());
  }

  TEST_CASE("PDP of a clipped identity model is the grid itself") {
    const auto c = small_cohort(20, 5);
    FunctionModel m(kFeatures, [](const std::vector<double>& x) { return std::clamp(x[1], 0.0, 1.0); });
    const auto curve = pdp_1d(m, Feature::Xc, c, 11);
    for (std::size_t i = 0; i < curve.grid.size(); ++i) CHECK(curve.pd[i] == doctest::Approx(curve.grid[i]).epsilon(1e-15));
  }

  TEST_CASE("PDP of an ignored feature is the mean prediction") {
    const auto c = small_cohort(20, 6);
    FunctionModel m(kFeatures, [](const std::vector<double>& x) { return logistic(x[2] - 1.5); });
    double mean = 0;
    for (const auto& r : c.records()) mean += m.predict_proba(r);
    mean /= c.size();
    for (double v : pdp_1d(m, Feature::Xc, c, 9).pd) CHECK(v == doctest::Approx(mean).epsilon(1e-14));
  }

  TEST_CASE("PDP equals the brute-force double loop") {
    const auto c = small_cohort(10, 7);
    FunctionModel m(kFeatures, [](const std::vector<double>& x) {
      return logistic(std::sin(5 * x[1]) + x[2] * x[1] - x[0] / 900);
    });
    for (Feature f : {Feature::Xc, Feature::Sa}) {
      const auto curve = pdp_1d(m, f, c, 5);
      const auto ref = oracle::pdp_1d(m, f, c, curve.grid);
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::fabs(curve.pd[i] - ref[i]) <= 1e-12);
    }
    const auto s = pdp_2d(m, Feature::W, Feature::Xc, c, 4, 6);
    const auto ref = oracle::pdp_2d(m, Feature::W, Feature::Xc, c, s.static_grid, s.dynamic_grid);
    for (std::size_t i = 0; i < ref.size(); ++i)
      for (std::size_t j = 0; j < ref[i].size(); ++j) CHECK(std::fabs(s.pd[i][j] - ref[i][j]) <= 1e-12);
  }

  TEST_CASE("an additive model gives an additive surface") {
    const auto c = small_cohort(25, 8);
    auto g1 = [](double w) { return 0.2 - w / 10000; };
    auto g2 = [](double xc) { return 0.3 * xc * xc; };
    FunctionModel m(kFeatures, [&](const std::vector<double>& x) { return g1(x[0]) + g2(x[1]) + 0.1 * x[2] / 3; });
    const auto s = pdp_2d(m, Feature::W, Feature::Xc, c, 7, 8);
    // pd(u, v) - g1(u) - g2(v) is the same constant in every cell.
    const double k = s.pd[0][0] - g1(s.static_grid[0]) - g2(s.dynamic_grid[0]);
    for (std::size_t i = 0; i < s.static_grid.size(); ++i)
      for (std::size_t j = 0; j < s.dynamic_grid.size(); ++j)
        CHECK(std::fabs(s.pd[i][j] - g1(s.static_grid[i]) - g2(s.dynamic_grid[j]) - k) <= 1e-9);
  }

  TEST_CASE("a model ignoring both features has a constant surface") {
    const auto c = small_cohort(12, 9);
    FunctionModel m(kFeatures, [](const std::vector<double>& x) { return logistic(x[2]); });
    const auto s = pdp_2d(m, Feature::W, Feature::Xc, c, 5, 5);
    for (const auto& row : s.pd)
      for (double v : row) CHECK(v == doctest::Approx(s.pd[0][0]).epsilon(1e-14));
  }

  TEST_CASE("grids span the observed range and strictly increase") {
    const auto c = small_cohort(15, 10);
    for (Feature f : {Feature::Xc, Feature::Sa, Feature::W}) {
      const auto g = observed_grid(c, f, 21);
      double lo = 1e300, hi = -1e300;
      for (const auto& r : c.records()) lo = std::min(lo, feature_value(r, f)), hi = std::max(hi, feature_value(r, f));
      CHECK(g.front() == lo);
      CHECK(g.back() == hi);
      for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
    }
    FunctionModel m(kFeatures, [](const std::vector<double>&) { return 0.3; });
    const auto curve = pdp_1d(m, Feature::Sa, c, 21);
    CHECK(curve.rug.size() == c.size());
    CHECK(std::is_sorted(curve.rug.begin(), curve.rug.end()));
  }

  TEST_CASE("one-dimensional PDP rejects static and unknown features") {
    const auto c = small_cohort(10, 11);
    FunctionModel m(kFeatures, [](const std::vector<double>&) { return 0.5; });
    CHECK_ERROR_CODE(pdp_1d(m, Feature::W, c, 5), ErrorCode::StaticFeatureRejected);
    CHECK_ERROR_CODE(pdp_1d(m, Feature::Ga, c, 5), ErrorCode::StaticFeatureRejected);
    CHECK_ERROR_CODE(pdp_1d(m, Feature::Hrm, c, 5), ErrorCode::UnknownFeature);
    CHECK_ERROR_CODE(pdp_2d(m, Feature::Xc, Feature::Sa, c, 5, 5), ErrorCode::UnknownFeature);
    CHECK_ERROR_CODE(pdp_2d(m, Feature::W, Feature::Ga, c, 5, 5), ErrorCode::UnknownFeature);
  }

  TEST_CASE("top features on the synthetic cohort carry the planted signal") {
    const auto c = prune_multicollinearity(synth_cohort(SynthConfig{})).cohort;
    ClassifierSpec spec;
    spec.search_draws = 5;
    const auto m = fit(spec, c);
    const auto rank = permutation_importance(m, c, 10, 0).ranking();
    CHECK((rank[0] == Feature::Xc || rank[0] == Feature::Sa));
    const auto json = pdp_json(pdp_1d(m, Feature::Xc, c));
    CHECK(json["pd"].size() == kDefaultGridPoints);
    for (double v : json["pd"]) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
