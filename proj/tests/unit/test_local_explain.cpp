#include <algorithm>
#include <random>

#include <doctest.h>

#include "../oracle.hpp"
#include "contesta/local_explain.hpp"
#include "contesta/synth.hpp"
#include "helpers.hpp"

using namespace contesta;
using testing::FunctionModel;
using testing::make_record;

namespace {

const LatentRanges kRanges{{24, 32}, {500, 1800}, {4, 40}};

Demographics demo(double ga, double w, double pna, Gender g = Gender::Female) {
  Demographics d;
  d.ga = ga, d.w = w, d.pna = pna, d.gen = g, d.bw = w;
  return d;
}

std::vector<LabeledValue> points(std::initializer_list<std::pair<double, Label>> xs) {
  std::vector<LabeledValue> out;
  for (auto [v, l] : xs) out.push_back({v, l});
  return out;
}

NeighborPanel panel(bool conclusive, std::optional<Label> implied) {
  NeighborPanel p;
  p.boundary.conclusive = conclusive;
  p.implied_class = implied;
  return p;
}

Cohort hand_cohort(int n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<EpisodeRecord> recs;
  for (int i = 0; i < n; ++i) {
    auto r = make_record("h" + std::to_string(10 + i), i % 2 ? Label::LosNec : Label::Healthy, 24 + 8 * u(g),
                         500 + 1300 * u(g), 4 + 36 * u(g), u(g) < 0.5 ? Gender::Male : Gender::Female);
    r.features.xc_hr_spo2 = u(g);
    r.features.sa_hr = 1 + u(g);
    recs.push_back(r);
  }
  return Cohort::assemble(recs);
}

}  // namespace

TEST_SUITE("local_explain") {
  TEST_CASE("Gower worked examples") {
    const LatentSpaceConfig cfg;
    const auto a = demo(28, 1000, 10);
    CHECK(gower_distance(a, a, kRanges, cfg) == 0.0);
    CHECK(gower_distance(demo(24, 500, 4, Gender::Female), demo(32, 1800, 40, Gender::Male), kRanges, cfg) == 1.0);
    // ga delta 0.5, w delta 0.2, pna delta 0.1, same gender.
    const auto b = demo(28 + 4, 1000 + 260, 10 + 3.6);
    CHECK(gower_distance(a, b, kRanges, cfg) == doctest::Approx(1.6 / 7).epsilon(1e-12));
  }

  TEST_CASE("Gower clamps out-of-range contributions and rejects flat ranges") {
    const LatentSpaceConfig cfg;
    const double d = gower_distance(demo(20, 100, 0), demo(45, 5000, 90), kRanges, cfg);
    CHECK(d == doctest::Approx(6.0 / 7).epsilon(1e-12));
    LatentRanges flat = kRanges;
    flat.pna = {10, 10};
    CHECK_ERROR_CODE(gower_distance(demo(28, 1000, 10), demo(29, 1000, 10), flat, cfg), ErrorCode::DegenerateRange);
  }

  TEST_CASE("Gower agrees with the reference and is a bounded symmetric dissimilarity") {
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(0, 1);
    LatentSpaceConfig cfg;
    for (int i = 0; i < 300; ++i) {
      const auto a = demo(22 + 12 * u(g), 400 + 1600 * u(g), 45 * u(g), u(g) < 0.5 ? Gender::Male : Gender::Female);
      const auto b = demo(22 + 12 * u(g), 400 + 1600 * u(g), 45 * u(g), u(g) < 0.5 ? Gender::Male : Gender::Female);
      cfg.weight_gen = 0.5 + u(g);
      const double d = gower_distance(a, b, kRanges, cfg);
      CHECK(std::fabs(d - oracle::gower(a, b, kRanges, cfg)) <= 1e-12);
      CHECK(d == gower_distance(b, a, kRanges, cfg));
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
  }

  TEST_CASE("neighbors: duplicates first, full sorts and tie-breaks") {
    auto c = hand_cohort(12, 4);
    auto recs = c.records();
    auto dup = recs[3];
    dup.record_id = "zz-dup";
    recs.push_back(dup);
    const auto ref = Cohort::assemble(recs);
    LatentSpaceConfig cfg;
    cfg.k = 3;
    const auto nn = nearest_neighbors(recs[3], ref, cfg);
    CHECK(nn[0].record->record_id == "zz-dup");
    CHECK(nn[0].distance == 0.0);
    for (const auto& n : nn) CHECK(n.record->record_id != recs[3].record_id);

    // k = everything else: must equal an exhaustive sort.
    cfg.k = static_cast<int>(ref.size()) - 1;
    const auto q = ref.records()[0];
    const auto all = nearest_neighbors(q, ref, cfg);
    const auto ranges = LatentRanges::from(ref);
    std::vector<std::pair<double, std::string>> expect;
    for (const auto& r : ref.records())
      if (r.record_id != q.record_id)
        expect.push_back({oracle::gower(q.demographics, r.demographics, ranges, cfg), r.record_id});
    std::sort(expect.begin(), expect.end());
    REQUIRE(all.size() == expect.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i].record->record_id == expect[i].second);

    cfg.k = static_cast<int>(ref.size());
    CHECK_ERROR_CODE(nearest_neighbors(q, ref, cfg), ErrorCode::InsufficientReference);
  }

  TEST_CASE("neighbor order ignores reference order and common weight scaling") {
    const auto c = hand_cohort(40, 5);
    auto shuffled = c.records();
    std::mt19937_64 g(6);
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    const auto c2 = c.with_records(shuffled);
    LatentSpaceConfig cfg, scaled;
    cfg.k = scaled.k = 15;
    scaled.weight_ga = 6, scaled.weight_w = 6, scaled.weight_pna = 6, scaled.weight_gen = 3;
    for (const auto& q : c.records()) {
      const auto a = nearest_neighbors(q, c, cfg);
      const auto b = nearest_neighbors(q, c2, cfg);
      const auto s = nearest_neighbors(q, c, scaled);
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].record->record_id == b[i].record->record_id);
        CHECK(a[i].record->record_id == s[i].record->record_id);
      }
    }
  }

  TEST_CASE("boundary worked examples") {
    auto sep = points({{0.5, Label::LosNec}, {0.6, Label::LosNec}, {0.1, Label::Healthy}, {0.2, Label::Healthy}});
    const auto b = estimate_boundary(sep);
    CHECK(b.conclusive);
    CHECK(*b.boundary == doctest::Approx(0.35));
    CHECK(*b.above == Label::LosNec);
    CHECK(b.misclassified == 0);

    auto healthy = points({{0.1, Label::Healthy}, {0.3, Label::Healthy}, {0.2, Label::Healthy}});
    CHECK(!estimate_boundary(healthy).conclusive);

    std::vector<LabeledValue> interleaved;
    for (int i = 0; i < 10; ++i) interleaved.push_back({static_cast<double>(i), i % 2 ? Label::LosNec : Label::Healthy});
    const auto il = estimate_boundary(interleaved);
    CHECK(!il.conclusive);
    CHECK(il.error_rate == doctest::Approx(0.4));
  }

  TEST_CASE("boundary shifts with the data and keeps its orientation") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<LabeledValue> pts;
      for (int i = 0; i < 10; ++i) {
        const bool pos = u(g) < 0.5;
        pts.push_back({(pos ? 0.5 : 0.0) + 0.7 * u(g), pos ? Label::LosNec : Label::Healthy});
      }
      auto shifted = pts;
      for (auto& p : shifted) p.value += 3.25;
      const auto a = estimate_boundary(pts), b = estimate_boundary(shifted);
      CHECK(a.conclusive == b.conclusive);
      CHECK(a.misclassified == b.misclassified);
      if (a.boundary) {
        CHECK(*b.boundary == doctest::Approx(*a.boundary + 3.25).epsilon(1e-12));
        CHECK(*a.above == *b.above);
      }
    }
  }

  TEST_CASE("the overlap cutoff decides conclusiveness") {
    // Best split misclassifies 2 of 10.
    auto pts = points({{1, Label::Healthy}, {2, Label::Healthy}, {3, Label::LosNec}, {4, Label::Healthy},
                       {5, Label::Healthy}, {6, Label::LosNec}, {7, Label::LosNec}, {8, Label::Healthy},
                       {9, Label::LosNec}, {10, Label::LosNec}});
    CHECK(estimate_boundary(pts, 0.30).conclusive);
    CHECK(!estimate_boundary(pts, 0.10).conclusive);
  }

  TEST_CASE("panel combination rule") {
    std::optional<Label> implied;
    const std::vector<NeighborPanel> both_healthy{panel(true, Label::Healthy), panel(true, Label::Healthy)};
    CHECK(combine_panels(both_healthy, Label::LosNec, &implied) == Verdict::Contest);
    CHECK(implied == Label::Healthy);
    const std::vector<NeighborPanel> both_losnec{panel(true, Label::LosNec), panel(true, Label::LosNec)};
    CHECK(combine_panels(both_losnec, Label::LosNec) == Verdict::Justify);
    const std::vector<NeighborPanel> split{panel(true, Label::Healthy), panel(true, Label::LosNec)};
    CHECK(combine_panels(split, Label::LosNec, &implied) == Verdict::Inconclusive);
    CHECK(!implied);
    const std::vector<NeighborPanel> none{panel(false, std::nullopt), panel(false, std::nullopt)};
    CHECK(combine_panels(none, Label::Healthy) == Verdict::Inconclusive);
    const std::vector<NeighborPanel> one{panel(true, Label::Healthy), panel(false, std::nullopt)};
    CHECK(combine_panels(one, Label::Healthy) == Verdict::Justify);
  }

  TEST_CASE("contest report on synthetic probes") {
    const SynthConfig cfg;
    const auto cohort = prune_multicollinearity(synth_cohort(cfg)).cohort;
    ClassifierSpec spec;
    spec.search_draws = 5;
    const auto flipped = fit(spec, flip_labels(cohort));
    int contest_count = 0, conclusive = 0;
    for (int i = 0; i < 6; ++i) {
      const auto p = plant_misclassification_probe(cfg, ProbeMode::PatternViolating, i);
      CHECK(p.train_with_flipped_labels);
      CHECK(p.expected == Verdict::Contest);
      const auto rep = contest(p.record, flipped, "flipped", cohort, LatentSpaceConfig{});
      CHECK(rep.panels.size() == 2);
      for (const auto& pn : rep.panels) {
        CHECK(pn.points.size() == 10);
        for (std::size_t k = 1; k < pn.points.size(); ++k) CHECK(pn.points[k].distance >= pn.points[k - 1].distance);
      }
      // The verdict always follows the combination rule.
      CHECK(rep.verdict == combine_panels(rep.panels, rep.prediction));
      if (rep.verdict != Verdict::Inconclusive) {
        ++conclusive;
        REQUIRE(rep.implied_class);
        CHECK((rep.verdict == Verdict::Justify) == (*rep.implied_class == rep.prediction));
      }
      if (rep.verdict == Verdict::Contest) ++contest_count;
      const auto j = contest_json(rep);
      CHECK(j["verdict"] == std::string(verdict_name(rep.verdict)));
    }
    // Planted violations are contested far more often than not.
    CHECK(contest_count * 2 > conclusive);
  }

  TEST_CASE("configuration validation") {
    LatentSpaceConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.k = 0;
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidConfig);
    cfg = {};
    cfg.weight_w = 0;
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidConfig);
    cfg = {};
    cfg.panel_features = {Feature::W};
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidConfig);
    CHECK(parse_verdict("Contest") == Verdict::Contest);
    CHECK_THROWS_AS(parse_verdict("Maybe"), Error);
  }

  TEST_CASE("top dynamic features skip static ones") {
    ImportanceReport rep;
    rep.features = {{Feature::W, 0, 0, 0.3}, {Feature::Xc, 0, 0, 0.2}, {Feature::Hrm, 0, 0, 0.01}, {Feature::Sa, 0, 0, 0.1}};
    CHECK(top_dynamic_features(rep, 2) == std::vector<Feature>{Feature::Xc, Feature::Sa});
  }
}
