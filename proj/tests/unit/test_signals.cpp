#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "../oracle.hpp"
#include "contesta/io.hpp"
#include "contesta/signals.hpp"
#include "helpers.hpp"

using namespace contesta;

namespace {

std::vector<double> noise_series(std::uint64_t seed, std::size_t n, double mean, double sd) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = d(g);
  return x;
}

VitalSignEpoch make_epoch(std::vector<double> hr, std::vector<double> spo2) {
  VitalSignEpoch e;
  e.infant_id = "i1";
  e.date = "2021-01-01";
  e.hr = std::move(hr);
  e.spo2 = std::move(spo2);
  return e;
}

}  // namespace

TEST_SUITE("signals") {
  TEST_CASE("cross-correlation of an affine copy is 1 at lag 0") {
    const auto hr = noise_series(1, 200, 150, 8);
    std::vector<double> spo2;
    for (double v : hr) spo2.push_back(2 * v + 5);
    CHECK(max_cross_correlation(hr, spo2, 30) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("constant series has zero variance") {
    const std::vector<double> hr(100, 150.0);
    const auto spo2 = noise_series(2, 100, 90, 1);
    CHECK_ERROR_CODE(max_cross_correlation(hr, spo2, 10), ErrorCode::ZeroVariance);
    CHECK_ERROR_CODE(max_cross_correlation(spo2, hr, 10), ErrorCode::ZeroVariance);
  }

  TEST_CASE("length and window preconditions") {
    const auto a = noise_series(3, 100, 0, 1);
    const auto b = noise_series(4, 99, 0, 1);
    CHECK_ERROR_CODE(max_cross_correlation(a, b, 10), ErrorCode::LengthMismatch);
    const auto c = noise_series(5, 61, 0, 1);
    const auto d = noise_series(6, 61, 0, 1);
    CHECK_ERROR_CODE(max_cross_correlation(c, d, 30), ErrorCode::SeriesTooShort);
    CHECK_NOTHROW(max_cross_correlation(std::vector<double>(a.begin(), a.begin() + 62),
                                        std::vector<double>(b.begin(), b.begin() + 62), 30));
  }

  TEST_CASE("phase-shifted sinusoids peak at the shift") {
    std::vector<double> hr, spo2;
    for (int t = 0; t < 600; ++t) {
      hr.push_back(std::sin(2 * std::numbers::pi * t / 60.0));
      spo2.push_back(std::sin(2 * std::numbers::pi * (t - 30) / 60.0));
    }
    const double xc = max_cross_correlation(hr, spo2, 30);
    CHECK(xc == doctest::Approx(oracle::max_xc(hr, spo2, 30)).epsilon(1e-12));
    CHECK(xc > 0.99);
    // A window that stops short of the shift cannot reach the peak.
    CHECK(max_cross_correlation(hr, spo2, 10) < 0.9);
  }

  TEST_CASE("cross-correlation matches the reference evaluator on noisy coupled series") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto hr = noise_series(seed, 500, 150, 6);
      auto spo2 = noise_series(seed + 100, 500, 92, 1);
      for (std::size_t t = 7; t < spo2.size(); ++t) spo2[t] += 0.1 * (hr[t - 7] - 150);
      const int lag = static_cast<int>(seed % 31);
      CHECK(std::fabs(max_cross_correlation(hr, spo2, lag) - oracle::max_xc(hr, spo2, lag)) < 1e-12);
    }
  }

  TEST_CASE("cross-correlation properties: affine invariance and self-correlation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto x = noise_series(seed, 300, 140, 5);
      const auto y = noise_series(seed + 50, 300, 90, 2);
      std::vector<double> xa, ya;
      for (double v : x) xa.push_back(3.5 * v - 20);
      for (double v : y) ya.push_back(0.25 * v + 7);
      CHECK(max_cross_correlation(xa, ya, 20) == doctest::Approx(max_cross_correlation(x, y, 20)).epsilon(1e-9));
      for (int lag : {0, 1, 15, 30}) CHECK(max_cross_correlation(x, x, lag) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("sample asymmetry worked examples") {
    CHECK(sample_asymmetry(std::vector<double>{96, 98, 100, 102, 104}) == doctest::Approx(1.0));
    CHECK(sample_asymmetry(std::vector<double>{90, 100, 100, 110, 110}) == doctest::Approx(0.5));
    CHECK(sample_asymmetry(std::vector<double>{70, 80, 100, 100, 110}) == doctest::Approx(13.0));
    CHECK_ERROR_CODE(sample_asymmetry(std::vector<double>{100, 100, 100, 101}), ErrorCode::DegenerateDistribution);
    CHECK_ERROR_CODE(sample_asymmetry(std::vector<double>{100, 101}), ErrorCode::SeriesTooShort);
  }

  TEST_CASE("sample asymmetry properties: shift invariance and mirroring") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto x = noise_series(seed, 101 + seed, 150, 7);
      for (std::size_t i = 0; i < x.size(); i += 9) x[i] -= 25;  // decelerations
      const double sa = sample_asymmetry(x);
      CHECK(sa == doctest::Approx(oracle::sample_asymmetry(x)).epsilon(1e-12));
      std::vector<double> shifted, mirrored;
      std::vector<double> sorted = x;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t n = sorted.size();
      const double m = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      for (double v : x) shifted.push_back(v + 12.5), mirrored.push_back(2 * m - v);
      CHECK(sample_asymmetry(shifted) == doctest::Approx(sa).epsilon(1e-9));
      CHECK(sample_asymmetry(mirrored) == doctest::Approx(1.0 / sa).epsilon(1e-9));
      CHECK(sa > 1.0);  // decelerations raise SA
    }
  }

  TEST_CASE("threshold fractions use strict inequalities") {
    auto e = make_epoch({84, 85, 181, 180}, {85, 79, 78, 90});
    const auto f = threshold_fractions(e);
    CHECK(f.hs == 0.5);
    CHECK(f.brs == 0.25);
    CHECK(f.ts == 0.25);
    auto g = make_epoch({100, 100, 100, 100}, {80, 80, 95, 100});
    CHECK(threshold_fractions(g).hs == 0.0);
  }

  TEST_CASE("threshold fractions stay in range with brs + ts <= 1") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> hr(60, 200), sp(70, 100);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> h(37), s(37);
      for (auto& v : h) v = hr(rng);
      for (auto& v : s) v = sp(rng);
      const auto f = threshold_fractions(make_epoch(h, s));
      CHECK(f.hs >= 0.0);
      CHECK(f.hs <= 1.0);
      CHECK(f.brs >= 0.0);
      CHECK(f.ts >= 0.0);
      CHECK(f.brs + f.ts <= 1.0);
    }
  }

  TEST_CASE("epoch features of a symmetric pattern") {
    std::vector<double> hr, spo2;
    for (int i = 0; i < 120; ++i) {
      const double v = 96 + 2 * (i % 5);
      hr.push_back(v);
      spo2.push_back(v / 2 + 45);
    }
    const auto f = epoch_features(make_epoch(hr, spo2), 30);
    CHECK(f.hrm == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(f.spo2m == doctest::Approx(95.0).epsilon(1e-12));
    CHECK(f.sa_hr == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.xc_hr_spo2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.hs == 0.0);
    CHECK(f.brs == 0.0);
    CHECK(f.ts == 0.0);
    CHECK_ERROR_CODE(epoch_features(make_epoch({120, 120}, {95, 96}), 0), ErrorCode::ZeroVariance);
  }

  TEST_CASE("feature extraction is bit-for-bit repeatable") {
    const auto e = make_epoch(noise_series(11, 400, 150, 6), noise_series(12, 400, 92, 1));
    CHECK(epoch_features(e, 30) == epoch_features(e, 30));
  }

  TEST_CASE("daily features average the two slots") {
    DynamicFeatures a{0.4, 1.2, 100, 90, 0.01, 0.02, 0.03};
    DynamicFeatures b{0.6, 1.8, 110, 94, 0.03, 0.00, 0.05};
    const auto d = daily_features(a, b);
    CHECK(d.hrm == 105.0);
    CHECK(d.xc_hr_spo2 == doctest::Approx(0.5));
    CHECK(d.sa_hr == doctest::Approx(1.5));
    CHECK(d.spo2m == doctest::Approx(92.0));
    CHECK(d.hs == doctest::Approx(0.02));
    CHECK(d.brs == doctest::Approx(0.01));
    CHECK(d.ts == doctest::Approx(0.04));
    CHECK(daily_features(a, a) == a);
    CHECK_ERROR_CODE(daily_features(a, std::nullopt), ErrorCode::MissingEpoch);
    CHECK_ERROR_CODE(daily_features(std::nullopt, b), ErrorCode::MissingEpoch);
  }

  TEST_CASE("epoch validation rejects whole epochs") {
    CHECK_ERROR_CODE(make_epoch({100, 100}, {90}).validate(), ErrorCode::LengthMismatch);
    CHECK_ERROR_CODE(make_epoch({100, 0}, {90, 90}).validate(), ErrorCode::InvalidEpoch);
    CHECK_ERROR_CODE(make_epoch({100, 100}, {90, 101}).validate(), ErrorCode::InvalidEpoch);
    CHECK_NOTHROW(make_epoch({100, 101}, {90, 100}).validate());
  }

  TEST_CASE("epoch CSV round trip") {
    testing::TempDir dir("contesta-signals");
    auto e = make_epoch(noise_series(20, 90, 150, 5), noise_series(21, 90, 93, 1));
    for (auto& v : e.spo2) v = std::min(v, 100.0);
    io::atomic_write_text(dir.path() / "e.csv", epoch_csv(e));
    const auto back = read_epoch_csv(dir.path() / "e.csv", e.infant_id, e.date, Slot::Afternoon);
    CHECK(back.hr == e.hr);
    CHECK(back.spo2 == e.spo2);
    CHECK(back.slot == Slot::Afternoon);
    io::atomic_write_text(dir.path() / "bad.csv", "t_s,hr_bpm,spo2_pct\n0,150,95\n0,151,95\n");
    CHECK_THROWS_AS(read_epoch_csv(dir.path() / "bad.csv", "x", "d", Slot::Morning), Error);
  }

  TEST_CASE("slot names round trip") {
    CHECK(parse_slot(slot_name(Slot::Morning)) == Slot::Morning);
    CHECK(parse_slot(slot_name(Slot::Afternoon)) == Slot::Afternoon);
    CHECK_THROWS_AS(parse_slot("evening"), Error);
  }
}
