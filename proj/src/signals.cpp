#include "contesta/signals.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include <fmt/format.h>

#include "contesta/error.hpp"
#include "contesta/io.hpp"

namespace contesta {

namespace fs = std::filesystem;

std::string_view slot_name(Slot slot) noexcept {
  return slot == Slot::Morning ? "morning" : "afternoon";
}

Slot parse_slot(std::string_view text) {
  if (text == "morning" || text == "Morning") return Slot::Morning;
  if (text == "afternoon" || text == "Afternoon") return Slot::Afternoon;
  fail(ErrorCode::ParseError, fmt::format("unknown slot '{}'", text));
}

void VitalSignEpoch::validate() const {
  const auto where = [&] { return fmt::format("epoch {}/{}/{}", infant_id, date, slot_name(slot)); };
  if (hr.size() != spo2.size())
    fail(ErrorCode::LengthMismatch,
         fmt::format("{}: hr has {} samples, spo2 has {}", where(), hr.size(), spo2.size()));
  if (hr.size() < 2) fail(ErrorCode::SeriesTooShort, where() + ": fewer than 2 samples");
  for (std::size_t i = 0; i < hr.size(); ++i) {
    if (!(hr[i] > 0.0 && hr[i] < 300.0))
      fail(ErrorCode::InvalidEpoch, fmt::format("{}: hr[{}] = {} outside (0, 300)", where(), i, hr[i]));
    if (!(spo2[i] > 0.0 && spo2[i] <= 100.0))
      fail(ErrorCode::InvalidEpoch,
           fmt::format("{}: spo2[{}] = {} outside (0, 100]", where(), i, spo2[i]));
  }
}

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

bool is_constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

std::vector<double> standardize(std::span<const double> x, const char* name) {
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  if (is_constant(x) || !(sd > 0.0))
    fail(ErrorCode::ZeroVariance, fmt::format("{} series has zero variance", name));
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m) / sd;
  return z;
}

double median_of(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace

double max_cross_correlation(std::span<const double> hr, std::span<const double> spo2,
                             int max_lag_s) {
  if (hr.size() != spo2.size())
    fail(ErrorCode::LengthMismatch,
         fmt::format("hr has {} samples, spo2 has {}", hr.size(), spo2.size()));
  if (max_lag_s < 0) fail(ErrorCode::InvalidArgument, "max_lag_s must be >= 0");
  if (hr.size() < 2) fail(ErrorCode::SeriesTooShort, "need at least 2 samples");
  const auto zx = standardize(hr, "hr");
  const auto zy = standardize(spo2, "spo2");
  const auto n = static_cast<std::ptrdiff_t>(hr.size());
  if (n < 2 * static_cast<std::ptrdiff_t>(max_lag_s) + 2)
    fail(ErrorCode::SeriesTooShort,
         fmt::format("{} samples is too short for a +/-{} s lag window", n, max_lag_s));

  double best = -std::numeric_limits<double>::infinity();
  for (std::ptrdiff_t lag = -max_lag_s; lag <= max_lag_s; ++lag) {
    // spo2 shifted by lag relative to hr: pairs (hr[t], spo2[t + lag])
    const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(0, -lag);
    const std::ptrdiff_t end = std::min<std::ptrdiff_t>(n, n - lag);
    double acc = 0.0;
    for (std::ptrdiff_t t = begin; t < end; ++t) acc += zx[t] * zy[t + lag];
    best = std::max(best, acc / static_cast<double>(end - begin));
  }
  return std::clamp(best, -1.0, 1.0);
}

double sample_asymmetry(std::span<const double> hr) {
  if (hr.size() < 3) fail(ErrorCode::SeriesTooShort, "sample asymmetry needs at least 3 samples");
  const double m = median_of(hr);
  double dec = 0.0;
  double acc = 0.0;
  for (double x : hr) {
    const double d = x - m;
    if (d < 0.0)
      dec += d * d;
    else if (d > 0.0)
      acc += d * d;
  }
  if (dec == 0.0 || acc == 0.0)
    fail(ErrorCode::DegenerateDistribution,
         "no samples strictly above or strictly below the median");
  const double n = static_cast<double>(hr.size());
  return (dec / n) / (acc / n);
}

ThresholdFractions threshold_fractions(const VitalSignEpoch& epoch) {
  epoch.validate();
  std::size_t hypoxia = 0, brady = 0, tachy = 0;
  for (std::size_t i = 0; i < epoch.hr.size(); ++i) {
    if (epoch.spo2[i] < kHypoxiaSpo2) ++hypoxia;
    if (epoch.hr[i] < kBradycardiaHr) ++brady;
    if (epoch.hr[i] > kTachycardiaHr) ++tachy;
  }
  const double n = static_cast<double>(epoch.hr.size());
  return {static_cast<double>(hypoxia) / n, static_cast<double>(brady) / n,
          static_cast<double>(tachy) / n};
}

DynamicFeatures epoch_features(const VitalSignEpoch& epoch, int max_lag_s) {
  epoch.validate();
  DynamicFeatures f;
  try {
    f.xc_hr_spo2 = max_cross_correlation(epoch.hr, epoch.spo2, max_lag_s);
    f.sa_hr = sample_asymmetry(epoch.hr);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("epoch {}/{}/{}: {}", epoch.infant_id, epoch.date,
                                      slot_name(epoch.slot), e.what()));
  }
  f.hrm = mean_of(epoch.hr);
  f.spo2m = mean_of(epoch.spo2);
  const auto fr = threshold_fractions(epoch);
  f.hs = fr.hs;
  f.brs = fr.brs;
  f.ts = fr.ts;
  return f;
}

DynamicFeatures daily_features(const std::optional<DynamicFeatures>& morning,
                               const std::optional<DynamicFeatures>& afternoon) {
  if (!morning || !afternoon)
    fail(ErrorCode::MissingEpoch,
         std::string("daily episode lacks its ") + (morning ? "afternoon" : "morning") + " epoch");
  const auto avg = [](double a, double b) { return 0.5 * (a + b); };
  const auto& a = *morning;
  const auto& b = *afternoon;
  return {avg(a.xc_hr_spo2, b.xc_hr_spo2), avg(a.sa_hr, b.sa_hr), avg(a.hrm, b.hrm),
          avg(a.spo2m, b.spo2m),           avg(a.hs, b.hs),       avg(a.brs, b.brs),
          avg(a.ts, b.ts)};
}

VitalSignEpoch read_epoch_csv(const fs::path& path, std::string infant_id, std::string date,
                              Slot slot) {
  const auto table = io::read_csv(path);
  const auto t_col = table.column("t_s");
  const auto hr_col = table.column("hr_bpm");
  const auto spo2_col = table.column("spo2_pct");
  VitalSignEpoch epoch{std::move(infant_id), std::move(date), slot, {}, {}};
  epoch.hr.reserve(table.rows.size());
  epoch.spo2.reserve(table.rows.size());
  long long previous_t = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto context = fmt::format("{} row {}", path.string(), r + 2);
    const long long t = io::parse_int(row[t_col], context);
    if (r > 0 && t <= previous_t)
      fail(ErrorCode::ParseError, context + ": t_s must be strictly increasing");
    previous_t = t;
    epoch.hr.push_back(io::parse_double(row[hr_col], context));
    epoch.spo2.push_back(io::parse_double(row[spo2_col], context));
  }
  epoch.validate();
  return epoch;
}

std::string epoch_csv(const VitalSignEpoch& epoch) {
  std::string out = "t_s,hr_bpm,spo2_pct\n";
  out.reserve(epoch.hr.size() * 24);
  for (std::size_t i = 0; i < epoch.hr.size(); ++i)
    out += fmt::format("{},{},{}\n", i, epoch.hr[i], epoch.spo2[i]);
  return out;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const auto table = io::read_csv(path);
  const auto id_col = table.column("infant_id");
  const auto date_col = table.column("date");
  const auto slot_col = table.column("slot");
  const auto path_col = table.column("path");
  std::vector<ManifestEntry> entries;
  for (const auto& row : table.rows)
    entries.push_back({row[id_col], row[date_col], parse_slot(row[slot_col]), row[path_col]});
  return entries;
}

std::string manifest_csv(const std::vector<ManifestEntry>& entries) {
  std::string out = "infant_id,date,slot,path\n";
  for (const auto& e : entries)
    out += fmt::format("{},{},{},{}\n", e.infant_id, e.date, slot_name(e.slot), e.path);
  return out;
}

std::vector<DailyEpisode> extract_daily_episodes(const fs::path& manifest_path, int max_lag_s) {
  const auto entries = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  struct Day {
    std::optional<DynamicFeatures> morning, afternoon;
  };
  std::map<std::pair<std::string, std::string>, Day> days;
  for (const auto& e : entries) {
    fs::path p = e.path;
    if (p.is_relative()) p = base / p;
    const auto epoch = read_epoch_csv(p, e.infant_id, e.date, e.slot);
    auto& day = days[{e.infant_id, e.date}];
    auto& target = e.slot == Slot::Morning ? day.morning : day.afternoon;
    if (target)
      fail(ErrorCode::ParseError, fmt::format("duplicate {} epoch for {}/{}", slot_name(e.slot),
                                              e.infant_id, e.date));
    target = epoch_features(epoch, max_lag_s);
  }
  std::vector<DailyEpisode> out;
  out.reserve(days.size());
  for (const auto& [key, day] : days) {
    try {
      out.push_back({key.first, key.second, daily_features(day.morning, day.afternoon)});
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}/{}: {}", key.first, key.second, e.what()));
    }
  }
  return out;
}

}  // namespace contesta
