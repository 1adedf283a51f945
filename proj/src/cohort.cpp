#include "contesta/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "contesta/error.hpp"
#include "contesta/io.hpp"
#include "contesta/rng.hpp"

namespace contesta {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view gender_name(Gender g) noexcept { return g == Gender::Female ? "Female" : "Male"; }

Gender parse_gender(std::string_view text) {
  if (text == "Female" || text == "F" || text == "female") return Gender::Female;
  if (text == "Male" || text == "M" || text == "male") return Gender::Male;
  fail(ErrorCode::ParseError, fmt::format("unknown gender '{}'", text));
}

std::string_view label_name(Label l) noexcept { return l == Label::Healthy ? "Healthy" : "LosNec"; }

Label parse_label(std::string_view text) {
  if (text == "Healthy") return Label::Healthy;
  if (text == "LosNec") return Label::LosNec;
  fail(ErrorCode::ParseError, fmt::format("unknown label '{}'", text));
}

void Demographics::validate() const {
  if (!(ga >= 20.0 && ga <= 45.0))
    fail(ErrorCode::InvalidRecord, fmt::format("gestational age {} outside [20, 45]", ga));
  if (!(bw > 0.0 && bw < 6000.0))
    fail(ErrorCode::InvalidRecord, fmt::format("birth weight {} outside (0, 6000)", bw));
  if (!(w > 0.0 && w < 6000.0))
    fail(ErrorCode::InvalidRecord, fmt::format("weight {} outside (0, 6000)", w));
  if (!(pna >= 0.0)) fail(ErrorCode::InvalidRecord, fmt::format("postnatal age {} < 0", pna));
}

std::string_view feature_name(Feature f) noexcept {
  switch (f) {
    case Feature::Gen: return "gen";
    case Feature::Ga: return "ga";
    case Feature::Bw: return "bw";
    case Feature::W: return "w";
    case Feature::Pna: return "pna";
    case Feature::Xc: return "xc_hr_spo2";
    case Feature::Sa: return "sa_hr";
    case Feature::Hrm: return "hrm";
    case Feature::Spo2m: return "spo2m";
    case Feature::Hs: return "hs";
    case Feature::Brs: return "brs";
    case Feature::Ts: return "ts";
  }
  return "?";
}

std::optional<Feature> feature_from_name(std::string_view name) noexcept {
  for (auto f : kAllFeatures)
    if (feature_name(f) == name) return f;
  if (name == "xc") return Feature::Xc;
  if (name == "sa") return Feature::Sa;
  return std::nullopt;
}

bool is_dynamic(Feature f) noexcept {
  switch (f) {
    case Feature::Gen:
    case Feature::Ga:
    case Feature::Bw:
    case Feature::W:
    case Feature::Pna:
      return false;
    default:
      return true;
  }
}

double feature_value(const EpisodeRecord& r, Feature f) noexcept {
  const auto& d = r.demographics;
  const auto& x = r.features;
  switch (f) {
    case Feature::Gen: return d.gen == Gender::Male ? 1.0 : 0.0;
    case Feature::Ga: return d.ga;
    case Feature::Bw: return d.bw;
    case Feature::W: return d.w;
    case Feature::Pna: return d.pna;
    case Feature::Xc: return x.xc_hr_spo2;
    case Feature::Sa: return x.sa_hr;
    case Feature::Hrm: return x.hrm;
    case Feature::Spo2m: return x.spo2m;
    case Feature::Hs: return x.hs;
    case Feature::Brs: return x.brs;
    case Feature::Ts: return x.ts;
  }
  return 0.0;
}

void set_feature_value(EpisodeRecord& r, Feature f, double v) noexcept {
  auto& d = r.demographics;
  auto& x = r.features;
  switch (f) {
    case Feature::Gen: d.gen = v >= 0.5 ? Gender::Male : Gender::Female; break;
    case Feature::Ga: d.ga = v; break;
    case Feature::Bw: d.bw = v; break;
    case Feature::W: d.w = v; break;
    case Feature::Pna: d.pna = v; break;
    case Feature::Xc: x.xc_hr_spo2 = v; break;
    case Feature::Sa: x.sa_hr = v; break;
    case Feature::Hrm: x.hrm = v; break;
    case Feature::Spo2m: x.spo2m = v; break;
    case Feature::Hs: x.hs = v; break;
    case Feature::Brs: x.brs = v; break;
    case Feature::Ts: x.ts = v; break;
  }
}

// --- Cohort -----------------------------------------------------------------

Cohort Cohort::assemble(std::vector<EpisodeRecord> records) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.record_id.empty()) fail(ErrorCode::InvalidRecord, "empty record_id");
    if (!seen.insert(r.record_id).second)
      fail(ErrorCode::InvalidRecord, fmt::format("duplicate record_id '{}'", r.record_id));
    try {
      r.demographics.validate();
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("record {}: {}", r.record_id, e.what()));
    }
  }
  Cohort c;
  c.records_ = std::move(records);
  c.active_.assign(kAllFeatures.begin(), kAllFeatures.end());
  for (auto f : kAllFeatures) {
    FeatureRange range{std::numeric_limits<double>::infinity(),
                       -std::numeric_limits<double>::infinity()};
    for (const auto& r : c.records_) {
      const double v = feature_value(r, f);
      range.min = std::min(range.min, v);
      range.max = std::max(range.max, v);
    }
    if (c.records_.empty()) range = {0.0, 0.0};
    c.ranges_[f] = range;
  }
  return c;
}

Cohort Cohort::with_records(std::vector<EpisodeRecord> records) const {
  Cohort c = *this;
  c.records_ = std::move(records);
  return c;
}

Cohort Cohort::with_active_features(std::vector<Feature> active) const {
  Cohort c = *this;
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  c.active_ = std::move(active);
  return c;
}

Cohort Cohort::with_ranges(std::map<Feature, FeatureRange> ranges) const {
  Cohort c = *this;
  c.ranges_ = std::move(ranges);
  return c;
}

FeatureRange Cohort::range(Feature f) const {
  const auto it = ranges_.find(f);
  if (it == ranges_.end()) fail(ErrorCode::UnknownFeature, std::string(feature_name(f)));
  return it->second;
}

std::size_t Cohort::count(Label label) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [&](const auto& r) { return r.label == label; }));
}

const EpisodeRecord* Cohort::find(std::string_view record_id) const noexcept {
  for (const auto& r : records_)
    if (r.record_id == record_id) return &r;
  return nullptr;
}

bool Cohort::is_active(Feature f) const noexcept {
  return std::find(active_.begin(), active_.end(), f) != active_.end();
}

std::vector<std::vector<double>> Cohort::feature_rows(std::span<const Feature> features) const {
  std::vector<std::vector<double>> rows;
  rows.reserve(records_.size());
  for (const auto& r : records_) {
    std::vector<double> row;
    row.reserve(features.size());
    for (auto f : features) row.push_back(feature_value(r, f));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Label> Cohort::labels() const {
  std::vector<Label> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.label);
  return out;
}

// --- VIF ----------------------------------------------------------------------

std::vector<double> vif(const Eigen::MatrixXd& data) {
  const auto n = data.rows();
  const auto p = data.cols();
  if (p < 2) fail(ErrorCode::InvalidArgument, "VIF needs at least 2 features");
  if (n <= p)
    fail(ErrorCode::Underdetermined,
         fmt::format("{} records for {} features; need more records than features", n, p));
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto col = data.col(k);
    if ((col.array() == col(0)).all())
      fail(ErrorCode::ConstantColumn, fmt::format("column {} is constant", k));
  }

  std::vector<double> out(static_cast<std::size_t>(p));
  Eigen::MatrixXd design(n, p);  // intercept + the other p - 1 columns
  for (Eigen::Index k = 0; k < p; ++k) {
    design.col(0).setOnes();
    for (Eigen::Index j = 0, c = 1; j < p; ++j)
      if (j != k) design.col(c++) = data.col(j);
    const Eigen::VectorXd y = data.col(k);
    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(y);
    const double ss_res = (y - design * beta).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
    const double unexplained = ss_res / ss_tot;  // 1 - R^2
    out[static_cast<std::size_t>(k)] =
        unexplained <= 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / unexplained;
  }
  return out;
}

PruneResult prune_multicollinearity(const Cohort& cohort, double threshold) {
  if (!(threshold > 1.0)) fail(ErrorCode::InvalidArgument, "VIF threshold must exceed 1");
  std::vector<Feature> numeric;
  for (auto f : cohort.active_features())
    if (is_numeric(f)) numeric.push_back(f);

  PruneResult result;
  while (numeric.size() >= 2) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(cohort.size()),
                      static_cast<Eigen::Index>(numeric.size()));
    for (std::size_t i = 0; i < cohort.size(); ++i)
      for (std::size_t j = 0; j < numeric.size(); ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            feature_value(cohort.records()[i], numeric[j]);
    const auto values = vif(m);

    std::vector<std::pair<Feature, double>> table;
    std::size_t worst = 0;
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      table.emplace_back(numeric[j], values[j]);
      if (values[j] >= values[worst]) worst = j;  // ties: later feature
    }
    if (values[worst] <= threshold) {
      result.final_table = std::move(table);
      break;
    }
    result.log.push_back({std::move(table), numeric[worst]});
    numeric.erase(numeric.begin() + static_cast<std::ptrdiff_t>(worst));
  }

  std::vector<Feature> active;
  for (auto f : cohort.active_features())
    if (!is_numeric(f) || std::find(numeric.begin(), numeric.end(), f) != numeric.end())
      active.push_back(f);
  result.cohort = cohort.with_active_features(std::move(active));
  return result;
}

namespace {

json vif_value(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

json vif_table_json(const std::vector<std::pair<Feature, double>>& table) {
  json t = json::object();
  for (const auto& [f, v] : table) t[std::string(feature_name(f))] = vif_value(v);
  return t;
}

}  // namespace

json prune_log_json(const PruneResult& result, double threshold) {
  json steps = json::array();
  for (std::size_t i = 0; i < result.log.size(); ++i) {
    const auto& step = result.log[i];
    steps.push_back({{"iteration", i + 1},
                     {"vif", vif_table_json(step.table)},
                     {"removed", std::string(feature_name(*step.removed))}});
  }
  json removed = json::array();
  for (const auto& step : result.log) removed.push_back(std::string(feature_name(*step.removed)));
  json active = json::array();
  for (auto f : result.cohort.active_features()) active.push_back(std::string(feature_name(f)));
  return {{"threshold", threshold},
          {"excluded_from_vif", {"gen"}},
          {"note", "gender is categorical and excluded from VIF; it remains an active feature"},
          {"iterations", steps},
          {"final_vif", vif_table_json(result.final_table)},
          {"removed", removed},
          {"active_features", active}};
}

// --- split --------------------------------------------------------------------

SplitResult stratified_split(const Cohort& cohort, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
  std::vector<bool> in_train(cohort.size(), false);
  for (Label label : {Label::Healthy, Label::LosNec}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cohort.size(); ++i)
      if (cohort.records()[i].label == label) idx.push_back(i);
    if (idx.size() < 2)
      fail(ErrorCode::ClassTooSmall,
           fmt::format("class {} has {} records; need at least 2", label_name(label), idx.size()));
    const auto n = idx.size();
    auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    Rng rng(derive_seed(seed, {hash_tag("split"), static_cast<std::uint64_t>(label)}));
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
  }
  std::vector<EpisodeRecord> train, test;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    (in_train[i] ? train : test).push_back(cohort.records()[i]);
  return {cohort.with_records(std::move(train)), cohort.with_records(std::move(test))};
}

// --- files --------------------------------------------------------------------

namespace {

constexpr std::string_view kCohortHeader =
    "record_id,gen,ga_wk,bw_g,w_g,pna_wk,xc,sa,hrm,spo2m,hs,brs,ts,label";

}  // namespace

std::string cohort_csv(const Cohort& cohort) {
  std::string out(kCohortHeader);
  out += '\n';
  for (const auto& r : cohort.records()) {
    const auto& d = r.demographics;
    const auto& f = r.features;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.record_id,
                       gender_name(d.gen), d.ga, d.bw, d.w, d.pna, f.xc_hr_spo2, f.sa_hr, f.hrm,
                       f.spo2m, f.hs, f.brs, f.ts, label_name(r.label));
  }
  return out;
}

Cohort parse_cohort_csv(std::string_view text, const std::string& source_name) {
  const auto table = io::parse_csv(text, source_name);
  const std::array<std::string_view, 14> names = {"record_id", "gen", "ga_wk", "bw_g", "w_g",
                                                  "pna_wk",    "xc",  "sa",    "hrm",  "spo2m",
                                                  "hs",        "brs", "ts",    "label"};
  std::array<std::size_t, 14> col{};
  for (std::size_t i = 0; i < names.size(); ++i) col[i] = table.column(names[i]);
  std::vector<EpisodeRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto ctx = fmt::format("{} row {}", source_name, r + 2);
    const auto num = [&](std::size_t i) { return io::parse_double(row[col[i]], ctx); };
    EpisodeRecord rec;
    rec.record_id = row[col[0]];
    rec.demographics = {parse_gender(row[col[1]]), num(2), num(3), num(4), num(5)};
    rec.features = {num(6), num(7), num(8), num(9), num(10), num(11), num(12)};
    rec.label = parse_label(row[col[13]]);
    records.push_back(std::move(rec));
  }
  return Cohort::assemble(std::move(records));
}

json cohort_meta_json(const Cohort& cohort) {
  json active = json::array();
  for (auto f : cohort.active_features()) active.push_back(std::string(feature_name(f)));
  json ranges = json::object();
  for (const auto& [f, r] : cohort.feature_ranges())
    ranges[std::string(feature_name(f))] = {r.min, r.max};
  return {{"format", "contesta.cohort-meta"},
          {"version", 1},
          {"active_features", active},
          {"feature_ranges", ranges}};
}

fs::path cohort_meta_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_cohort(const fs::path& csv_path, const Cohort& cohort) {
  io::atomic_write_text(csv_path, cohort_csv(cohort));
  io::atomic_write_text(cohort_meta_path(csv_path), cohort_meta_json(cohort).dump(2) + "\n");
}

Cohort apply_cohort_meta(const Cohort& base, const json& meta, const std::string& source_name) {
  try {
    std::vector<Feature> active;
    for (const auto& name : meta.at("active_features")) {
      const auto f = feature_from_name(name.get<std::string>());
      if (!f) fail(ErrorCode::UnknownFeature, fmt::format("{}: unknown feature {}", source_name, name.get<std::string>()));
      active.push_back(*f);
    }
    Cohort with_meta = base.with_active_features(std::move(active));
    if (meta.contains("feature_ranges")) {
      // Frozen ranges come from the assembling cohort, not from this subset.
      auto ranges = with_meta.feature_ranges();
      for (const auto& [name, pair] : meta["feature_ranges"].items()) {
        const auto f = feature_from_name(name);
        if (!f) fail(ErrorCode::UnknownFeature, fmt::format("{}: unknown feature {}", source_name, name));
        ranges[*f] = {pair.at(0).get<double>(), pair.at(1).get<double>()};
      }
      with_meta = with_meta.with_ranges(std::move(ranges));
    }
    return with_meta;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, source_name + ": " + e.what());
  }
}

Cohort read_cohort(const fs::path& csv_path) {
  Cohort base = parse_cohort_csv(io::read_text(csv_path), csv_path.string());
  const auto meta_path = cohort_meta_path(csv_path);
  if (!fs::exists(meta_path)) return base;
  json meta;
  try {
    meta = json::parse(io::read_text(meta_path));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, meta_path.string() + ": " + e.what());
  }
  return apply_cohort_meta(base, meta, meta_path.string());
}

// --- demographics join -------------------------------------------------------

std::vector<DemographicsRow> read_demographics(const fs::path& path) {
  const auto table = io::read_csv(path);
  const auto c_id = table.column("infant_id");
  const auto c_gen = table.column("gen");
  const auto c_ga = table.column("ga_wk");
  const auto c_bw = table.column("bw_g");
  const auto c_w = table.column("w_g");
  const auto c_pna = table.column("pna_wk");
  const auto c_label = table.column("label");
  std::vector<DemographicsRow> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto ctx = fmt::format("{} row {}", path.string(), r + 2);
    rows.push_back({row[c_id],
                    {parse_gender(row[c_gen]), io::parse_double(row[c_ga], ctx),
                     io::parse_double(row[c_bw], ctx), io::parse_double(row[c_w], ctx),
                     io::parse_double(row[c_pna], ctx)},
                    parse_label(row[c_label])});
  }
  return rows;
}

std::string demographics_csv(const std::vector<DemographicsRow>& rows) {
  std::string out = "infant_id,gen,ga_wk,bw_g,w_g,pna_wk,label\n";
  for (const auto& r : rows) {
    const auto& d = r.demographics;
    out += fmt::format("{},{},{},{},{},{},{}\n", r.infant_id, gender_name(d.gen), d.ga, d.bw, d.w,
                       d.pna, label_name(r.label));
  }
  return out;
}

Cohort assemble_cohort(const std::vector<DailyEpisode>& episodes,
                       const std::vector<DemographicsRow>& demographics) {
  std::map<std::string, const DemographicsRow*> by_id;
  for (const auto& d : demographics) by_id[d.infant_id] = &d;
  std::vector<EpisodeRecord> records;
  for (const auto& e : episodes) {
    const auto it = by_id.find(e.infant_id);
    if (it == by_id.end())
      fail(ErrorCode::InvalidRecord, fmt::format("no demographics for infant '{}'", e.infant_id));
    records.push_back({e.infant_id + "_" + e.date, it->second->demographics, e.features,
                       it->second->label});
  }
  return Cohort::assemble(std::move(records));
}

}  // namespace contesta
