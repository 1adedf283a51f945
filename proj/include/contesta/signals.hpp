#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace contesta {

enum class Slot { Morning, Afternoon };

std::string_view slot_name(Slot slot) noexcept;
Slot parse_slot(std::string_view text);

// One-hour 1 Hz heart-rate / oxygen-saturation recording.
struct VitalSignEpoch {
  std::string infant_id;
  std::string date;
  Slot slot = Slot::Morning;
  std::vector<double> hr;    // beats/min
  std::vector<double> spo2;  // %

  // Throws InvalidEpoch (or LengthMismatch / SeriesTooShort) when the epoch
  // breaks its invariants. Epochs are rejected whole, never repaired.
  void validate() const;
};

struct DynamicFeatures {
  double xc_hr_spo2 = 0.0;  // max lagged HR/SpO2 cross-correlation
  double sa_hr = 0.0;       // HR sample asymmetry
  double hrm = 0.0;         // mean HR
  double spo2m = 0.0;       // mean SpO2
  double hs = 0.0;          // fraction of seconds with SpO2 < 80
  double brs = 0.0;         // fraction of seconds with HR < 85
  double ts = 0.0;          // fraction of seconds with HR > 180

  friend bool operator==(const DynamicFeatures&, const DynamicFeatures&) = default;
};

struct ThresholdFractions {
  double hs = 0.0;
  double brs = 0.0;
  double ts = 0.0;
};

inline constexpr int kDefaultMaxLagSeconds = 30;
inline constexpr double kHypoxiaSpo2 = 80.0;
inline constexpr double kBradycardiaHr = 85.0;
inline constexpr double kTachycardiaHr = 180.0;

// Maximum signed lagged correlation of the z-standardized series over lags
// in [-max_lag_s, max_lag_s]. Each lag's inner product is divided by its
// overlap length.
double max_cross_correlation(std::span<const double> hr, std::span<const double> spo2,
                             int max_lag_s = kDefaultMaxLagSeconds);

// R_dec / R_acc of squared deviations about the median; both terms divide by
// the full sample count.
double sample_asymmetry(std::span<const double> hr);

ThresholdFractions threshold_fractions(const VitalSignEpoch& epoch);

DynamicFeatures epoch_features(const VitalSignEpoch& epoch,
                               int max_lag_s = kDefaultMaxLagSeconds);

// Elementwise mean of the two daily epochs. Throws MissingEpoch if either is absent.
DynamicFeatures daily_features(const std::optional<DynamicFeatures>& morning,
                               const std::optional<DynamicFeatures>& afternoon);

// --- files -----------------------------------------------------------------

// Epoch CSV: header `t_s,hr_bpm,spo2_pct`, one row per second.
VitalSignEpoch read_epoch_csv(const std::filesystem::path& path, std::string infant_id,
                              std::string date, Slot slot);
std::string epoch_csv(const VitalSignEpoch& epoch);

struct ManifestEntry {
  std::string infant_id;
  std::string date;
  Slot slot = Slot::Morning;
  std::string path;  // relative paths resolve against the manifest directory
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::string manifest_csv(const std::vector<ManifestEntry>& entries);

struct DailyEpisode {
  std::string infant_id;
  std::string date;
  DynamicFeatures features;
};

// Loads every epoch of the manifest and averages morning/afternoon per
// infant-day. Output is ordered by (infant_id, date).
std::vector<DailyEpisode> extract_daily_episodes(const std::filesystem::path& manifest_path,
                                                 int max_lag_s = kDefaultMaxLagSeconds);

}  // namespace contesta
