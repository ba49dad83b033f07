#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "aed/util.hpp"

namespace aed {

/// Missing readings are NaN in memory and an empty cell on disk.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Every numeric channel carried by a frame, in canonical CSV column order.
enum class Channel : std::size_t {
  pressure_hpa,
  temp_c,
  rh_pct,
  co2_ppm,
  accel_x_g,
  accel_y_g,
  accel_z_g,
  mag_x_ut,
  mag_y_ut,
  mag_z_ut,
  pc0_3,
  pc0_5,
  pc1_0,
  pc2_5,
  pc5_0,
  pc10_0,
  pm1_ugm3,
  pm2_5_ugm3,
  pm10_ugm3,
};

inline constexpr std::size_t kChannelCount = 19;

std::string_view channel_name(Channel ch);
std::optional<Channel> channel_from_name(std::string_view name);
const std::array<Channel, kChannelCount>& all_channels();

/// Count channels are cumulative "larger than" counts per 0.1 liter.
bool is_count_channel(Channel ch);
std::string_view channel_unit(Channel ch);

/// One timestamped reading of every sensor channel.
struct TelemetryFrame {
  std::int64_t timestamp_s = 0;
  double pressure_hpa = kMissing;
  double temp_c = kMissing;
  double rh_pct = kMissing;
  double co2_ppm = kMissing;
  std::array<double, 3> accel_g{kMissing, kMissing, kMissing};
  std::array<double, 3> mag_ut{kMissing, kMissing, kMissing};
  // > {0.3, 0.5, 1.0, 2.5, 5.0, 10.0} um
  std::array<double, 6> particle_counts{kMissing, kMissing, kMissing,
                                        kMissing, kMissing, kMissing};
  // PM1.0, PM2.5, PM10
  std::array<double, 3> pm_mass_ugm3{kMissing, kMissing, kMissing};

  double& operator[](Channel ch);
  double operator[](Channel ch) const;

  bool has_missing() const;
  /// Size-ladder monotonicity and physical ranges; missing values are ignored.
  bool satisfies_invariants() const;

  /// Bitwise comparison treating NaN == NaN.
  bool identical_to(const TelemetryFrame& other) const;
};

/// A gap-free 1 Hz run of frames with no missing values.
struct TimeSeriesSegment {
  std::int64_t start_s = 0;
  std::int64_t cadence_s = 1;
  std::vector<TelemetryFrame> frames;

  std::size_t size() const { return frames.size(); }
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::int64_t duration_s = 86400;
  std::int64_t start_s = 1640044800;  // 2021-12-21T00:00:00Z
  std::int64_t orbital_period_s = 5400;
  /// Acceleration spike events per hour.
  double event_rate_per_hour = 4.0;
  /// Probability that an acceleration spike resuspends particles.
  double resuspension_coupling = 0.9;
  /// Seconds between a spike and the onset of the burst it causes.
  std::int64_t resuspension_delay_s = 45;
  /// Peak count (>0.3 um per 0.1 L) per g of spike magnitude.
  double resuspension_gain = 20000.0;
  double burst_decay_s = 30.0;
  /// Spontaneous bursts per hour, independent of acceleration.
  double spontaneous_burst_rate_per_hour = 0.5;
  /// Crew activity periods per hour; each raises CO2 and spike rate.
  double crew_activity_rate_per_hour = 0.5;
  std::int64_t crew_activity_duration_s = 1200;
  double crew_co2_gain_ppm = 400.0;
  double crew_spike_rate_multiplier = 3.0;

  struct Noise {
    double pressure_hpa = 0.3;
    double temp_c = 0.05;
    double rh_pct = 0.3;
    double co2_ppm = 15.0;
    double accel_g = 0.001;
    double mag_ut = 0.4;
    /// Std-dev of the sporadic background count on the 0.3 um channel.
    double particle_count = 0.5;
  } noise;

  /// Probability per second of emitting a second reading with the same timestamp.
  double duplicate_rate = 0.0;

  /// Extra acceleration spikes at fixed offsets from start_s (along +x). Each
  /// one always resuspends particles, which makes burst fixtures reproducible.
  struct ScriptedSpike {
    std::int64_t offset_s = 0;
    double magnitude_g = 0.05;
  };
  std::vector<ScriptedSpike> scripted_spikes;

  void validate() const;
};

/// Noise-free, event-free configuration. Every channel sits on its baseline.
SynthConfig quiet_synth_config(std::uint64_t seed, std::int64_t duration_s);

std::vector<TelemetryFrame> generate_synthetic(const SynthConfig& cfg);

/// PM mass (ug/m3) from the count ladder; the fixed linear map used by the generator.
std::array<double, 3> pm_mass_from_counts(const std::array<double, 6>& counts);

class CsvError : public DataError {
 public:
  CsvError(const std::string& what, std::size_t line)
      : DataError(what), line_(line) {}
  /// 1-based line number of the offending row (0 when not line-specific).
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr std::string_view kCsvHeader =
    "timestamp_s,pressure_hpa,temp_c,rh_pct,co2_ppm,accel_x_g,accel_y_g,"
    "accel_z_g,mag_x_ut,mag_y_ut,mag_z_ut,pc0_3,pc0_5,pc1_0,pc2_5,pc5_0,"
    "pc10_0,pm1_ugm3,pm2_5_ugm3,pm10_ugm3";

/// Validates a header row; throws CsvError naming the first bad column.
void check_csv_header(std::string_view header_line);

/// Parses one data row. Unparsable numeric cells become kMissing; an
/// unparsable timestamp or wrong field count throws CsvError.
TelemetryFrame parse_csv_row(std::string_view line, std::size_t line_no);
std::string format_csv_row(const TelemetryFrame& frame);

/// Reads a canonical telemetry CSV. Rows must be timestamp-sorted
/// (non-decreasing; duplicates are allowed and averaged later).
std::vector<TelemetryFrame> read_csv(const std::filesystem::path& path);
void write_csv(const std::vector<TelemetryFrame>& frames,
               const std::filesystem::path& path);

}  // namespace aed
