#include "aed/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "aed/util.hpp"

namespace aed {

namespace {

constexpr std::array<std::string_view, kChannelCount> kNames = {
    "pressure_hpa", "temp_c",    "rh_pct",    "co2_ppm",    "accel_x_g",
    "accel_y_g",    "accel_z_g", "mag_x_ut",  "mag_y_ut",   "mag_z_ut",
    "pc0_3",        "pc0_5",     "pc1_0",     "pc2_5",      "pc5_0",
    "pc10_0",       "pm1_ugm3",  "pm2_5_ugm3", "pm10_ugm3"};

constexpr std::size_t kCsvColumns = kChannelCount + 1;

// Fraction of the previous rung's count that is also above the next size.
constexpr std::array<double, 5> kLadderRatio = {0.35, 0.30, 0.25, 0.30, 0.20};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view cell) {
  if (cell.empty()) return kMissing;
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end) return kMissing;
  return value;
}

void append_double(std::string& out, double v) {
  if (std::isnan(v)) return;
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

struct Burst {
  std::int64_t onset_s;
  double amplitude;
};

struct Spike {
  std::int64_t start_s;
  double magnitude_g;
  std::array<double, 3> direction;
};

// Spikes ring down exponentially and are cut off after kSpikeDuration seconds.
constexpr std::int64_t kSpikeDuration = 60;
constexpr double kSpikeDecay = 15.0;
constexpr double kBurstRise = 5.0;

double burst_level(const Burst& b, std::int64_t t, double decay_s) {
  const double dt = static_cast<double>(t - b.onset_s);
  if (dt < 0.0) return 0.0;
  const double rise = std::min(1.0, (dt + 1.0) / kBurstRise);
  const double decay = std::exp(-std::max(0.0, dt - (kBurstRise - 1.0)) / decay_s);
  return b.amplitude * rise * decay;
}

}  // namespace

std::string_view channel_name(Channel ch) {
  return kNames.at(static_cast<std::size_t>(ch));
}

std::optional<Channel> channel_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Channel>(i);
  }
  return std::nullopt;
}

const std::array<Channel, kChannelCount>& all_channels() {
  static const auto channels = [] {
    std::array<Channel, kChannelCount> out{};
    for (std::size_t i = 0; i < kChannelCount; ++i) out[i] = static_cast<Channel>(i);
    return out;
  }();
  return channels;
}

bool is_count_channel(Channel ch) {
  return ch >= Channel::pc0_3 && ch <= Channel::pc10_0;
}

std::string_view channel_unit(Channel ch) {
  switch (ch) {
    case Channel::pressure_hpa: return "hPa";
    case Channel::temp_c: return "degC";
    case Channel::rh_pct: return "%";
    case Channel::co2_ppm: return "ppm";
    case Channel::accel_x_g:
    case Channel::accel_y_g:
    case Channel::accel_z_g: return "g";
    case Channel::mag_x_ut:
    case Channel::mag_y_ut:
    case Channel::mag_z_ut: return "uT";
    case Channel::pm1_ugm3:
    case Channel::pm2_5_ugm3:
    case Channel::pm10_ugm3: return "ug/m3";
    default: return "count/0.1L";
  }
}

double& TelemetryFrame::operator[](Channel ch) {
  switch (ch) {
    case Channel::pressure_hpa: return pressure_hpa;
    case Channel::temp_c: return temp_c;
    case Channel::rh_pct: return rh_pct;
    case Channel::co2_ppm: return co2_ppm;
    case Channel::accel_x_g: return accel_g[0];
    case Channel::accel_y_g: return accel_g[1];
    case Channel::accel_z_g: return accel_g[2];
    case Channel::mag_x_ut: return mag_ut[0];
    case Channel::mag_y_ut: return mag_ut[1];
    case Channel::mag_z_ut: return mag_ut[2];
    case Channel::pc0_3: return particle_counts[0];
    case Channel::pc0_5: return particle_counts[1];
    case Channel::pc1_0: return particle_counts[2];
    case Channel::pc2_5: return particle_counts[3];
    case Channel::pc5_0: return particle_counts[4];
    case Channel::pc10_0: return particle_counts[5];
    case Channel::pm1_ugm3: return pm_mass_ugm3[0];
    case Channel::pm2_5_ugm3: return pm_mass_ugm3[1];
    case Channel::pm10_ugm3: return pm_mass_ugm3[2];
  }
  throw std::out_of_range("unknown channel");
}

double TelemetryFrame::operator[](Channel ch) const {
  return const_cast<TelemetryFrame&>(*this)[ch];
}

bool TelemetryFrame::has_missing() const {
  for (auto ch : all_channels()) {
    if (std::isnan((*this)[ch])) return true;
  }
  return false;
}

bool TelemetryFrame::satisfies_invariants() const {
  double prev = std::numeric_limits<double>::infinity();
  for (double c : particle_counts) {
    if (std::isnan(c)) continue;
    if (c < 0.0 || c > prev) return false;
    prev = c;
  }
  for (double m : pm_mass_ugm3) {
    if (!std::isnan(m) && m < 0.0) return false;
  }
  if (!std::isnan(rh_pct) && (rh_pct < 0.0 || rh_pct > 100.0)) return false;
  return true;
}

bool TelemetryFrame::identical_to(const TelemetryFrame& other) const {
  if (timestamp_s != other.timestamp_s) return false;
  for (auto ch : all_channels()) {
    const double a = (*this)[ch];
    const double b = other[ch];
    if (std::memcmp(&a, &b, sizeof(double)) != 0 && !(std::isnan(a) && std::isnan(b))) {
      return false;
    }
  }
  return true;
}

void SynthConfig::validate() const {
  if (duration_s <= 0) throw std::invalid_argument("duration_s must be > 0");
  if (orbital_period_s <= 0) throw std::invalid_argument("orbital_period_s must be > 0");
  if (!(event_rate_per_hour >= 0.0)) throw std::invalid_argument("event_rate_per_hour must be >= 0");
  if (!(spontaneous_burst_rate_per_hour >= 0.0) || !(crew_activity_rate_per_hour >= 0.0)) {
    throw std::invalid_argument("event rates must be >= 0");
  }
  if (resuspension_coupling < 0.0 || resuspension_coupling > 1.0) {
    throw std::invalid_argument("resuspension_coupling must lie in [0, 1]");
  }
  if (resuspension_delay_s < 0) throw std::invalid_argument("resuspension_delay_s must be >= 0");
  if (!(burst_decay_s > 0.0)) throw std::invalid_argument("burst_decay_s must be > 0");
  if (duplicate_rate < 0.0 || duplicate_rate > 1.0) {
    throw std::invalid_argument("duplicate_rate must lie in [0, 1]");
  }
  for (const auto& sc : scripted_spikes) {
    if (sc.offset_s < 0 || !(sc.magnitude_g >= 0.0)) {
      throw std::invalid_argument("scripted spikes need offset >= 0 and magnitude >= 0");
    }
  }
}

SynthConfig quiet_synth_config(std::uint64_t seed, std::int64_t duration_s) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.duration_s = duration_s;
  cfg.event_rate_per_hour = 0.0;
  cfg.spontaneous_burst_rate_per_hour = 0.0;
  cfg.crew_activity_rate_per_hour = 0.0;
  cfg.noise = SynthConfig::Noise{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  return cfg;
}

std::array<double, 3> pm_mass_from_counts(const std::array<double, 6>& c) {
  const double pm1 = 0.03 * c[0];
  const double pm25 = pm1 + 0.08 * c[2] + 0.2 * c[3];
  const double pm10 = pm25 + 0.5 * c[4] + 1.0 * c[5];
  return {pm1, pm25, pm10};
}

std::vector<TelemetryFrame> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto& noise = cfg.noise;
  const double two_pi = 2.0 * std::numbers::pi;
  const double per_second = 1.0 / 3600.0;

  std::vector<TelemetryFrame> frames;
  frames.reserve(static_cast<std::size_t>(cfg.duration_s));

  std::vector<Burst> bursts;
  std::vector<Spike> spikes;
  std::int64_t crew_until = -1;

  for (std::int64_t t = 0; t < cfg.duration_s; ++t) {
    if (rng.bernoulli(cfg.crew_activity_rate_per_hour * per_second)) {
      crew_until = std::max(crew_until, t + cfg.crew_activity_duration_s);
    }
    const bool crew_active = t < crew_until;

    double spike_rate = cfg.event_rate_per_hour * per_second;
    if (crew_active) spike_rate *= cfg.crew_spike_rate_multiplier;
    if (rng.bernoulli(spike_rate)) {
      Spike s{t, 0.02 + 0.08 * rng.uniform(), {}};
      // Positive octant: a consistent sign keeps the coupling learnable from raw axes.
      const double a = std::abs(rng.normal()), b = std::abs(rng.normal()), c = std::abs(rng.normal());
      const double norm = std::sqrt(a * a + b * b + c * c);
      s.direction = norm > 0.0 ? std::array<double, 3>{a / norm, b / norm, c / norm}
                               : std::array<double, 3>{1.0, 0.0, 0.0};
      spikes.push_back(s);
      if (rng.bernoulli(cfg.resuspension_coupling)) {
        bursts.push_back({t + cfg.resuspension_delay_s, cfg.resuspension_gain * s.magnitude_g});
      }
    }
    for (const auto& sc : cfg.scripted_spikes) {
      if (sc.offset_s != t) continue;
      spikes.push_back({t, sc.magnitude_g, {1.0, 0.0, 0.0}});
      bursts.push_back({t + cfg.resuspension_delay_s, cfg.resuspension_gain * sc.magnitude_g});
    }
    if (rng.bernoulli(cfg.spontaneous_burst_rate_per_hour * per_second)) {
      bursts.push_back({t, 100.0 + 900.0 * rng.uniform()});
    }

    std::erase_if(spikes, [t](const Spike& s) { return t >= s.start_s + kSpikeDuration; });
    std::erase_if(bursts, [&](const Burst& b) {
      return t > b.onset_s + static_cast<std::int64_t>(20.0 * cfg.burst_decay_s) + 10;
    });

    const double phase = two_pi * static_cast<double>(t % cfg.orbital_period_s) /
                         static_cast<double>(cfg.orbital_period_s);
    const double day_phase = two_pi * static_cast<double>(t % 86400) / 86400.0;

    std::array<double, 3> accel{0.0, 0.0, 0.0};
    for (const auto& s : spikes) {
      const double envelope = s.magnitude_g * std::exp(-static_cast<double>(t - s.start_s) / kSpikeDecay);
      for (int k = 0; k < 3; ++k) accel[k] += envelope * s.direction[k];
    }

    double load = 0.0;
    for (const auto& b : bursts) load += burst_level(b, t, cfg.burst_decay_s);
    double background = 0.0;
    if (noise.particle_count > 0.0) {
      background = std::max(0.0, noise.particle_count * rng.normal());
    }

    std::array<double, 6> counts{};
    counts[0] = std::floor(load + background);
    for (std::size_t k = 1; k < counts.size(); ++k) {
      counts[k] = std::floor(counts[k - 1] * kLadderRatio[k - 1]);
    }

    const auto emit = [&](std::int64_t ts) {
      TelemetryFrame f;
      f.timestamp_s = cfg.start_s + ts;
      f.pressure_hpa = 1013.0 + 0.5 * std::sin(day_phase) + noise.pressure_hpa * rng.normal();
      f.temp_c = 23.0 + 0.4 * std::sin(phase + 1.0) + noise.temp_c * rng.normal();
      f.rh_pct = std::clamp(40.0 - 1.5 * std::cos(day_phase) + noise.rh_pct * rng.normal(), 0.0, 100.0);
      f.co2_ppm = 2500.0 + (crew_active ? cfg.crew_co2_gain_ppm : 0.0) + noise.co2_ppm * rng.normal();
      for (int k = 0; k < 3; ++k) f.accel_g[k] = accel[k] + noise.accel_g * rng.normal();
      f.mag_ut[0] = 30.0 * std::cos(phase) + noise.mag_ut * rng.normal();
      f.mag_ut[1] = 20.0 * std::sin(phase) + noise.mag_ut * rng.normal();
      f.mag_ut[2] = 20.0 + 5.0 * std::sin(phase) + noise.mag_ut * rng.normal();
      f.particle_counts = counts;
      f.pm_mass_ugm3 = pm_mass_from_counts(counts);
      frames.push_back(f);
    };
    emit(t);
    if (cfg.duplicate_rate > 0.0 && rng.bernoulli(cfg.duplicate_rate)) emit(t);
  }
  return frames;
}

void check_csv_header(std::string_view header_line) {
  const auto got = split_commas(strip_cr(header_line));
  const auto want = split_commas(kCsvHeader);
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (i >= got.size()) {
      throw CsvError("header is missing column '" + std::string(want[i]) + "'", 1);
    }
    if (got[i] != want[i]) {
      throw CsvError("unexpected header column '" + std::string(got[i]) + "' (expected '" +
                         std::string(want[i]) + "')",
                     1);
    }
  }
  if (got.size() > want.size()) {
    throw CsvError("unexpected extra header column '" + std::string(got[want.size()]) + "'", 1);
  }
}

TelemetryFrame parse_csv_row(std::string_view line, std::size_t line_no) {
  const auto cells = split_commas(strip_cr(line));
  if (cells.size() != kCsvColumns) {
    throw CsvError("line " + std::to_string(line_no) + ": expected " + std::to_string(kCsvColumns) +
                       " fields, got " + std::to_string(cells.size()),
                   line_no);
  }
  TelemetryFrame f;
  const auto ts = cells[0];
  const auto* end = ts.data() + ts.size();
  auto [ptr, ec] = std::from_chars(ts.data(), end, f.timestamp_s);
  if (ts.empty() || ec != std::errc() || ptr != end) {
    throw CsvError("line " + std::to_string(line_no) + ": unparsable timestamp '" +
                       std::string(ts) + "'",
                   line_no);
  }
  for (auto ch : all_channels()) {
    f[ch] = parse_cell(cells[static_cast<std::size_t>(ch) + 1]);
  }
  return f;
}

std::string format_csv_row(const TelemetryFrame& frame) {
  std::string out = std::to_string(frame.timestamp_s);
  for (auto ch : all_channels()) {
    out.push_back(',');
    append_double(out, frame[ch]);
  }
  return out;
}

std::vector<TelemetryFrame> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open telemetry file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty telemetry file: " + path.string(), 1);
  check_csv_header(line);

  std::vector<TelemetryFrame> frames;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip_cr(line).empty()) continue;
    auto frame = parse_csv_row(line, line_no);
    if (!frames.empty() && frame.timestamp_s < frames.back().timestamp_s) {
      throw CsvError("line " + std::to_string(line_no) + ": timestamp " +
                         std::to_string(frame.timestamp_s) + " precedes " +
                         std::to_string(frames.back().timestamp_s),
                     line_no);
    }
    frames.push_back(frame);
  }
  return frames;
}

void write_csv(const std::vector<TelemetryFrame>& frames, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write telemetry file: " + path.string());
  out << kCsvHeader << '\n';
  for (const auto& f : frames) out << format_csv_row(f) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace aed
