#include "aed/config_json.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "aed/ews.hpp"
#include "aed/preprocess.hpp"
#include "aed/seq2seq.hpp"

namespace aed {

namespace {

using nlohmann::ordered_json;

// Tracks consumed keys so anything left over can be reported as unknown.
class Section {
 public:
  Section(const ordered_json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw DataError("config section '" + name_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw DataError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  // Doubles may be given as strings "inf" / "-inf" since JSON has no infinity.
  void read_real(const char* key, double& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (v.is_number()) {
      dst = v.get<double>();
    } else if (v.is_string() && (v == "inf" || v == "infinity")) {
      dst = std::numeric_limits<double>::infinity();
    } else {
      throw DataError("config key '" + name_ + "." + key + "' must be a number");
    }
  }

  void read_channels(const char* key, std::vector<Channel>& dst) {
    std::vector<std::string> names;
    read(key, names);
    if (!j_.contains(key)) return;
    dst.clear();
    for (const auto& n : names) dst.push_back(parse_channel(n));
  }

  const ordered_json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw DataError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const ordered_json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

ordered_json real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

ordered_json channel_list(const std::vector<Channel>& chans) {
  ordered_json arr = ordered_json::array();
  for (auto ch : chans) arr.push_back(channel_name(ch));
  return arr;
}

}  // namespace

Channel parse_channel(std::string_view name) {
  if (auto ch = channel_from_name(name)) return *ch;
  throw DataError("unknown channel '" + std::string(name) + "'");
}

ordered_json to_json(const SynthConfig& c) {
  ordered_json spikes = ordered_json::array();
  for (const auto& sc : c.scripted_spikes) spikes.push_back({{"offset_s", sc.offset_s}, {"magnitude_g", sc.magnitude_g}});
  return {{"seed", c.seed},
          {"duration_s", c.duration_s},
          {"start_s", c.start_s},
          {"orbital_period_s", c.orbital_period_s},
          {"event_rate_per_hour", c.event_rate_per_hour},
          {"resuspension_coupling", c.resuspension_coupling},
          {"resuspension_delay_s", c.resuspension_delay_s},
          {"resuspension_gain", c.resuspension_gain},
          {"burst_decay_s", c.burst_decay_s},
          {"spontaneous_burst_rate_per_hour", c.spontaneous_burst_rate_per_hour},
          {"crew_activity_rate_per_hour", c.crew_activity_rate_per_hour},
          {"crew_activity_duration_s", c.crew_activity_duration_s},
          {"crew_co2_gain_ppm", c.crew_co2_gain_ppm},
          {"crew_spike_rate_multiplier", c.crew_spike_rate_multiplier},
          {"noise",
           {{"pressure_hpa", c.noise.pressure_hpa},
            {"temp_c", c.noise.temp_c},
            {"rh_pct", c.noise.rh_pct},
            {"co2_ppm", c.noise.co2_ppm},
            {"accel_g", c.noise.accel_g},
            {"mag_ut", c.noise.mag_ut},
            {"particle_count", c.noise.particle_count}}},
          {"duplicate_rate", c.duplicate_rate},
          {"scripted_spikes", spikes}};
}

void update_from_json(SynthConfig& c, const ordered_json& j) {
  Section s(j, "synth");
  s.read("seed", c.seed);
  s.read("duration_s", c.duration_s);
  s.read("start_s", c.start_s);
  s.read("orbital_period_s", c.orbital_period_s);
  s.read_real("event_rate_per_hour", c.event_rate_per_hour);
  s.read_real("resuspension_coupling", c.resuspension_coupling);
  s.read("resuspension_delay_s", c.resuspension_delay_s);
  s.read_real("resuspension_gain", c.resuspension_gain);
  s.read_real("burst_decay_s", c.burst_decay_s);
  s.read_real("spontaneous_burst_rate_per_hour", c.spontaneous_burst_rate_per_hour);
  s.read_real("crew_activity_rate_per_hour", c.crew_activity_rate_per_hour);
  s.read("crew_activity_duration_s", c.crew_activity_duration_s);
  s.read_real("crew_co2_gain_ppm", c.crew_co2_gain_ppm);
  s.read_real("crew_spike_rate_multiplier", c.crew_spike_rate_multiplier);
  if (const auto* n = s.child("noise")) {
    Section ns(*n, "synth.noise");
    ns.read_real("pressure_hpa", c.noise.pressure_hpa);
    ns.read_real("temp_c", c.noise.temp_c);
    ns.read_real("rh_pct", c.noise.rh_pct);
    ns.read_real("co2_ppm", c.noise.co2_ppm);
    ns.read_real("accel_g", c.noise.accel_g);
    ns.read_real("mag_ut", c.noise.mag_ut);
    ns.read_real("particle_count", c.noise.particle_count);
    ns.finish();
  }
  s.read_real("duplicate_rate", c.duplicate_rate);
  if (const auto* sp = s.child("scripted_spikes")) {
    if (!sp->is_array()) throw DataError("config key 'synth.scripted_spikes' must be an array");
    c.scripted_spikes.clear();
    for (const auto& item : *sp) {
      SynthConfig::ScriptedSpike spike;
      Section ss(item, "synth.scripted_spikes[]");
      ss.read("offset_s", spike.offset_s);
      ss.read_real("magnitude_g", spike.magnitude_g);
      ss.finish();
      c.scripted_spikes.push_back(spike);
    }
  }
  s.finish();
}

ordered_json to_json(const PreprocessConfig& c) {
  return {{"outlier_mad_threshold", real(c.outlier_mad_threshold)},
          {"outlier_channels", channel_list(c.outlier_channels)},
          {"correlation_prune_threshold", c.correlation_prune_threshold},
          {"undersample_zero_ratio", real(c.undersample_zero_ratio)},
          {"lookback_s", c.lookback_s},
          {"horizon_s", c.horizon_s},
          {"window_stride_s", c.window_stride_s},
          {"split_fractions", c.split_fractions},
          {"feature_channels", channel_list(c.feature_channels)},
          {"target_channels", channel_list(c.target_channels)},
          {"rng_seed", c.rng_seed}};
}

void update_from_json(PreprocessConfig& c, const ordered_json& j) {
  Section s(j, "preprocess");
  s.read_real("outlier_mad_threshold", c.outlier_mad_threshold);
  s.read_channels("outlier_channels", c.outlier_channels);
  s.read_real("correlation_prune_threshold", c.correlation_prune_threshold);
  s.read_real("undersample_zero_ratio", c.undersample_zero_ratio);
  s.read("lookback_s", c.lookback_s);
  s.read("horizon_s", c.horizon_s);
  s.read("window_stride_s", c.window_stride_s);
  s.read("split_fractions", c.split_fractions);
  s.read_channels("feature_channels", c.feature_channels);
  s.read_channels("target_channels", c.target_channels);
  s.read("rng_seed", c.rng_seed);
  s.finish();
}

PreprocessConfig preprocess_config_from_json(const ordered_json& j) {
  PreprocessConfig c;
  update_from_json(c, j);
  return c;
}

ordered_json to_json(const ModelConfig& c) {
  return {{"encoder_hidden", c.encoder_hidden}, {"decoder_hidden", c.decoder_hidden},
          {"head_hidden", c.head_hidden},       {"bidirectional", c.bidirectional},
          {"seed", c.seed}};
}

void update_from_json(ModelConfig& c, const ordered_json& j) {
  Section s(j, "model");
  s.read("encoder_hidden", c.encoder_hidden);
  s.read("decoder_hidden", c.decoder_hidden);
  s.read("head_hidden", c.head_hidden);
  s.read("bidirectional", c.bidirectional);
  s.read("seed", c.seed);
  s.finish();
}

ordered_json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"patience", c.patience},
          {"clip_norm", c.clip_norm},
          {"shuffle_seed", c.shuffle_seed}};
}

void update_from_json(TrainConfig& c, const ordered_json& j) {
  Section s(j, "train");
  s.read("epochs", c.epochs);
  s.read("batch_size", c.batch_size);
  s.read_real("learning_rate", c.adam.learning_rate);
  s.read_real("beta1", c.adam.beta1);
  s.read_real("beta2", c.adam.beta2);
  s.read_real("epsilon", c.adam.epsilon);
  s.read("patience", c.patience);
  s.read_real("clip_norm", c.clip_norm);
  s.read("shuffle_seed", c.shuffle_seed);
  s.finish();
}

ordered_json to_json(const ThresholdConfig& c) {
  return {{"pm25_mass_limit_ugm3", real(c.pm25_mass_limit_ugm3)},
          {"pm03_count_limit_per_dL", real(c.pm03_count_limit_per_dL)},
          {"clear_hysteresis_steps", c.clear_hysteresis_steps}};
}

void update_from_json(ThresholdConfig& c, const ordered_json& j) {
  Section s(j, "thresholds");
  s.read_real("pm25_mass_limit_ugm3", c.pm25_mass_limit_ugm3);
  s.read_real("pm03_count_limit_per_dL", c.pm03_count_limit_per_dL);
  s.read("clear_hysteresis_steps", c.clear_hysteresis_steps);
  s.finish();
}

}  // namespace aed
