#include "aed/ews.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace aed {

void ThresholdConfig::validate() const {
  if (!(pm25_mass_limit_ugm3 >= 0.0) || !(pm03_count_limit_per_dL >= 0.0)) {
    throw DataError("threshold limits must be >= 0");
  }
  if (clear_hysteresis_steps < 1) throw DataError("clear_hysteresis_steps must be >= 1");
}

std::vector<ChannelLimit> ThresholdConfig::limits() const {
  std::vector<ChannelLimit> out;
  // An infinite limit disables the channel.
  if (std::isfinite(pm25_mass_limit_ugm3)) out.push_back({Channel::pm2_5_ugm3, pm25_mass_limit_ugm3});
  if (std::isfinite(pm03_count_limit_per_dL)) out.push_back({Channel::pc0_3, pm03_count_limit_per_dL});
  return out;
}

std::string_view transition_name(Transition t) {
  return t == Transition::raised ? "RAISED" : "CLEARED";
}

std::string format_event(const AlarmEvent& e) {
  nlohmann::ordered_json j;
  j["ts"] = e.ts;
  j["predicted_for"] = e.predicted_for;
  j["channel"] = channel_name(e.channel);
  j["value"] = e.value;
  j["unit"] = e.unit;
  j["threshold"] = e.threshold;
  j["transition"] = transition_name(e.transition);
  j["model_id"] = e.model_id;
  return j.dump();
}

ThresholdOutcome evaluate_thresholds(const nn::Sequence& prediction, const std::vector<Channel>& channels,
                                     const ThresholdConfig& cfg, const MonitorState& state, std::int64_t now,
                                     const std::string& model_id) {
  cfg.validate();
  if (static_cast<std::size_t>(prediction.cols()) != channels.size() || prediction.rows() < 1) {
    throw DataError("prediction shape does not match its channel list");
  }
  ThresholdOutcome out{{}, state};
  for (const auto& [channel, limit] : cfg.limits()) {
    Eigen::Index col = -1;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (channels[i] == channel) col = static_cast<Eigen::Index>(i);
    }
    if (col < 0) {
      throw DataError("threshold channel " + std::string(channel_name(channel)) + " is not in the prediction");
    }
    Eigen::Index worst = 0;
    const double peak = prediction.col(col).maxCoeff(&worst);
    auto& alarm = out.state.alarms[channel];
    AlarmEvent event{now, now + worst + 1, channel, peak, std::string(channel_unit(channel)), limit,
                     Transition::raised, model_id};
    if (!alarm.alarmed) {
      if (peak > limit) {
        alarm.alarmed = true;
        alarm.consecutive_below = 0;
        out.events.push_back(event);
      }
    } else if (peak > limit) {
      alarm.consecutive_below = 0;
    } else if (++alarm.consecutive_below >= cfg.clear_hysteresis_steps) {
      alarm.alarmed = false;
      alarm.consecutive_below = 0;
      event.transition = Transition::cleared;
      event.predicted_for = now + prediction.rows();
      out.events.push_back(event);
    }
  }
  return out;
}

RetrainStatus schedule_retrain(std::int64_t anchor_s, std::int64_t now_s, int period_days) {
  if (now_s < anchor_s) throw DataError("retrain check time precedes the schedule anchor");
  return now_s - anchor_s >= static_cast<std::int64_t>(period_days) * kSecondsPerDay ? RetrainStatus::due
                                                                                       : RetrainStatus::not_due;
}

bool StreamSink::write(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  return static_cast<bool>(out_);
}

FileSink::FileSink(std::filesystem::path path) : path_(std::move(path)) {
  out_.open(path_, std::ios::binary | std::ios::app);
}

bool FileSink::write(const std::string& line) {
  if (!out_.is_open()) return false;
  out_ << line << '\n';
  out_.flush();
  return static_cast<bool>(out_);
}

std::size_t emit(const AlarmEvent& event, const std::vector<AlarmSink*>& sinks, std::ostream& errors) {
  const auto line = format_event(event);
  std::size_t failures = 0;
  for (auto* sink : sinks) {
    if (!sink->write(line)) {
      ++failures;
      errors << "alarm sink " << sink->describe() << ": write failed\n";
    }
  }
  return failures;
}

MonitorTickOutcome monitor_tick(MonitorState state, const TelemetryFrame& frame, const ForecastModel& model,
                                const MonitorConfig& cfg) {
  MonitorTickOutcome out{{}, std::move(state)};
  auto& s = out.state;
  if (s.last_frame_s && frame.timestamp_s <= *s.last_frame_s) {
    out.result.error = "out-of-order frame at t=" + std::to_string(frame.timestamp_s) + " (last accepted t=" +
                       std::to_string(*s.last_frame_s) + ")";
    return out;
  }
  const auto features = model.norm.feature_channels();
  for (auto ch : features) {
    if (std::isnan(frame[ch])) {
      out.result.error = "frame at t=" + std::to_string(frame.timestamp_s) + " is missing " +
                         std::string(channel_name(ch));
      return out;
    }
  }
  if (!frame.satisfies_invariants()) {
    out.result.error = "frame at t=" + std::to_string(frame.timestamp_s) + " violates sensor invariants";
    return out;
  }

  // A gap restarts warm-up so the lookback never spans missing seconds.
  if (s.last_frame_s && frame.timestamp_s != *s.last_frame_s + 1) s.buffer.clear();
  s.last_frame_s = frame.timestamp_s;
  s.buffer.push_back(frame);
  const auto lookback = static_cast<std::size_t>(model.params.config.lookback);
  while (s.buffer.size() > lookback) s.buffer.pop_front();
  if (s.buffer.size() < lookback) return out;
  if (s.last_prediction_s && frame.timestamp_s - *s.last_prediction_s < cfg.prediction_cadence_s) return out;

  nn::Sequence raw(static_cast<Eigen::Index>(lookback), static_cast<Eigen::Index>(features.size()));
  for (std::size_t t = 0; t < lookback; ++t) {
    for (std::size_t c = 0; c < features.size(); ++c) {
      raw(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = s.buffer[t][features[c]];
    }
  }
  auto prediction = predict(model, raw);
  auto evaluated = evaluate_thresholds(prediction, model.norm.target_channels(), cfg.thresholds, s,
                                       frame.timestamp_s, model.model_id);
  s = std::move(evaluated.state);
  s.last_prediction = std::move(prediction);
  s.last_prediction_s = frame.timestamp_s;
  out.result.events = std::move(evaluated.events);
  out.result.predicted = true;
  return out;
}

Monitor::Monitor(std::shared_ptr<const ForecastModel> model, MonitorConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  if (!model_) throw DataError("monitor needs a model");
  cfg_.thresholds.validate();
  state_.retrain_anchor_s = model_->trained_at_s;
}

TickResult Monitor::tick(const TelemetryFrame& frame) {
  const auto snapshot = model();
  auto out = monitor_tick(std::move(state_), frame, *snapshot, cfg_);
  state_ = std::move(out.state);
  return out.result;
}

void Monitor::swap_model(std::shared_ptr<const ForecastModel> model) {
  if (!model) throw DataError("monitor needs a model");
  std::lock_guard lock(model_mutex_);
  model_ = std::move(model);
}

std::shared_ptr<const ForecastModel> Monitor::model() const {
  std::lock_guard lock(model_mutex_);
  return model_;
}

}  // namespace aed
