#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aed/seq2seq.hpp"
#include "aed/telemetry.hpp"

namespace aed {

struct ChannelLimit {
  Channel channel{};
  double limit = 0.0;
};

struct ThresholdConfig {
  /// 35 ug/m3 PM2.5 mass: the health-based alveolar exposure limit.
  double pm25_mass_limit_ugm3 = 35.0;
  /// ISO 14644 class 3 allows 102 particles >= 0.3 um per m3, i.e. 0.0102 per 0.1 L.
  double pm03_count_limit_per_dL = 0.0102;
  int clear_hysteresis_steps = 3;

  void validate() const;
  /// Channels checked on every evaluation, with strict ">" trigger semantics.
  std::vector<ChannelLimit> limits() const;
};

enum class Transition { raised, cleared };
std::string_view transition_name(Transition t);

struct AlarmEvent {
  std::int64_t ts = 0;
  std::int64_t predicted_for = 0;
  Channel channel{};
  double value = 0.0;
  std::string unit;
  double threshold = 0.0;
  Transition transition = Transition::raised;
  std::string model_id;
};

/// One line-delimited JSON record with fields ts, predicted_for, channel,
/// value, unit, threshold, transition, model_id (in that order).
std::string format_event(const AlarmEvent& event);

struct ChannelAlarm {
  bool alarmed = false;
  int consecutive_below = 0;
};

struct MonitorState {
  std::map<Channel, ChannelAlarm> alarms;
  std::deque<TelemetryFrame> buffer;
  std::optional<nn::Sequence> last_prediction;
  std::optional<std::int64_t> last_prediction_s;
  std::optional<std::int64_t> last_frame_s;
  std::int64_t retrain_anchor_s = 0;
};

struct ThresholdOutcome {
  std::vector<AlarmEvent> events;
  MonitorState state;
};

/// Compares a raw-unit prediction (horizon x |channels|) against the limits.
/// Rows are the horizon steps now+1 .. now+horizon.
ThresholdOutcome evaluate_thresholds(const nn::Sequence& prediction, const std::vector<Channel>& channels,
                                     const ThresholdConfig& cfg, const MonitorState& state, std::int64_t now,
                                     const std::string& model_id = {});

// ---------------------------------------------------------------------------
// Retraining schedule

enum class RetrainStatus { due, not_due };

inline constexpr std::int64_t kSecondsPerDay = 86400;

RetrainStatus schedule_retrain(std::int64_t anchor_s, std::int64_t now_s, int period_days = 30);

class RetrainSchedule {
 public:
  explicit RetrainSchedule(std::int64_t anchor_s, int period_days = 30)
      : anchor_s_(anchor_s), period_days_(period_days) {}

  RetrainStatus check(std::int64_t now_s) const { return schedule_retrain(anchor_s_, now_s, period_days_); }
  void mark_retrained(std::int64_t at_s) { anchor_s_ = at_s; }
  std::int64_t anchor() const { return anchor_s_; }

 private:
  std::int64_t anchor_s_;
  int period_days_;
};

// ---------------------------------------------------------------------------
// Sinks

class AlarmSink {
 public:
  virtual ~AlarmSink() = default;
  /// Writes one record line; returns false on failure.
  virtual bool write(const std::string& line) = 0;
  virtual std::string describe() const = 0;
};

class StreamSink : public AlarmSink {
 public:
  explicit StreamSink(std::ostream& out, std::string name = "stdout") : out_(out), name_(std::move(name)) {}
  bool write(const std::string& line) override;
  std::string describe() const override { return name_; }

 private:
  std::ostream& out_;
  std::string name_;
};

/// Append-only file sink, flushed after every record.
class FileSink : public AlarmSink {
 public:
  explicit FileSink(std::filesystem::path path);
  bool write(const std::string& line) override;
  std::string describe() const override { return path_.string(); }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Sends the event to every sink in order. Sink failures are reported on
/// `errors` and counted in the return value; they never throw.
std::size_t emit(const AlarmEvent& event, const std::vector<AlarmSink*>& sinks, std::ostream& errors);

// ---------------------------------------------------------------------------
// Monitor loop

struct MonitorConfig {
  ThresholdConfig thresholds;
  /// Stream seconds between predictions once the buffer is warm.
  std::int64_t prediction_cadence_s = 60;
};

struct TickResult {
  std::vector<AlarmEvent> events;
  std::optional<std::string> error;  // set when the frame was rejected
  bool predicted = false;
};

/// Frame ingestion plus periodic inference. The model handle can be swapped
/// from another thread; each inference runs against one complete snapshot.
class Monitor {
 public:
  Monitor(std::shared_ptr<const ForecastModel> model, MonitorConfig cfg);

  TickResult tick(const TelemetryFrame& frame);

  void swap_model(std::shared_ptr<const ForecastModel> model);
  std::shared_ptr<const ForecastModel> model() const;

  const MonitorState& state() const { return state_; }

 private:
  mutable std::mutex model_mutex_;
  std::shared_ptr<const ForecastModel> model_;
  MonitorConfig cfg_;
  MonitorState state_;
};

/// Functional form: one ingestion step against an explicit state.
struct MonitorTickOutcome {
  TickResult result;
  MonitorState state;
};
MonitorTickOutcome monitor_tick(MonitorState state, const TelemetryFrame& frame, const ForecastModel& model,
                                const MonitorConfig& cfg);

}  // namespace aed
