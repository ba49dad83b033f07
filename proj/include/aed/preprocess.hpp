#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "aed/nn.hpp"
#include "aed/telemetry.hpp"

namespace aed {

enum class Split { train, val, test };

std::string_view split_name(Split s);
Split split_from_name(std::string_view name);

struct PreprocessConfig {
  double outlier_mad_threshold = 5.0;
  /// Channels screened for outliers. Impulsive channels (acceleration, CO2
  /// crew steps, particulate bursts) carry the signal and are left alone.
  std::vector<Channel> outlier_channels = {Channel::pressure_hpa, Channel::temp_c,
                                           Channel::rh_pct,       Channel::mag_x_ut,
                                           Channel::mag_y_ut,     Channel::mag_z_ut};
  double correlation_prune_threshold = 0.95;
  double undersample_zero_ratio = 1.0;
  std::int64_t lookback_s = 5400;
  std::int64_t horizon_s = 60;
  std::int64_t window_stride_s = 60;
  std::array<double, 3> split_fractions = {0.65, 0.10, 0.25};
  std::vector<Channel> feature_channels{all_channels().begin(), all_channels().end()};
  std::vector<Channel> target_channels = {Channel::pc0_3, Channel::pc2_5, Channel::pm2_5_ugm3};
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Lower/upper edge of the band normalized values are clamped into.
inline constexpr double kClampLow = -0.5;
inline constexpr double kClampHigh = 1.5;

struct ChannelRange {
  Channel channel{};
  double min = 0.0;
  double max = 0.0;

  bool constant() const { return max == min; }
  /// (x - min) / (max - min), 0 for constant channels, clamped to the band.
  double normalize(double raw) const;
  double denormalize(double normalized) const;
};

struct NormalizationParams {
  std::vector<ChannelRange> features;
  std::vector<ChannelRange> targets;

  const ChannelRange& find(Channel ch) const;
  std::vector<Channel> feature_channels() const;
  std::vector<Channel> target_channels() const;
};

// ---------------------------------------------------------------------------
// Cleaning

struct OutlierResult {
  std::vector<TelemetryFrame> frames;
  std::array<std::size_t, kChannelCount> flagged{};

  std::size_t total_flagged() const;
};

/// Replaces values with robust z-score |x - median| / (1.4826 MAD) above the
/// threshold by kMissing. Channels with MAD == 0 are skipped.
OutlierResult remove_outliers(const std::vector<TelemetryFrame>& frames, const PreprocessConfig& cfg);

/// Averages duplicate timestamps, drops frames with any missing value, and
/// splits the rest into maximal gap-free 1 Hz runs.
std::vector<TimeSeriesSegment> segment(const std::vector<TelemetryFrame>& frames);

struct DroppedChannel {
  Channel channel{};
  Channel partner{};
  double correlation = 0.0;
};

struct PruneResult {
  std::vector<Channel> kept;
  std::vector<DroppedChannel> dropped;
  std::vector<Channel> constant;
};

/// Pearson correlation over two equally long series; 0 when either is constant.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

/// Greedy pairwise pruning in configured order. The later-listed channel of a
/// pair with |rho| above the threshold is dropped, except that target
/// channels are never dropped (the non-target partner goes instead, and a
/// pair of two targets is left alone).
PruneResult prune_correlated(const std::vector<TimeSeriesSegment>& segments, const PreprocessConfig& cfg);

// ---------------------------------------------------------------------------
// Windowing

struct WindowSlot {
  std::size_t segment = 0;
  std::size_t offset = 0;
  std::int64_t origin_s = 0;
  Split split = Split::train;
};

struct WindowPlan {
  std::vector<WindowSlot> slots;  // chronological
  std::array<std::size_t, 3> split_sizes{};
  /// Frames strictly before this timestamp are the training portion.
  std::int64_t train_end_s = std::numeric_limits<std::int64_t>::min();
};

/// floor((L - lookback - horizon) / stride) + 1, or 0 when L is too short.
std::size_t window_count(std::size_t length, const PreprocessConfig& cfg);

/// Cumulative-rounding split of n chronologically ordered items.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions);

WindowPlan plan_windows(const std::vector<TimeSeriesSegment>& segments, const PreprocessConfig& cfg);

struct NormalizedSegment {
  std::int64_t start_s = 0;
  nn::Sequence features;  // L x |features|
  nn::Sequence targets;   // L x |targets|
};

struct NormalizeResult {
  std::vector<NormalizedSegment> segments;
  NormalizationParams params;
  /// Values that fell outside the clamp band, per feature then per target channel.
  std::vector<std::size_t> feature_clamps;
  std::vector<std::size_t> target_clamps;
};

/// Fits min/max on frames with timestamp < fit_boundary_s only, then maps
/// every frame of every segment.
NormalizeResult normalize(const std::vector<TimeSeriesSegment>& segments,
                          const std::vector<Channel>& features, const std::vector<Channel>& targets,
                          std::int64_t fit_boundary_s);

struct Window {
  nn::Sequence x;  // lookback x |features|
  nn::Sequence y;  // horizon x |targets|
  std::int64_t origin_s = 0;
  Split split = Split::train;
};

struct UndersampleStats {
  std::size_t zero_before = 0;
  std::size_t nonzero = 0;
  std::size_t zero_retained = 0;
};

struct WindowedDataset {
  std::vector<Window> windows;
  NormalizationParams norm;
  PreprocessConfig config;

  // Provenance recorded in meta.json.
  std::size_t outliers_flagged = 0;
  std::vector<DroppedChannel> dropped_channels;
  std::vector<Channel> constant_channels;
  std::vector<std::size_t> feature_clamps;
  std::vector<std::size_t> target_clamps;
  std::size_t segment_count = 0;
  UndersampleStats undersample;

  std::size_t count(Split s) const;
  std::vector<const Window*> split(Split s) const;
  Eigen::Index feature_dim() const { return static_cast<Eigen::Index>(norm.features.size()); }
  Eigen::Index target_dim() const { return static_cast<Eigen::Index>(norm.targets.size()); }
};

WindowedDataset make_windows(const std::vector<NormalizedSegment>& segments, const WindowPlan& plan,
                             const PreprocessConfig& cfg, const NormalizationParams& norm);

/// A window is "zero" when every target entry equals the normalized image of raw 0.
bool is_zero_window(const Window& w, const NormalizationParams& norm);

/// Thins all-zero-target train windows so retained zeros <= ratio x nonzero
/// (at most one when there are no nonzero windows). Val/test untouched.
WindowedDataset undersample(const WindowedDataset& dataset, const PreprocessConfig& cfg);

/// Thrown when no segment is long enough for a single window.
class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

/// outliers -> segment -> prune -> split boundary -> normalize -> windows -> undersample.
WindowedDataset run_pipeline(const std::vector<TelemetryFrame>& frames, const PreprocessConfig& cfg);

void save_dataset(const WindowedDataset& dataset, const std::filesystem::path& dir);
WindowedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace aed
