#include "aed/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "aed/config_json.hpp"
#include "aed/tensor_io.hpp"

namespace aed {

namespace {

using nlohmann::ordered_json;

constexpr double kMadScale = 1.4826;

double median_of(std::vector<double> values) {
  const auto n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

std::vector<double> pooled(const std::vector<TimeSeriesSegment>& segments, Channel ch) {
  std::vector<double> out;
  for (const auto& s : segments) {
    for (const auto& f : s.frames) out.push_back(f[ch]);
  }
  return out;
}

bool contains(const std::vector<Channel>& list, Channel ch) {
  return std::find(list.begin(), list.end(), ch) != list.end();
}

constexpr std::array<Split, 3> kSplits = {Split::train, Split::val, Split::test};

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(std::string_view name) {
  for (auto s : kSplits) {
    if (split_name(s) == name) return s;
  }
  throw DataError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

void PreprocessConfig::validate() const {
  if (std::abs(split_fractions[0] + split_fractions[1] + split_fractions[2] - 1.0) > 1e-9) {
    throw DataError("split fractions must sum to 1");
  }
  for (double f : split_fractions) {
    if (f < 0.0) throw DataError("split fractions must be non-negative");
  }
  if (lookback_s < 1 || horizon_s < 1 || window_stride_s < 1) {
    throw DataError("lookback_s, horizon_s and window_stride_s must be >= 1");
  }
  if (target_channels.empty()) throw DataError("target_channels must not be empty");
  if (feature_channels.empty()) throw DataError("feature_channels must not be empty");
  if (!(correlation_prune_threshold > 0.0 && correlation_prune_threshold <= 1.0)) {
    throw DataError("correlation_prune_threshold must lie in (0, 1]");
  }
  if (!(undersample_zero_ratio >= 0.0)) throw DataError("undersample_zero_ratio must be >= 0");
  if (!(outlier_mad_threshold > 0.0)) throw DataError("outlier_mad_threshold must be > 0");
}

double ChannelRange::normalize(double raw) const {
  if (constant()) return 0.0;
  return std::clamp((raw - min) / (max - min), kClampLow, kClampHigh);
}

double ChannelRange::denormalize(double normalized) const {
  if (constant()) return min;
  return min + normalized * (max - min);
}

const ChannelRange& NormalizationParams::find(Channel ch) const {
  for (const auto& r : targets) {
    if (r.channel == ch) return r;
  }
  for (const auto& r : features) {
    if (r.channel == ch) return r;
  }
  throw DataError("no normalization range for channel " + std::string(channel_name(ch)));
}

std::vector<Channel> NormalizationParams::feature_channels() const {
  std::vector<Channel> out;
  for (const auto& r : features) out.push_back(r.channel);
  return out;
}

std::vector<Channel> NormalizationParams::target_channels() const {
  std::vector<Channel> out;
  for (const auto& r : targets) out.push_back(r.channel);
  return out;
}

std::size_t OutlierResult::total_flagged() const {
  return std::accumulate(flagged.begin(), flagged.end(), std::size_t{0});
}

OutlierResult remove_outliers(const std::vector<TelemetryFrame>& frames, const PreprocessConfig& cfg) {
  OutlierResult out{frames, {}};
  for (auto ch : cfg.outlier_channels) {
    std::vector<double> values;
    values.reserve(frames.size());
    for (const auto& f : frames) {
      if (!std::isnan(f[ch])) values.push_back(f[ch]);
    }
    if (values.empty()) continue;
    const double med = median_of(values);
    for (auto& v : values) v = std::abs(v - med);
    const double mad = median_of(std::move(values));
    if (mad == 0.0) continue;
    const double scale = kMadScale * mad;
    for (auto& f : out.frames) {
      const double v = f[ch];
      if (std::isnan(v)) continue;
      if (std::abs(v - med) / scale > cfg.outlier_mad_threshold) {
        f[ch] = kMissing;
        ++out.flagged[static_cast<std::size_t>(ch)];
      }
    }
  }
  return out;
}

std::vector<TimeSeriesSegment> segment(const std::vector<TelemetryFrame>& frames) {
  // Collapse readings that share a second by per-channel mean of the present values.
  std::vector<TelemetryFrame> seconds;
  for (std::size_t i = 0; i < frames.size();) {
    std::size_t j = i + 1;
    while (j < frames.size() && frames[j].timestamp_s == frames[i].timestamp_s) ++j;
    TelemetryFrame merged = frames[i];
    if (j - i > 1) {
      for (auto ch : all_channels()) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t k = i; k < j; ++k) {
          if (!std::isnan(frames[k][ch])) {
            sum += frames[k][ch];
            ++n;
          }
        }
        merged[ch] = n > 0 ? sum / static_cast<double>(n) : kMissing;
      }
    }
    seconds.push_back(merged);
    i = j;
  }

  std::vector<TimeSeriesSegment> out;
  for (const auto& f : seconds) {
    if (f.has_missing()) continue;
    if (out.empty() || f.timestamp_s != out.back().frames.back().timestamp_s + 1) {
      out.push_back(TimeSeriesSegment{f.timestamp_s, 1, {}});
    }
    out.back().frames.push_back(f);
  }
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = a.size();
  if (n < 2 || b.size() != n) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

PruneResult prune_correlated(const std::vector<TimeSeriesSegment>& segments, const PreprocessConfig& cfg) {
  std::size_t samples = 0;
  for (const auto& s : segments) samples += s.size();
  if (samples < 2) throw InsufficientDataError("correlation pruning needs at least 2 clean samples");

  const auto& chans = cfg.feature_channels;
  std::vector<std::vector<double>> series;
  PruneResult out;
  for (auto ch : chans) {
    series.push_back(pooled(segments, ch));
    const auto [lo, hi] = std::minmax_element(series.back().begin(), series.back().end());
    if (*lo == *hi) out.constant.push_back(ch);
  }

  std::vector<bool> dropped(chans.size(), false);
  for (std::size_t i = 0; i < chans.size(); ++i) {
    for (std::size_t j = i + 1; j < chans.size(); ++j) {
      if (dropped[i]) break;
      if (dropped[j]) continue;
      const double rho = pearson(series[i], series[j]);
      if (!(std::abs(rho) > cfg.correlation_prune_threshold)) continue;
      const bool i_target = contains(cfg.target_channels, chans[i]);
      const bool j_target = contains(cfg.target_channels, chans[j]);
      if (i_target && j_target) continue;
      const std::size_t victim = j_target ? i : j;
      const std::size_t partner = victim == j ? i : j;
      dropped[victim] = true;
      out.dropped.push_back({chans[victim], chans[partner], rho});
    }
  }
  for (std::size_t i = 0; i < chans.size(); ++i) {
    if (!dropped[i]) out.kept.push_back(chans[i]);
  }
  return out;
}

std::size_t window_count(std::size_t length, const PreprocessConfig& cfg) {
  const auto span = static_cast<std::size_t>(cfg.lookback_s + cfg.horizon_s);
  if (length < span) return 0;
  return (length - span) / static_cast<std::size_t>(cfg.window_stride_s) + 1;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions) {
  const double total = static_cast<double>(n);
  auto b1 = static_cast<std::size_t>(std::llround(total * fractions[0]));
  auto b2 = static_cast<std::size_t>(std::llround(total * (fractions[0] + fractions[1])));
  b1 = std::min(b1, n);
  b2 = std::clamp(b2, b1, n);
  return {b1, b2 - b1, n - b2};
}

WindowPlan plan_windows(const std::vector<TimeSeriesSegment>& segments, const PreprocessConfig& cfg) {
  WindowPlan plan;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto n = window_count(segments[s].size(), cfg);
    for (std::size_t k = 0; k < n; ++k) {
      const auto offset = k * static_cast<std::size_t>(cfg.window_stride_s);
      plan.slots.push_back({s, offset, segments[s].start_s + static_cast<std::int64_t>(offset), Split::train});
    }
  }
  plan.split_sizes = split_sizes(plan.slots.size(), cfg.split_fractions);
  const auto span = cfg.lookback_s + cfg.horizon_s;
  for (std::size_t i = 0; i < plan.slots.size(); ++i) {
    auto& slot = plan.slots[i];
    if (i < plan.split_sizes[0]) {
      slot.split = Split::train;
      plan.train_end_s = std::max(plan.train_end_s, slot.origin_s + span);
    } else if (i < plan.split_sizes[0] + plan.split_sizes[1]) {
      slot.split = Split::val;
    } else {
      slot.split = Split::test;
    }
  }
  return plan;
}

NormalizeResult normalize(const std::vector<TimeSeriesSegment>& segments,
                          const std::vector<Channel>& features, const std::vector<Channel>& targets,
                          std::int64_t fit_boundary_s) {
  if (segments.empty()) throw DataError("normalize: no segments");
  const auto fit = [&](Channel ch) {
    ChannelRange r{ch, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& s : segments) {
      for (const auto& f : s.frames) {
        if (f.timestamp_s >= fit_boundary_s) break;
        r.min = std::min(r.min, f[ch]);
        r.max = std::max(r.max, f[ch]);
      }
    }
    return r;
  };

  NormalizeResult out;
  for (auto ch : features) out.params.features.push_back(fit(ch));
  for (auto ch : targets) out.params.targets.push_back(fit(ch));
  if (!out.params.features.empty() && out.params.features.front().min > out.params.features.front().max) {
    throw InsufficientDataError("normalize: the training portion is empty");
  }
  if (out.params.targets.front().min > out.params.targets.front().max) {
    throw InsufficientDataError("normalize: the training portion is empty");
  }

  out.feature_clamps.assign(features.size(), 0);
  out.target_clamps.assign(targets.size(), 0);
  const auto map_into = [](const std::vector<ChannelRange>& ranges, const TelemetryFrame& f, auto row,
                           std::vector<std::size_t>& clamps) {
    for (std::size_t c = 0; c < ranges.size(); ++c) {
      const auto& r = ranges[c];
      const double v = r.normalize(f[r.channel]);
      if (!r.constant()) {
        const double unclamped = (f[r.channel] - r.min) / (r.max - r.min);
        if (unclamped < kClampLow || unclamped > kClampHigh) ++clamps[c];
      }
      row(static_cast<Eigen::Index>(c)) = v;
    }
  };
  for (const auto& s : segments) {
    NormalizedSegment ns;
    ns.start_s = s.start_s;
    const auto L = static_cast<Eigen::Index>(s.size());
    ns.features.resize(L, static_cast<Eigen::Index>(features.size()));
    ns.targets.resize(L, static_cast<Eigen::Index>(targets.size()));
    for (Eigen::Index t = 0; t < L; ++t) {
      const auto& f = s.frames[static_cast<std::size_t>(t)];
      map_into(out.params.features, f, ns.features.row(t), out.feature_clamps);
      map_into(out.params.targets, f, ns.targets.row(t), out.target_clamps);
    }
    out.segments.push_back(std::move(ns));
  }
  return out;
}

std::size_t WindowedDataset::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(windows.begin(), windows.end(), [s](const Window& w) { return w.split == s; }));
}

std::vector<const Window*> WindowedDataset::split(Split s) const {
  std::vector<const Window*> out;
  for (const auto& w : windows) {
    if (w.split == s) out.push_back(&w);
  }
  return out;
}

WindowedDataset make_windows(const std::vector<NormalizedSegment>& segments, const WindowPlan& plan,
                             const PreprocessConfig& cfg, const NormalizationParams& norm) {
  WindowedDataset ds;
  ds.norm = norm;
  ds.config = cfg;
  ds.segment_count = segments.size();
  const auto lookback = static_cast<Eigen::Index>(cfg.lookback_s);
  const auto horizon = static_cast<Eigen::Index>(cfg.horizon_s);
  ds.windows.reserve(plan.slots.size());
  for (const auto& slot : plan.slots) {
    const auto& seg = segments.at(slot.segment);
    const auto off = static_cast<Eigen::Index>(slot.offset);
    if (off + lookback + horizon > seg.features.rows()) {
      throw DataError("window plan does not fit its segment");
    }
    ds.windows.push_back(Window{seg.features.middleRows(off, lookback),
                                seg.targets.middleRows(off + lookback, horizon), slot.origin_s,
                                slot.split});
  }
  return ds;
}

bool is_zero_window(const Window& w, const NormalizationParams& norm) {
  for (Eigen::Index c = 0; c < w.y.cols(); ++c) {
    const double zero = norm.targets.at(static_cast<std::size_t>(c)).normalize(0.0);
    for (Eigen::Index t = 0; t < w.y.rows(); ++t) {
      if (w.y(t, c) != zero) return false;
    }
  }
  return true;
}

WindowedDataset undersample(const WindowedDataset& dataset, const PreprocessConfig& cfg) {
  std::vector<std::size_t> zeros;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < dataset.windows.size(); ++i) {
    const auto& w = dataset.windows[i];
    if (w.split != Split::train) continue;
    if (is_zero_window(w, dataset.norm)) {
      zeros.push_back(i);
    } else {
      ++nonzero;
    }
  }

  std::size_t keep = zeros.size();
  if (nonzero == 0) {
    keep = std::min<std::size_t>(1, zeros.size());
  } else if (std::isfinite(cfg.undersample_zero_ratio)) {
    const double cap = std::floor(cfg.undersample_zero_ratio * static_cast<double>(nonzero));
    keep = std::min(zeros.size(), static_cast<std::size_t>(cap));
  }

  std::vector<bool> drop(dataset.windows.size(), false);
  if (keep < zeros.size()) {
    Rng rng(cfg.rng_seed);
    auto order = zeros;
    rng.shuffle(order);
    for (std::size_t k = keep; k < order.size(); ++k) drop[order[k]] = true;
  }

  WindowedDataset out;
  out.norm = dataset.norm;
  out.config = dataset.config;
  out.outliers_flagged = dataset.outliers_flagged;
  out.dropped_channels = dataset.dropped_channels;
  out.constant_channels = dataset.constant_channels;
  out.feature_clamps = dataset.feature_clamps;
  out.target_clamps = dataset.target_clamps;
  out.segment_count = dataset.segment_count;
  out.undersample = {zeros.size(), nonzero, keep};
  for (std::size_t i = 0; i < dataset.windows.size(); ++i) {
    if (!drop[i]) out.windows.push_back(dataset.windows[i]);
  }
  return out;
}

WindowedDataset run_pipeline(const std::vector<TelemetryFrame>& frames, const PreprocessConfig& cfg) {
  cfg.validate();
  const auto cleaned = remove_outliers(frames, cfg);
  const auto segments = segment(cleaned.frames);
  const auto span = cfg.lookback_s + cfg.horizon_s;
  const auto plan = plan_windows(segments, cfg);
  if (plan.slots.empty()) {
    std::size_t longest = 0;
    for (const auto& s : segments) longest = std::max(longest, s.size());
    throw InsufficientDataError("no gap-free segment covers lookback + horizon = " + std::to_string(span) +
                                " s (longest clean segment: " + std::to_string(longest) + " s)");
  }
  const auto pruned = prune_correlated(segments, cfg);
  auto norm = normalize(segments, pruned.kept, cfg.target_channels, plan.train_end_s);
  auto ds = make_windows(norm.segments, plan, cfg, norm.params);
  ds.outliers_flagged = cleaned.total_flagged();
  ds.dropped_channels = pruned.dropped;
  ds.constant_channels = pruned.constant;
  ds.feature_clamps = norm.feature_clamps;
  ds.target_clamps = norm.target_clamps;
  return undersample(ds, cfg);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

ordered_json ranges_to_json(const std::vector<ChannelRange>& ranges, const std::vector<std::size_t>& clamps) {
  ordered_json arr = ordered_json::array();
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto& r = ranges[i];
    ordered_json j;
    j["channel"] = channel_name(r.channel);
    j["min"] = r.min;
    j["max"] = r.max;
    j["constant"] = r.constant();
    j["clamped_values"] = i < clamps.size() ? clamps[i] : 0;
    arr.push_back(j);
  }
  return arr;
}

std::vector<ChannelRange> ranges_from_json(const ordered_json& arr, std::vector<std::size_t>& clamps) {
  std::vector<ChannelRange> out;
  for (const auto& j : arr) {
    out.push_back({parse_channel(j.at("channel").get<std::string>()), j.at("min").get<double>(),
                   j.at("max").get<double>()});
    clamps.push_back(j.value("clamped_values", std::size_t{0}));
  }
  return out;
}

std::filesystem::path tensor_path(const std::filesystem::path& dir, Split s, char which) {
  return dir / (std::string(split_name(s)) + "_" + which + ".bin");
}

}  // namespace

void save_dataset(const WindowedDataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  ordered_json meta;
  meta["format"] = "aed-windowed-dataset";
  meta["version"] = 1;
  meta["config"] = to_json(ds.config);
  meta["feature_channels"] = ordered_json::array();
  for (const auto& r : ds.norm.features) meta["feature_channels"].push_back(channel_name(r.channel));
  meta["target_channels"] = ordered_json::array();
  for (const auto& r : ds.norm.targets) meta["target_channels"].push_back(channel_name(r.channel));
  meta["normalization"]["features"] = ranges_to_json(ds.norm.features, ds.feature_clamps);
  meta["normalization"]["targets"] = ranges_to_json(ds.norm.targets, ds.target_clamps);
  meta["normalization"]["clamp_band"] = {kClampLow, kClampHigh};
  meta["outliers_flagged"] = ds.outliers_flagged;
  meta["segments"] = ds.segment_count;
  ordered_json dropped = ordered_json::array();
  for (const auto& d : ds.dropped_channels) {
    dropped.push_back({{"channel", channel_name(d.channel)},
                       {"partner", channel_name(d.partner)},
                       {"correlation", d.correlation}});
  }
  meta["dropped_channels"] = dropped;
  meta["constant_channels"] = ordered_json::array();
  for (auto ch : ds.constant_channels) meta["constant_channels"].push_back(channel_name(ch));
  meta["undersample"] = {{"zero_windows_before", ds.undersample.zero_before},
                         {"nonzero_windows", ds.undersample.nonzero},
                         {"zero_windows_retained", ds.undersample.zero_retained}};

  const auto lookback = static_cast<std::uint64_t>(ds.config.lookback_s);
  const auto horizon = static_cast<std::uint64_t>(ds.config.horizon_s);
  const auto nf = static_cast<std::uint64_t>(ds.norm.features.size());
  const auto nt = static_cast<std::uint64_t>(ds.norm.targets.size());
  for (auto s : kSplits) {
    const auto windows = ds.split(s);
    Tensor x{{windows.size(), lookback, nf}, {}};
    Tensor y{{windows.size(), horizon, nt}, {}};
    x.data.reserve(x.element_count());
    y.data.reserve(y.element_count());
    ordered_json origins = ordered_json::array();
    for (const auto* w : windows) {
      x.data.insert(x.data.end(), w->x.data(), w->x.data() + w->x.size());
      y.data.insert(y.data.end(), w->y.data(), w->y.data() + w->y.size());
      origins.push_back(w->origin_s);
    }
    write_tensor(x, tensor_path(dir, s, 'x'));
    write_tensor(y, tensor_path(dir, s, 'y'));
    meta["splits"][std::string(split_name(s))] = {{"windows", windows.size()}, {"origins", origins}};
  }

  std::ofstream out(dir / "meta.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + (dir / "meta.json").string());
}

WindowedDataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  std::ifstream in(dir / "meta.json", std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / "meta.json").string());
  ordered_json meta;
  try {
    meta = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed meta.json: " + std::string(e.what()));
  }

  WindowedDataset ds;
  try {
    ds.config = preprocess_config_from_json(meta.at("config"));
    ds.norm.features = ranges_from_json(meta.at("normalization").at("features"), ds.feature_clamps);
    ds.norm.targets = ranges_from_json(meta.at("normalization").at("targets"), ds.target_clamps);
    ds.outliers_flagged = meta.at("outliers_flagged").get<std::size_t>();
    ds.segment_count = meta.at("segments").get<std::size_t>();
    for (const auto& d : meta.at("dropped_channels")) {
      ds.dropped_channels.push_back({parse_channel(d.at("channel").get<std::string>()),
                                     parse_channel(d.at("partner").get<std::string>()),
                                     d.at("correlation").get<double>()});
    }
    for (const auto& c : meta.at("constant_channels")) {
      ds.constant_channels.push_back(parse_channel(c.get<std::string>()));
    }
    const auto& u = meta.at("undersample");
    ds.undersample = {u.at("zero_windows_before").get<std::size_t>(), u.at("nonzero_windows").get<std::size_t>(),
                      u.at("zero_windows_retained").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed meta.json: " + std::string(e.what()));
  }

  const auto lookback = static_cast<Eigen::Index>(ds.config.lookback_s);
  const auto horizon = static_cast<Eigen::Index>(ds.config.horizon_s);
  const auto nf = ds.feature_dim();
  const auto nt = ds.target_dim();
  std::vector<Window> all;
  for (auto s : kSplits) {
    const auto x = read_tensor(tensor_path(dir, s, 'x'));
    const auto y = read_tensor(tensor_path(dir, s, 'y'));
    const auto origins = meta.at("splits").at(std::string(split_name(s))).at("origins").get<std::vector<std::int64_t>>();
    const auto n = origins.size();
    const std::vector<std::uint64_t> want_x{n, static_cast<std::uint64_t>(lookback), static_cast<std::uint64_t>(nf)};
    const std::vector<std::uint64_t> want_y{n, static_cast<std::uint64_t>(horizon), static_cast<std::uint64_t>(nt)};
    if (x.dims != want_x || y.dims != want_y) {
      throw DataError("tensor shapes for split '" + std::string(split_name(s)) + "' do not match meta.json");
    }
    const auto xs = static_cast<std::size_t>(lookback * nf);
    const auto ys = static_cast<std::size_t>(horizon * nt);
    for (std::size_t i = 0; i < n; ++i) {
      Window w;
      w.x = Eigen::Map<const nn::Matrix>(x.data.data() + i * xs, lookback, nf);
      w.y = Eigen::Map<const nn::Matrix>(y.data.data() + i * ys, horizon, nt);
      w.origin_s = origins[i];
      w.split = s;
      all.push_back(std::move(w));
    }
  }
  // Restore global chronological order across splits.
  std::stable_sort(all.begin(), all.end(), [](const Window& a, const Window& b) { return a.origin_s < b.origin_s; });
  ds.windows = std::move(all);
  return ds;
}

}  // namespace aed
