#include "aed/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace aed {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

bool same_ranges(const std::vector<ChannelRange>& a, const std::vector<ChannelRange>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].channel != b[i].channel || a[i].min != b[i].min || a[i].max != b[i].max) return false;
  }
  return true;
}

nn::Sequence raw_features(const NormalizationParams& norm, const nn::Sequence& x) {
  nn::Sequence raw = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const auto& r = norm.features[static_cast<std::size_t>(c)];
    for (Eigen::Index t = 0; t < x.rows(); ++t) raw(t, c) = r.denormalize(x(t, c));
  }
  return raw;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

RmseResult rmse(const std::vector<nn::Sequence>& pred, const std::vector<nn::Sequence>& target) {
  if (pred.empty() || pred.size() != target.size()) {
    throw nn::ShapeError("rmse: prediction and target window counts differ or are zero");
  }
  const auto T = pred.front().rows();
  const auto O = pred.front().cols();
  std::vector<double> sums(static_cast<std::size_t>(O), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].rows() != T || pred[i].cols() != O || target[i].rows() != T || target[i].cols() != O) {
      throw nn::ShapeError("rmse: window " + std::to_string(i) + " has a mismatched shape");
    }
    for (Eigen::Index c = 0; c < O; ++c) {
      sums[static_cast<std::size_t>(c)] += (pred[i].col(c) - target[i].col(c)).squaredNorm();
    }
  }
  RmseResult out;
  double total = 0.0;
  const double per_channel_n = static_cast<double>(pred.size()) * static_cast<double>(T);
  for (double s : sums) {
    out.per_channel.push_back(std::sqrt(s / per_channel_n));
    total += s;
  }
  out.overall = std::sqrt(total / (per_channel_n * static_cast<double>(O)));
  return out;
}

EvalResult evaluate(const ForecastModel& model, const WindowedDataset& dataset, Split split) {
  check_compatible(model.params.config, dataset);
  if (model.norm.feature_channels() != dataset.norm.feature_channels() ||
      model.norm.target_channels() != dataset.norm.target_channels()) {
    throw DataError("model and dataset channels differ");
  }
  const auto windows = dataset.split(split);
  if (windows.empty()) throw DataError("split '" + std::string(split_name(split)) + "' has no windows");
  std::vector<nn::Sequence> pred_norm, true_norm, pred_raw, true_raw;
  // A model trained on another corpus carries its own scaling; route its
  // inputs through raw units and score its outputs on this dataset's scale.
  const bool own_scale = same_ranges(model.norm.features, dataset.norm.features) &&
                         same_ranges(model.norm.targets, dataset.norm.targets);
  for (const auto* w : windows) {
    nn::Sequence p;
    nn::Sequence pr;
    if (own_scale) {
      p = forward(model.params, w->x);
      pr = to_raw_targets(dataset.norm, p);
    } else {
      pr = predict(model, raw_features(dataset.norm, w->x));
      p = pr;
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const auto& r = dataset.norm.targets[static_cast<std::size_t>(c)];
        const double span = r.max - r.min;
        for (Eigen::Index t = 0; t < p.rows(); ++t) p(t, c) = span == 0.0 ? 0.0 : (pr(t, c) - r.min) / span;
      }
    }
    nn::Sequence tr = w->y;
    for (Eigen::Index c = 0; c < tr.cols(); ++c) {
      const auto& r = dataset.norm.targets[static_cast<std::size_t>(c)];
      for (Eigen::Index t = 0; t < tr.rows(); ++t) tr(t, c) = r.denormalize(w->y(t, c));
    }
    pred_norm.push_back(std::move(p));
    true_norm.push_back(w->y);
    pred_raw.push_back(std::move(pr));
    true_raw.push_back(std::move(tr));
  }
  EvalResult out;
  out.channels = dataset.norm.target_channels();
  out.normalized = rmse(pred_norm, true_norm);
  out.raw = rmse(pred_raw, true_raw);
  out.window_count = windows.size();
  out.split = split;
  out.model_id = model.model_id;
  return out;
}

ComparisonTable compare_models(const WindowedDataset& dataset, const ModelConfig& model_cfg_bi,
                               const ModelConfig& model_cfg_uni, const TrainConfig& tcfg, int n_seeds) {
  if (n_seeds < 1) throw DataError("compare_models needs at least one seed");
  ComparisonTable table;
  const auto score = [&](ModelConfig cfg, std::uint64_t offset) {
    cfg.seed += offset;
    TrainConfig t = tcfg;
    t.shuffle_seed += offset;
    auto trained = train(init_model(cfg), dataset, t);
    ForecastModel m{std::move(trained.params), dataset.norm, "", 1, 0};
    return evaluate(m, dataset, Split::test).normalized.overall;
  };
  std::vector<double> gru, bigru;
  for (int k = 0; k < n_seeds; ++k) {
    const auto offset = static_cast<std::uint64_t>(k);
    ComparisonRow row;
    row.seed = model_cfg_bi.seed + offset;
    row.rmse_bigru = score(model_cfg_bi, offset);
    row.rmse_gru = score(model_cfg_uni, offset);
    gru.push_back(row.rmse_gru);
    bigru.push_back(row.rmse_bigru);
    table.trials.push_back(row);
  }
  table.median.rmse_gru = median(gru);
  table.median.rmse_bigru = median(bigru);
  return table;
}

void write_comparison_csv(const ComparisonTable& table, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "seed,rmse_gru,rmse_bigru\n";
  for (const auto& r : table.trials) {
    out << r.seed << ',' << format_double(r.rmse_gru) << ',' << format_double(r.rmse_bigru) << '\n';
  }
  out << "median," << format_double(table.median.rmse_gru) << ',' << format_double(table.median.rmse_bigru) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void export_predictions(const ForecastModel& model, const WindowedDataset& dataset, Split split,
                        const std::filesystem::path& path) {
  check_compatible(model.params.config, dataset);
  const auto windows = dataset.split(split);
  auto out = open_csv(path);
  out << "timestamp_s,channel,true_value,predicted_value\n";
  const auto lookback = dataset.config.lookback_s;
  for (const auto* w : windows) {
    const nn::Sequence p = forward(model.params, w->x);
    for (Eigen::Index t = 0; t < p.rows(); ++t) {
      const auto ts = w->origin_s + lookback + t;
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const auto& r = dataset.norm.targets[static_cast<std::size_t>(c)];
        double predicted = r.denormalize(p(t, c));
        if (r.channel >= Channel::pc0_3) predicted = std::max(0.0, predicted);
        out << ts << ',' << channel_name(r.channel) << ',' << format_double(r.denormalize(w->y(t, c))) << ','
            << format_double(predicted) << '\n';
      }
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void export_loss_curves(const TrainReport& report, const std::filesystem::path& path) {
  if (report.train_loss.empty() || report.train_loss.size() != report.val_loss.size()) {
    throw DataError("loss curves need a populated training report");
  }
  auto out = open_csv(path);
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    out << (e + 1) << ',' << format_double(report.train_loss[e]) << ',' << format_double(report.val_loss[e]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace aed
