#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aed/preprocess.hpp"
#include "aed/seq2seq.hpp"

namespace aed {

struct RmseResult {
  double overall = 0.0;
  std::vector<double> per_channel;
};

/// RMSE over all pooled entries of N windows of T x O, plus per-channel RMSE.
RmseResult rmse(const std::vector<nn::Sequence>& pred, const std::vector<nn::Sequence>& target);

struct EvalResult {
  std::vector<Channel> channels;
  RmseResult normalized;
  RmseResult raw;
  std::size_t window_count = 0;
  Split split = Split::test;
  std::string model_id;
};

/// Runs the model over one split and scores it in normalized and raw units.
EvalResult evaluate(const ForecastModel& model, const WindowedDataset& dataset, Split split);

struct ComparisonRow {
  std::uint64_t seed = 0;
  double rmse_gru = 0.0;    // second (ordinary GRU) configuration
  double rmse_bigru = 0.0;  // first (bidirectional) configuration
};

struct ComparisonTable {
  std::vector<ComparisonRow> trials;
  ComparisonRow median;  // seed field unused
};

/// Trains both configurations on the same data for seeds base..base+n-1 (model
/// init and shuffle seeds are offset together) and scores test-split RMSE in
/// normalized units.
ComparisonTable compare_models(const WindowedDataset& dataset, const ModelConfig& model_cfg_bi,
                               const ModelConfig& model_cfg_uni, const TrainConfig& tcfg, int n_seeds);

void write_comparison_csv(const ComparisonTable& table, const std::filesystem::path& path);

/// CSV `timestamp_s,channel,true_value,predicted_value` in raw units, one row per
/// horizon step and channel, windows in time order.
void export_predictions(const ForecastModel& model, const WindowedDataset& dataset, Split split,
                        const std::filesystem::path& path);

/// CSV `epoch,train_loss,val_loss`, epochs numbered from 1.
void export_loss_curves(const TrainReport& report, const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace aed
