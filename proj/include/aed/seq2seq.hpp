#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aed/nn.hpp"
#include "aed/preprocess.hpp"

namespace aed {

struct ModelConfig {
  Eigen::Index feature_dim = 1;
  Eigen::Index target_dim = 1;
  Eigen::Index encoder_hidden = 32;
  Eigen::Index decoder_hidden = 32;
  /// Width of the ReLU head layer; 0 means the decoder feeds the output layer directly.
  Eigen::Index head_hidden = 16;
  Eigen::Index horizon = 60;
  Eigen::Index lookback = 300;
  bool bidirectional = true;
  std::uint64_t seed = 0;

  void validate() const;
  Eigen::Index encoder_state_dim() const { return bidirectional ? 2 * encoder_hidden : encoder_hidden; }
  bool operator==(const ModelConfig&) const = default;
};

/// Bidirectional (or plain) GRU encoder -> repeat vector -> GRU decoder ->
/// time-distributed head.
struct Seq2SeqParams {
  ModelConfig config;
  nn::GruCellParams encoder_forward;
  std::optional<nn::GruCellParams> encoder_backward;
  nn::GruCellParams decoder;
  std::optional<nn::AffineParams> head;  // ReLU, present when head_hidden > 0
  nn::AffineParams output;               // identity

  /// Every learnable tensor in the fixed serialization order:
  /// encoder_forward {input_weights, hidden_weights, bias}, encoder_backward {...},
  /// decoder {...}, head {weight, bias}, output {weight, bias}. Absent blocks are skipped.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void set_zero();
  void validate() const;
};

/// Seeded uniform initialization; identical configs give identical params.
Seq2SeqParams init_model(const ModelConfig& cfg);
/// Same structure as init_model(cfg) with every entry zero.
Seq2SeqParams zero_model(const ModelConfig& cfg);

nn::Sequence forward(const Seq2SeqParams& params, const nn::Sequence& x);

/// Forward + exact BPTT for one window. Adds dLoss/dparams into `grads` and
/// returns the window's MSE.
double loss_and_gradient(const Seq2SeqParams& params, const nn::Sequence& x, const nn::Sequence& y,
                         Seq2SeqParams& grads);

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  nn::AdamConfig adam;
  int patience = 8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 5.0;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 0-based
  double wall_time_s = 0.0;

  std::size_t epochs_run() const { return train_loss.size(); }
  double best_val_loss() const { return val_loss.at(best_epoch); }
};

struct TrainResult {
  Seq2SeqParams params;  // best-validation parameters
  TrainReport report;
};

/// Mean over windows of the per-window MSE.
double mean_loss(const Seq2SeqParams& params, const std::vector<const Window*>& windows);

TrainResult train(const Seq2SeqParams& initial, const WindowedDataset& dataset, const TrainConfig& tcfg);

/// Checks that the model and dataset agree on widths and window lengths.
void check_compatible(const ModelConfig& cfg, const WindowedDataset& dataset);

// ---------------------------------------------------------------------------
// Checkpoints

/// A trained model plus everything needed to run it on raw telemetry.
struct ForecastModel {
  Seq2SeqParams params;
  NormalizationParams norm;
  std::string model_id;
  std::uint64_t generation = 1;
  /// Timestamp (epoch seconds) the model was trained on data up to; anchors retraining.
  std::int64_t trained_at_s = 0;
};

/// Normalizes raw features (lookback x |features|, model feature order),
/// runs the network and maps outputs back to raw units. Particulate
/// channels are floored at 0.
nn::Sequence predict(const ForecastModel& model, const nn::Sequence& raw_features);

/// Maps normalized network outputs back to raw target units, flooring particulates at 0.
nn::Sequence to_raw_targets(const NormalizationParams& norm, const nn::Sequence& normalized);

/// Id derived from the parameter bytes and generation.
std::string make_model_id(const Seq2SeqParams& params, std::uint64_t generation);

class CheckpointError : public DataError {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, checksum_mismatch, invalid };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ForecastModel& model);
ForecastModel decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ForecastModel& model, const std::filesystem::path& path);
ForecastModel load_checkpoint(const std::filesystem::path& path);

}  // namespace aed
