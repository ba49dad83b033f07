#include "aed/seq2seq.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace aed {

namespace {

void append_gru(std::vector<std::span<double>>& out, nn::GruCellParams& p) {
  out.emplace_back(p.input_weights.data(), static_cast<std::size_t>(p.input_weights.size()));
  out.emplace_back(p.hidden_weights.data(), static_cast<std::size_t>(p.hidden_weights.size()));
  out.emplace_back(p.bias.data(), static_cast<std::size_t>(p.bias.size()));
}

void append_affine(std::vector<std::span<double>>& out, nn::AffineParams& p) {
  out.emplace_back(p.weight.data(), static_cast<std::size_t>(p.weight.size()));
  out.emplace_back(p.bias.data(), static_cast<std::size_t>(p.bias.size()));
}

struct ForwardPass {
  std::optional<nn::BidirectionalResult> bi;
  std::optional<nn::GruSequenceResult> uni;
  nn::Sequence repeated;
  nn::GruSequenceResult decoded;
  std::optional<nn::AffineResult> head;
  nn::AffineResult output;
};

ForwardPass run_forward(const Seq2SeqParams& p, const nn::Sequence& x) {
  const auto& cfg = p.config;
  if (x.rows() != cfg.lookback || x.cols() != cfg.feature_dim) {
    throw nn::ShapeError("model input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         ", expected " + std::to_string(cfg.lookback) + "x" + std::to_string(cfg.feature_dim));
  }
  ForwardPass f;
  nn::Vector state;
  if (cfg.bidirectional) {
    f.bi = nn::bidirectional_encode(p.encoder_forward, *p.encoder_backward, x);
    state = f.bi->state;
  } else {
    f.uni = nn::gru_sequence_forward(p.encoder_forward, x, nn::Vector::Zero(cfg.encoder_hidden));
    state = f.uni->final_state;
  }
  f.repeated = nn::repeat_vector(state, cfg.horizon);
  f.decoded = nn::gru_sequence_forward(p.decoder, f.repeated, nn::Vector::Zero(cfg.decoder_hidden));
  if (p.head) {
    f.head = nn::time_distributed_affine(*p.head, f.decoded.hidden);
    f.output = nn::time_distributed_affine(p.output, f.head->output);
  } else {
    f.output = nn::time_distributed_affine(p.output, f.decoded.hidden);
  }
  return f;
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_dim < 1 || target_dim < 1 || encoder_hidden < 1 || decoder_hidden < 1 || horizon < 1 ||
      lookback < 1 || head_hidden < 0) {
    throw DataError("model dimensions must be >= 1 (head_hidden >= 0)");
  }
}

std::vector<std::span<double>> Seq2SeqParams::tensors() {
  std::vector<std::span<double>> out;
  append_gru(out, encoder_forward);
  if (encoder_backward) append_gru(out, *encoder_backward);
  append_gru(out, decoder);
  if (head) append_affine(out, *head);
  append_affine(out, output);
  return out;
}

std::vector<std::span<const double>> Seq2SeqParams::tensors() const {
  auto mutable_spans = const_cast<Seq2SeqParams*>(this)->tensors();
  return {mutable_spans.begin(), mutable_spans.end()};
}

std::size_t Seq2SeqParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

std::vector<double> Seq2SeqParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (auto t : tensors()) out.insert(out.end(), t.begin(), t.end());
  return out;
}

void Seq2SeqParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw nn::ShapeError("parameter vector has the wrong length");
  std::size_t pos = 0;
  for (auto t : tensors()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), t.size(), t.begin());
    pos += t.size();
  }
}

void Seq2SeqParams::set_zero() {
  for (auto t : tensors()) std::fill(t.begin(), t.end(), 0.0);
}

void Seq2SeqParams::validate() const {
  config.validate();
  const auto check_gru = [](const nn::GruCellParams& g, Eigen::Index in, Eigen::Index hidden, const char* name) {
    g.validate();
    if (g.input_dim() != in || g.hidden_dim() != hidden) {
      throw nn::ShapeError(std::string(name) + " has shape I=" + std::to_string(g.input_dim()) +
                           " H=" + std::to_string(g.hidden_dim()) + ", expected I=" + std::to_string(in) +
                           " H=" + std::to_string(hidden));
    }
  };
  check_gru(encoder_forward, config.feature_dim, config.encoder_hidden, "encoder_forward");
  if (config.bidirectional != encoder_backward.has_value()) {
    throw nn::ShapeError("backward encoder presence does not match the bidirectional flag");
  }
  if (encoder_backward) check_gru(*encoder_backward, config.feature_dim, config.encoder_hidden, "encoder_backward");
  check_gru(decoder, config.encoder_state_dim(), config.decoder_hidden, "decoder");
  if ((config.head_hidden > 0) != head.has_value()) {
    throw nn::ShapeError("head layer presence does not match head_hidden");
  }
  Eigen::Index out_in = config.decoder_hidden;
  if (head) {
    head->validate();
    if (head->input_dim() != config.decoder_hidden || head->output_dim() != config.head_hidden) {
      throw nn::ShapeError("head layer has the wrong shape");
    }
    out_in = config.head_hidden;
  }
  output.validate();
  if (output.input_dim() != out_in || output.output_dim() != config.target_dim) {
    throw nn::ShapeError("output layer has the wrong shape");
  }
}

Seq2SeqParams zero_model(const ModelConfig& cfg) {
  cfg.validate();
  Seq2SeqParams p;
  p.config = cfg;
  p.encoder_forward = nn::GruCellParams::zeros(cfg.feature_dim, cfg.encoder_hidden);
  if (cfg.bidirectional) p.encoder_backward = nn::GruCellParams::zeros(cfg.feature_dim, cfg.encoder_hidden);
  p.decoder = nn::GruCellParams::zeros(cfg.encoder_state_dim(), cfg.decoder_hidden);
  Eigen::Index out_in = cfg.decoder_hidden;
  if (cfg.head_hidden > 0) {
    p.head = nn::AffineParams::zeros(cfg.decoder_hidden, cfg.head_hidden, nn::Activation::relu);
    out_in = cfg.head_hidden;
  }
  p.output = nn::AffineParams::zeros(out_in, cfg.target_dim, nn::Activation::identity);
  return p;
}

Seq2SeqParams init_model(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Seq2SeqParams p;
  p.config = cfg;
  // The forward encoder is drawn first so a unidirectional model shares it
  // with the bidirectional model of the same seed.
  p.encoder_forward = nn::GruCellParams::random(cfg.feature_dim, cfg.encoder_hidden, rng);
  Rng rest(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  p.decoder = nn::GruCellParams::random(cfg.encoder_state_dim(), cfg.decoder_hidden, rest);
  Eigen::Index out_in = cfg.decoder_hidden;
  if (cfg.head_hidden > 0) {
    p.head = nn::AffineParams::random(cfg.decoder_hidden, cfg.head_hidden, nn::Activation::relu, rest);
    out_in = cfg.head_hidden;
  }
  p.output = nn::AffineParams::random(out_in, cfg.target_dim, nn::Activation::identity, rest);
  if (cfg.bidirectional) p.encoder_backward = nn::GruCellParams::random(cfg.feature_dim, cfg.encoder_hidden, rng);
  return p;
}

nn::Sequence forward(const Seq2SeqParams& params, const nn::Sequence& x) {
  return run_forward(params, x).output.output;
}

double loss_and_gradient(const Seq2SeqParams& p, const nn::Sequence& x, const nn::Sequence& y,
                         Seq2SeqParams& grads) {
  const auto f = run_forward(p, x);
  const auto loss = nn::mse_loss(f.output.output, y);

  nn::Sequence d_dec;
  if (p.head) {
    const auto d_head = nn::time_distributed_affine_backward(p.output, f.head->output, f.output, loss.grad, grads.output);
    d_dec = nn::time_distributed_affine_backward(*p.head, f.decoded.hidden, *f.head, d_head, *grads.head);
  } else {
    d_dec = nn::time_distributed_affine_backward(p.output, f.decoded.hidden, f.output, loss.grad, grads.output);
  }
  const auto d_rep = nn::gru_sequence_backward(p.decoder, f.decoded.cache, d_dec, grads.decoder);
  const nn::Vector d_state = nn::repeat_vector_backward(d_rep.d_inputs);
  if (f.bi) {
    nn::bidirectional_encode_backward(p.encoder_forward, *p.encoder_backward, *f.bi, d_state,
                                      grads.encoder_forward, *grads.encoder_backward);
  } else {
    const auto T = x.rows();
    nn::Sequence dh = nn::Sequence::Zero(T, p.config.encoder_hidden);
    dh.row(T - 1) = d_state.transpose();
    nn::gru_sequence_backward(p.encoder_forward, f.uni->cache, dh, grads.encoder_forward);
  }
  return loss.loss;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw DataError("epochs must be >= 1");
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  if (patience < 0) throw DataError("patience must be >= 0");
  if (!(clip_norm >= 0.0)) throw DataError("clip_norm must be >= 0");
  if (!(adam.learning_rate >= 0.0)) throw DataError("learning rate must be >= 0");
}

void check_compatible(const ModelConfig& cfg, const WindowedDataset& ds) {
  if (cfg.feature_dim != ds.feature_dim() || cfg.target_dim != ds.target_dim() ||
      cfg.lookback != ds.config.lookback_s || cfg.horizon != ds.config.horizon_s) {
    throw nn::ShapeError("model expects x " + std::to_string(cfg.lookback) + "x" + std::to_string(cfg.feature_dim) +
                         " -> y " + std::to_string(cfg.horizon) + "x" + std::to_string(cfg.target_dim) +
                         " but dataset has x " + std::to_string(ds.config.lookback_s) + "x" +
                         std::to_string(ds.feature_dim()) + " -> y " + std::to_string(ds.config.horizon_s) + "x" +
                         std::to_string(ds.target_dim()));
  }
}

double mean_loss(const Seq2SeqParams& params, const std::vector<const Window*>& windows) {
  if (windows.empty()) throw DataError("mean_loss: no windows");
  double total = 0.0;
  for (const auto* w : windows) total += nn::mse_loss(forward(params, w->x), w->y).loss;
  return total / static_cast<double>(windows.size());
}

TrainResult train(const Seq2SeqParams& initial, const WindowedDataset& dataset, const TrainConfig& tcfg) {
  tcfg.validate();
  initial.validate();
  check_compatible(initial.config, dataset);
  const auto train_windows = dataset.split(Split::train);
  const auto val_windows = dataset.split(Split::val);
  if (train_windows.empty()) throw DataError("training split is empty");
  if (val_windows.empty()) throw DataError("validation split is empty");

  const auto started = std::chrono::steady_clock::now();
  Seq2SeqParams params = initial;
  Seq2SeqParams grads = zero_model(initial.config);
  nn::AdamState adam(params.parameter_count(), tcfg.adam);
  Rng rng(tcfg.shuffle_seed);

  TrainResult result{initial, {}};
  double best = std::numeric_limits<double>::infinity();
  int stall = 0;
  std::vector<std::size_t> order(train_windows.size());
  auto flat = params.flatten();

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    double epoch_loss = 0.0;
    const auto batch = static_cast<std::size_t>(tcfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto end = std::min(order.size(), start + batch);
      grads.set_zero();
      for (std::size_t k = start; k < end; ++k) {
        const auto* w = train_windows[order[k]];
        epoch_loss += loss_and_gradient(params, w->x, w->y, grads);
      }
      auto g = grads.flatten();
      const double inv = 1.0 / static_cast<double>(end - start);
      double norm2 = 0.0;
      for (auto& v : g) {
        v *= inv;
        norm2 += v * v;
      }
      const double norm = std::sqrt(norm2);
      if (tcfg.clip_norm > 0.0 && norm > tcfg.clip_norm) {
        const double scale = tcfg.clip_norm / norm;
        for (auto& v : g) v *= scale;
      }
      nn::adam_step(flat, g, adam);
      params.assign(flat);
    }

    result.report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double val = mean_loss(params, val_windows);
    result.report.val_loss.push_back(val);
    if (val < best) {
      best = val;
      result.report.best_epoch = static_cast<std::size_t>(epoch);
      result.params = params;
      stall = 0;
    } else if (++stall >= tcfg.patience) {
      break;
    }
  }
  result.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

nn::Sequence predict(const ForecastModel& model, const nn::Sequence& raw) {
  const auto& cfg = model.params.config;
  if (model.norm.features.size() != static_cast<std::size_t>(cfg.feature_dim) ||
      model.norm.targets.size() != static_cast<std::size_t>(cfg.target_dim)) {
    throw DataError("normalization parameters do not match the model");
  }
  if (raw.rows() != cfg.lookback || raw.cols() != cfg.feature_dim) {
    throw nn::ShapeError("raw input is " + std::to_string(raw.rows()) + "x" + std::to_string(raw.cols()) +
                         ", expected " + std::to_string(cfg.lookback) + "x" + std::to_string(cfg.feature_dim));
  }
  nn::Sequence x(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const auto& r = model.norm.features[static_cast<std::size_t>(c)];
    for (Eigen::Index t = 0; t < raw.rows(); ++t) x(t, c) = r.normalize(raw(t, c));
  }
  return to_raw_targets(model.norm, forward(model.params, x));
}

nn::Sequence to_raw_targets(const NormalizationParams& norm, const nn::Sequence& normalized) {
  if (static_cast<std::size_t>(normalized.cols()) != norm.targets.size()) {
    throw nn::ShapeError("output has " + std::to_string(normalized.cols()) + " channels, normalization has " +
                         std::to_string(norm.targets.size()));
  }
  nn::Sequence out = normalized;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const auto& r = norm.targets[static_cast<std::size_t>(c)];
    const bool particulate = r.channel >= Channel::pc0_3;
    for (Eigen::Index t = 0; t < out.rows(); ++t) {
      double v = r.denormalize(out(t, c));
      if (particulate) v = std::max(0.0, v);
      out(t, c) = v;
    }
  }
  return out;
}

}  // namespace aed
