#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "aed/util.hpp"

// Differentiable building blocks for the encoder-decoder forecaster.
// Everything is f64 and row-major; sequences are T x dim with one row per
// timestep.
namespace aed::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Sequence = Matrix;

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

double sigmoid(double x);

// ---------------------------------------------------------------------------
// GRU

/// Gate blocks are stacked in the order update (z), reset (r), candidate (h).
///
///   z  = sigmoid(W_z x + U_z h_prev + b_z)
///   r  = sigmoid(W_r x + U_r h_prev + b_r)
///   h~ = tanh(W_h x + U_h (r * h_prev) + b_h)
///   h  = (1 - z) * h_prev + z * h~
struct GruCellParams {
  Matrix input_weights;   // 3H x I
  Matrix hidden_weights;  // 3H x H
  Vector bias;            // 3H

  static GruCellParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim);
  /// Uniform in [-1/sqrt(I), 1/sqrt(I)] for input weights, [-1/sqrt(H), 1/sqrt(H)]
  /// for hidden weights, zero biases.
  static GruCellParams random(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

  Eigen::Index input_dim() const { return input_weights.cols(); }
  Eigen::Index hidden_dim() const { return hidden_weights.cols(); }

  auto w_z() const { return input_weights.middleRows(0, hidden_dim()); }
  auto w_r() const { return input_weights.middleRows(hidden_dim(), hidden_dim()); }
  auto w_h() const { return input_weights.middleRows(2 * hidden_dim(), hidden_dim()); }
  auto u_z() const { return hidden_weights.middleRows(0, hidden_dim()); }
  auto u_r() const { return hidden_weights.middleRows(hidden_dim(), hidden_dim()); }
  auto u_h() const { return hidden_weights.middleRows(2 * hidden_dim(), hidden_dim()); }
  auto b_z() const { return bias.segment(0, hidden_dim()); }
  auto b_r() const { return bias.segment(hidden_dim(), hidden_dim()); }
  auto b_h() const { return bias.segment(2 * hidden_dim(), hidden_dim()); }

  /// Throws ShapeError on inconsistent shapes or non-finite entries.
  void validate() const;
  void set_zero();
};

struct GruStepCache {
  Vector x;
  Vector h_prev;
  Vector z;
  Vector r;
  Vector candidate;
};

struct GruStepResult {
  Vector h_next;
  GruStepCache cache;
};

GruStepResult gru_cell_forward(const GruCellParams& params, const Vector& x, const Vector& h_prev);

/// Accumulates parameter gradients into `grads`; returns gradients w.r.t. x and h_prev.
struct GruStepGrad {
  Vector dx;
  Vector dh_prev;
};
GruStepGrad gru_cell_backward(const GruCellParams& params, const GruStepCache& cache,
                              const Vector& dh_next, GruCellParams& grads);

/// Per-timestep intermediates of a full sequence pass, stored as T x H
/// matrices so the input projections can be formed and differentiated as
/// single matrix products.
struct GruSequenceCache {
  Sequence inputs;       // T x I
  Sequence h_prev;       // T x H (row t is the state entering step t)
  Sequence z;
  Sequence r;
  Sequence candidate;
};

struct GruSequenceResult {
  Sequence hidden;  // T x H, row t = h_{t+1}
  Vector final_state;
  GruSequenceCache cache;
};

GruSequenceResult gru_sequence_forward(const GruCellParams& params, const Sequence& inputs,
                                       const Vector& h0);

struct GruSequenceGrad {
  Sequence d_inputs;  // T x I
  Vector d_h0;
};

/// `d_hidden` row t is dLoss/dh_{t+1} (use a zero matrix with only the last row
/// set when only the final state feeds the loss).
GruSequenceGrad gru_sequence_backward(const GruCellParams& params, const GruSequenceCache& cache,
                                      const Sequence& d_hidden, GruCellParams& grads);

// ---------------------------------------------------------------------------
// Bidirectional encoder

struct BidirectionalResult {
  Vector state;  // [forward final || backward final], length 2H
  GruSequenceCache forward_cache;
  GruSequenceCache backward_cache;  // over time-reversed inputs
};

BidirectionalResult bidirectional_encode(const GruCellParams& fwd, const GruCellParams& bwd,
                                         const Sequence& inputs);

Sequence bidirectional_encode_backward(const GruCellParams& fwd, const GruCellParams& bwd,
                                       const BidirectionalResult& result, const Vector& d_state,
                                       GruCellParams& fwd_grads, GruCellParams& bwd_grads);

Sequence reverse_rows(const Sequence& seq);

// ---------------------------------------------------------------------------
// Repeat vector

Sequence repeat_vector(const Vector& state, Eigen::Index n);
/// Gradient of repeat_vector: column sums of the upstream gradient.
Vector repeat_vector_backward(const Sequence& upstream);

// ---------------------------------------------------------------------------
// Time-distributed affine

enum class Activation { identity, relu };

struct AffineParams {
  Matrix weight;  // O x H
  Vector bias;    // O
  Activation activation = Activation::identity;

  static AffineParams zeros(Eigen::Index in_dim, Eigen::Index out_dim, Activation act);
  static AffineParams random(Eigen::Index in_dim, Eigen::Index out_dim, Activation act, Rng& rng);

  Eigen::Index input_dim() const { return weight.cols(); }
  Eigen::Index output_dim() const { return weight.rows(); }
  void validate() const;
  void set_zero();
};

struct AffineResult {
  Sequence output;
  Sequence preactivation;
};

AffineResult time_distributed_affine(const AffineParams& params, const Sequence& inputs);

/// Returns dLoss/dinputs and accumulates weight/bias gradients into `grads`.
Sequence time_distributed_affine_backward(const AffineParams& params, const Sequence& inputs,
                                          const AffineResult& result, const Sequence& d_output,
                                          AffineParams& grads);

// ---------------------------------------------------------------------------
// Loss

struct LossResult {
  double loss = 0.0;
  Sequence grad;
};

/// Mean over all entries of (pred - target)^2 and its gradient 2(pred - target)/N.
LossResult mse_loss(const Sequence& pred, const Sequence& target);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  AdamState(std::size_t parameter_count, AdamConfig cfg);
};

/// One bias-corrected Adam update applied elementwise in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace aed::nn
