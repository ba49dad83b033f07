#include "aed/nn.hpp"

#include <cmath>
#include <string>

namespace aed::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

// One recurrence step given the precomputed input projection W x + b (3H).
// Writes gate activations into the caller's rows and returns h_next.
template <typename ProjRow, typename HPrev, typename Out>
void gru_step(const GruCellParams& p, const ProjRow& proj, const HPrev& h_prev, Out&& z, Out&& r,
              Out&& candidate, Out&& h_next) {
  const auto H = p.hidden_dim();
  const Vector zr = p.hidden_weights.topRows(2 * H) * h_prev;
  for (Eigen::Index j = 0; j < H; ++j) {
    z(j) = sigmoid(proj(j) + zr(j));
    r(j) = sigmoid(proj(H + j) + zr(H + j));
  }
  Vector gated(H);
  for (Eigen::Index j = 0; j < H; ++j) gated(j) = r(j) * h_prev(j);
  const Vector uh = p.u_h() * gated;
  for (Eigen::Index j = 0; j < H; ++j) {
    candidate(j) = std::tanh(proj(2 * H + j) + uh(j));
    h_next(j) = (1.0 - z(j)) * h_prev(j) + z(j) * candidate(j);
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GruCellParams GruCellParams::zeros(Eigen::Index input_dim, Eigen::Index hidden_dim) {
  require(input_dim >= 1 && hidden_dim >= 1, "GRU dimensions must be >= 1");
  return {Matrix::Zero(3 * hidden_dim, input_dim), Matrix::Zero(3 * hidden_dim, hidden_dim),
          Vector::Zero(3 * hidden_dim)};
}

GruCellParams GruCellParams::random(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng) {
  auto p = zeros(input_dim, hidden_dim);
  fill_uniform(p.input_weights, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  fill_uniform(p.hidden_weights, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  return p;
}

void GruCellParams::validate() const {
  const auto H = hidden_weights.cols();
  require(H >= 1 && input_weights.cols() >= 1, "GRU dimensions must be >= 1");
  require(hidden_weights.rows() == 3 * H, "GRU hidden weights must be 3HxH, got " + shape(hidden_weights));
  require(input_weights.rows() == 3 * H, "GRU input weights must be 3HxI, got " + shape(input_weights));
  require(bias.size() == 3 * H, "GRU bias must have length 3H");
  require(input_weights.allFinite() && hidden_weights.allFinite() && bias.allFinite(),
          "GRU parameters must be finite");
}

void GruCellParams::set_zero() {
  input_weights.setZero();
  hidden_weights.setZero();
  bias.setZero();
}

GruStepResult gru_cell_forward(const GruCellParams& params, const Vector& x, const Vector& h_prev) {
  const auto H = params.hidden_dim();
  require(x.size() == params.input_dim(), "GRU input has length " + std::to_string(x.size()) +
                                              ", expected " + std::to_string(params.input_dim()));
  require(h_prev.size() == H, "GRU hidden state has length " + std::to_string(h_prev.size()) +
                                  ", expected " + std::to_string(H));
  GruStepResult out;
  out.cache.x = x;
  out.cache.h_prev = h_prev;
  out.cache.z.resize(H);
  out.cache.r.resize(H);
  out.cache.candidate.resize(H);
  out.h_next.resize(H);
  const Vector proj = params.input_weights * x + params.bias;
  gru_step(params, proj, h_prev, out.cache.z, out.cache.r, out.cache.candidate, out.h_next);
  return out;
}

GruStepGrad gru_cell_backward(const GruCellParams& params, const GruStepCache& c,
                              const Vector& dh_next, GruCellParams& grads) {
  const auto H = params.hidden_dim();
  require(dh_next.size() == H && c.h_prev.size() == H && c.x.size() == params.input_dim(),
          "GRU backward: cache does not match parameters");
  const Vector one = Vector::Ones(H);
  const Vector dz = dh_next.cwiseProduct(c.candidate - c.h_prev);
  const Vector dcand = dh_next.cwiseProduct(c.z);
  Vector dh_prev = dh_next.cwiseProduct(one - c.z);

  Vector da(3 * H);
  da.segment(2 * H, H) = dcand.cwiseProduct(one - c.candidate.cwiseAbs2());
  const Vector gated = c.r.cwiseProduct(c.h_prev);
  const Vector dgated = params.u_h().transpose() * da.segment(2 * H, H);
  const Vector dr = dgated.cwiseProduct(c.h_prev);
  dh_prev += dgated.cwiseProduct(c.r);
  da.segment(0, H) = dz.cwiseProduct(c.z).cwiseProduct(one - c.z);
  da.segment(H, H) = dr.cwiseProduct(c.r).cwiseProduct(one - c.r);
  dh_prev += params.hidden_weights.topRows(2 * H).transpose() * da.head(2 * H);

  grads.input_weights.noalias() += da * c.x.transpose();
  grads.hidden_weights.topRows(2 * H).noalias() += da.head(2 * H) * c.h_prev.transpose();
  grads.hidden_weights.bottomRows(H).noalias() += da.tail(H) * gated.transpose();
  grads.bias += da;

  return {params.input_weights.transpose() * da, dh_prev};
}

GruSequenceResult gru_sequence_forward(const GruCellParams& params, const Sequence& inputs,
                                       const Vector& h0) {
  const auto T = inputs.rows();
  const auto H = params.hidden_dim();
  require(T >= 1, "GRU sequence must have at least one step");
  require(inputs.cols() == params.input_dim(),
          "GRU sequence input is " + shape(inputs) + ", expected Tx" + std::to_string(params.input_dim()));
  require(h0.size() == H, "GRU initial state has wrong length");

  GruSequenceResult out;
  auto& c = out.cache;
  c.inputs = inputs;
  c.h_prev.resize(T, H);
  c.z.resize(T, H);
  c.r.resize(T, H);
  c.candidate.resize(T, H);
  out.hidden.resize(T, H);

  Sequence proj = inputs * params.input_weights.transpose();
  proj.rowwise() += params.bias.transpose();

  Vector h = h0;
  for (Eigen::Index t = 0; t < T; ++t) {
    c.h_prev.row(t) = h.transpose();
    gru_step(params, proj.row(t), h, c.z.row(t), c.r.row(t), c.candidate.row(t), out.hidden.row(t));
    h = out.hidden.row(t).transpose();
  }
  out.final_state = h;
  return out;
}

GruSequenceGrad gru_sequence_backward(const GruCellParams& params, const GruSequenceCache& c,
                                      const Sequence& d_hidden, GruCellParams& grads) {
  const auto T = c.inputs.rows();
  const auto H = params.hidden_dim();
  require(d_hidden.rows() == T && d_hidden.cols() == H,
          "GRU backward: upstream gradient is " + shape(d_hidden) + ", expected " +
              std::to_string(T) + "x" + std::to_string(H));
  require(c.h_prev.rows() == T && c.h_prev.cols() == H, "GRU backward: cache does not match parameters");

  // Pre-activation gradients for all gates, one row per step.
  Sequence da(T, 3 * H);
  Sequence gated(T, H);
  Vector dh = Vector::Zero(H);
  const auto u_zr = params.hidden_weights.topRows(2 * H);
  const auto u_h = params.u_h();

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    dh += d_hidden.row(t).transpose();
    const auto z = c.z.row(t).transpose();
    const auto r = c.r.row(t).transpose();
    const auto cand = c.candidate.row(t).transpose();
    const auto hp = c.h_prev.row(t).transpose();

    Vector dh_prev(H);
    for (Eigen::Index j = 0; j < H; ++j) {
      dh_prev(j) = dh(j) * (1.0 - z(j));
      da(t, 2 * H + j) = dh(j) * z(j) * (1.0 - cand(j) * cand(j));
    }
    const Vector dgated = u_h.transpose() * da.row(t).segment(2 * H, H).transpose();
    for (Eigen::Index j = 0; j < H; ++j) {
      gated(t, j) = r(j) * hp(j);
      const double dz = dh(j) * (cand(j) - hp(j));
      const double dr = dgated(j) * hp(j);
      dh_prev(j) += dgated(j) * r(j);
      da(t, j) = dz * z(j) * (1.0 - z(j));
      da(t, H + j) = dr * r(j) * (1.0 - r(j));
    }
    dh_prev.noalias() += u_zr.transpose() * da.row(t).head(2 * H).transpose();
    dh = dh_prev;
  }

  grads.input_weights.noalias() += da.transpose() * c.inputs;
  grads.hidden_weights.topRows(2 * H).noalias() += da.leftCols(2 * H).transpose() * c.h_prev;
  grads.hidden_weights.bottomRows(H).noalias() += da.rightCols(H).transpose() * gated;
  grads.bias += da.colwise().sum().transpose();

  return {da * params.input_weights, dh};
}

Sequence reverse_rows(const Sequence& seq) { return seq.colwise().reverse(); }

BidirectionalResult bidirectional_encode(const GruCellParams& fwd, const GruCellParams& bwd,
                                         const Sequence& inputs) {
  const auto H = fwd.hidden_dim();
  require(bwd.hidden_dim() == H, "bidirectional encoder: forward H=" + std::to_string(H) +
                                     " but backward H=" + std::to_string(bwd.hidden_dim()));
  require(bwd.input_dim() == fwd.input_dim(), "bidirectional encoder: input widths differ");
  auto f = gru_sequence_forward(fwd, inputs, Vector::Zero(H));
  auto b = gru_sequence_forward(bwd, reverse_rows(inputs), Vector::Zero(H));
  BidirectionalResult out;
  out.state.resize(2 * H);
  out.state << f.final_state, b.final_state;
  out.forward_cache = std::move(f.cache);
  out.backward_cache = std::move(b.cache);
  return out;
}

Sequence bidirectional_encode_backward(const GruCellParams& fwd, const GruCellParams& bwd,
                                       const BidirectionalResult& result, const Vector& d_state,
                                       GruCellParams& fwd_grads, GruCellParams& bwd_grads) {
  const auto H = fwd.hidden_dim();
  const auto T = result.forward_cache.inputs.rows();
  require(d_state.size() == 2 * H, "bidirectional encoder: state gradient has wrong length");
  Sequence dh = Sequence::Zero(T, H);
  dh.row(T - 1) = d_state.head(H).transpose();
  auto gf = gru_sequence_backward(fwd, result.forward_cache, dh, fwd_grads);
  dh.row(T - 1) = d_state.tail(H).transpose();
  auto gb = gru_sequence_backward(bwd, result.backward_cache, dh, bwd_grads);
  return gf.d_inputs + reverse_rows(gb.d_inputs);
}

Sequence repeat_vector(const Vector& state, Eigen::Index n) {
  require(n >= 1, "repeat_vector: n must be >= 1, got " + std::to_string(n));
  return state.transpose().replicate(n, 1);
}

Vector repeat_vector_backward(const Sequence& upstream) {
  return upstream.colwise().sum().transpose();
}

AffineParams AffineParams::zeros(Eigen::Index in_dim, Eigen::Index out_dim, Activation act) {
  require(in_dim >= 1 && out_dim >= 1, "affine dimensions must be >= 1");
  return {Matrix::Zero(out_dim, in_dim), Vector::Zero(out_dim), act};
}

AffineParams AffineParams::random(Eigen::Index in_dim, Eigen::Index out_dim, Activation act, Rng& rng) {
  auto p = zeros(in_dim, out_dim, act);
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
  return p;
}

void AffineParams::validate() const {
  require(weight.rows() >= 1 && weight.cols() >= 1, "affine dimensions must be >= 1");
  require(bias.size() == weight.rows(), "affine bias length does not match weight rows");
  require(weight.allFinite() && bias.allFinite(), "affine parameters must be finite");
}

void AffineParams::set_zero() {
  weight.setZero();
  bias.setZero();
}

AffineResult time_distributed_affine(const AffineParams& params, const Sequence& inputs) {
  require(inputs.cols() == params.input_dim(),
          "affine input is " + shape(inputs) + ", expected Tx" + std::to_string(params.input_dim()));
  AffineResult out;
  out.preactivation = inputs * params.weight.transpose();
  out.preactivation.rowwise() += params.bias.transpose();
  if (params.activation == Activation::relu) {
    out.output = out.preactivation.cwiseMax(0.0);
  } else {
    out.output = out.preactivation;
  }
  return out;
}

Sequence time_distributed_affine_backward(const AffineParams& params, const Sequence& inputs,
                                          const AffineResult& result, const Sequence& d_output,
                                          AffineParams& grads) {
  require(d_output.rows() == inputs.rows() && d_output.cols() == params.output_dim(),
          "affine backward: upstream gradient is " + shape(d_output));
  Sequence d_pre = d_output;
  if (params.activation == Activation::relu) {
    d_pre = (result.preactivation.array() > 0.0).select(d_output, 0.0);
  }
  grads.weight.noalias() += d_pre.transpose() * inputs;
  grads.bias += d_pre.colwise().sum().transpose();
  return d_pre * params.weight;
}

LossResult mse_loss(const Sequence& pred, const Sequence& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "mse_loss: prediction " + shape(pred) + " vs target " + shape(target));
  require(pred.size() > 0, "mse_loss: empty input");
  const double n = static_cast<double>(pred.size());
  const Sequence diff = pred - target;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

AdamState::AdamState(std::size_t parameter_count, AdamConfig cfg)
    : config(cfg), m(parameter_count, 0.0), v(parameter_count, 0.0) {}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  require(params.size() == grads.size(), "adam_step: parameter and gradient sizes differ");
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          "adam_step: optimizer state does not match parameters");
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace aed::nn
