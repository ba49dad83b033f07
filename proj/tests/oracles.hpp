#pragma once

// Independent reference implementations used by the tests. Everything here is
// written with scalar loops over plain std::vector so it shares no code path
// with the Eigen implementation under test.

#include <cmath>
#include <functional>
#include <vector>

#include "aed/nn.hpp"
#include "aed/seq2seq.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, Mat[t][j]

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double entry(const aed::nn::Matrix& m, long i, long j) { return m(i, j); }

/// One GRU step by the four textbook equations.
inline Vec gru_step(const aed::nn::GruCellParams& p, const Vec& x, const Vec& h) {
  const long H = p.hidden_dim(), I = p.input_dim();
  Vec z(H), r(H), out(H);
  for (long j = 0; j < H; ++j) {
    double az = p.bias(j), ar = p.bias(H + j);
    for (long k = 0; k < I; ++k) {
      az += entry(p.input_weights, j, k) * x[k];
      ar += entry(p.input_weights, H + j, k) * x[k];
    }
    for (long k = 0; k < H; ++k) {
      az += entry(p.hidden_weights, j, k) * h[k];
      ar += entry(p.hidden_weights, H + j, k) * h[k];
    }
    z[j] = sig(az);
    r[j] = sig(ar);
  }
  for (long j = 0; j < H; ++j) {
    double ah = p.bias(2 * H + j);
    for (long k = 0; k < I; ++k) ah += entry(p.input_weights, 2 * H + j, k) * x[k];
    for (long k = 0; k < H; ++k) ah += entry(p.hidden_weights, 2 * H + j, k) * r[k] * h[k];
    out[j] = (1.0 - z[j]) * h[j] + z[j] * std::tanh(ah);
  }
  return out;
}

inline Mat rows(const aed::nn::Sequence& s) {
  Mat m(static_cast<std::size_t>(s.rows()), Vec(static_cast<std::size_t>(s.cols())));
  for (long t = 0; t < s.rows(); ++t)
    for (long j = 0; j < s.cols(); ++j) m[t][j] = s(t, j);
  return m;
}

/// Hidden states h_1..h_T.
inline Mat gru_sequence(const aed::nn::GruCellParams& p, const Mat& xs, Vec h) {
  Mat out;
  for (const auto& x : xs) {
    h = gru_step(p, x, h);
    out.push_back(h);
  }
  return out;
}

inline Vec bidirectional(const aed::nn::GruCellParams& f, const aed::nn::GruCellParams& b, const Mat& xs) {
  Mat rev(xs.rbegin(), xs.rend());
  Vec out = gru_sequence(f, xs, Vec(f.hidden_dim(), 0.0)).back();
  const Vec back = gru_sequence(b, rev, Vec(b.hidden_dim(), 0.0)).back();
  out.insert(out.end(), back.begin(), back.end());
  return out;
}

inline Mat affine(const aed::nn::AffineParams& p, const Mat& xs) {
  Mat out;
  for (const auto& x : xs) {
    Vec y(static_cast<std::size_t>(p.output_dim()));
    for (long o = 0; o < p.output_dim(); ++o) {
      double a = p.bias(o);
      for (long k = 0; k < p.input_dim(); ++k) a += p.weight(o, k) * x[k];
      y[o] = p.activation == aed::nn::Activation::relu ? std::max(0.0, a) : a;
    }
    out.push_back(y);
  }
  return out;
}

inline Mat seq2seq(const aed::Seq2SeqParams& p, const Mat& xs) {
  Vec state = p.encoder_backward ? bidirectional(p.encoder_forward, *p.encoder_backward, xs)
                                 : gru_sequence(p.encoder_forward, xs, Vec(p.encoder_forward.hidden_dim(), 0.0)).back();
  Mat repeated(static_cast<std::size_t>(p.config.horizon), state);
  Mat h = gru_sequence(p.decoder, repeated, Vec(p.decoder.hidden_dim(), 0.0));
  if (p.head) h = affine(*p.head, h);
  return affine(p.output, h);
}

inline double mse(const Mat& a, const Mat& b) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t j = 0; j < a[t].size(); ++j, ++n) s += (a[t][j] - b[t][j]) * (a[t][j] - b[t][j]);
  return s / static_cast<double>(n);
}

/// Worst relative error between `analytic` and central differences of `loss`
/// over every entry of `params`, counting entries whose denominator exceeds floor.
inline double max_fd_rel_error(std::vector<std::span<double>> params,
                               const std::vector<std::span<const double>>& analytic,
                               const std::function<double()>& loss, double step = 1e-5, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      double& w = params[k][i];
      const double saved = w;
      w = saved + step;
      const double up = loss();
      w = saved - step;
      const double down = loss();
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      const double denom = std::max(std::abs(a), std::abs(numeric));
      if (denom > floor) worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace oracle
