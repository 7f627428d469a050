// SPDX-License-Identifier: Apache-2.0
#include "vmclass/layers.hpp"

#include <algorithm>
#include <cmath>

#include "vmclass/error.hpp"

namespace vmclass::nn {

namespace {

double sigmoid(double z) {
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_rank(const NumericGrid &g, std::size_t rank, std::string_view what) {
  if (g.rank() != rank)
    throw Error(ErrorCode::Shape, std::string(what) + ": expected rank " +
                                    std::to_string(rank) + ", got shape " +
                                    shape_string(g.shape()));
}

void require_labels(const NumericGrid &scores, std::span<const int> labels) {
  require_rank(scores, 2, "class scores");
  if (labels.size() != scores.dim(0))
    throw Error(ErrorCode::Shape, "label count " + std::to_string(labels.size()) +
                                    " does not match batch " + std::to_string(scores.dim(0)));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= scores.dim(1))
      throw Error(ErrorCode::Data, "label " + std::to_string(y) + " out of range");
}

// out[b, h] = sum_j w[h, j] * [a | x][b, j]  for a [B,H], x [B,I], w [H,H+I].
// Both bias vectors are added.
void gate_preactivation(const NumericGrid &w, const NumericGrid &a, const NumericGrid &x,
                        const NumericGrid &b_in, const NumericGrid &b_rec,
                        NumericGrid &out) {
  const std::size_t batch = a.dim(0), hidden = w.dim(0), in = x.dim(1);
  const std::size_t cols = hidden + in;
  const double *wp = w.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double *ap = a.data().data() + b * hidden;
    const double *xp = x.data().data() + b * in;
    double *op = out.data().data() + b * hidden;
    for (std::size_t h = 0; h < hidden; ++h) {
      const double *wr = wp + h * cols;
      double acc = b_in[h] + b_rec[h];
      for (std::size_t j = 0; j < hidden; ++j)
        acc += wr[j] * ap[j];
      for (std::size_t j = 0; j < in; ++j)
        acc += wr[hidden + j] * xp[j];
      op[h] = acc;
    }
  }
}

// Backward of gate_preactivation: accumulates into dw, db_in, db_rec, da, dx.
void gate_backward(const NumericGrid &w, const NumericGrid &a, const NumericGrid &x,
                   const NumericGrid &dpre, NumericGrid &dw, NumericGrid &db_in,
                   NumericGrid &db_rec, NumericGrid &da, NumericGrid &dx) {
  const std::size_t batch = a.dim(0), hidden = w.dim(0), in = x.dim(1);
  const std::size_t cols = hidden + in;
  const double *wp = w.data().data();
  double *dwp = dw.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double *ap = a.data().data() + b * hidden;
    const double *xp = x.data().data() + b * in;
    const double *gp = dpre.data().data() + b * hidden;
    double *dap = da.data().data() + b * hidden;
    double *dxp = dx.data().data() + b * in;
    for (std::size_t h = 0; h < hidden; ++h) {
      const double g = gp[h];
      if (g == 0.0)
        continue;
      db_in[h] += g;
      db_rec[h] += g;
      const double *wr = wp + h * cols;
      double *dwr = dwp + h * cols;
      for (std::size_t j = 0; j < hidden; ++j) {
        dwr[j] += g * ap[j];
        dap[j] += g * wr[j];
      }
      for (std::size_t j = 0; j < in; ++j) {
        dwr[hidden + j] += g * xp[j];
        dxp[j] += g * wr[hidden + j];
      }
    }
  }
}

} // namespace

NumericGrid conv1d_forward(const NumericGrid &x, const NumericGrid &weight,
                           const NumericGrid &bias) {
  require_rank(x, 3, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  const std::size_t filters = weight.dim(0), kernel = weight.dim(2);
  if (weight.dim(1) != channels)
    throw Error(ErrorCode::Shape, "conv1d: weight expects " + std::to_string(weight.dim(1)) +
                                    " channels, input has " + std::to_string(channels));
  if (kernel > len)
    throw Error(ErrorCode::Shape, "conv1d: kernel " + std::to_string(kernel) +
                                    " longer than input " + std::to_string(len));
  require_shape(bias, {filters}, "conv1d bias");
  const std::size_t out_len = len - kernel + 1;
  NumericGrid out({batch, filters, out_len});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < filters; ++f)
      for (std::size_t t = 0; t < out_len; ++t) {
        double acc = bias[f];
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t k = 0; k < kernel; ++k)
            acc += weight.at(f, c, k) * x.at(b, c, t + k);
        out.at(b, f, t) = acc;
      }
  return out;
}

Conv1dGrads conv1d_backward(const NumericGrid &x, const NumericGrid &weight,
                            const NumericGrid &grad_out) {
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t filters = weight.dim(0), kernel = weight.dim(2);
  const std::size_t out_len = x.dim(2) - kernel + 1;
  require_shape(grad_out, {batch, filters, out_len}, "conv1d output gradient");
  Conv1dGrads g{NumericGrid::zeros_like(x), NumericGrid::zeros_like(weight),
                NumericGrid({filters})};
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t f = 0; f < filters; ++f)
      for (std::size_t t = 0; t < out_len; ++t) {
        const double d = grad_out.at(b, f, t);
        g.bias[f] += d;
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t k = 0; k < kernel; ++k) {
            g.weight.at(f, c, k) += d * x.at(b, c, t + k);
            g.input.at(b, c, t + k) += d * weight.at(f, c, k);
          }
      }
  return g;
}

NumericGrid relu(const NumericGrid &x) {
  NumericGrid out = x;
  for (double &v : out.data())
    v = v > 0.0 ? v : 0.0;
  return out;
}

NumericGrid relu_backward(const NumericGrid &pre_activation, const NumericGrid &grad_out) {
  if (!pre_activation.same_shape(grad_out))
    throw Error(ErrorCode::Shape, "relu gradient shape mismatch");
  NumericGrid out = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(pre_activation[i] > 0.0))
      out[i] = 0.0;
  return out;
}

Pooled maxpool1d(const NumericGrid &x, std::size_t window) {
  require_rank(x, 3, "maxpool input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (window == 0 || len < window)
    throw Error(ErrorCode::Shape, "maxpool: window " + std::to_string(window) +
                                    " does not fit length " + std::to_string(len));
  const std::size_t out_len = len / window;
  Pooled p{NumericGrid({batch, channels, out_len}), {}, x.shape()};
  p.argmax.resize(p.out.size());
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (b * channels + c) * len;
      for (std::size_t t = 0; t < out_len; ++t, ++o) {
        std::size_t best = base + t * window;
        for (std::size_t k = 1; k < window; ++k)
          if (x[base + t * window + k] > x[best])
            best = base + t * window + k;
        p.out[o] = x[best];
        p.argmax[o] = best;
      }
    }
  return p;
}

NumericGrid maxpool1d_backward(const Pooled &pooled, const NumericGrid &grad_out) {
  if (!grad_out.same_shape(pooled.out))
    throw Error(ErrorCode::Shape, "maxpool gradient shape mismatch");
  NumericGrid dx(pooled.input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o)
    dx[pooled.argmax[o]] += grad_out[o];
  return dx;
}

NumericGrid channels_to_sequence(const NumericGrid &x) {
  require_rank(x, 3, "channel grid");
  const std::size_t batch = x.dim(0), channels = x.dim(1), steps = x.dim(2);
  NumericGrid out({batch, steps, channels});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < steps; ++t)
        out.at(b, t, c) = x.at(b, c, t);
  return out;
}

NumericGrid sequence_to_channels(const NumericGrid &x) {
  require_rank(x, 3, "sequence grid");
  const std::size_t batch = x.dim(0), steps = x.dim(1), channels = x.dim(2);
  NumericGrid out({batch, channels, steps});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t c = 0; c < channels; ++c)
        out.at(b, c, t) = x.at(b, t, c);
  return out;
}

GruParams GruParams::zeros(std::size_t hidden, std::size_t input) {
  GruParams p;
  for (NumericGrid *w : {&p.w_update, &p.w_reset, &p.w_candidate})
    *w = NumericGrid({hidden, hidden + input});
  for (NumericGrid *b : {&p.b_update_in, &p.b_update_rec, &p.b_reset_in,
                         &p.b_reset_rec, &p.b_candidate_in, &p.b_candidate_rec})
    *b = NumericGrid({hidden});
  return p;
}

std::vector<std::pair<std::string_view, NumericGrid *>>
GruParams::tensors(bool double_bias) {
  std::vector<std::pair<std::string_view, NumericGrid *>> out = {
    {"gru.w_update", &w_update},       {"gru.w_reset", &w_reset},
    {"gru.w_candidate", &w_candidate}, {"gru.b_update_in", &b_update_in},
    {"gru.b_reset_in", &b_reset_in},   {"gru.b_candidate_in", &b_candidate_in},
  };
  if (double_bias)
    out.insert(out.end(), {{"gru.b_update_rec", &b_update_rec},
                           {"gru.b_reset_rec", &b_reset_rec},
                           {"gru.b_candidate_rec", &b_candidate_rec}});
  return out;
}

std::vector<std::pair<std::string_view, const NumericGrid *>>
GruParams::tensors(bool double_bias) const {
  std::vector<std::pair<std::string_view, const NumericGrid *>> out;
  for (auto [name, ptr] : const_cast<GruParams *>(this)->tensors(double_bias))
    out.emplace_back(name, ptr);
  return out;
}

GruStep gru_cell(const NumericGrid &x_t, const NumericGrid &c_prev,
                 const GruParams &params) {
  require_rank(x_t, 2, "gru input");
  const std::size_t batch = x_t.dim(0), hidden = params.hidden();
  require_shape(x_t, {batch, params.input()}, "gru input");
  require_shape(c_prev, {batch, hidden}, "gru previous state");

  GruStep s{x_t, c_prev, NumericGrid({batch, hidden}), NumericGrid({batch, hidden}),
            NumericGrid({batch, hidden}), NumericGrid({batch, hidden})};
  gate_preactivation(params.w_update, c_prev, x_t, params.b_update_in,
                     params.b_update_rec, s.update);
  gate_preactivation(params.w_reset, c_prev, x_t, params.b_reset_in, params.b_reset_rec,
                     s.reset);
  for (double &v : s.update.data())
    v = sigmoid(v);
  for (double &v : s.reset.data())
    v = sigmoid(v);

  NumericGrid gated = c_prev;
  for (std::size_t i = 0; i < gated.size(); ++i)
    gated[i] *= s.reset[i];
  gate_preactivation(params.w_candidate, gated, x_t, params.b_candidate_in,
                     params.b_candidate_rec, s.candidate);
  for (double &v : s.candidate.data())
    v = std::tanh(v);

  for (std::size_t i = 0; i < s.c.size(); ++i)
    s.c[i] = (1.0 - s.update[i]) * c_prev[i] + s.update[i] * s.candidate[i];
  return s;
}

GruCellGrads gru_cell_backward(const GruStep &step, const NumericGrid &grad_c,
                               const GruParams &params, GruParams &grads) {
  if (!grad_c.same_shape(step.c))
    throw Error(ErrorCode::Shape, "gru state gradient shape mismatch");
  const std::size_t n = step.c.size();
  GruCellGrads out{NumericGrid::zeros_like(step.x), NumericGrid::zeros_like(step.c_prev)};

  NumericGrid d_update_pre = NumericGrid::zeros_like(step.c);
  NumericGrid d_candidate_pre = NumericGrid::zeros_like(step.c);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = step.update[i], cand = step.candidate[i];
    out.c_prev[i] = grad_c[i] * (1.0 - u);
    d_update_pre[i] = grad_c[i] * (cand - step.c_prev[i]) * u * (1.0 - u);
    d_candidate_pre[i] = grad_c[i] * u * (1.0 - cand * cand);
  }

  NumericGrid gated = step.c_prev;
  for (std::size_t i = 0; i < n; ++i)
    gated[i] *= step.reset[i];
  NumericGrid d_gated = NumericGrid::zeros_like(step.c);
  gate_backward(params.w_candidate, gated, step.x, d_candidate_pre, grads.w_candidate,
                grads.b_candidate_in, grads.b_candidate_rec, d_gated, out.x);

  NumericGrid d_reset_pre = NumericGrid::zeros_like(step.c);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = step.reset[i];
    out.c_prev[i] += d_gated[i] * r;
    d_reset_pre[i] = d_gated[i] * step.c_prev[i] * r * (1.0 - r);
  }

  gate_backward(params.w_update, step.c_prev, step.x, d_update_pre, grads.w_update,
                grads.b_update_in, grads.b_update_rec, out.c_prev, out.x);
  gate_backward(params.w_reset, step.c_prev, step.x, d_reset_pre, grads.w_reset,
                grads.b_reset_in, grads.b_reset_rec, out.c_prev, out.x);
  return out;
}

GruTrace gru_sequence(const NumericGrid &x, const GruParams &params, const NumericGrid *c0) {
  require_rank(x, 3, "gru sequence");
  const std::size_t batch = x.dim(0), steps = x.dim(1), in = x.dim(2);
  if (steps == 0)
    throw Error(ErrorCode::Shape, "gru sequence must have at least one step");
  if (in != params.input())
    throw Error(ErrorCode::Shape, "gru sequence: feature size " + std::to_string(in) +
                                    " but cell expects " + std::to_string(params.input()));
  NumericGrid state = c0 ? *c0 : NumericGrid({batch, params.hidden()});
  GruTrace trace;
  trace.steps.reserve(steps);
  NumericGrid x_t({batch, in});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < in; ++j)
        x_t.at(b, j) = x.at(b, t, j);
    trace.steps.push_back(gru_cell(x_t, state, params));
    state = trace.steps.back().c;
  }
  return trace;
}

NumericGrid gru_sequence_backward(const GruTrace &trace, const NumericGrid &grad_final,
                                  const GruParams &params, GruParams &grads) {
  if (trace.steps.empty())
    throw Error(ErrorCode::State, "gru backward called without a forward trace");
  const std::size_t steps = trace.steps.size();
  const std::size_t batch = grad_final.dim(0), in = params.input();
  NumericGrid dx({batch, steps, in});
  NumericGrid grad_c = grad_final;
  for (std::size_t t = steps; t-- > 0;) {
    auto g = gru_cell_backward(trace.steps[t], grad_c, params, grads);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < in; ++j)
        dx.at(b, t, j) = g.x.at(b, j);
    grad_c = std::move(g.c_prev);
  }
  return dx;
}

NumericGrid fc_forward(const NumericGrid &h, const NumericGrid &weight,
                       const NumericGrid &bias) {
  require_rank(h, 2, "fc input");
  require_rank(weight, 2, "fc weight");
  const std::size_t batch = h.dim(0), in = h.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in)
    throw Error(ErrorCode::Shape, "fc: weight expects " + std::to_string(weight.dim(1)) +
                                    " inputs, got " + std::to_string(in));
  require_shape(bias, {out_dim}, "fc bias");
  NumericGrid out({batch, out_dim});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_dim; ++o) {
      double acc = bias[o];
      for (std::size_t j = 0; j < in; ++j)
        acc += weight.at(o, j) * h.at(b, j);
      out.at(b, o) = acc;
    }
  return out;
}

FcGrads fc_backward(const NumericGrid &h, const NumericGrid &weight,
                    const NumericGrid &grad_out) {
  const std::size_t batch = h.dim(0), in = h.dim(1), out_dim = weight.dim(0);
  require_shape(grad_out, {batch, out_dim}, "fc output gradient");
  FcGrads g{NumericGrid::zeros_like(h), NumericGrid::zeros_like(weight),
            NumericGrid({out_dim})};
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double d = grad_out.at(b, o);
      g.bias[o] += d;
      for (std::size_t j = 0; j < in; ++j) {
        g.weight.at(o, j) += d * h.at(b, j);
        g.input.at(b, j) += d * weight.at(o, j);
      }
    }
  return g;
}

Dropped dropout(const NumericGrid &x, double rate, Mode mode, std::mt19937_64 &rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw Error(ErrorCode::Usage, "dropout rate must lie in [0,1)");
  Dropped d{x, NumericGrid(x.shape(), 1.0)};
  if (mode == Mode::Eval || rate == 0.0)
    return d;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    d.mask[i] = unit(rng) < rate ? 0.0 : keep_scale;
    d.out[i] = x[i] * d.mask[i];
  }
  return d;
}

NumericGrid dropout_backward(const Dropped &dropped, const NumericGrid &grad_out) {
  if (!grad_out.same_shape(dropped.mask))
    throw Error(ErrorCode::Shape, "dropout gradient shape mismatch");
  NumericGrid out = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] *= dropped.mask[i];
  return out;
}

NumericGrid log_softmax(const NumericGrid &scores) {
  require_rank(scores, 2, "softmax input");
  NumericGrid out = scores;
  for (std::size_t b = 0; b < scores.dim(0); ++b) {
    auto r = out.row(b);
    const double m = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r)
      sum += std::exp(v - m);
    const double log_norm = m + std::log(sum);
    for (double &v : r)
      v -= log_norm;
  }
  return out;
}

NumericGrid softmax(const NumericGrid &scores) {
  require_rank(scores, 2, "softmax input");
  NumericGrid out = scores;
  for (std::size_t b = 0; b < scores.dim(0); ++b) {
    auto r = out.row(b);
    const double m = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double &v : r) {
      v = std::exp(v - m);
      sum += v;
    }
    for (double &v : r)
      v /= sum;
  }
  return out;
}

double cross_entropy(const NumericGrid &probs, std::span<const int> labels) {
  require_labels(probs, labels);
  if (labels.empty())
    return 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b)
    total -= std::log(std::max(probs.at(b, static_cast<std::size_t>(labels[b])), 1e-15));
  return total / static_cast<double>(labels.size());
}

double cross_entropy_from_scores(const NumericGrid &scores, std::span<const int> labels) {
  require_labels(scores, labels);
  if (labels.empty())
    return 0.0;
  const NumericGrid lsm = log_softmax(scores);
  double total = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b)
    total -= lsm.at(b, static_cast<std::size_t>(labels[b]));
  return total / static_cast<double>(labels.size());
}

NumericGrid softmax_cross_entropy_backward(const NumericGrid &probs,
                                           std::span<const int> labels) {
  require_labels(probs, labels);
  NumericGrid g = probs;
  const double inv = 1.0 / static_cast<double>(labels.size());
  for (std::size_t b = 0; b < labels.size(); ++b) {
    g.at(b, static_cast<std::size_t>(labels[b])) -= 1.0;
    for (double &v : g.row(b))
      v *= inv;
  }
  return g;
}

} // namespace vmclass::nn
