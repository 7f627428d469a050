// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "vmclass/grid.hpp"

/// Forward and backward passes for the classifier layers. Every function is
/// pure: caches are returned by value and handed back to the backward pass.
namespace vmclass::nn {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------- conv1d --

/// Valid (unpadded) cross-correlation.
/// x [B,C,L], weight [F,C,K], bias [F] -> [B,F,L-K+1].
NumericGrid conv1d_forward(const NumericGrid &x, const NumericGrid &weight,
                           const NumericGrid &bias);

struct Conv1dGrads {
  NumericGrid input;
  NumericGrid weight;
  NumericGrid bias;
};

Conv1dGrads conv1d_backward(const NumericGrid &x, const NumericGrid &weight,
                            const NumericGrid &grad_out);

NumericGrid relu(const NumericGrid &x);
NumericGrid relu_backward(const NumericGrid &pre_activation,
                          const NumericGrid &grad_out);

// --------------------------------------------------------------- maxpool --

struct Pooled {
  NumericGrid out;                  // [B,C,L/window]
  std::vector<std::size_t> argmax;  // flat input index per output element
  std::vector<std::size_t> input_shape;
};

/// Non-overlapping windows; a trailing partial window is dropped and ties
/// resolve to the first index.
Pooled maxpool1d(const NumericGrid &x, std::size_t window);
NumericGrid maxpool1d_backward(const Pooled &pooled, const NumericGrid &grad_out);

/// [B,C,T] -> [B,T,C] and back.
NumericGrid channels_to_sequence(const NumericGrid &x);
NumericGrid sequence_to_channels(const NumericGrid &x);

// ------------------------------------------------------------------- gru --

/// Gate weights act on the concatenation [c_prev, x_t]: the first `hidden`
/// columns are recurrent, the remaining `input` columns read the input.
/// Each gate carries an input-side and a recurrent-side bias.
struct GruParams {
  NumericGrid w_update, w_reset, w_candidate; // [H, H+I]
  NumericGrid b_update_in, b_update_rec;      // [H]
  NumericGrid b_reset_in, b_reset_rec;
  NumericGrid b_candidate_in, b_candidate_rec;

  static GruParams zeros(std::size_t hidden, std::size_t input);

  std::size_t hidden() const { return w_update.dim(0); }
  std::size_t input() const { return w_update.dim(1) - w_update.dim(0); }

  /// Named tensors in a fixed order. With `double_bias == false` the
  /// recurrent-side biases are left out (they stay at zero).
  std::vector<std::pair<std::string_view, NumericGrid *>> tensors(bool double_bias);
  std::vector<std::pair<std::string_view, const NumericGrid *>>
  tensors(bool double_bias) const;
};

/// Everything the backward pass needs from one timestep.
struct GruStep {
  NumericGrid x;         // [B,I]
  NumericGrid c_prev;    // [B,H]
  NumericGrid update;    // gate values after the sigmoid
  NumericGrid reset;
  NumericGrid candidate; // after tanh
  NumericGrid c;         // new state
};

GruStep gru_cell(const NumericGrid &x_t, const NumericGrid &c_prev,
                 const GruParams &params);

struct GruCellGrads {
  NumericGrid x;
  NumericGrid c_prev;
};

/// Accumulates parameter gradients into `grads`.
GruCellGrads gru_cell_backward(const GruStep &step, const NumericGrid &grad_c,
                               const GruParams &params, GruParams &grads);

struct GruTrace {
  std::vector<GruStep> steps;
  const NumericGrid &final_state() const { return steps.back().c; }
};

/// Runs the cell left to right over x [B,T,I]; c_0 is zero when omitted.
GruTrace gru_sequence(const NumericGrid &x, const GruParams &params,
                      const NumericGrid *c0 = nullptr);

/// Backpropagation through time from the gradient of the final state.
/// Returns the gradient with respect to x [B,T,I].
NumericGrid gru_sequence_backward(const GruTrace &trace, const NumericGrid &grad_final,
                                  const GruParams &params, GruParams &grads);

// -------------------------------------------------------- fully connected --

/// h [B,H], weight [C,H], bias [C] -> [B,C].
NumericGrid fc_forward(const NumericGrid &h, const NumericGrid &weight,
                       const NumericGrid &bias);

struct FcGrads {
  NumericGrid input;
  NumericGrid weight;
  NumericGrid bias;
};

FcGrads fc_backward(const NumericGrid &h, const NumericGrid &weight,
                    const NumericGrid &grad_out);

// --------------------------------------------------------------- dropout --

struct Dropped {
  NumericGrid out;
  NumericGrid mask; // 0 or 1/(1-rate) per element; all ones in Eval mode
};

/// Inverted dropout. Eval mode (or rate 0) is the identity.
Dropped dropout(const NumericGrid &x, double rate, Mode mode, std::mt19937_64 &rng);
NumericGrid dropout_backward(const Dropped &dropped, const NumericGrid &grad_out);

// ------------------------------------------------------- softmax and loss --

/// Row-wise softmax over [B,K], shifted by the row max.
NumericGrid softmax(const NumericGrid &scores);
NumericGrid log_softmax(const NumericGrid &scores);

/// Mean of -log p[true class], with probabilities clamped at 1e-15.
double cross_entropy(const NumericGrid &probs, std::span<const int> labels);

/// Same loss evaluated through log_softmax on raw scores.
double cross_entropy_from_scores(const NumericGrid &scores, std::span<const int> labels);

/// d(mean loss)/d(scores) = (softmax - onehot) / B.
NumericGrid softmax_cross_entropy_backward(const NumericGrid &probs,
                                           std::span<const int> labels);

} // namespace vmclass::nn
