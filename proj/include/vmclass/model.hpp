// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vmclass/layers.hpp"

namespace vmclass {

/// Conv1D -> ReLU -> MaxPool -> GRU -> FC -> Dropout -> Softmax over a
/// single-channel feature sequence.
struct Architecture {
  std::size_t input_len = 9;
  std::size_t conv_filters = 64;
  std::size_t kernel = 3;
  std::size_t pool = 2;
  std::size_t hidden = 64;
  std::size_t classes = 2;
  double dropout_rate = 0.4;
  /// Separate input-side and recurrent-side bias per GRU gate.
  bool double_bias = true;

  std::size_t conv_len() const { return input_len - kernel + 1; }
  std::size_t pooled_len() const { return conv_len() / pool; }

  /// Throws a Shape error when the layer sizes do not chain.
  void validate() const;

  /// Closed-form trainable parameter count.
  std::size_t parameter_count() const;

  friend bool operator==(const Architecture &, const Architecture &) = default;
};

struct Parameters {
  NumericGrid conv_w; // [F,1,K]
  NumericGrid conv_b; // [F]
  nn::GruParams gru;
  NumericGrid fc_w; // [classes, H]
  NumericGrid fc_b; // [classes]

  static Parameters zeros(const Architecture &arch);

  /// Trainable tensors in checkpoint order.
  std::vector<std::pair<std::string_view, NumericGrid *>> tensors(const Architecture &arch);
  std::vector<std::pair<std::string_view, const NumericGrid *>>
  tensors(const Architecture &arch) const;

  std::size_t count(const Architecture &arch) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ModelState {
  Architecture arch;
  Parameters params;
  Parameters adam_m;
  Parameters adam_v;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

/// Uniform in +-sqrt(6/(fan_in+fan_out)) per weight grid, zero biases.
ModelState build_model(const Architecture &arch, std::uint64_t seed);

/// Intermediates retained for the backward pass.
struct ForwardPass {
  nn::Mode mode = nn::Mode::Eval;
  NumericGrid input;    // [B,1,L]
  NumericGrid conv_pre; // [B,F,L-K+1]
  NumericGrid conv_act;
  nn::Pooled pooled;
  nn::GruTrace gru;
  NumericGrid hidden;   // [B,H]
  NumericGrid logits;   // FC output before dropout
  nn::Dropped dropped;  // scores fed to softmax
  NumericGrid probs;

  bool empty() const noexcept { return gru.steps.empty(); }
};

/// `features` is [B, input_len] (or [B,1,input_len]). The generator is only
/// drawn from in Train mode and may be null in Eval mode.
ForwardPass forward(const ModelState &model, const NumericGrid &features, nn::Mode mode,
                    std::mt19937_64 *rng = nullptr);

/// Mean cross-entropy of the pass, through the log-softmax of its scores.
double loss(const ForwardPass &pass, std::span<const int> labels);

/// Exact gradient of the mean cross-entropy for every trainable tensor.
Parameters backward(const ModelState &model, const ForwardPass &pass,
                    std::span<const int> labels);

/// One bias-corrected Adam update; increments the step counter.
void adam_step(ModelState &model, const Parameters &grads, double lr,
               const AdamConfig &config = {});

/// Argmax class per row in Eval mode; ties resolve to class 0.
std::vector<int> predict(const ModelState &model, const NumericGrid &features);
std::vector<int> argmax_rows(const NumericGrid &probs);

struct GradientCheckEntry {
  std::string tensor;
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double max_rel_error = 0.0;
};

/// Relative error |a-b| / max(|a|, |b|, floor). The floor keeps gradients
/// that are zero up to round-off from dominating the ratio.
double relative_error(double analytic, double numeric, double floor = 1e-8);

/// Compares backward() with central differences on every parameter. Train
/// mode reuses one dropout mask (seeded by `dropout_seed`) for all
/// evaluations so the loss is a smooth function of the parameters.
GradientCheckReport gradient_check(const ModelState &model, const NumericGrid &features,
                                   std::span<const int> labels, double eps = 1e-5,
                                   nn::Mode mode = nn::Mode::Train,
                                   std::uint64_t dropout_seed = 7);

/// Text container with exact hexadecimal floats; loading reproduces the
/// state bit for bit.
void save_checkpoint(const std::filesystem::path &path, const ModelState &model);
ModelState load_checkpoint(const std::filesystem::path &path);

} // namespace vmclass
