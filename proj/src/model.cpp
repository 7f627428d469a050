// SPDX-License-Identifier: Apache-2.0
#include "vmclass/model.hpp"

#include <algorithm>
#include <cmath>

#include "vmclass/error.hpp"

namespace vmclass {

void Architecture::validate() const {
  if (input_len == 0 || conv_filters == 0 || kernel == 0 || pool == 0 || hidden == 0 ||
      classes < 2)
    throw Error(ErrorCode::Shape, "architecture sizes must be positive (classes >= 2)");
  if (kernel > input_len)
    throw Error(ErrorCode::Shape, "kernel " + std::to_string(kernel) +
                                    " is longer than the input length " +
                                    std::to_string(input_len));
  if (pool > conv_len())
    throw Error(ErrorCode::Shape, "pool window " + std::to_string(pool) +
                                    " exceeds the convolution output length " +
                                    std::to_string(conv_len()));
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw Error(ErrorCode::Shape, "dropout rate must lie in [0,1)");
}

std::size_t Architecture::parameter_count() const {
  const std::size_t conv = conv_filters * (kernel + 1);
  const std::size_t biases_per_gate = double_bias ? 2 : 1;
  const std::size_t gru = 3 * (hidden * (hidden + conv_filters) + biases_per_gate * hidden);
  const std::size_t fc = classes * (hidden + 1);
  return conv + gru + fc;
}

Parameters Parameters::zeros(const Architecture &arch) {
  arch.validate();
  Parameters p;
  p.conv_w = NumericGrid({arch.conv_filters, 1, arch.kernel});
  p.conv_b = NumericGrid({arch.conv_filters});
  p.gru = nn::GruParams::zeros(arch.hidden, arch.conv_filters);
  p.fc_w = NumericGrid({arch.classes, arch.hidden});
  p.fc_b = NumericGrid({arch.classes});
  return p;
}

std::vector<std::pair<std::string_view, NumericGrid *>>
Parameters::tensors(const Architecture &arch) {
  std::vector<std::pair<std::string_view, NumericGrid *>> out = {{"conv.weight", &conv_w},
                                                                 {"conv.bias", &conv_b}};
  for (auto t : gru.tensors(arch.double_bias))
    out.push_back(t);
  out.emplace_back("fc.weight", &fc_w);
  out.emplace_back("fc.bias", &fc_b);
  return out;
}

std::vector<std::pair<std::string_view, const NumericGrid *>>
Parameters::tensors(const Architecture &arch) const {
  std::vector<std::pair<std::string_view, const NumericGrid *>> out;
  for (auto [name, ptr] : const_cast<Parameters *>(this)->tensors(arch))
    out.emplace_back(name, ptr);
  return out;
}

std::size_t Parameters::count(const Architecture &arch) const {
  std::size_t n = 0;
  for (const auto &[name, t] : tensors(arch))
    n += t->size();
  return n;
}

ModelState build_model(const Architecture &arch, std::uint64_t seed) {
  arch.validate();
  ModelState m;
  m.arch = arch;
  m.seed = seed;
  m.params = Parameters::zeros(arch);
  m.adam_m = Parameters::zeros(arch);
  m.adam_v = Parameters::zeros(arch);

  std::mt19937_64 rng(seed);
  auto init = [&rng](NumericGrid &w, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double &v : w.data())
      v = dist(rng);
  };
  const std::size_t gru_cols = arch.hidden + arch.conv_filters;
  init(m.params.conv_w, arch.kernel, arch.conv_filters * arch.kernel);
  init(m.params.gru.w_update, gru_cols, arch.hidden);
  init(m.params.gru.w_reset, gru_cols, arch.hidden);
  init(m.params.gru.w_candidate, gru_cols, arch.hidden);
  init(m.params.fc_w, arch.hidden, arch.classes);
  return m;
}

ForwardPass forward(const ModelState &model, const NumericGrid &features, nn::Mode mode,
                    std::mt19937_64 *rng) {
  const auto &arch = model.arch;
  const auto &p = model.params;
  ForwardPass f;
  f.mode = mode;
  if (features.rank() == 2 && features.dim(1) == arch.input_len) {
    f.input = NumericGrid({features.dim(0), 1, arch.input_len},
                          std::vector<double>(features.data().begin(), features.data().end()));
  } else if (features.rank() == 3 && features.dim(1) == 1 &&
             features.dim(2) == arch.input_len) {
    f.input = features;
  } else {
    throw Error(ErrorCode::Shape, "model expects [batch," + std::to_string(arch.input_len) +
                                    "] features, got " + shape_string(features.shape()));
  }
  if (f.input.dim(0) == 0)
    throw Error(ErrorCode::Shape, "empty batch");

  f.conv_pre = nn::conv1d_forward(f.input, p.conv_w, p.conv_b);
  f.conv_act = nn::relu(f.conv_pre);
  f.pooled = nn::maxpool1d(f.conv_act, arch.pool);
  f.gru = nn::gru_sequence(nn::channels_to_sequence(f.pooled.out), p.gru);
  f.hidden = f.gru.final_state();
  f.logits = nn::fc_forward(f.hidden, p.fc_w, p.fc_b);
  if (mode == nn::Mode::Train) {
    if (rng == nullptr)
      throw Error(ErrorCode::State, "train-mode forward pass needs a random generator");
    f.dropped = nn::dropout(f.logits, arch.dropout_rate, mode, *rng);
  } else {
    std::mt19937_64 unused;
    f.dropped = nn::dropout(f.logits, arch.dropout_rate, mode, unused);
  }
  f.probs = nn::softmax(f.dropped.out);
  return f;
}

double loss(const ForwardPass &pass, std::span<const int> labels) {
  if (pass.empty())
    throw Error(ErrorCode::State, "loss requested before a forward pass");
  return nn::cross_entropy_from_scores(pass.dropped.out, labels);
}

Parameters backward(const ModelState &model, const ForwardPass &pass,
                    std::span<const int> labels) {
  if (pass.empty())
    throw Error(ErrorCode::State, "backward called before forward");
  const auto &p = model.params;
  Parameters g = Parameters::zeros(model.arch);

  const NumericGrid d_scores = nn::softmax_cross_entropy_backward(pass.probs, labels);
  const NumericGrid d_logits = nn::dropout_backward(pass.dropped, d_scores);
  auto fc = nn::fc_backward(pass.hidden, p.fc_w, d_logits);
  g.fc_w = std::move(fc.weight);
  g.fc_b = std::move(fc.bias);

  const NumericGrid d_seq = nn::gru_sequence_backward(pass.gru, fc.input, p.gru, g.gru);
  const NumericGrid d_pooled = nn::sequence_to_channels(d_seq);
  const NumericGrid d_act = nn::maxpool1d_backward(pass.pooled, d_pooled);
  const NumericGrid d_pre = nn::relu_backward(pass.conv_pre, d_act);
  auto conv = nn::conv1d_backward(pass.input, p.conv_w, d_pre);
  g.conv_w = std::move(conv.weight);
  g.conv_b = std::move(conv.bias);
  return g;
}

void adam_step(ModelState &model, const Parameters &grads, double lr,
               const AdamConfig &config) {
  auto params = model.params.tensors(model.arch);
  auto first = model.adam_m.tensors(model.arch);
  auto second = model.adam_v.tensors(model.arch);
  const auto g = grads.tensors(model.arch);
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!g[i].second->same_shape(*params[i].second))
      throw Error(ErrorCode::Shape, "gradient for " + std::string(params[i].first) +
                                      " has shape " + shape_string(g[i].second->shape()));

  ++model.step;
  const double t = static_cast<double>(model.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    NumericGrid &w = *params[i].second;
    NumericGrid &m = *first[i].second;
    NumericGrid &v = *second[i].second;
    const NumericGrid &d = *g[i].second;
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * d[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * d[j] * d[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

std::vector<int> argmax_rows(const NumericGrid &probs) {
  std::vector<int> out(probs.dim(0));
  for (std::size_t b = 0; b < probs.dim(0); ++b) {
    const auto r = probs.row(b);
    std::size_t best = 0;
    for (std::size_t k = 1; k < r.size(); ++k)
      if (r[k] > r[best])
        best = k;
    out[b] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const ModelState &model, const NumericGrid &features) {
  return argmax_rows(forward(model, features, nn::Mode::Eval).probs);
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradientCheckReport gradient_check(const ModelState &model, const NumericGrid &features,
                                   std::span<const int> labels, double eps, nn::Mode mode,
                                   std::uint64_t dropout_seed) {
  auto evaluate = [&](const ModelState &m) {
    std::mt19937_64 rng(dropout_seed);
    return forward(m, features, mode, &rng);
  };
  const Parameters analytic = backward(model, evaluate(model), labels);

  ModelState probe = model;
  auto probe_tensors = probe.params.tensors(probe.arch);
  const auto grad_tensors = analytic.tensors(model.arch);
  GradientCheckReport report;
  for (std::size_t i = 0; i < probe_tensors.size(); ++i) {
    NumericGrid &w = *probe_tensors[i].second;
    const NumericGrid &a = *grad_tensors[i].second;
    GradientCheckEntry entry{std::string(probe_tensors[i].first), w.size(), 0.0, 0.0};
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double original = w[j];
      w[j] = original + eps;
      const double up = loss(evaluate(probe), labels);
      w[j] = original - eps;
      const double down = loss(evaluate(probe), labels);
      w[j] = original;
      const double numeric = (up - down) / (2.0 * eps);
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(a[j] - numeric));
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(a[j], numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

} // namespace vmclass
