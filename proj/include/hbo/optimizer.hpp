#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hbo/toy_model.hpp"

namespace hbo {

enum class OptimizerKind { Sgd, AdamW };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::AdamW;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled (AdamW) weight decay; ignored by SGD.
  double weight_decay = 0.0;
};

struct OptimizerState {
  OptimizerConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  explicit OptimizerState(const OptimizerConfig& cfg) : config(cfg) {}
};

/// SGD: p -= lr * g.
/// AdamW: bias-corrected Adam moments plus p -= lr * weight_decay * p.
void optimizer_step(std::span<double> params, OptimizerState& state, std::span<const double> grads);

inline void optimizer_step(ToyLanguageModel& model, OptimizerState& state, const ParameterGradients& grads) {
  optimizer_step(model.parameters(), state, grads.values);
}

}  // namespace hbo
