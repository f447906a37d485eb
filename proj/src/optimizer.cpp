#include "hbo/optimizer.hpp"

#include <cmath>

#include "hbo/error.hpp"

namespace hbo {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adamw"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adamw") return OptimizerKind::AdamW;
  fail(ErrorKind::InvalidConfig, "unknown optimizer '" + name + "'");
}

void optimizer_step(std::span<double> params, OptimizerState& state, std::span<const double> grads) {
  require(params.size() == grads.size(), ErrorKind::InternalContract, "gradient shape does not match parameters");
  const auto& cfg = state.config;
  ++state.step;

  if (cfg.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * grads[i];
    return;
  }

  if (state.first_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  require(state.first_moment.size() == params.size(), ErrorKind::InternalContract,
          "optimizer state was built for a different parameter count");

  const auto t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[i];
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= cfg.learning_rate * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) + cfg.weight_decay * params[i]);
  }
}

}  // namespace hbo
