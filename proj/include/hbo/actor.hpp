#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "hbo/random.hpp"

namespace hbo {

struct SamplingDistribution {
  std::vector<double> probabilities;

  std::size_t size() const noexcept { return probabilities.size(); }
  double operator[](std::size_t i) const { return probabilities[i]; }
};

/// One feature row per sampling unit.
struct UnitFeatures {
  std::size_t unit_count = 0;
  std::size_t dim = 0;
  std::vector<double> values;  // unit_count x dim, row-major
};

UnitFeatures one_hot_features(std::size_t unit_count);

struct ActorConfig {
  int hidden_dim = 32;
  double learning_rate = 1e-4;
  /// Standard deviation of the initial hidden-layer weights.
  double init_scale = 1e-3;
  /// Subtract the mean reward before the update. Off reproduces the raw
  /// reward-weighted sum.
  bool center_rewards = false;
};

/// Two-layer policy over sampling units. Unit u gets the scalar logit
///
///   z_u = w2 . tanh(W1^T f_u + b1) + b2[u]
///
/// and the sampling distribution is softmax(z). Trainable parameters are
/// flattened as W1 (f x h), b1 (h), w2 (h), b2 (U); the unit features are
/// fixed inputs.
class ActorNetwork {
 public:
  ActorNetwork(UnitFeatures features, const ActorConfig& config, std::uint64_t seed);

  std::size_t unit_count() const noexcept { return features_.unit_count; }
  const ActorConfig& config() const noexcept { return config_; }
  const UnitFeatures& features() const noexcept { return features_; }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> unit_bias() noexcept;

  std::vector<double> logits() const;

 private:
  friend std::vector<double> log_prob_gradient(const ActorNetwork&, std::size_t);
  friend void reinforce_update(ActorNetwork&, std::span<const double>);

  /// Hidden activation for every unit, unit_count x hidden_dim.
  std::vector<double> hidden_activations() const;
  /// Backpropagates per-unit logit gradients into a parameter gradient.
  std::vector<double> backprop_logits(std::span<const double> d_logits) const;

  UnitFeatures features_;
  ActorConfig config_;
  std::vector<double> params_;
};

/// Actor whose initial distribution equals temperature_distribution(sizes,
/// tau): hidden weights are drawn at config.init_scale and each unit's output
/// bias absorbs the body output so that z_u = log q_tau(u) exactly.
ActorNetwork init_actor_from_prior(std::span<const std::size_t> sizes, double tau, std::uint64_t seed,
                                   const ActorConfig& config = {});

SamplingDistribution actor_distribution(const ActorNetwork& actor);
SamplingDistribution softmax_distribution(std::span<const double> logits);

/// Inverse-CDF draw. A single-unit distribution returns 0 without touching
/// the generator.
std::size_t sample_index(const SamplingDistribution& dist, Rng& rng);

/// Gradient of log p(unit) with respect to the trainable parameters.
std::vector<double> log_prob_gradient(const ActorNetwork& actor, std::size_t unit);

/// psi <- psi + lr * sum_u R(u) * grad log p(u), as one accumulated step.
void reinforce_update(ActorNetwork& actor, std::span<const double> rewards);

nlohmann::ordered_json actor_to_json(const ActorNetwork& actor);
ActorNetwork actor_from_json(const nlohmann::json& j);

}  // namespace hbo
