#include "hbo/actor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hbo/error.hpp"
#include "hbo/mixture.hpp"

namespace hbo {

namespace {

struct Layout {
  std::size_t f, h, u;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return f * h; }
  std::size_t w2() const { return f * h + h; }
  std::size_t b2() const { return f * h + 2 * h; }
  std::size_t total() const { return f * h + 2 * h + u; }
};

Layout layout_of(const UnitFeatures& features, const ActorConfig& config) {
  return {features.dim, static_cast<std::size_t>(config.hidden_dim), features.unit_count};
}

}  // namespace

UnitFeatures one_hot_features(std::size_t unit_count) {
  UnitFeatures f{unit_count, unit_count, std::vector<double>(unit_count * unit_count, 0.0)};
  for (std::size_t u = 0; u < unit_count; ++u) f.values[u * unit_count + u] = 1.0;
  return f;
}

ActorNetwork::ActorNetwork(UnitFeatures features, const ActorConfig& config, std::uint64_t seed)
    : features_(std::move(features)), config_(config) {
  require(features_.unit_count >= 1, ErrorKind::InvalidConfig, "an actor needs at least one unit");
  require(features_.dim >= 1 && features_.values.size() == features_.unit_count * features_.dim,
          ErrorKind::InvalidConfig, "unit feature table has the wrong size");
  require(config_.hidden_dim >= 1, ErrorKind::InvalidConfig, "actor hidden_dim must be >= 1");
  require(config_.learning_rate > 0.0, ErrorKind::InvalidConfig, "actor learning rate must be > 0");
  const Layout l = layout_of(features_, config_);
  params_.assign(l.total(), 0.0);
  Rng rng = make_rng(seed, "actor-init");
  for (std::size_t i = 0; i < l.f * l.h; ++i) params_[l.w1() + i] = config_.init_scale * standard_normal(rng);
  for (std::size_t j = 0; j < l.h; ++j) params_[l.w2() + j] = config_.init_scale * standard_normal(rng);
}

std::span<double> ActorNetwork::unit_bias() noexcept {
  const Layout l = layout_of(features_, config_);
  return std::span<double>(params_).subspan(l.b2(), l.u);
}

std::vector<double> ActorNetwork::hidden_activations() const {
  const Layout l = layout_of(features_, config_);
  std::vector<double> act(l.u * l.h);
  for (std::size_t u = 0; u < l.u; ++u) {
    for (std::size_t j = 0; j < l.h; ++j) {
      double a = params_[l.b1() + j];
      for (std::size_t k = 0; k < l.f; ++k) a += features_.values[u * l.f + k] * params_[l.w1() + k * l.h + j];
      act[u * l.h + j] = std::tanh(a);
    }
  }
  return act;
}

std::vector<double> ActorNetwork::logits() const {
  const Layout l = layout_of(features_, config_);
  const auto act = hidden_activations();
  std::vector<double> z(l.u);
  for (std::size_t u = 0; u < l.u; ++u) {
    double s = params_[l.b2() + u];
    for (std::size_t j = 0; j < l.h; ++j) s += params_[l.w2() + j] * act[u * l.h + j];
    z[u] = s;
  }
  return z;
}

std::vector<double> ActorNetwork::backprop_logits(std::span<const double> d_logits) const {
  const Layout l = layout_of(features_, config_);
  const auto act = hidden_activations();
  std::vector<double> grad(l.total(), 0.0);
  for (std::size_t u = 0; u < l.u; ++u) {
    const double dz = d_logits[u];
    if (dz == 0.0) continue;
    grad[l.b2() + u] += dz;
    for (std::size_t j = 0; j < l.h; ++j) {
      const double a = act[u * l.h + j];
      grad[l.w2() + j] += dz * a;
      const double d_pre = dz * params_[l.w2() + j] * (1.0 - a * a);
      grad[l.b1() + j] += d_pre;
      for (std::size_t k = 0; k < l.f; ++k) grad[l.w1() + k * l.h + j] += features_.values[u * l.f + k] * d_pre;
    }
  }
  return grad;
}

ActorNetwork init_actor_from_prior(std::span<const std::size_t> sizes, double tau, std::uint64_t seed,
                                   const ActorConfig& config) {
  const auto prior = temperature_distribution(sizes, tau);
  ActorNetwork actor(one_hot_features(sizes.size()), config, seed);
  // Zero bias first so logits() returns the body output alone.
  auto bias = actor.unit_bias();
  std::fill(bias.begin(), bias.end(), 0.0);
  const auto body = actor.logits();
  for (std::size_t u = 0; u < bias.size(); ++u) bias[u] = std::log(prior[u]) - body[u];
  return actor;
}

SamplingDistribution softmax_distribution(std::span<const double> logits) {
  SamplingDistribution d;
  d.probabilities.resize(logits.size());
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double norm = 0.0;
  for (std::size_t u = 0; u < logits.size(); ++u) {
    d.probabilities[u] = std::exp(logits[u] - max_logit);
    norm += d.probabilities[u];
  }
  for (double& p : d.probabilities) p /= norm;
  return d;
}

SamplingDistribution actor_distribution(const ActorNetwork& actor) { return softmax_distribution(actor.logits()); }

std::size_t sample_index(const SamplingDistribution& dist, Rng& rng) {
  require(dist.size() >= 1, ErrorKind::InvalidIndex, "cannot sample from an empty distribution");
  if (dist.size() == 1) return 0;
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (dist[i] > 0.0) last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

std::vector<double> log_prob_gradient(const ActorNetwork& actor, std::size_t unit) {
  require(unit < actor.unit_count(), ErrorKind::InvalidIndex, "unit index out of range");
  // d log p(unit) / d z = onehot(unit) - p
  const auto p = actor_distribution(actor);
  std::vector<double> dz(actor.unit_count());
  for (std::size_t u = 0; u < dz.size(); ++u) dz[u] = (u == unit ? 1.0 : 0.0) - p[u];
  return actor.backprop_logits(dz);
}

void reinforce_update(ActorNetwork& actor, std::span<const double> rewards) {
  require(rewards.size() == actor.unit_count(), ErrorKind::InvalidReward, "one reward per unit is required");
  for (double r : rewards) require(std::isfinite(r), ErrorKind::InvalidReward, "reward is not finite");

  std::vector<double> r(rewards.begin(), rewards.end());
  if (actor.config().center_rewards) {
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    for (double& x : r) x -= mean;
  }
  // sum_u R(u) (onehot(u) - p) = R - p * sum(R)
  const auto p = actor_distribution(actor);
  const double total = std::accumulate(r.begin(), r.end(), 0.0);
  std::vector<double> dz(r.size());
  for (std::size_t u = 0; u < dz.size(); ++u) dz[u] = r[u] - p[u] * total;
  const auto grad = actor.backprop_logits(dz);
  const double lr = actor.config().learning_rate;
  for (std::size_t i = 0; i < grad.size(); ++i) actor.params_[i] += lr * grad[i];
}

nlohmann::ordered_json actor_to_json(const ActorNetwork& actor) {
  nlohmann::ordered_json j;
  j["units"] = actor.unit_count();
  j["feature_dim"] = actor.features().dim;
  j["hidden_dim"] = actor.config().hidden_dim;
  j["learning_rate"] = actor.config().learning_rate;
  j["center_rewards"] = actor.config().center_rewards;
  j["features"] = actor.features().values;
  j["parameters"] = std::vector<double>(actor.parameters().begin(), actor.parameters().end());
  j["distribution"] = actor_distribution(actor).probabilities;
  return j;
}

ActorNetwork actor_from_json(const nlohmann::json& j) {
  try {
    UnitFeatures f{j.at("units").get<std::size_t>(), j.at("feature_dim").get<std::size_t>(),
                   j.at("features").get<std::vector<double>>()};
    ActorConfig cfg;
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.center_rewards = j.at("center_rewards").get<bool>();
    ActorNetwork actor(std::move(f), cfg, 0);
    const auto params = j.at("parameters").get<std::vector<double>>();
    require(params.size() == actor.parameters().size(), ErrorKind::Io, "actor parameter count does not match");
    std::copy(params.begin(), params.end(), actor.parameters().begin());
    return actor;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed actor state: ") + e.what());
  }
}

}  // namespace hbo
