#include "hbo/driver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hbo/error.hpp"
#include "hbo/random.hpp"

namespace hbo {

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Hbo: return "hbo";
    case RunMode::Static: return "static";
    case RunMode::GlobalOnly: return "global-only";
    case RunMode::LocalOnly: return "local-only";
  }
  return "hbo";
}

RunMode run_mode_from_string(const std::string& name) {
  if (name == "hbo") return RunMode::Hbo;
  if (name == "static") return RunMode::Static;
  if (name == "global-only") return RunMode::GlobalOnly;
  if (name == "local-only") return RunMode::LocalOnly;
  fail(ErrorKind::InvalidConfig, "unknown run mode '" + name + "'");
}

void validate(const RunConfig& c) {
  require(c.total_steps >= 1, ErrorKind::InvalidConfig, "run.total_steps must be >= 1");
  require(c.f_global >= 1 && c.f_local >= 1, ErrorKind::InvalidConfig, "actor update frequencies must be >= 1");
  require(c.optimizer.learning_rate > 0.0, ErrorKind::InvalidConfig, "model learning rate must be > 0");
  require(c.gamma_global > 0.0 && c.gamma_local > 0.0, ErrorKind::InvalidConfig, "actor learning rates must be > 0");
  require(c.prior_tau > 0.0, ErrorKind::InvalidConfig, "run.prior_tau must be > 0");
  require(c.static_tau > 0.0, ErrorKind::InvalidConfig, "run.static_tau must be > 0");
  require(c.group_count >= 1, ErrorKind::InvalidConfig, "run.group_count must be >= 1");
  require(c.train_batch_size >= 1 && c.reward_batch_size >= 1, ErrorKind::InvalidConfig, "batch sizes must be >= 1");
  require(c.discard_easiest_fraction >= 0.0 && c.discard_easiest_fraction < 1.0, ErrorKind::InvalidConfig,
          "run.discard_easiest_fraction must lie in [0, 1)");
  require(c.trajectory_stride >= 1, ErrorKind::InvalidConfig, "run.trajectory_stride must be >= 1");
  require(!(c.mode == RunMode::Static && c.discard_easiest_fraction > 0.0), ErrorKind::InvalidConfig,
          "static mode cannot be combined with discard_easiest_fraction");
}

std::string static_method_label(double tau) {
  if (std::isinf(tau)) return "Uni.";
  if (tau == 1.0) return "Prop.";
  if (tau == 10.0) return "Temp.";
  std::ostringstream s;
  s << "Temp. (tau=" << tau << ")";
  return s.str();
}

std::string method_label(const RunConfig& c) {
  std::string label;
  switch (c.mode) {
    case RunMode::Static: return static_method_label(c.static_tau);
    case RunMode::Hbo: label = "HBO"; break;
    case RunMode::GlobalOnly: label = "HBO (global only)"; break;
    case RunMode::LocalOnly: label = "HBO (local only)"; break;
  }
  if (c.discard_easiest_fraction > 0.0) {
    std::ostringstream s;
    s << label << " discard " << c.discard_easiest_fraction * 100.0 << "%";
    label = s.str();
  }
  return label;
}

long effective_total_steps(const RunConfig& c) {
  if (c.discard_easiest_fraction <= 0.0) return c.total_steps;
  return std::llround(static_cast<double>(c.total_steps) / (1.0 - c.discard_easiest_fraction));
}

std::vector<double> RunResult::global_distribution_at(long step) const {
  std::vector<double> out = initial_global;
  for (const auto& r : trajectory) {
    if (r.step > step) break;
    if (r.global) out = *r.global;
  }
  return out;
}

std::vector<std::vector<double>> RunResult::local_distributions_at(long step) const {
  auto out = initial_local;
  for (const auto& r : trajectory) {
    if (r.step > step) break;
    if (r.local) out = *r.local;
  }
  return out;
}

namespace {

/// How the main loop chooses training data and which actors learn.
struct LoopPolicy {
  bool hierarchical = true;    // false: static subset draw + uniform example
  double static_tau = 1.0;
  bool update_global = true;
  bool update_local = true;
  bool local_uniform = false;  // frozen local sampling at uniform over groups
};

struct Views {
  std::vector<std::vector<const ExampleRecord*>> subset;
  std::vector<std::vector<std::vector<const ExampleRecord*>>> group;
};

Views build_views(const MixtureCorpus& corpus) {
  Views v;
  for (const auto& s : corpus.subsets) {
    auto& flat = v.subset.emplace_back();
    auto& groups = v.group.emplace_back();
    for (const auto& g : s.groups) {
      auto& gv = groups.emplace_back();
      for (const auto& ex : g.examples) {
        flat.push_back(&ex);
        gv.push_back(&ex);
      }
    }
  }
  return v;
}

Batch draw_batch(const std::vector<const ExampleRecord*>& pool, std::size_t n, Rng& rng) {
  Batch b(n);
  for (auto& p : b) p = pool[uniform_index(rng, pool.size())];
  return b;
}

/// Two disjoint batches for the cosine-similarity reward.
std::pair<Batch, Batch> draw_disjoint_pair(const std::vector<const ExampleRecord*>& pool, std::size_t n, Rng& rng) {
  const std::size_t per = std::max<std::size_t>(1, std::min(n, pool.size() / 2));
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t a = 0; a < 2 * per && a < idx.size(); ++a)
    std::swap(idx[a], idx[a + uniform_index(rng, idx.size() - a)]);
  Batch first, second;
  for (std::size_t a = 0; a < per; ++a) first.push_back(pool[idx[a]]);
  for (std::size_t a = per; a < 2 * per && a < idx.size(); ++a) second.push_back(pool[idx[a]]);
  if (second.empty()) second = first;
  return {first, second};
}

bool scheduled(long t, long period, long total) { return period <= total && t % period == 0; }

RunResult run_loop(const MixtureCorpus& corpus, const ToyLanguageModel& base_model, const RunConfig& config,
                   const LoopPolicy& policy, long total_steps) {
  validate(config);
  require(corpus.vocab_size == base_model.shape().vocab_size, ErrorKind::InvalidConfig,
          "corpus and model disagree on vocab_size");
  if (policy.hierarchical)
    require(corpus.is_partitioned(), ErrorKind::InvalidState, "corpus must be partitioned into difficulty groups");
  for (const auto& s : corpus.subsets) require(s.size() >= 1, ErrorKind::InvalidState, "corpus has an empty subset");

  const Views views = build_views(corpus);
  const std::size_t n_subsets = corpus.subsets.size();
  const ModelSnapshot snapshot(base_model);

  ActorConfig global_cfg{config.actor_hidden_dim, config.gamma_global, 1e-3, config.center_rewards};
  ActorConfig local_cfg{config.actor_hidden_dim, config.gamma_local, 1e-3, config.center_rewards};

  const auto sizes = corpus.subset_sizes();
  const double global_tau = policy.hierarchical ? config.prior_tau : policy.static_tau;
  ActorNetwork global_actor = init_actor_from_prior(sizes, global_tau, derive_seed(config.actor_seed, "global"), global_cfg);
  std::vector<ActorNetwork> local_actors;
  std::vector<SamplingDistribution> local_dists;
  const bool local_learns = policy.hierarchical && policy.update_local;
  for (std::size_t i = 0; i < n_subsets; ++i) {
    std::vector<std::size_t> group_sizes;
    for (const auto& g : corpus.subsets[i].groups) group_sizes.push_back(g.examples.size());
    const double tau = policy.local_uniform ? kInfiniteTemperature : config.prior_tau;
    local_actors.push_back(init_actor_from_prior(group_sizes, tau,
                                                 derive_seed(config.actor_seed, "local-" + std::to_string(i)), local_cfg));
    local_dists.push_back(local_learns ? actor_distribution(local_actors.back())
                                       : SamplingDistribution{temperature_distribution(group_sizes, tau)});
  }

  RunResult result{method_label(config), total_steps, base_model, global_actor, local_actors, {}, {}, {}, {}, std::nullopt};
  // Frozen levels sample from the exact temperature distribution.
  SamplingDistribution global_dist = policy.hierarchical && policy.update_global
                                         ? actor_distribution(global_actor)
                                         : SamplingDistribution{temperature_distribution(sizes, global_tau)};
  result.initial_global = global_dist.probabilities;
  for (const auto& d : local_dists) result.initial_local.push_back(d.probabilities);

  ToyLanguageModel model = base_model;
  OptimizerState opt(config.optimizer);
  std::vector<double> grad(model.parameter_count());
  Rng train_rng = make_rng(config.training_seed, "train");
  Rng global_reward_rng = make_rng(config.reward_seed, "reward-global");
  Rng local_reward_rng = make_rng(config.reward_seed, "reward-local");
  std::vector<bool> collapse_warned(n_subsets, false);

  const bool global_active = policy.hierarchical && policy.update_global;
  const bool local_active = local_learns;
  result.trajectory.reserve(static_cast<std::size_t>(total_steps));

  for (long t = 0; t < total_steps; ++t) {
    TrajectoryRecord rec;
    rec.step = t;

    const std::size_t i = sample_index(global_dist, train_rng);
    Batch batch;
    if (policy.hierarchical) {
      const std::size_t j = sample_index(local_dists[i], train_rng);
      rec.group = static_cast<int>(j);
      batch = draw_batch(views.group[i][j], config.train_batch_size, train_rng);
    } else {
      batch = draw_batch(views.subset[i], config.train_batch_size, train_rng);
    }
    rec.subset = static_cast<int>(i);

    std::fill(grad.begin(), grad.end(), 0.0);
    rec.loss = accumulate_gradients(model, batch, grad);
    optimizer_step(model.parameters(), opt, grad);

    bool changed = false;
    if (global_active && scheduled(t, config.f_global, total_steps)) {
      std::vector<double> rewards(n_subsets);
      for (std::size_t s = 0; s < n_subsets; ++s) {
        if (config.global_reward == GlobalRewardKind::GradNorm) {
          rewards[s] = global_reward_gradnorm(model, draw_batch(views.subset[s], config.reward_batch_size, global_reward_rng));
        } else {
          const auto [a, b] = draw_disjoint_pair(views.subset[s], config.reward_batch_size, global_reward_rng);
          rewards[s] = cos_sim_reward(model, a, b);
        }
        rec.rewards.push_back({RewardLevel::Global, static_cast<int>(s), std::nullopt, rewards[s], t});
      }
      reinforce_update(global_actor, rewards);
      global_dist = actor_distribution(global_actor);
      changed = true;
    }
    if (local_active && scheduled(t, config.f_local, total_steps)) {
      for (std::size_t s = 0; s < n_subsets; ++s) {
        const std::size_t k = views.group[s].size();
        std::vector<double> rewards(k);
        for (std::size_t g = 0; g < k; ++g) {
          const Batch b = draw_batch(views.group[s][g], config.reward_batch_size, local_reward_rng);
          switch (config.local_reward) {
            case LocalRewardKind::PplRatio: rewards[g] = local_reward_ppl_ratio(model, &snapshot, b); break;
            case LocalRewardKind::Ppl: rewards[g] = mean_ppl_reward(model, b); break;
            case LocalRewardKind::Loss: rewards[g] = mean_loss_reward(model, b); break;
          }
          rec.rewards.push_back({RewardLevel::Local, static_cast<int>(s), static_cast<int>(g), rewards[g], t});
        }
        reinforce_update(local_actors[s], rewards);
        local_dists[s] = actor_distribution(local_actors[s]);
        const double min_p = *std::min_element(local_dists[s].probabilities.begin(), local_dists[s].probabilities.end());
        if (min_p < 1e-6 && !collapse_warned[s]) {
          collapse_warned[s] = true;
          result.warnings.push_back("local distribution of subset " + std::to_string(s) +
                                    " fell below 1e-6 at step " + std::to_string(t));
        }
      }
      changed = true;
    }

    if (changed || t % config.trajectory_stride == 0 || t + 1 == total_steps) {
      rec.global = global_dist.probabilities;
      std::vector<std::vector<double>> locals;
      for (const auto& d : local_dists) locals.push_back(d.probabilities);
      rec.local = std::move(locals);
    }
    result.trajectory.push_back(std::move(rec));
  }

  result.final_model = std::move(model);
  result.global_actor = std::move(global_actor);
  result.local_actors = std::move(local_actors);
  return result;
}

}  // namespace

RunResult run_hbo(const MixtureCorpus& corpus, const ToyLanguageModel& base_model, const RunConfig& config) {
  require(config.mode == RunMode::Hbo, ErrorKind::InvalidConfig, "run_hbo needs run.mode = hbo");
  require(config.discard_easiest_fraction == 0.0, ErrorKind::InvalidConfig,
          "discarding easy examples is an ablation; use run_ablation");
  return run_loop(corpus, base_model, config, LoopPolicy{}, config.total_steps);
}

RunResult run_static(const MixtureCorpus& corpus, const ToyLanguageModel& base_model, const RunConfig& config,
                     double tau) {
  require(tau > 0.0, ErrorKind::InvalidConfig, "static temperature must be > 0");
  RunConfig c = config;
  c.mode = RunMode::Static;
  c.static_tau = tau;
  LoopPolicy policy;
  policy.hierarchical = false;
  policy.static_tau = tau;
  policy.update_global = false;
  policy.update_local = false;
  return run_loop(corpus, base_model, c, policy, c.total_steps);
}

RunResult run_ablation(const MixtureCorpus& corpus, const ToyLanguageModel& base_model, const RunConfig& config) {
  validate(config);
  const bool actor_ablation = config.mode == RunMode::GlobalOnly || config.mode == RunMode::LocalOnly;
  const bool discard = config.discard_easiest_fraction > 0.0;
  const bool granularity = config.mode == RunMode::Hbo &&
                           (config.group_count == 1 || config.group_count == 2 || config.group_count == 4 ||
                            config.group_count == 8 || config.group_count == 16);
  require(config.mode != RunMode::Static, ErrorKind::InvalidConfig, "static mode is not an ablation");
  require(actor_ablation || discard || granularity, ErrorKind::InvalidConfig,
          "run_ablation needs global-only/local-only mode, a group count in {1,2,4,8,16}, or a discard fraction");
  require(!corpus.is_partitioned() || static_cast<int>(corpus.group_count()) == config.group_count,
          ErrorKind::InvalidConfig, "corpus group count does not match run.group_count");

  LoopPolicy policy;
  policy.update_global = config.mode != RunMode::LocalOnly;
  policy.update_local = config.mode != RunMode::GlobalOnly;
  policy.local_uniform = config.mode == RunMode::GlobalOnly;

  if (!discard) return run_loop(corpus, base_model, config, policy, config.total_steps);
  const MixtureCorpus kept = discard_easiest(corpus, config.discard_easiest_fraction);
  return run_loop(kept, base_model, config, policy, effective_total_steps(config));
}

EvaluationResult evaluate(const ToyLanguageModel& model, const MixtureCorpus& heldout) {
  require(heldout.vocab_size == model.shape().vocab_size, ErrorKind::InvalidConfig,
          "held-out corpus and model disagree on vocab_size");
  require(!heldout.subsets.empty(), ErrorKind::InvalidConfig, "held-out corpus has no subsets");
  EvaluationResult out;
  for (const auto& s : heldout.subsets) {
    SubsetMetrics m;
    for (const auto& g : s.groups) {
      for (const auto& ex : g.examples) {
        const double nll = example_nll(model, ex);
        m.loss += nll;
        m.perplexity += std::exp(nll);
        ++m.examples;
      }
    }
    require(m.examples > 0, ErrorKind::InvalidConfig, "held-out subset is empty");
    m.loss /= static_cast<double>(m.examples);
    m.perplexity /= static_cast<double>(m.examples);
    out.subsets.push_back(m);
  }
  for (const auto& m : out.subsets) {
    out.macro_perplexity += m.perplexity;
    out.macro_loss += m.loss;
  }
  out.macro_perplexity /= static_cast<double>(out.subsets.size());
  out.macro_loss /= static_cast<double>(out.subsets.size());
  return out;
}

}  // namespace hbo
