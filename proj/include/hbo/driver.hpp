#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hbo/actor.hpp"
#include "hbo/mixture.hpp"
#include "hbo/optimizer.hpp"
#include "hbo/rewards.hpp"
#include "hbo/toy_model.hpp"

namespace hbo {

enum class RunMode { Hbo, Static, GlobalOnly, LocalOnly };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& name);

struct RunConfig {
  RunMode mode = RunMode::Hbo;
  long total_steps = 3000;
  OptimizerConfig optimizer;
  double gamma_global = 0.05;
  double gamma_local = 1.5;
  /// Actor update periods. An actor updates at every step t with
  /// t % f == 0; a period larger than total_steps disables it.
  long f_global = 200;
  long f_local = 200;
  /// Temperature of the prior both actor levels start from.
  double prior_tau = 1.0;
  /// Temperature of the fixed subset distribution in static mode.
  double static_tau = 1.0;
  int group_count = 4;
  std::size_t train_batch_size = 16;
  std::size_t reward_batch_size = 64;
  std::uint64_t training_seed = 1;
  std::uint64_t reward_seed = 1;
  std::uint64_t actor_seed = 1;
  double discard_easiest_fraction = 0.0;
  /// Distributions are also recorded every `trajectory_stride` steps.
  long trajectory_stride = 100;
  GlobalRewardKind global_reward = GlobalRewardKind::GradNorm;
  LocalRewardKind local_reward = LocalRewardKind::PplRatio;
  int actor_hidden_dim = 32;
  bool center_rewards = false;
};

void validate(const RunConfig& config);

/// "Prop." / "Temp." / "Uni." for the static baselines, "HBO" and its
/// ablation variants otherwise.
std::string method_label(const RunConfig& config);
std::string static_method_label(double tau);

struct TrajectoryRecord {
  long step = 0;
  int subset = 0;
  std::optional<int> group;  // absent for static runs
  double loss = 0.0;
  /// Distributions after this step's actor updates; present when they
  /// changed or on the recording stride.
  std::optional<std::vector<double>> global;
  std::optional<std::vector<std::vector<double>>> local;
  std::vector<RewardSample> rewards;

  bool operator==(const TrajectoryRecord&) const = default;
};

struct SubsetMetrics {
  double perplexity = 0.0;
  double loss = 0.0;
  std::size_t examples = 0;
};

struct EvaluationResult {
  std::vector<SubsetMetrics> subsets;
  double macro_perplexity = 0.0;
  double macro_loss = 0.0;
};

struct RunResult {
  std::string method;
  long steps_run = 0;
  ToyLanguageModel final_model;
  ActorNetwork global_actor;
  std::vector<ActorNetwork> local_actors;
  std::vector<double> initial_global;
  std::vector<std::vector<double>> initial_local;
  std::vector<TrajectoryRecord> trajectory;
  std::vector<std::string> warnings;
  std::optional<EvaluationResult> evaluation;

  /// Global/local distributions in effect after `step` (the latest recorded
  /// snapshot at or before it, or the initial ones).
  std::vector<double> global_distribution_at(long step) const;
  std::vector<std::vector<double>> local_distributions_at(long step) const;
};

/// Hierarchical balancing main loop. The corpus must be partitioned; the
/// model starts from `base_model`, which also serves as the initial snapshot
/// for local rewards.
RunResult run_hbo(const MixtureCorpus& corpus, const ToyLanguageModel& base_model, const RunConfig& config);

/// Fixed temperature sampling over subsets, uniform over each subset's
/// examples. Groups are ignored.
RunResult run_static(const MixtureCorpus& corpus, const ToyLanguageModel& base_model, const RunConfig& config,
                     double tau);

/// global-only / local-only actor ablations, group-granularity runs, and
/// easy-example discarding (which rescales total_steps by 1/(1-fraction)).
RunResult run_ablation(const MixtureCorpus& corpus, const ToyLanguageModel& base_model, const RunConfig& config);

/// Steps actually run after discard rescaling.
long effective_total_steps(const RunConfig& config);

/// Per-subset mean held-out perplexity and loss; macro values are the
/// unweighted means over subsets.
EvaluationResult evaluate(const ToyLanguageModel& model, const MixtureCorpus& heldout);

}  // namespace hbo
