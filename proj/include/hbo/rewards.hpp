#pragma once

#include <optional>
#include <string>

#include "hbo/toy_model.hpp"

namespace hbo {

enum class RewardLevel { Global, Local };

struct RewardSample {
  RewardLevel level = RewardLevel::Global;
  int subset_id = 0;
  std::optional<int> group_id;  // local rewards only
  double value = 0.0;
  long step = 0;

  bool operator==(const RewardSample&) const = default;
};

enum class GlobalRewardKind { GradNorm, CosSim };
enum class LocalRewardKind { PplRatio, Ppl, Loss };

std::string to_string(GlobalRewardKind kind);
std::string to_string(LocalRewardKind kind);
GlobalRewardKind global_reward_kind_from_string(const std::string& name);
LocalRewardKind local_reward_kind_from_string(const std::string& name);

/// L2 norm of the loss gradient over all parameters on a batch from one subset.
double global_reward_gradnorm(const ToyLanguageModel& model, const Batch& batch);

/// Mean over the batch of PPL(current) / PPL(initial). Exactly 1 when the
/// model still equals the snapshot.
double local_reward_ppl_ratio(const ToyLanguageModel& model, const ModelSnapshot* snapshot, const Batch& batch);

/// Cosine similarity of the mean hidden states of two batches.
double cos_sim_reward(const ToyLanguageModel& model, const Batch& batch_a, const Batch& batch_b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

double mean_ppl_reward(const ToyLanguageModel& model, const Batch& batch);
double mean_loss_reward(const ToyLanguageModel& model, const Batch& batch);

}  // namespace hbo
