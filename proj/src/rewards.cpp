#include "hbo/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "hbo/error.hpp"

namespace hbo {

std::string to_string(GlobalRewardKind kind) { return kind == GlobalRewardKind::GradNorm ? "gradnorm" : "cossim"; }

std::string to_string(LocalRewardKind kind) {
  switch (kind) {
    case LocalRewardKind::PplRatio: return "ppl_ratio";
    case LocalRewardKind::Ppl: return "ppl";
    case LocalRewardKind::Loss: return "loss";
  }
  return "ppl_ratio";
}

GlobalRewardKind global_reward_kind_from_string(const std::string& name) {
  if (name == "gradnorm") return GlobalRewardKind::GradNorm;
  if (name == "cossim") return GlobalRewardKind::CosSim;
  fail(ErrorKind::InvalidConfig, "unknown global reward '" + name + "'");
}

LocalRewardKind local_reward_kind_from_string(const std::string& name) {
  if (name == "ppl_ratio") return LocalRewardKind::PplRatio;
  if (name == "ppl") return LocalRewardKind::Ppl;
  if (name == "loss") return LocalRewardKind::Loss;
  fail(ErrorKind::InvalidConfig, "unknown local reward '" + name + "'");
}

double global_reward_gradnorm(const ToyLanguageModel& model, const Batch& batch) {
  return grad_l2_norm(model, batch);
}

double local_reward_ppl_ratio(const ToyLanguageModel& model, const ModelSnapshot* snapshot, const Batch& batch) {
  require(snapshot != nullptr, ErrorKind::InvalidState, "local reward needs the initial model snapshot");
  require(!batch.empty(), ErrorKind::InvalidBatch, "batch is empty");
  double total = 0.0;
  for (const ExampleRecord* ex : batch) {
    require(ex != nullptr, ErrorKind::InvalidBatch, "batch holds a null example");
    // exp(a)/exp(b) as exp(a-b): an unchanged model gives exactly 1.
    total += std::exp(example_nll(model, *ex) - example_nll(snapshot->model(), *ex));
  }
  return total / static_cast<double>(batch.size());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::InternalContract, "vectors differ in dimension");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, ErrorKind::DegenerateState, "hidden state has zero norm");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cos_sim_reward(const ToyLanguageModel& model, const Batch& batch_a, const Batch& batch_b) {
  const auto ha = hidden_state(model, batch_a);
  const auto hb = hidden_state(model, batch_b);
  return cosine_similarity(ha, hb);
}

double mean_ppl_reward(const ToyLanguageModel& model, const Batch& batch) {
  require(!batch.empty(), ErrorKind::InvalidBatch, "batch is empty");
  double total = 0.0;
  for (const ExampleRecord* ex : batch) {
    require(ex != nullptr, ErrorKind::InvalidBatch, "batch holds a null example");
    total += perplexity(model, *ex);
  }
  return total / static_cast<double>(batch.size());
}

double mean_loss_reward(const ToyLanguageModel& model, const Batch& batch) { return nll_loss(model, batch); }

}  // namespace hbo
