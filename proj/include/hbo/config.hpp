#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hbo/difficulty.hpp"
#include "hbo/driver.hpp"
#include "hbo/mixture.hpp"
#include "hbo/toy_model.hpp"

namespace hbo {

struct SeedConfig {
  std::uint64_t corpus = 1;
  std::uint64_t model = 1;
  std::uint64_t training = 1;
  std::uint64_t reward = 1;
  std::uint64_t actor = 1;

  /// Sets every stream to `seed`; used for paired multi-seed sweeps.
  void set_all(std::uint64_t seed) { corpus = model = training = reward = actor = seed; }
};

struct CorpusConfig {
  int vocab_size = 32;
  double heldout_fraction = 0.1;
  std::vector<SubsetSpec> subsets;
};

/// Short warm-up that turns the random initialization into the base model
/// the fine-tuning run starts from (and scores difficulty with).
struct PretrainConfig {
  long steps = 300;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
};

struct ExperimentConfig {
  std::string label = "run";
  SeedConfig seeds;
  CorpusConfig corpus;
  ModelShape model;
  PretrainConfig pretrain;
  DifficultyMetric difficulty_metric = DifficultyMetric::Ifd;
  RunConfig run;
};

/// The adversarial desk mixture: three Markov subsets of 10000 / 2000 / 500
/// examples where the smallest is the hardest.
ExperimentConfig default_desk_config();

/// Parses a config document. Unknown keys are rejected and every missing
/// optional field takes its default. `corpus.subsets` and each subset's
/// `size` are required. Errors name the offending field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved config, suitable for echoing into run outputs.
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

/// Copies the seeds into the run config's seed fields.
RunConfig resolved_run_config(const ExperimentConfig& config);

}  // namespace hbo
