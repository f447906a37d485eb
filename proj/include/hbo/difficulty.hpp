#pragma once

#include <string>
#include <vector>

#include "hbo/mixture.hpp"
#include "hbo/toy_model.hpp"

namespace hbo {

enum class DifficultyMetric {
  /// PPL(y | x) / PPL(y): how little the instruction helps.
  Ifd,
  /// PPL(y | x) alone.
  Perplexity,
  /// Mean response NLL, log of Perplexity.
  Loss,
};

std::string to_string(DifficultyMetric metric);
DifficultyMetric difficulty_metric_from_string(const std::string& name);

/// Instruction-following difficulty. PPL(y) is computed with the instruction
/// replaced by padding tokens. Always > 0; exactly 1 for a context-blind model.
double ifd_score(const ToyLanguageModel& model, const ExampleRecord& example);

double difficulty_score(const ToyLanguageModel& model, const ExampleRecord& example, DifficultyMetric metric);

/// One score per example, per subset, in flattened subset order. This is the
/// layout partition_by_difficulty expects.
std::vector<std::vector<double>> score_corpus(const ToyLanguageModel& model, const MixtureCorpus& corpus,
                                              DifficultyMetric metric);

}  // namespace hbo
