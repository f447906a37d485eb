#include "hbo/difficulty.hpp"

#include <cmath>

#include "hbo/error.hpp"

namespace hbo {

std::string to_string(DifficultyMetric metric) {
  switch (metric) {
    case DifficultyMetric::Ifd: return "ifd";
    case DifficultyMetric::Perplexity: return "ppl";
    case DifficultyMetric::Loss: return "loss";
  }
  return "ifd";
}

DifficultyMetric difficulty_metric_from_string(const std::string& name) {
  if (name == "ifd") return DifficultyMetric::Ifd;
  if (name == "ppl") return DifficultyMetric::Perplexity;
  if (name == "loss") return DifficultyMetric::Loss;
  fail(ErrorKind::InvalidConfig, "unknown difficulty metric '" + name + "'");
}

double ifd_score(const ToyLanguageModel& model, const ExampleRecord& example) {
  // exp(a)/exp(b) as exp(a-b): identical NLLs give exactly 1.
  const double conditional = example_nll(model, example, Conditioning::WithInstruction);
  const double unconditional = example_nll(model, example, Conditioning::ResponseOnly);
  return std::exp(conditional - unconditional);
}

double difficulty_score(const ToyLanguageModel& model, const ExampleRecord& example, DifficultyMetric metric) {
  switch (metric) {
    case DifficultyMetric::Ifd: return ifd_score(model, example);
    case DifficultyMetric::Perplexity: return perplexity(model, example);
    case DifficultyMetric::Loss: return example_nll(model, example);
  }
  return ifd_score(model, example);
}

std::vector<std::vector<double>> score_corpus(const ToyLanguageModel& model, const MixtureCorpus& corpus,
                                              DifficultyMetric metric) {
  require(corpus.vocab_size == model.shape().vocab_size, ErrorKind::InvalidConfig,
          "corpus and scoring model disagree on vocab_size");
  std::vector<std::vector<double>> scores;
  scores.reserve(corpus.subsets.size());
  for (const auto& subset : corpus.subsets) {
    auto& out = scores.emplace_back();
    out.reserve(subset.size());
    for (const auto& group : subset.groups)
      for (const auto& ex : group.examples) out.push_back(difficulty_score(model, ex, metric));
  }
  return scores;
}

}  // namespace hbo
