#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "hbo/mixture.hpp"
#include "hbo/random.hpp"
#include "hbo/toy_model.hpp"

namespace hbo::test {

inline ExampleRecord example(TokenSeq instruction, TokenSeq response, int subset = 0) {
  ExampleRecord e;
  e.instruction = std::move(instruction);
  e.response = std::move(response);
  e.subset_id = subset;
  return e;
}

inline Batch batch_of(const std::vector<ExampleRecord>& examples) {
  Batch b;
  for (const auto& e : examples) b.push_back(&e);
  return b;
}

/// Context-blind model whose every prediction is softmax(logits).
inline ToyLanguageModel constant_predictor(const ModelShape& shape, const std::vector<double>& logits) {
  ToyLanguageModel m = ToyLanguageModel::zeros(shape);
  auto b2 = m.output_bias();
  for (std::size_t v = 0; v < b2.size(); ++v) b2[v] = logits[v];
  return m;
}

/// Predicts `target` with probability ~1 regardless of context.
inline ToyLanguageModel perfect_predictor(const ModelShape& shape, Token target) {
  std::vector<double> logits(static_cast<std::size_t>(shape.vocab_size), 0.0);
  logits[static_cast<std::size_t>(target)] = 60.0;
  return constant_predictor(shape, logits);
}

inline std::vector<ExampleRecord> random_examples(Rng& rng, int vocab, std::size_t count, int max_len = 5) {
  std::vector<ExampleRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto seq = [&](int lo) {
      TokenSeq s(static_cast<std::size_t>(lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_len)))));
      for (auto& t : s) t = static_cast<Token>(uniform_index(rng, static_cast<std::size_t>(vocab)));
      return s;
    };
    out.push_back(example(seq(1), seq(1)));
  }
  return out;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

/// Central differences of f over `params`, restoring each entry.
inline std::vector<double> central_differences(std::span<double> params, const std::function<double()>& f,
                                               double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f();
    params[i] = saved - h;
    const double down = f();
    params[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

inline SubsetSpec small_spec(std::size_t size, GeneratorKind kind = GeneratorKind::MarkovChain) {
  SubsetSpec s;
  s.kind = kind;
  s.size = size;
  s.instruction_min = 2;
  s.instruction_max = 4;
  s.response_min = 2;
  s.response_max = 5;
  return s;
}

}  // namespace hbo::test
