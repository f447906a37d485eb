#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "hbo/mixture.hpp"

namespace hbo {

struct ModelShape {
  int vocab_size = 32;
  int context_window = 4;
  int embed_dim = 16;
  int hidden_dim = 32;

  bool operator==(const ModelShape&) const = default;
};

/// Which tokens precede the response when scoring it. ResponseOnly replaces
/// every instruction token with the padding token, so the sequence keeps its
/// length but carries no instruction information.
enum class Conditioning { WithInstruction, ResponseOnly };

/// Fixed-window MLP language model:
///
///   x      = concat(E[c_1], ..., E[c_w])          (w*d)
///   hidden = tanh(W1^T x + b1)                     (h)
///   p      = softmax(W2^T hidden + b2)             (V)
///
/// The embedding table has V+1 rows; row V is the padding token used before
/// the start of a sequence and in place of masked instructions. All
/// parameters live in one flat buffer in the order E, W1, b1, W2, b2 (all
/// row-major), which is also the layout of ParameterGradients.
class ToyLanguageModel {
 public:
  /// Random initialization from `seed`.
  ToyLanguageModel(const ModelShape& shape, std::uint64_t seed);

  /// All parameters zero: a context-blind uniform predictor.
  static ToyLanguageModel zeros(const ModelShape& shape);

  const ModelShape& shape() const noexcept { return shape_; }
  Token pad_token() const noexcept { return shape_.vocab_size; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::span<double> embedding() noexcept { return slice(0); }
  std::span<double> hidden_weights() noexcept { return slice(1); }
  std::span<double> hidden_bias() noexcept { return slice(2); }
  std::span<double> output_weights() noexcept { return slice(3); }
  std::span<double> output_bias() noexcept { return slice(4); }
  std::span<const double> embedding() const noexcept { return slice(0); }
  std::span<const double> hidden_weights() const noexcept { return slice(1); }
  std::span<const double> hidden_bias() const noexcept { return slice(2); }
  std::span<const double> output_weights() const noexcept { return slice(3); }
  std::span<const double> output_bias() const noexcept { return slice(4); }

  bool operator==(const ToyLanguageModel&) const = default;

 private:
  explicit ToyLanguageModel(const ModelShape& shape);
  std::span<double> slice(int block) noexcept;
  std::span<const double> slice(int block) const noexcept;

  ModelShape shape_;
  std::vector<std::size_t> offsets_;  // 6 entries: block starts plus end
  std::vector<double> params_;
};

/// Frozen copy of the model taken before training starts.
class ModelSnapshot {
 public:
  explicit ModelSnapshot(const ToyLanguageModel& model) : model_(model) {}
  const ToyLanguageModel& model() const noexcept { return model_; }

 private:
  ToyLanguageModel model_;
};

using Batch = std::vector<const ExampleRecord*>;

/// Gradient buffer sharing the model's flat parameter layout.
struct ParameterGradients {
  std::vector<double> values;
};

/// Next-token distribution for an explicit context of exactly
/// `context_window` tokens (oldest first; pad_token() allowed).
std::vector<double> next_token_distribution(const ToyLanguageModel& model, std::span<const Token> context);

/// Mean negative log-likelihood over the response tokens of one example.
double example_nll(const ToyLanguageModel& model, const ExampleRecord& example,
                   Conditioning conditioning = Conditioning::WithInstruction);

/// Mean over examples of the per-example response NLL.
double nll_loss(const ToyLanguageModel& model, const Batch& batch);

ParameterGradients backward_gradients(const ToyLanguageModel& model, const Batch& batch);

/// Accumulates the gradient of nll_loss into `grad` (which must be sized
/// to the parameter count and is not cleared) and returns the loss.
double accumulate_gradients(const ToyLanguageModel& model, const Batch& batch, std::span<double> grad);

double l2_norm(std::span<const double> values);
double grad_l2_norm(const ToyLanguageModel& model, const Batch& batch);

double perplexity(const ToyLanguageModel& model, const ExampleRecord& example,
                  Conditioning conditioning = Conditioning::WithInstruction);

/// Mean penultimate activation: averaged over the response positions of
/// each example, then over examples.
std::vector<double> hidden_state(const ToyLanguageModel& model, const Batch& batch);

// Checkpoints are a single JSON document:
//   {"format":"hbo-model","version":1,
//    "shape":{"vocab_size":V,"context_window":w,"embed_dim":d,"hidden_dim":h},
//    "dtype":"float64",
//    "tensors":[{"name":"embedding","shape":[V+1,d]}, {"name":"hidden_weights",...}, ...],
//    "values":[...]}
// `values` is the flat parameter buffer in tensor order, printed with
// round-trip precision, so byte order does not apply.
void save_checkpoint(std::ostream& out, const ToyLanguageModel& model);
ToyLanguageModel load_checkpoint(std::istream& in);

}  // namespace hbo
