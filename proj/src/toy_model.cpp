#include "hbo/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "hbo/error.hpp"
#include "hbo/random.hpp"

namespace hbo {

namespace {

void validate_shape(const ModelShape& s) {
  require(s.vocab_size >= 2, ErrorKind::InvalidConfig, "model vocab_size must be >= 2");
  require(s.context_window >= 1, ErrorKind::InvalidConfig, "model context_window must be >= 1");
  require(s.embed_dim >= 1 && s.hidden_dim >= 1, ErrorKind::InvalidConfig, "model dimensions must be >= 1");
}

/// Scratch buffers for one position's forward and backward pass.
struct Workspace {
  std::vector<Token> context;
  std::vector<double> input;   // w*d
  std::vector<double> hidden;  // h
  std::vector<double> probs;   // V
  std::vector<double> d_hidden;
  std::vector<double> d_pre;
  std::vector<double> d_input;

  explicit Workspace(const ModelShape& s)
      : context(static_cast<std::size_t>(s.context_window)),
        input(static_cast<std::size_t>(s.context_window * s.embed_dim)),
        hidden(static_cast<std::size_t>(s.hidden_dim)),
        probs(static_cast<std::size_t>(s.vocab_size)),
        d_hidden(hidden.size()),
        d_pre(hidden.size()),
        d_input(input.size()) {}
};

void validate_example(const ExampleRecord& ex, int vocab) {
  require(!ex.response.empty(), ErrorKind::InvalidExample, "example has an empty response");
  for (const TokenSeq* seq : {&ex.instruction, &ex.response})
    for (Token t : *seq)
      require(t >= 0 && t < vocab, ErrorKind::InvalidExample, "token id outside the model vocabulary");
}

void validate_batch(const Batch& batch, int vocab) {
  require(!batch.empty(), ErrorKind::InvalidBatch, "batch is empty");
  for (const ExampleRecord* ex : batch) {
    require(ex != nullptr, ErrorKind::InvalidBatch, "batch holds a null example");
    validate_example(*ex, vocab);
  }
}

/// Fills ws.context with the w tokens preceding response position `l`.
void gather_context(const ToyLanguageModel& m, const ExampleRecord& ex, std::size_t l, Conditioning cond,
                    Workspace& ws) {
  const auto w = static_cast<std::ptrdiff_t>(m.shape().context_window);
  const auto n_instr = static_cast<std::ptrdiff_t>(ex.instruction.size());
  const auto pos = n_instr + static_cast<std::ptrdiff_t>(l);
  for (std::ptrdiff_t k = 0; k < w; ++k) {
    const std::ptrdiff_t src = pos - w + k;
    Token t = m.pad_token();
    if (src >= n_instr) {
      t = ex.response[static_cast<std::size_t>(src - n_instr)];
    } else if (src >= 0 && cond == Conditioning::WithInstruction) {
      t = ex.instruction[static_cast<std::size_t>(src)];
    }
    ws.context[static_cast<std::size_t>(k)] = t;
  }
}

/// Forward pass for the context in ws.context; leaves softmax in ws.probs
/// and returns log p(target) (target < 0 skips the log-prob).
double forward(const ToyLanguageModel& m, Workspace& ws, Token target) {
  const auto& s = m.shape();
  const auto d = static_cast<std::size_t>(s.embed_dim);
  const auto h = static_cast<std::size_t>(s.hidden_dim);
  const auto v = static_cast<std::size_t>(s.vocab_size);
  const auto emb = m.embedding();
  const auto w1 = m.hidden_weights();
  const auto b1 = m.hidden_bias();
  const auto w2 = m.output_weights();
  const auto b2 = m.output_bias();

  for (std::size_t k = 0; k < ws.context.size(); ++k) {
    const auto row = static_cast<std::size_t>(ws.context[k]) * d;
    std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(row), d, ws.input.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  std::copy(b1.begin(), b1.end(), ws.hidden.begin());
  for (std::size_t i = 0; i < ws.input.size(); ++i) {
    const double xi = ws.input[i];
    const double* wrow = &w1[i * h];
    for (std::size_t j = 0; j < h; ++j) ws.hidden[j] += xi * wrow[j];
  }
  for (double& a : ws.hidden) a = std::tanh(a);

  std::copy(b2.begin(), b2.end(), ws.probs.begin());
  for (std::size_t j = 0; j < h; ++j) {
    const double hj = ws.hidden[j];
    const double* wrow = &w2[j * v];
    for (std::size_t t = 0; t < v; ++t) ws.probs[t] += hj * wrow[t];
  }
  const double max_logit = *std::max_element(ws.probs.begin(), ws.probs.end());
  const double target_logit = target >= 0 ? ws.probs[static_cast<std::size_t>(target)] : 0.0;
  double norm = 0.0;
  for (double& z : ws.probs) {
    z = std::exp(z - max_logit);
    norm += z;
  }
  for (double& p : ws.probs) p /= norm;
  return target >= 0 ? target_logit - max_logit - std::log(norm) : 0.0;
}

/// Backward pass for one position whose forward left state in `ws`.
/// `weight` scales dL/dlogits = weight * (p - onehot(target)).
void backward(const ToyLanguageModel& m, Workspace& ws, Token target, double weight, std::span<double> grad) {
  const auto& s = m.shape();
  const auto d = static_cast<std::size_t>(s.embed_dim);
  const auto h = static_cast<std::size_t>(s.hidden_dim);
  const auto v = static_cast<std::size_t>(s.vocab_size);
  const auto w1 = m.hidden_weights();
  const auto w2 = m.output_weights();

  const std::size_t off_w1 = (static_cast<std::size_t>(s.vocab_size) + 1) * d;
  const std::size_t off_b1 = off_w1 + ws.input.size() * h;
  const std::size_t off_w2 = off_b1 + h;
  const std::size_t off_b2 = off_w2 + h * v;

  // Reuse probs as dL/dlogits.
  for (double& p : ws.probs) p *= weight;
  ws.probs[static_cast<std::size_t>(target)] -= weight;

  for (std::size_t t = 0; t < v; ++t) grad[off_b2 + t] += ws.probs[t];
  for (std::size_t j = 0; j < h; ++j) {
    const double hj = ws.hidden[j];
    const double* wrow = &w2[j * v];
    double* grow = &grad[off_w2 + j * v];
    double acc = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
      grow[t] += hj * ws.probs[t];
      acc += wrow[t] * ws.probs[t];
    }
    ws.d_hidden[j] = acc;
    ws.d_pre[j] = acc * (1.0 - hj * hj);
    grad[off_b1 + j] += ws.d_pre[j];
  }
  for (std::size_t i = 0; i < ws.input.size(); ++i) {
    const double xi = ws.input[i];
    const double* wrow = &w1[i * h];
    double* grow = &grad[off_w1 + i * h];
    double acc = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      grow[j] += xi * ws.d_pre[j];
      acc += wrow[j] * ws.d_pre[j];
    }
    ws.d_input[i] = acc;
  }
  for (std::size_t k = 0; k < ws.context.size(); ++k) {
    const auto row = static_cast<std::size_t>(ws.context[k]) * d;
    for (std::size_t e = 0; e < d; ++e) grad[row + e] += ws.d_input[k * d + e];
  }
}

double example_nll_unchecked(const ToyLanguageModel& m, const ExampleRecord& ex, Conditioning cond, Workspace& ws) {
  double total = 0.0;
  for (std::size_t l = 0; l < ex.response.size(); ++l) {
    gather_context(m, ex, l, cond, ws);
    total -= forward(m, ws, ex.response[l]);
  }
  return total / static_cast<double>(ex.response.size());
}

const char* const kTensorNames[] = {"embedding", "hidden_weights", "hidden_bias", "output_weights", "output_bias"};

}  // namespace

ToyLanguageModel::ToyLanguageModel(const ModelShape& shape) : shape_(shape) {
  validate_shape(shape);
  const auto v = static_cast<std::size_t>(shape.vocab_size);
  const auto d = static_cast<std::size_t>(shape.embed_dim);
  const auto h = static_cast<std::size_t>(shape.hidden_dim);
  const auto wd = static_cast<std::size_t>(shape.context_window) * d;
  const std::size_t sizes[] = {(v + 1) * d, wd * h, h, h * v, v};
  offsets_.push_back(0);
  for (std::size_t n : sizes) offsets_.push_back(offsets_.back() + n);
  params_.assign(offsets_.back(), 0.0);
}

ToyLanguageModel::ToyLanguageModel(const ModelShape& shape, std::uint64_t seed) : ToyLanguageModel(shape) {
  Rng rng = make_rng(seed, "model-init");
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(shape.context_window * shape.embed_dim));
  const double out_scale = 1.0 / std::sqrt(static_cast<double>(shape.hidden_dim));
  for (double& p : embedding()) p = standard_normal(rng);
  for (double& p : hidden_weights()) p = in_scale * standard_normal(rng);
  for (double& p : output_weights()) p = out_scale * standard_normal(rng);
}

ToyLanguageModel ToyLanguageModel::zeros(const ModelShape& shape) { return ToyLanguageModel(shape); }

std::span<double> ToyLanguageModel::slice(int block) noexcept {
  const auto b = static_cast<std::size_t>(block);
  return std::span<double>(params_).subspan(offsets_[b], offsets_[b + 1] - offsets_[b]);
}

std::span<const double> ToyLanguageModel::slice(int block) const noexcept {
  const auto b = static_cast<std::size_t>(block);
  return std::span<const double>(params_).subspan(offsets_[b], offsets_[b + 1] - offsets_[b]);
}

std::vector<double> next_token_distribution(const ToyLanguageModel& model, std::span<const Token> context) {
  const auto& s = model.shape();
  require(context.size() == static_cast<std::size_t>(s.context_window), ErrorKind::InternalContract,
          "context length must equal the context window");
  for (Token t : context)
    require(t >= 0 && t <= model.pad_token(), ErrorKind::InvalidExample, "context token outside the vocabulary");
  Workspace ws(s);
  std::copy(context.begin(), context.end(), ws.context.begin());
  forward(model, ws, -1);
  return ws.probs;
}

double example_nll(const ToyLanguageModel& model, const ExampleRecord& example, Conditioning conditioning) {
  validate_example(example, model.shape().vocab_size);
  Workspace ws(model.shape());
  return example_nll_unchecked(model, example, conditioning, ws);
}

double nll_loss(const ToyLanguageModel& model, const Batch& batch) {
  validate_batch(batch, model.shape().vocab_size);
  Workspace ws(model.shape());
  double total = 0.0;
  for (const ExampleRecord* ex : batch) total += example_nll_unchecked(model, *ex, Conditioning::WithInstruction, ws);
  return total / static_cast<double>(batch.size());
}

double accumulate_gradients(const ToyLanguageModel& model, const Batch& batch, std::span<double> grad) {
  validate_batch(batch, model.shape().vocab_size);
  require(grad.size() == model.parameter_count(), ErrorKind::InternalContract, "gradient buffer has the wrong size");
  Workspace ws(model.shape());
  const double batch_weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const ExampleRecord* ex : batch) {
    const double weight = batch_weight / static_cast<double>(ex->response.size());
    for (std::size_t l = 0; l < ex->response.size(); ++l) {
      gather_context(model, *ex, l, Conditioning::WithInstruction, ws);
      total -= weight * forward(model, ws, ex->response[l]);
      backward(model, ws, ex->response[l], weight, grad);
    }
  }
  return total;
}

ParameterGradients backward_gradients(const ToyLanguageModel& model, const Batch& batch) {
  ParameterGradients g;
  g.values.assign(model.parameter_count(), 0.0);
  accumulate_gradients(model, batch, g.values);
  return g;
}

double l2_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double x : values) sum += x * x;
  return std::sqrt(sum);
}

double grad_l2_norm(const ToyLanguageModel& model, const Batch& batch) {
  return l2_norm(backward_gradients(model, batch).values);
}

double perplexity(const ToyLanguageModel& model, const ExampleRecord& example, Conditioning conditioning) {
  return std::exp(example_nll(model, example, conditioning));
}

std::vector<double> hidden_state(const ToyLanguageModel& model, const Batch& batch) {
  validate_batch(batch, model.shape().vocab_size);
  Workspace ws(model.shape());
  std::vector<double> mean(static_cast<std::size_t>(model.shape().hidden_dim), 0.0);
  for (const ExampleRecord* ex : batch) {
    const double weight = 1.0 / static_cast<double>(ex->response.size() * batch.size());
    for (std::size_t l = 0; l < ex->response.size(); ++l) {
      gather_context(model, *ex, l, Conditioning::WithInstruction, ws);
      forward(model, ws, -1);
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += weight * ws.hidden[j];
    }
  }
  return mean;
}

void save_checkpoint(std::ostream& out, const ToyLanguageModel& model) {
  const auto& s = model.shape();
  nlohmann::ordered_json j;
  j["format"] = "hbo-model";
  j["version"] = 1;
  j["shape"] = {{"vocab_size", s.vocab_size},
                {"context_window", s.context_window},
                {"embed_dim", s.embed_dim},
                {"hidden_dim", s.hidden_dim}};
  j["dtype"] = "float64";
  const std::vector<std::vector<int>> shapes = {{s.vocab_size + 1, s.embed_dim},
                                                {s.context_window * s.embed_dim, s.hidden_dim},
                                                {s.hidden_dim},
                                                {s.hidden_dim, s.vocab_size},
                                                {s.vocab_size}};
  j["tensors"] = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < shapes.size(); ++b)
    j["tensors"].push_back({{"name", kTensorNames[b]}, {"shape", shapes[b]}});
  j["values"] = std::vector<double>(model.parameters().begin(), model.parameters().end());
  out << j.dump() << '\n';
}

ToyLanguageModel load_checkpoint(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    require(j.value("format", "") == "hbo-model" && j.value("version", 0) == 1, ErrorKind::Io,
            "not an hbo-model checkpoint");
    ModelShape s;
    s.vocab_size = j.at("shape").at("vocab_size").get<int>();
    s.context_window = j.at("shape").at("context_window").get<int>();
    s.embed_dim = j.at("shape").at("embed_dim").get<int>();
    s.hidden_dim = j.at("shape").at("hidden_dim").get<int>();
    ToyLanguageModel model = ToyLanguageModel::zeros(s);
    const auto values = j.at("values").get<std::vector<double>>();
    require(values.size() == model.parameter_count(), ErrorKind::Io, "checkpoint value count does not match shape");
    std::copy(values.begin(), values.end(), model.parameters().begin());
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Io, std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace hbo
