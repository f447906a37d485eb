#include "hbo/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "hbo/error.hpp"
#include "hbo/random.hpp"

namespace hbo {

namespace {

using Row = std::vector<double>;

Token sample_row(const Row& row, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t b = 0; b < row.size(); ++b) {
    acc += row[b];
    if (u < acc) return static_cast<Token>(b);
  }
  return static_cast<Token>(row.size() - 1);
}

/// Per-subset stochastic process. Markov chains use one transition table;
/// template grammars cycle through `phases` tables keyed on position.
struct SubsetProcess {
  std::vector<std::vector<Row>> phases;  // phase -> prev token -> row

  const Row& row(Token prev, std::size_t position) const {
    return phases[position % phases.size()][static_cast<std::size_t>(prev)];
  }
};

Row random_row(int vocab_size, Rng& rng) {
  Row row(static_cast<std::size_t>(vocab_size));
  double total = 0.0;
  for (double& p : row) {
    p = std::exp(2.0 * standard_normal(rng));
    total += p;
  }
  for (double& p : row) p /= total;
  return row;
}

SubsetProcess build_process(const SubsetSpec& spec, int vocab_size, Rng& rng) {
  const auto v = static_cast<std::size_t>(vocab_size);
  const double spread = spec.transition_entropy;
  SubsetProcess process;

  auto sharpen = [&](Row row, std::size_t successor) {
    for (double& p : row) p *= spread;
    row[successor] += 1.0 - spread;
    return row;
  };

  if (spec.kind == GeneratorKind::MarkovChain) {
    std::vector<std::size_t> successor(v);
    std::iota(successor.begin(), successor.end(), std::size_t{0});
    for (std::size_t a = v - 1; a > 0; --a) std::swap(successor[a], successor[uniform_index(rng, a + 1)]);
    std::vector<Row> table;
    table.reserve(v);
    for (std::size_t a = 0; a < v; ++a) table.push_back(sharpen(random_row(vocab_size, rng), successor[a]));
    process.phases.push_back(std::move(table));
  } else {
    const std::size_t period = 3 + uniform_index(rng, 3);
    for (std::size_t phase = 0; phase < period; ++phase) {
      const std::size_t offset = 1 + uniform_index(rng, v - 1);
      std::vector<Row> table;
      table.reserve(v);
      for (std::size_t a = 0; a < v; ++a) table.push_back(sharpen(random_row(vocab_size, rng), (a + offset) % v));
      process.phases.push_back(std::move(table));
    }
  }
  return process;
}

void validate_spec(const SubsetSpec& spec, std::size_t index) {
  const std::string where = "subset " + std::to_string(index) + ": ";
  require(spec.size >= 1, ErrorKind::InvalidConfig, where + "size must be >= 1");
  require(spec.transition_entropy > 0.0 && spec.transition_entropy <= 1.0, ErrorKind::InvalidConfig,
          where + "transition_entropy must lie in (0, 1]");
  require(spec.noise_spread >= 0.0 && std::isfinite(spec.noise_spread), ErrorKind::InvalidConfig,
          where + "noise_spread must be >= 0");
  require(spec.instruction_min >= 1 && spec.instruction_max >= spec.instruction_min, ErrorKind::InvalidConfig,
          where + "instruction length range must satisfy 1 <= min <= max");
  require(spec.response_min >= 1 && spec.response_max >= spec.response_min, ErrorKind::InvalidConfig,
          where + "response length range must satisfy 1 <= min <= max");
}

int draw_length(int lo, int hi, Rng& rng) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

ExampleRecord draw_example(const SubsetSpec& spec, const SubsetProcess& process, int vocab_size, int subset_id,
                           Rng& rng) {
  ExampleRecord ex;
  ex.subset_id = subset_id;
  const int instruction_len = draw_length(spec.instruction_min, spec.instruction_max, rng);
  const int response_len = draw_length(spec.response_min, spec.response_max, rng);
  ex.noise_level = std::min(1.0, spec.noise_spread * uniform01(rng));

  Token prev = static_cast<Token>(uniform_index(rng, static_cast<std::size_t>(vocab_size)));
  ex.instruction.push_back(prev);
  std::size_t position = 1;
  for (int l = 1; l < instruction_len; ++l, ++position) {
    prev = sample_row(process.row(prev, position), rng);
    ex.instruction.push_back(prev);
  }
  for (int l = 0; l < response_len; ++l, ++position) {
    // Draw both so the stream layout does not depend on the noise outcome.
    const double coin = uniform01(rng);
    const Token clean = sample_row(process.row(prev, position), rng);
    const Token noisy = static_cast<Token>(uniform_index(rng, static_cast<std::size_t>(vocab_size)));
    prev = coin < ex.noise_level ? noisy : clean;
    ex.response.push_back(prev);
  }
  return ex;
}

Subset single_group(std::vector<ExampleRecord> examples) {
  Subset subset;
  subset.groups.push_back(Group{std::move(examples)});
  return subset;
}

Subset regroup(std::vector<ExampleRecord> sorted, int k) {
  Subset subset;
  subset.groups.resize(static_cast<std::size_t>(k));
  const auto sizes = balanced_group_sizes(sorted.size(), k);
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    auto& group = subset.groups[g].examples;
    group.reserve(sizes[g]);
    for (std::size_t n = 0; n < sizes[g]; ++n, ++cursor) {
      sorted[cursor].group_id = static_cast<int>(g);
      group.push_back(std::move(sorted[cursor]));
    }
  }
  return subset;
}

}  // namespace

std::string to_string(GeneratorKind kind) {
  return kind == GeneratorKind::MarkovChain ? "markov-chain" : "template-grammar";
}

GeneratorKind generator_kind_from_string(const std::string& name) {
  if (name == "markov-chain") return GeneratorKind::MarkovChain;
  if (name == "template-grammar") return GeneratorKind::TemplateGrammar;
  fail(ErrorKind::InvalidConfig, "unknown generator kind '" + name + "'");
}

std::size_t Subset::size() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.examples.size();
  return n;
}

std::vector<ExampleRecord> Subset::flattened() const {
  std::vector<ExampleRecord> out;
  out.reserve(size());
  for (const auto& g : groups) out.insert(out.end(), g.examples.begin(), g.examples.end());
  return out;
}

const ExampleRecord& Subset::at(std::size_t flat_index) const {
  for (const auto& g : groups) {
    if (flat_index < g.examples.size()) return g.examples[flat_index];
    flat_index -= g.examples.size();
  }
  fail(ErrorKind::InvalidIndex, "example index out of range");
}

std::vector<std::size_t> MixtureCorpus::subset_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(subsets.size());
  for (const auto& s : subsets) sizes.push_back(s.size());
  return sizes;
}

bool MixtureCorpus::is_partitioned() const {
  if (subsets.empty()) return false;
  const std::size_t k = subsets.front().groups.size();
  for (const auto& s : subsets) {
    if (s.groups.size() != k) return false;
    for (std::size_t g = 0; g < s.groups.size(); ++g) {
      if (s.groups[g].examples.empty()) return false;
      for (const auto& ex : s.groups[g].examples)
        if (!ex.group_id || *ex.group_id != static_cast<int>(g)) return false;
    }
  }
  return true;
}

std::size_t MixtureCorpus::group_count() const {
  return subsets.empty() ? 0 : subsets.front().groups.size();
}

std::size_t MixtureCorpus::total_examples() const {
  std::size_t n = 0;
  for (const auto& s : subsets) n += s.size();
  return n;
}

MixtureCorpus generate_synthetic_mixture(std::span<const SubsetSpec> specs, int vocab_size, std::uint64_t seed) {
  require(!specs.empty(), ErrorKind::InvalidConfig, "at least one subset spec is required");
  require(vocab_size >= 2, ErrorKind::InvalidConfig, "vocab_size must be >= 2");
  for (std::size_t i = 0; i < specs.size(); ++i) validate_spec(specs[i], i);

  MixtureCorpus corpus;
  corpus.vocab_size = vocab_size;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Rng structure_rng = make_rng(seed, "subset-structure-" + std::to_string(i));
    Rng data_rng = make_rng(seed, "subset-data-" + std::to_string(i));
    const SubsetProcess process = build_process(specs[i], vocab_size, structure_rng);
    std::vector<ExampleRecord> examples;
    examples.reserve(specs[i].size);
    for (std::size_t n = 0; n < specs[i].size; ++n)
      examples.push_back(draw_example(specs[i], process, vocab_size, static_cast<int>(i), data_rng));
    corpus.subsets.push_back(single_group(std::move(examples)));
  }
  return corpus;
}

std::vector<std::size_t> balanced_group_sizes(std::size_t n, int k) {
  require(k >= 1, ErrorKind::InvalidConfig, "group count must be >= 1");
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::size_t> sizes(kk, n / kk);
  for (std::size_t g = 0; g < n % kk; ++g) ++sizes[g];
  return sizes;
}

MixtureCorpus partition_by_difficulty(const MixtureCorpus& corpus, const std::vector<std::vector<double>>& scores,
                                      int k) {
  require(k >= 1, ErrorKind::InvalidConfig, "group count must be >= 1");
  require(scores.size() == corpus.subsets.size(), ErrorKind::InvalidConfig, "one score list per subset is required");

  MixtureCorpus out;
  out.vocab_size = corpus.vocab_size;
  for (std::size_t i = 0; i < corpus.subsets.size(); ++i) {
    std::vector<ExampleRecord> examples = corpus.subsets[i].flattened();
    require(examples.size() >= static_cast<std::size_t>(k), ErrorKind::InvalidConfig,
            "subset " + std::to_string(i) + " has " + std::to_string(examples.size()) + " examples, fewer than " +
                std::to_string(k) + " groups");
    require(scores[i].size() == examples.size(), ErrorKind::InvalidConfig,
            "subset " + std::to_string(i) + ": score count does not match example count");
    for (double s : scores[i])
      require(std::isfinite(s) && s >= 0.0, ErrorKind::InvalidConfig, "difficulty scores must be finite and >= 0");

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[i][a] < scores[i][b]; });
    std::vector<ExampleRecord> sorted;
    sorted.reserve(examples.size());
    for (std::size_t idx : order) {
      sorted.push_back(std::move(examples[idx]));
      sorted.back().difficulty = scores[i][idx];
    }
    out.subsets.push_back(regroup(std::move(sorted), k));
  }
  return out;
}

std::vector<double> temperature_distribution(std::span<const std::size_t> sizes, double tau) {
  require(!sizes.empty(), ErrorKind::InvalidConfig, "at least one size is required");
  for (std::size_t s : sizes) require(s > 0, ErrorKind::InvalidConfig, "sizes must be positive");
  require(tau > 0.0, ErrorKind::InvalidConfig, "temperature must be > 0");  // also rejects NaN

  const std::size_t n = sizes.size();
  if (std::isinf(tau)) return std::vector<double>(n, 1.0 / static_cast<double>(n));

  const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0,
                                       [](double acc, std::size_t s) { return acc + static_cast<double>(s); });
  std::vector<double> out(n);
  if (tau == 1.0) {
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(sizes[i]) / total;
    return out;
  }
  // Log space keeps q^(1/tau) representable for small tau.
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::log(static_cast<double>(sizes[i]) / total) / tau;
    max_log = std::max(max_log, out[i]);
  }
  double norm = 0.0;
  for (double& v : out) {
    v = std::exp(v - max_log);
    norm += v;
  }
  for (double& v : out) v /= norm;
  return out;
}

CorpusSplit split_heldout(const MixtureCorpus& corpus, double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction < 1.0, ErrorKind::InvalidConfig, "heldout fraction must lie in [0, 1)");
  CorpusSplit split;
  split.train.vocab_size = corpus.vocab_size;
  split.heldout.vocab_size = corpus.vocab_size;
  for (std::size_t i = 0; i < corpus.subsets.size(); ++i) {
    std::vector<ExampleRecord> examples = corpus.subsets[i].flattened();
    for (auto& ex : examples) {
      ex.group_id.reset();
      ex.difficulty.reset();
    }
    Rng rng = make_rng(seed, "heldout-" + std::to_string(i));
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t a = order.size(); a > 1; --a) std::swap(order[a - 1], order[uniform_index(rng, a)]);
    const auto n_heldout = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(examples.size())));
    std::vector<bool> is_heldout(examples.size(), false);
    for (std::size_t n = 0; n < n_heldout; ++n) is_heldout[order[n]] = true;

    std::vector<ExampleRecord> train, heldout;
    for (std::size_t n = 0; n < examples.size(); ++n)
      (is_heldout[n] ? heldout : train).push_back(std::move(examples[n]));
    split.train.subsets.push_back(single_group(std::move(train)));
    split.heldout.subsets.push_back(single_group(std::move(heldout)));
  }
  return split;
}

MixtureCorpus discard_easiest(const MixtureCorpus& corpus, double fraction) {
  require(corpus.is_partitioned(), ErrorKind::InvalidState, "discarding easy examples needs a partitioned corpus");
  require(fraction >= 0.0 && fraction < 1.0, ErrorKind::InvalidConfig, "discard fraction must lie in [0, 1)");
  const int k = static_cast<int>(corpus.group_count());
  MixtureCorpus out;
  out.vocab_size = corpus.vocab_size;
  for (std::size_t i = 0; i < corpus.subsets.size(); ++i) {
    std::vector<ExampleRecord> sorted = corpus.subsets[i].flattened();
    const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(sorted.size())));
    sorted.erase(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(drop));
    require(sorted.size() >= static_cast<std::size_t>(k), ErrorKind::InvalidConfig,
            "subset " + std::to_string(i) + " keeps fewer examples than groups after discarding");
    out.subsets.push_back(regroup(std::move(sorted), k));
  }
  return out;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json example_json(const ExampleRecord& ex, const char* split) {
  ordered_json j;
  j["split"] = split;
  j["subset"] = ex.subset_id;
  j["group"] = ex.group_id ? ordered_json(*ex.group_id) : ordered_json(nullptr);
  j["difficulty"] = ex.difficulty ? ordered_json(*ex.difficulty) : ordered_json(nullptr);
  j["instruction"] = ex.instruction;
  j["response"] = ex.response;
  return j;
}

std::size_t header_group_count(const MixtureCorpus& corpus) {
  return corpus.is_partitioned() ? corpus.group_count() : 0;
}

}  // namespace

void write_corpus(std::ostream& out, const MixtureCorpus& train, const MixtureCorpus* heldout) {
  ordered_json header;
  header["format"] = "hbo-corpus";
  header["version"] = 1;
  header["vocab_size"] = train.vocab_size;
  header["subsets"] = train.subsets.size();
  header["groups"] = header_group_count(train);
  out << header.dump() << '\n';
  for (const auto& subset : train.subsets)
    for (const auto& group : subset.groups)
      for (const auto& ex : group.examples) out << example_json(ex, "train").dump() << '\n';
  if (heldout != nullptr)
    for (const auto& subset : heldout->subsets)
      for (const auto& group : subset.groups)
        for (const auto& ex : group.examples) out << example_json(ex, "heldout").dump() << '\n';
}

CorpusSplit read_corpus(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto parse = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Io, "corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  };

  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Io, "corpus file is empty");
  ++line_no;
  const auto header = parse(line);
  require(header.value("format", "") == "hbo-corpus", ErrorKind::Io, "corpus line 1: not an hbo-corpus header");
  require(header.value("version", 0) == 1, ErrorKind::Io, "corpus line 1: unsupported version");

  CorpusSplit split;
  const int vocab = header.at("vocab_size").get<int>();
  const auto n_subsets = header.at("subsets").get<std::size_t>();
  const auto n_groups = header.at("groups").get<std::size_t>();
  split.train.vocab_size = vocab;
  split.heldout.vocab_size = vocab;
  split.train.subsets.resize(n_subsets);
  split.heldout.subsets.resize(n_subsets);
  for (auto& s : split.train.subsets) s.groups.resize(std::max<std::size_t>(n_groups, 1));
  for (auto& s : split.heldout.subsets) s.groups.resize(1);

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = parse(line);
    const std::string where = "corpus line " + std::to_string(line_no) + ": ";
    try {
      ExampleRecord ex;
      ex.subset_id = j.at("subset").get<int>();
      if (!j.at("group").is_null()) ex.group_id = j.at("group").get<int>();
      if (!j.at("difficulty").is_null()) ex.difficulty = j.at("difficulty").get<double>();
      ex.instruction = j.at("instruction").get<TokenSeq>();
      ex.response = j.at("response").get<TokenSeq>();
      require(ex.subset_id >= 0 && static_cast<std::size_t>(ex.subset_id) < n_subsets, ErrorKind::Io,
              where + "subset id out of range");
      for (const TokenSeq* seq : {&ex.instruction, &ex.response})
        for (Token t : *seq) require(t >= 0 && t < vocab, ErrorKind::Io, where + "token out of range");
      const bool is_train = j.at("split").get<std::string>() == "train";
      auto& subset = (is_train ? split.train : split.heldout).subsets[static_cast<std::size_t>(ex.subset_id)];
      std::size_t g = 0;
      if (is_train && n_groups > 0) {
        require(ex.group_id && *ex.group_id >= 0 && static_cast<std::size_t>(*ex.group_id) < n_groups, ErrorKind::Io,
                where + "group id out of range");
        g = static_cast<std::size_t>(*ex.group_id);
      }
      subset.groups[g].examples.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Io, where + e.what());
    }
  }
  return split;
}

std::string corpus_fingerprint(const MixtureCorpus& corpus) {
  std::ostringstream text;
  write_corpus(text, corpus, nullptr);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hbo
