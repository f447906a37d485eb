#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hbo {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

/// One instruction/response pair.
struct ExampleRecord {
  TokenSeq instruction;
  TokenSeq response;
  int subset_id = 0;
  std::optional<int> group_id;
  std::optional<double> difficulty;
  /// Noise-mixing coefficient the generator used for the response. Not part
  /// of the serialized record; kept for diagnostics only.
  double noise_level = 0.0;

  bool operator==(const ExampleRecord&) const = default;
};

enum class GeneratorKind { MarkovChain, TemplateGrammar };

std::string to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& name);

struct SubsetSpec {
  GeneratorKind kind = GeneratorKind::MarkovChain;
  /// Spread of each transition row in (0, 1]: 1 means fully random rows,
  /// small values approach a deterministic successor.
  double transition_entropy = 0.3;
  std::size_t size = 1000;
  /// Per-example noise level is drawn from U(0, noise_spread), clamped to 1.
  double noise_spread = 0.5;
  int instruction_min = 4;
  int instruction_max = 8;
  int response_min = 6;
  int response_max = 12;
};

struct Group {
  std::vector<ExampleRecord> examples;

  bool operator==(const Group&) const = default;
};

struct Subset {
  std::vector<Group> groups;

  std::size_t size() const;
  /// All examples in group order.
  std::vector<ExampleRecord> flattened() const;
  const ExampleRecord& at(std::size_t flat_index) const;

  bool operator==(const Subset&) const = default;
};

/// Hierarchical training set: subsets, each divided into difficulty groups.
/// Before partitioning every subset holds a single group whose examples have
/// no group id.
struct MixtureCorpus {
  int vocab_size = 0;
  std::vector<Subset> subsets;

  std::size_t subset_count() const { return subsets.size(); }
  std::vector<std::size_t> subset_sizes() const;
  /// True when every example carries a group id and all subsets have the
  /// same group count.
  bool is_partitioned() const;
  std::size_t group_count() const;
  std::size_t total_examples() const;

  bool operator==(const MixtureCorpus&) const = default;
};

MixtureCorpus generate_synthetic_mixture(std::span<const SubsetSpec> specs, int vocab_size,
                                         std::uint64_t seed);

/// Sorts each subset ascending by score (stable on the current order) and
/// splits it into k contiguous groups whose sizes differ by at most one.
/// Group 0 holds the easiest examples. `scores[i]` lists one score per
/// example of subset i in flattened order.
MixtureCorpus partition_by_difficulty(const MixtureCorpus& corpus,
                                      const std::vector<std::vector<double>>& scores, int k);

/// Sizes of k balanced contiguous groups over n items, larger groups first.
std::vector<std::size_t> balanced_group_sizes(std::size_t n, int k);

inline constexpr double kInfiniteTemperature = std::numeric_limits<double>::infinity();

/// Temperature-adjusted static sampling distribution over subsets. Pass
/// kInfiniteTemperature for the exact uniform vector.
std::vector<double> temperature_distribution(std::span<const std::size_t> sizes, double tau);

/// Withholds `fraction` of each subset (chosen uniformly with `seed`) into a
/// held-out corpus. Both outputs are unpartitioned.
struct CorpusSplit {
  MixtureCorpus train;
  MixtureCorpus heldout;
};
CorpusSplit split_heldout(const MixtureCorpus& corpus, double fraction, std::uint64_t seed);

/// Removes the lowest-difficulty `fraction` of every subset. The corpus must
/// be partitioned; the result is regrouped into the same number of groups.
MixtureCorpus discard_easiest(const MixtureCorpus& corpus, double fraction);

// Line-delimited corpus files.
//
// Line 1 is a header object:
//   {"format":"hbo-corpus","version":1,"vocab_size":V,"subsets":N,"groups":K}
// Each following line is one example with fields in this exact order:
//   {"split":"train"|"heldout","subset":i,"group":j|null,
//    "difficulty":d|null,"instruction":[...],"response":[...]}
// Train examples come first, in subset then group order.
void write_corpus(std::ostream& out, const MixtureCorpus& train, const MixtureCorpus* heldout);
CorpusSplit read_corpus(std::istream& in);

/// FNV-1a fingerprint of the serialized train corpus, used to check that
/// runs being compared saw identical data.
std::string corpus_fingerprint(const MixtureCorpus& corpus);

}  // namespace hbo
