#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hbo/error.hpp"
#include "hbo/mixture.hpp"
#include "support.hpp"

using namespace hbo;
using hbo::test::small_spec;

namespace {

// One unpartitioned subset whose k-th example carries response token k.
MixtureCorpus numbered_corpus(std::size_t n) {
  MixtureCorpus c;
  c.vocab_size = static_cast<int>(n) + 1;
  Group g;
  for (std::size_t i = 0; i < n; ++i) g.examples.push_back(test::example({0}, {static_cast<Token>(i)}));
  c.subsets.push_back(Subset{{g}});
  return c;
}

std::vector<Token> group_tokens(const Group& g) {
  std::vector<Token> out;
  for (const auto& e : g.examples) out.push_back(e.response.front());
  return out;
}

// q_tau evaluated directly from its definition.
std::vector<double> direct_temperature(const std::vector<std::size_t>& sizes, double tau) {
  double total = 0.0;
  for (auto s : sizes) total += static_cast<double>(s);
  std::vector<double> w;
  double z = 0.0;
  for (auto s : sizes) {
    const double v = std::isinf(tau) ? 1.0 : std::pow(static_cast<double>(s) / total, 1.0 / tau);
    w.push_back(v);
    z += v;
  }
  for (auto& v : w) v /= z;
  return w;
}

}  // namespace

TEST_CASE("generator honours sizes and vocabulary") {
  const std::vector<SubsetSpec> specs{small_spec(100)};
  const auto c = generate_synthetic_mixture(specs, 8, 7);
  REQUIRE(c.subset_count() == 1);
  CHECK(c.subsets[0].size() == 100);
  CHECK_FALSE(c.is_partitioned());
  for (const auto& e : c.subsets[0].flattened()) {
    CHECK(!e.instruction.empty());
    CHECK(!e.response.empty());
    CHECK(e.subset_id == 0);
    CHECK_FALSE(e.group_id.has_value());
    for (Token t : e.instruction) CHECK((t >= 0 && t < 8));
    for (Token t : e.response) CHECK((t >= 0 && t < 8));
  }
}

TEST_CASE("generator is deterministic per seed") {
  const std::vector<SubsetSpec> specs{small_spec(60), small_spec(40, GeneratorKind::TemplateGrammar)};
  const auto a = generate_synthetic_mixture(specs, 16, 7);
  const auto b = generate_synthetic_mixture(specs, 16, 7);
  const auto c = generate_synthetic_mixture(specs, 16, 8);
  std::ostringstream sa, sb;
  write_corpus(sa, a, nullptr);
  write_corpus(sb, b, nullptr);
  CHECK(sa.str() == sb.str());
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("noise level varies within a subset") {
  auto spec = small_spec(200);
  spec.noise_spread = 0.8;
  const std::vector<SubsetSpec> specs{spec};
  const auto c = generate_synthetic_mixture(specs, 16, 3);
  std::set<double> levels;
  for (const auto& e : c.subsets[0].flattened()) {
    CHECK(e.noise_level >= 0.0);
    CHECK(e.noise_level <= 1.0);
    levels.insert(e.noise_level);
  }
  CHECK(levels.size() > 100);
}

TEST_CASE("generator rejects invalid specs") {
  std::vector<SubsetSpec> empty;
  CHECK_THROWS_AS(generate_synthetic_mixture(empty, 8, 1), Error);
  std::vector<SubsetSpec> zero{small_spec(0)};
  try {
    generate_synthetic_mixture(zero, 8, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
  }
  std::vector<SubsetSpec> ok{small_spec(10)};
  CHECK_THROWS_AS(generate_synthetic_mixture(ok, 1, 1), Error);
}

TEST_CASE("partition into sorted quartiles") {
  const auto c = numbered_corpus(8);
  // scores out of order: example i has score perm[i]
  const std::vector<double> scores{5, 1, 8, 3, 2, 7, 4, 6};
  const auto p = partition_by_difficulty(c, {scores}, 4);
  REQUIRE(p.subsets[0].groups.size() == 4);
  CHECK(p.is_partitioned());
  // tokens of examples with scores {1,2}, {3,4}, {5,6}, {7,8}
  CHECK(group_tokens(p.subsets[0].groups[0]) == std::vector<Token>{1, 4});
  CHECK(group_tokens(p.subsets[0].groups[1]) == std::vector<Token>{3, 6});
  CHECK(group_tokens(p.subsets[0].groups[2]) == std::vector<Token>{0, 7});
  CHECK(group_tokens(p.subsets[0].groups[3]) == std::vector<Token>{5, 2});
  for (int j = 0; j < 4; ++j)
    for (const auto& e : p.subsets[0].groups[static_cast<std::size_t>(j)].examples) {
      CHECK(e.group_id == j);
      CHECK(e.difficulty.has_value());
    }
}

TEST_CASE("partition with one group keeps sorted order") {
  const auto c = numbered_corpus(5);
  const auto p = partition_by_difficulty(c, {{3, 1, 2, 5, 4}}, 1);
  REQUIRE(p.subsets[0].groups.size() == 1);
  CHECK(group_tokens(p.subsets[0].groups[0]) == std::vector<Token>{1, 2, 0, 4, 3});
}

TEST_CASE("balanced group sizes") {
  CHECK(balanced_group_sizes(10, 4) == std::vector<std::size_t>{3, 3, 2, 2});
  CHECK(balanced_group_sizes(8, 4) == std::vector<std::size_t>{2, 2, 2, 2});
  CHECK(balanced_group_sizes(17, 16).front() == 2);
  const auto c = numbered_corpus(10);
  const auto p = partition_by_difficulty(c, {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, 4);
  std::vector<std::size_t> sizes;
  for (const auto& g : p.subsets[0].groups) sizes.push_back(g.examples.size());
  CHECK(sizes == std::vector<std::size_t>{3, 3, 2, 2});
}

TEST_CASE("partition ties are broken by example index") {
  const auto c = numbered_corpus(6);
  const auto p = partition_by_difficulty(c, {{1, 0, 1, 0, 1, 0}}, 2);
  CHECK(group_tokens(p.subsets[0].groups[0]) == std::vector<Token>{1, 3, 5});
  CHECK(group_tokens(p.subsets[0].groups[1]) == std::vector<Token>{0, 2, 4});
}

TEST_CASE("partition rejects subsets smaller than k and bad scores") {
  const auto c = numbered_corpus(3);
  CHECK_THROWS_AS(partition_by_difficulty(c, {{1, 2, 3}}, 4), Error);
  CHECK_THROWS_AS(partition_by_difficulty(c, {{1, 2}}, 2), Error);
  CHECK_THROWS_AS(partition_by_difficulty(c, {{1, 2, 3}}, 0), Error);
}

TEST_CASE("partition property: union, balance, ordering") {
  Rng rng(11);
  const std::vector<SubsetSpec> specs{small_spec(97), small_spec(40)};
  const auto c = generate_synthetic_mixture(specs, 8, 5);
  for (int k : {1, 2, 4, 8, 16}) {
    std::vector<std::vector<double>> scores;
    for (const auto& s : c.subsets) {
      auto& v = scores.emplace_back();
      // few distinct values so ties occur
      for (std::size_t i = 0; i < s.size(); ++i) v.push_back(static_cast<double>(uniform_index(rng, 7)));
    }
    const auto p = partition_by_difficulty(c, scores, k);
    CHECK(p.group_count() == static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < c.subsets.size(); ++i) {
      const auto& groups = p.subsets[i].groups;
      std::size_t lo = SIZE_MAX, hi = 0, total = 0;
      for (const auto& g : groups) {
        lo = std::min(lo, g.examples.size());
        hi = std::max(hi, g.examples.size());
        total += g.examples.size();
      }
      CHECK(total == c.subsets[i].size());
      CHECK(hi - lo <= 1);
      for (std::size_t j = 0; j + 1 < groups.size(); ++j) {
        double max_here = 0.0, min_next = 1e300;
        for (const auto& e : groups[j].examples) max_here = std::max(max_here, *e.difficulty);
        for (const auto& e : groups[j + 1].examples) min_next = std::min(min_next, *e.difficulty);
        CHECK(max_here <= min_next);
      }
      auto original = c.subsets[i].flattened();
      auto regrouped = p.subsets[i].flattened();
      for (auto& e : regrouped) {
        e.group_id.reset();
        e.difficulty.reset();
      }
      auto key = [](const ExampleRecord& e) { return std::make_pair(e.instruction, e.response); };
      std::vector<std::pair<TokenSeq, TokenSeq>> a, b;
      for (const auto& e : original) a.push_back(key(e));
      for (const auto& e : regrouped) b.push_back(key(e));
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
}

TEST_CASE("temperature distribution examples") {
  const std::vector<std::size_t> sizes{100, 300, 600};
  const auto p1 = temperature_distribution(sizes, 1.0);
  CHECK(p1[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(p1[1] == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(p1[2] == doctest::Approx(0.6).epsilon(1e-14));

  const auto pinf = temperature_distribution(sizes, kInfiniteTemperature);
  for (double p : pinf) CHECK(p == 1.0 / 3.0);

  // sqrt(100), sqrt(300), sqrt(600), normalized
  const double z = 10.0 + std::sqrt(300.0) + std::sqrt(600.0);
  const auto p2 = temperature_distribution(sizes, 2.0);
  CHECK(std::abs(p2[0] - 10.0 / z) < 1e-12);
  CHECK(std::abs(p2[1] - std::sqrt(300.0) / z) < 1e-12);
  CHECK(std::abs(p2[2] - std::sqrt(600.0) / z) < 1e-12);
  CHECK(p2[0] == doctest::Approx(0.1930).epsilon(3e-4));
  CHECK(p2[1] == doctest::Approx(0.3343).epsilon(3e-4));
  CHECK(p2[2] == doctest::Approx(0.4727).epsilon(3e-4));
}

TEST_CASE("temperature distribution rejects bad input") {
  const std::vector<std::size_t> ok{1, 2};
  const std::vector<std::size_t> zero{1, 0};
  const std::vector<std::size_t> empty;
  CHECK_THROWS_AS(temperature_distribution(ok, 0.0), Error);
  CHECK_THROWS_AS(temperature_distribution(ok, -1.0), Error);
  CHECK_THROWS_AS(temperature_distribution(ok, std::nan("")), Error);
  CHECK_THROWS_AS(temperature_distribution(zero, 1.0), Error);
  CHECK_THROWS_AS(temperature_distribution(empty, 1.0), Error);
}

TEST_CASE("temperature distribution property: normalized and entropy monotone in tau") {
  Rng rng(2024);
  const std::vector<double> taus{0.5, 1.0, 2.0, 5.0, 10.0, kInfiniteTemperature};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> sizes(1 + uniform_index(rng, 8));
    for (auto& s : sizes) s = 1 + uniform_index(rng, 20000);
    double previous = -1.0;
    for (double tau : taus) {
      const auto p = temperature_distribution(sizes, tau);
      double sum = 0.0;
      for (double x : p) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
      const auto oracle = direct_temperature(sizes, tau);
      for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - oracle[i]) < 1e-12);
      const double h = test::entropy(p);
      CHECK(h >= previous - 1e-12);
      previous = h;
    }
  }
}

TEST_CASE("held-out split withholds a fraction of every subset") {
  const std::vector<SubsetSpec> specs{small_spec(100), small_spec(30)};
  const auto c = generate_synthetic_mixture(specs, 8, 9);
  const auto split = split_heldout(c, 0.1, 9);
  CHECK(split.train.subsets[0].size() == 90);
  CHECK(split.heldout.subsets[0].size() == 10);
  CHECK(split.train.subsets[1].size() == 27);
  CHECK(split.heldout.subsets[1].size() == 3);
  const auto again = split_heldout(c, 0.1, 9);
  CHECK(again.train == split.train);
  CHECK(again.heldout == split.heldout);
  CHECK_THROWS_AS(split_heldout(c, 1.0, 9), Error);
}

TEST_CASE("discarding the easiest fraction keeps the hardest examples") {
  const auto c = numbered_corpus(8);
  const auto p = partition_by_difficulty(c, {{8, 7, 6, 5, 4, 3, 2, 1}}, 2);
  const auto kept = discard_easiest(p, 0.5);
  CHECK(kept.subsets[0].size() == 4);
  CHECK(kept.group_count() == 2);
  std::set<Token> tokens;
  for (const auto& e : kept.subsets[0].flattened()) tokens.insert(e.response.front());
  CHECK(tokens == std::set<Token>{0, 1, 2, 3});
  CHECK_THROWS_AS(discard_easiest(p, 1.0), Error);
  CHECK_THROWS_AS(discard_easiest(c, 0.5), Error);
}

TEST_CASE("corpus file round trip") {
  const std::vector<SubsetSpec> specs{small_spec(40), small_spec(24)};
  const auto c = generate_synthetic_mixture(specs, 8, 4);
  const auto split = split_heldout(c, 0.1, 4);
  std::vector<std::vector<double>> scores;
  for (const auto& s : split.train.subsets) {
    auto& v = scores.emplace_back();
    for (std::size_t i = 0; i < s.size(); ++i) v.push_back(static_cast<double>((i * 7) % 5) / 3.0);
  }
  const auto train = partition_by_difficulty(split.train, scores, 4);
  std::stringstream io;
  write_corpus(io, train, &split.heldout);
  const auto back = read_corpus(io);
  CHECK(back.train.vocab_size == 8);
  CHECK(back.train.group_count() == 4);
  CHECK(corpus_fingerprint(back.train) == corpus_fingerprint(train));
  CHECK(back.heldout.total_examples() == split.heldout.total_examples());
  for (std::size_t i = 0; i < train.subsets.size(); ++i) {
    const auto a = train.subsets[i].flattened();
    const auto b = back.train.subsets[i].flattened();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].instruction == b[k].instruction);
      CHECK(a[k].response == b[k].response);
      CHECK(a[k].group_id == b[k].group_id);
      CHECK(a[k].difficulty == b[k].difficulty);
    }
  }
}

TEST_CASE("corpus reader reports the failing line") {
  std::stringstream io;
  io << R"({"format":"hbo-corpus","version":1,"vocab_size":4,"subsets":1,"groups":0})" << '\n';
  io << R"({"split":"train","subset":0,"instruction":[1],"response":[9]})" << '\n';
  try {
    read_corpus(io);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
