#include <doctest.h>

#include <cmath>

#include "hbo/actor.hpp"
#include "hbo/error.hpp"
#include "hbo/mixture.hpp"
#include "support.hpp"

using namespace hbo;

namespace {

double log_prob(const ActorNetwork& a, std::size_t unit) { return std::log(actor_distribution(a)[unit]); }

// Actor with non-trivial weights everywhere, so every gradient block matters.
ActorNetwork random_actor(std::size_t units, std::uint64_t seed) {
  ActorConfig cfg;
  cfg.hidden_dim = 6;
  cfg.init_scale = 0.7;
  ActorNetwork a(one_hot_features(units), cfg, seed);
  Rng rng(seed ^ 0xabcdefull);
  for (double& p : a.parameters()) p += 0.5 * standard_normal(rng);
  return a;
}

}  // namespace

TEST_CASE("softmax examples") {
  const std::vector<double> logits{0.0, std::log(3.0)};
  const auto p = softmax_distribution(logits);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));

  const std::vector<double> equal{2.0, 2.0, 2.0, 2.0};
  for (double x : softmax_distribution(equal).probabilities) CHECK(x == 0.25);

  const std::vector<double> z{0.3, -1.2, 2.5};
  const std::vector<double> shifted{100.3, 98.8, 102.5};
  const auto a = softmax_distribution(z), b = softmax_distribution(shifted);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

  const std::vector<double> extreme{0.0, -2000.0};
  CHECK(softmax_distribution(extreme)[1] >= 0.0);
}

TEST_CASE("prior initialization reproduces temperature sampling") {
  const std::vector<std::vector<std::size_t>> grid{{100, 300, 600}, {10000, 2000, 500}, {1, 1}, {7}, {5, 50, 500, 5000}};
  for (const auto& sizes : grid) {
    for (double tau : {0.5, 1.0, 2.0, 10.0, kInfiniteTemperature}) {
      const auto actor = init_actor_from_prior(sizes, tau, 3);
      const auto p = actor_distribution(actor);
      const auto q = temperature_distribution(sizes, tau);
      for (std::size_t i = 0; i < q.size(); ++i) CHECK(std::abs(p[i] - q[i]) < 1e-6);
    }
  }
  const std::vector<std::size_t> one{42};
  CHECK(actor_distribution(init_actor_from_prior(one, 1.0, 1)).probabilities == std::vector<double>{1.0});
  const std::vector<std::size_t> bad{0, 3};
  CHECK_THROWS_AS(init_actor_from_prior(bad, 1.0, 1), Error);
}

TEST_CASE("actor distribution is strictly positive and normalized") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = random_actor(2 + seed % 7, seed);
    double sum = 0.0;
    for (double p : actor_distribution(a).probabilities) {
      CHECK(p > 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("sampling") {
  SUBCASE("single unit never consumes randomness") {
    Rng rng(1), untouched(1);
    const SamplingDistribution one{{1.0}};
    for (int i = 0; i < 10; ++i) CHECK(sample_index(one, rng) == 0);
    CHECK(rng() == untouched());
  }
  SUBCASE("fair coin frequencies") {
    Rng rng(99);
    const SamplingDistribution coin{{0.5, 0.5}};
    int zeros = 0;
    for (int i = 0; i < 100000; ++i) zeros += sample_index(coin, rng) == 0;
    CHECK(zeros >= 49000);
    CHECK(zeros <= 51000);
  }
  SUBCASE("frequencies converge") {
    Rng rng(5);
    const SamplingDistribution d{{0.1, 0.2, 0.05, 0.65}};
    std::vector<int> counts(4);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++counts[sample_index(d, rng)];
    for (std::size_t u = 0; u < 4; ++u) CHECK(std::abs(counts[u] / double(n) - d[u]) < 0.01);
  }
  SUBCASE("seeded sequence repeats") {
    Rng a(7), b(7);
    const SamplingDistribution d{{0.3, 0.3, 0.4}};
    for (int i = 0; i < 1000; ++i) CHECK(sample_index(d, a) == sample_index(d, b));
  }
}

TEST_CASE("log-prob gradient matches central differences") {
  for (std::size_t units : {2u, 4u, 8u}) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      auto a = random_actor(units, 100 * units + seed);
      const std::size_t unit = seed % units;
      const auto analytic = log_prob_gradient(a, unit);
      const auto numeric = test::central_differences(a.parameters(), [&] { return log_prob(a, unit); });
      CHECK(test::max_relative_error(analytic, numeric) < 1e-4);
    }
  }
}

TEST_CASE("log-prob gradient edge cases") {
  const std::vector<std::size_t> one{5};
  const auto single = init_actor_from_prior(one, 1.0, 1);
  for (double g : log_prob_gradient(single, 0)) CHECK(g == 0.0);
  const auto a = random_actor(3, 1);
  try {
    log_prob_gradient(a, 3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidIndex);
  }
}

TEST_CASE("score-function identity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_actor(2 + seed % 6, seed);
    const auto p = actor_distribution(a);
    std::vector<double> total(a.parameters().size(), 0.0);
    for (std::size_t u = 0; u < p.size(); ++u) {
      const auto g = log_prob_gradient(a, u);
      for (std::size_t k = 0; k < g.size(); ++k) total[k] += p[u] * g[k];
    }
    for (double t : total) CHECK(std::abs(t) < 1e-6);
  }
}

TEST_CASE("reinforce update") {
  SUBCASE("zero rewards leave the actor unchanged") {
    auto a = random_actor(4, 3);
    const std::vector<double> before(a.parameters().begin(), a.parameters().end());
    const std::vector<double> zero(4, 0.0);
    reinforce_update(a, zero);
    CHECK(std::vector<double>(a.parameters().begin(), a.parameters().end()) == before);
  }
  SUBCASE("rewarded unit gains probability") {
    const std::vector<std::size_t> sizes{1, 1};
    ActorConfig cfg;
    cfg.learning_rate = 1e-3;
    auto a = init_actor_from_prior(sizes, 1.0, 1, cfg);
    const double before = actor_distribution(a)[0];
    const std::vector<double> r{1.0, 0.0};
    reinforce_update(a, r);
    CHECK(actor_distribution(a)[0] > before);
  }
  SUBCASE("equal rewards on a uniform actor leave the distribution unchanged") {
    const std::vector<std::size_t> sizes{10, 200, 3000, 7};
    ActorConfig cfg;
    cfg.learning_rate = 1e-3;
    auto a = init_actor_from_prior(sizes, kInfiniteTemperature, 2, cfg);
    const auto before = actor_distribution(a);
    const std::vector<double> r(4, 2.5);
    reinforce_update(a, r);
    const auto after = actor_distribution(a);
    for (std::size_t u = 0; u < 4; ++u) CHECK(std::abs(after[u] - before[u]) < 1e-6);
  }
  SUBCASE("centered rewards make equal rewards a no-op for any prior") {
    const std::vector<std::size_t> sizes{10, 200, 3000};
    ActorConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.center_rewards = true;
    auto a = init_actor_from_prior(sizes, 1.0, 2, cfg);
    const auto before = actor_distribution(a);
    const std::vector<double> r(3, 4.0);
    reinforce_update(a, r);
    const auto after = actor_distribution(a);
    for (std::size_t u = 0; u < 3; ++u) CHECK(std::abs(after[u] - before[u]) < 1e-12);
  }
  SUBCASE("update equals the accumulated score-function step") {
    auto a = random_actor(3, 8);
    const std::vector<double> r{0.7, -0.2, 1.3};
    std::vector<double> expected(a.parameters().begin(), a.parameters().end());
    for (std::size_t u = 0; u < 3; ++u) {
      const auto g = log_prob_gradient(a, u);
      for (std::size_t k = 0; k < g.size(); ++k) expected[k] += a.config().learning_rate * r[u] * g[k];
    }
    reinforce_update(a, r);
    for (std::size_t k = 0; k < expected.size(); ++k)
      CHECK(a.parameters()[k] == doctest::Approx(expected[k]).epsilon(1e-12));
  }
  SUBCASE("invalid rewards") {
    auto a = random_actor(3, 1);
    const std::vector<double> nan_reward{0.0, std::nan(""), 1.0};
    const std::vector<double> wrong_length{1.0};
    try {
      reinforce_update(a, nan_reward);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidReward);
    }
    CHECK_THROWS_AS(reinforce_update(a, wrong_length), Error);
  }
}

TEST_CASE("monotone response to an indicator reward") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t units = 2 + seed % 7;
    auto base = random_actor(units, seed);
    for (double lr : {1e-4, 1e-3, 1e-2}) {
      for (std::size_t u = 0; u < units; ++u) {
        ActorConfig cfg = base.config();
        cfg.learning_rate = lr;
        ActorNetwork a(base.features(), cfg, 0);
        std::copy(base.parameters().begin(), base.parameters().end(), a.parameters().begin());
        const double before = actor_distribution(a)[u];
        std::vector<double> r(units, 0.0);
        r[u] = 1.0;
        reinforce_update(a, r);
        CHECK(actor_distribution(a)[u] >= before);
      }
    }
  }
}

TEST_CASE("actor json round trip") {
  const auto a = random_actor(5, 12);
  const auto back = actor_from_json(nlohmann::json::parse(actor_to_json(a).dump()));
  CHECK(back.unit_count() == 5);
  CHECK(std::vector<double>(back.parameters().begin(), back.parameters().end()) ==
        std::vector<double>(a.parameters().begin(), a.parameters().end()));
  CHECK(actor_distribution(back).probabilities == actor_distribution(a).probabilities);
}
