#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "l2x/errors.hpp"
#include "l2x/sampling.hpp"

using namespace l2x;

namespace {

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_CASE("gumbel transform examples") {
  CHECK(gumbel_from_uniform(0.5) == doctest::Approx(-std::log(std::log(2.0))).epsilon(1e-15));
  CHECK(std::fabs(gumbel_from_uniform(0.5) - 0.36651) < 5e-6);
  // -log(-log(1e-12)) = -log(12 ln 10)
  const double at_clamp = -std::log(12.0 * std::log(10.0));
  CHECK(gumbel_from_uniform(1e-12) == doctest::Approx(at_clamp).epsilon(1e-13));
  CHECK(gumbel_from_uniform(0.0) == gumbel_from_uniform(1e-12));
  CHECK(std::fabs(gumbel_from_uniform(0.0) - (-3.3190)) < 1e-4);
  CHECK(std::isfinite(gumbel_from_uniform(1.0)));
  CHECK(gumbel_from_uniform(1.0) == gumbel_from_uniform(1.0 - 1e-12));
}

TEST_CASE("gumbel draws are reproducible and finite") {
  const GumbelNoise a = sample_gumbel(42, 3, 7);
  const GumbelNoise b = sample_gumbel(42, 3, 7);
  CHECK(a.values == b.values);
  CHECK(a.seed == 42);
  CHECK(a.values.all_finite());
  CHECK(a.values.shape() == Shape{3, 7});
  CHECK_FALSE(sample_gumbel(43, 3, 7).values == a.values);
}

TEST_CASE("gumbel sample mean matches the Euler-Mascheroni constant") {
  const GumbelNoise g = sample_gumbel(2024, 1000, 1000);
  const double mean = std::accumulate(g.values.values().begin(), g.values.values().end(), 0.0) / 1e6;
  CHECK(std::fabs(mean - 0.5772156649) < 0.01);
}

TEST_CASE("concrete vector examples") {
  const Tensor lw = Tensor::vector({0.3, 0.3, 0.3, 0.3});
  const Tensor zero = Tensor::vector({0, 0, 0, 0});
  const Tensor u = concrete_vector(lw, zero, 0.1);
  for (std::size_t i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-14));

  const Tensor c = concrete_vector(Tensor::vector({1, 0, 0}), Tensor::vector({0, 0, 0}), 1.0);
  const double e = std::exp(1.0);
  CHECK(c[0] == doctest::Approx(e / (e + 2.0)).epsilon(1e-15));
  CHECK(c[1] == doctest::Approx(1.0 / (e + 2.0)).epsilon(1e-15));
  CHECK(std::fabs(c[0] - 0.5761) < 5e-5);
  CHECK(std::fabs(c[1] - 0.2119) < 5e-5);
  CHECK(std::fabs(c[2] - 0.2119) < 5e-5);

  const Tensor lw2 = Tensor::vector({0.2, 1.0, -0.5});
  const Tensor g2 = Tensor::vector({0.1, -0.3, 0.4});
  const Tensor sharp = concrete_vector(lw2, g2, 1e-4);
  CHECK(argmax(sharp.values()) == 1);
  CHECK(sharp[1] > 0.999);

  CHECK_THROWS_AS(concrete_vector(lw2, g2, 0.0), ParameterError);
}

TEST_CASE("concrete vectors lie in the simplex interior and keep the perturbed argmax") {
  Rng rng(9);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    Tensor lw(Shape{6});
    for (auto& v : lw.values()) v = n(rng);
    const Tensor g = sample_gumbel(rng, {6});
    Tensor perturbed = lw;
    for (std::size_t i = 0; i < 6; ++i) perturbed[i] += g[i];
    for (double tau : {0.01, 0.1, 1.0, 10.0}) {
      const Tensor c = concrete_vector(lw, g, tau);
      const double total = std::accumulate(c.values().begin(), c.values().end(), 0.0);
      CHECK(std::fabs(total - 1.0) < 1e-9);
      if (tau >= 0.1) {
        for (double v : c.values()) CHECK(v > 0.0);
      }
      CHECK(argmax(c.values()) == argmax(perturbed.values()));
    }
  }
}

TEST_CASE("relaxed mask examples") {
  SamplerConfig one{1, 0.5, 4};
  const Tensor lw = Tensor::vector({0.1, -0.2, 0.7, 0.0});
  const GumbelNoise g = sample_gumbel(5, 1, 4);
  const RelaxedMask m = relaxed_subset_mask(lw, g, one);
  CHECK(m.values == concrete_vector(lw, g.values.reshaped({4}), 0.5));

  // k = d with distinct rows each favouring a different feature.
  SamplerConfig all{3, 1e-4, 3};
  GumbelNoise spread{Tensor::matrix({{5, 0, 0}, {0, 5, 0}, {0, 0, 5}}), 0};
  const RelaxedMask full = relaxed_subset_mask(Tensor::vector({0, 0, 0}), spread, all);
  for (double v : full.values.values()) CHECK(v > 0.999);

  GumbelNoise wrong{Tensor(Shape{2, 3}), 0};
  CHECK_THROWS_AS(relaxed_subset_mask(Tensor::vector({0, 0, 0}), wrong, all), ContractError);
  CHECK_THROWS_AS(relaxed_subset_mask(Tensor::vector({0, 0, 0}), spread, SamplerConfig{4, 0.1, 3}),
                  ParameterError);
}

TEST_CASE("relaxed mask dominates each concrete row and has at most k entries above one half") {
  Rng rng(77);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::normal_distribution<double> n(0.0, 1.0);
    Tensor lw(Shape{5});
    for (auto& v : lw.values()) v = n(rng);
    const GumbelNoise g = sample_gumbel(seed, 2, 5);
    const RelaxedMask m = relaxed_subset_mask(lw, g, SamplerConfig{2, 0.1, 5});
    std::size_t above = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      // Open interval mathematically; saturates to exactly 1 in doubles at tau = 0.1.
      CHECK(m.values[i] >= 0.0);
      CHECK(m.values[i] <= 1.0);
      above += m.values[i] > 0.5 ? 1 : 0;
    }
    CHECK(above <= 2);
    for (std::size_t j = 0; j < 2; ++j) {
      const auto row = g.values.row(j);
      const Tensor c = concrete_vector(lw, Tensor(Shape{5}, std::vector<double>(row.begin(), row.end())), 0.1);
      for (std::size_t i = 0; i < 5; ++i) CHECK(m.values[i] >= c[i]);
    }
  }
}

TEST_CASE("argmax frequencies follow the categorical weights") {
  const std::vector<double> lw = {0.5, -1.0, 1.0, 0.0, -0.5};
  std::vector<double> counts(5, 0.0);
  Rng rng(123);
  const std::size_t draws = 20000;
  const Tensor weights = Tensor::vector(lw);
  for (std::size_t t = 0; t < draws; ++t) {
    const Tensor c = concrete_vector(weights, sample_gumbel(rng, {5}), 0.1);
    counts[argmax(c.values())] += 1.0;
  }
  // Frequencies are nondecreasing in the log-weight.
  std::vector<std::size_t> order(5);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lw[a] < lw[b]; });
  for (std::size_t i = 1; i < 5; ++i) CHECK(counts[order[i]] >= counts[order[i - 1]]);
  // And match exp(lw) / sum exp(lw).
  double z = 0.0;
  for (double v : lw) z += std::exp(v);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::fabs(counts[i] / draws - std::exp(lw[i]) / z) < 0.01);
}

TEST_CASE("gradient flows through the relaxed mask") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 0.5);
    Tensor lw(Shape{2, 5});
    for (auto& v : lw.values()) v = n(rng);
    const Tensor noise = sample_gumbel(rng, {3, 2, 5});
    ParameterSet p;
    p.add("lw", lw);
    auto f = [&](Graph&, const Binding& b) { return sum(relaxed_subset_mask(b["lw"], noise, 0.5)); };
    Graph g;
    Binding b = g.bind(p);
    g.backward(f(g, b));
    double norm = 0.0;
    for (double v : b.gradients().get("lw").values()) norm += std::fabs(v);
    CHECK(norm > 0.0);
    CHECK(finite_diff_check(f, p).max_relative_error < 1e-4);
  }
}

TEST_CASE("batched mask rejects mismatched noise") {
  Graph g;
  Var lw = g.constant(Tensor(Shape{2, 5}));
  CHECK_THROWS_AS(relaxed_subset_mask(lw, Tensor(Shape{2, 3, 5}), 0.1), DimensionError);
  CHECK_THROWS_AS(relaxed_subset_mask(lw, Tensor(Shape{2, 5}), 0.1), DimensionError);
}

TEST_CASE("hard top-k") {
  const std::vector<double> s = {0.1, 0.9, 0.5};
  CHECK(hard_top_k(s, 2) == FeatureSet{1, 2});
  const std::vector<double> flat = {3, 3, 3, 3};
  CHECK(hard_top_k(flat, 2) == FeatureSet{0, 1});
  CHECK(hard_top_k(s, 3) == FeatureSet{0, 1, 2});
  CHECK_THROWS_AS(hard_top_k(s, 0), ParameterError);
  CHECK_THROWS_AS(hard_top_k(s, 4), ParameterError);
}

TEST_CASE("sampler config validation") {
  CHECK_NOTHROW((SamplerConfig{2, 0.1, 10}.validate()));
  CHECK_THROWS_AS((SamplerConfig{0, 0.1, 10}.validate()), ParameterError);
  CHECK_THROWS_AS((SamplerConfig{11, 0.1, 10}.validate()), ParameterError);
  CHECK_THROWS_AS((SamplerConfig{2, 0.0, 10}.validate()), ParameterError);
}

TEST_CASE("named substreams are stable and distinct") {
  CHECK(substream_seed(1, "data") == substream_seed(1, "data"));
  CHECK(substream_seed(1, "data") != substream_seed(1, "noise"));
  CHECK(substream_seed(1, "data") != substream_seed(2, "data"));
}
