#include "l2x/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "l2x/errors.hpp"

namespace l2x {

void SamplerConfig::validate() const {
  if (d == 0) throw ParameterError("feature count d must be positive");
  if (k < 1 || k > d) {
    throw ParameterError("subset size k=" + std::to_string(k) + " must lie in [1, " +
                         std::to_string(d) + "]");
  }
  if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
}

double gumbel_from_uniform(double u) {
  u = std::clamp(u, kUniformClamp, 1.0 - kUniformClamp);
  return -std::log(-std::log(u));
}

Tensor sample_gumbel(Rng& rng, Shape shape) {
  Tensor out(std::move(shape));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (auto& v : out.values()) v = gumbel_from_uniform(uniform(rng));
  return out;
}

GumbelNoise sample_gumbel(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  Rng rng(seed);
  return GumbelNoise{sample_gumbel(rng, {rows, cols}), seed};
}

Tensor concrete_vector(const Tensor& log_weights, const Tensor& gumbel_row, double temperature) {
  Graph g;
  Var lw = g.constant(log_weights.reshaped({1, log_weights.size()}));
  return concrete_vector(lw, gumbel_row.reshaped({1, gumbel_row.size()}), temperature)
      .value()
      .reshaped(log_weights.shape());
}

Var concrete_vector(Var log_weights, const Tensor& gumbel, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("concrete temperature must be positive");
  Var noise = log_weights.graph().constant(gumbel);
  return softmax(add(log_weights, noise), temperature);
}

Var relaxed_subset_mask(Var log_weights, const Tensor& noise, double temperature) {
  const Shape& lw = log_weights.shape();
  if (noise.rank() != 3 || lw.size() != 2 || noise.shape()[1] != lw[0] || noise.shape()[2] != lw[1]) {
    throw DimensionError("relaxed_subset_mask: noise " + shape_string(noise.shape()) +
                         " does not match log-weights " + shape_string(lw));
  }
  const std::size_t k = noise.shape()[0];
  Var v = concrete_vector(log_weights, leading_slice(noise, 0), temperature);
  for (std::size_t j = 1; j < k; ++j) {
    v = max(v, concrete_vector(log_weights, leading_slice(noise, j), temperature));
  }
  return v;
}

RelaxedMask relaxed_subset_mask(const Tensor& log_weights, const GumbelNoise& noise,
                                const SamplerConfig& config) {
  config.validate();
  if (log_weights.size() != config.d) {
    throw DimensionError("relaxed_subset_mask: expected " + std::to_string(config.d) +
                         " log-weights, got " + std::to_string(log_weights.size()));
  }
  if (noise.values.rank() != 2 || noise.values.rows() != config.k || noise.values.cols() != config.d) {
    throw ContractError("relaxed_subset_mask: noise shape " + shape_string(noise.values.shape()) +
                        " must be k x d = " + std::to_string(config.k) + "x" + std::to_string(config.d));
  }
  Graph g;
  Var lw = g.constant(log_weights.reshaped({1, config.d}));
  Var v = relaxed_subset_mask(lw, noise.values.reshaped({config.k, 1, config.d}), config.temperature);
  return RelaxedMask{v.value().reshaped({config.d}), config};
}

FeatureSet hard_top_k(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw ParameterError("top-k: k=" + std::to_string(k) + " out of range for " +
                         std::to_string(scores.size()) + " scores");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  FeatureSet selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(selected.begin(), selected.end());
  return selected;
}

}  // namespace l2x
