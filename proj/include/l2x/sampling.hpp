#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "l2x/autodiff.hpp"
#include "l2x/rng.hpp"
#include "l2x/tensor.hpp"

namespace l2x {

// Ascending feature indices, 0-based.
using FeatureSet = std::vector<std::size_t>;

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kUniformClamp = 1e-12;

struct SamplerConfig {
  std::size_t k = 1;
  double temperature = kDefaultTemperature;
  std::size_t d = 1;

  // Throws ParameterError unless 1 <= k <= d and temperature > 0.
  void validate() const;
};

struct GumbelNoise {
  Tensor values;  // rows x cols of Gumbel(0, 1) draws
  std::uint64_t seed = 0;
};

// -log(-log u) with u clamped to [1e-12, 1 - 1e-12].
double gumbel_from_uniform(double u);

GumbelNoise sample_gumbel(std::uint64_t seed, std::size_t rows, std::size_t cols);
// Fills a tensor of any shape with Gumbel draws from an existing stream.
Tensor sample_gumbel(Rng& rng, Shape shape);

// softmax((log_weights + gumbel_row) / temperature).
Tensor concrete_vector(const Tensor& log_weights, const Tensor& gumbel_row, double temperature);
Var concrete_vector(Var log_weights, const Tensor& gumbel, double temperature);

struct RelaxedMask {
  Tensor values;  // d entries in (0, 1)
  SamplerConfig config;
};

/// Elementwise maximum of k Concrete vectors that share `log_weights`.
/// Batched form: log_weights is [batch x d] and noise is [k x batch x d].
Var relaxed_subset_mask(Var log_weights, const Tensor& noise, double temperature);
/// Single-example form; noise must have exactly config.k rows of config.d columns.
RelaxedMask relaxed_subset_mask(const Tensor& log_weights, const GumbelNoise& noise,
                                const SamplerConfig& config);

// Indices of the k largest scores; equal scores prefer the lower index.
FeatureSet hard_top_k(std::span<const double> scores, std::size_t k);

}  // namespace l2x
