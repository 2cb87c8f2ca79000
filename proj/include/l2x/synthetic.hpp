#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "l2x/sampling.hpp"
#include "l2x/tensor.hpp"

namespace l2x {

enum class DatasetKind { xor_, orange_skin, nonlinear_additive, switch_ };

inline constexpr std::size_t kSyntheticFeatures = 10;
inline constexpr std::size_t kSyntheticClasses = 2;

// Accepts "xor", "orange_skin"/"orange-skin", "nonlinear_additive"/"nonlinear-additive"/"additive", "switch".
DatasetKind parse_dataset_kind(const std::string& name);
const char* dataset_name(DatasetKind kind);
// Number of ground-truth features, which is also the k used to explain the dataset.
std::size_t truth_size(DatasetKind kind);

struct DatasetOptions {
  // Coefficient of sin(2 X1) in the nonlinear additive logit (taken verbatim as 100).
  double additive_sin_scale = 100.0;
};

// Switch samples record which mixture component produced X1.
enum class Component : int { none = 0, plus = 1, minus = -1 };

struct LabeledSample {
  std::vector<double> x;
  double p = 0.5;  // exact P(Y = 1 | x)
  int y = 0;
  FeatureSet truth;  // 0-based
  Component component = Component::none;
};

// Logit of P(Y = 1 | x) per dataset; P(Y = 1 | x) = sigmoid(logit).
double dataset_logit(DatasetKind kind, std::span<const double> x, Component component,
                     const DatasetOptions& options = {});
// Throws ContractError for switch without a component.
double exact_probability(DatasetKind kind, std::span<const double> x,
                         Component component = Component::none, const DatasetOptions& options = {});
FeatureSet truth_features(DatasetKind kind, Component component = Component::none);

std::vector<LabeledSample> generate(DatasetKind kind, std::size_t n, std::uint64_t seed,
                                    const DatasetOptions& options = {});

// [n x d] feature matrix and [n x 2] class-probability matrix (1 - p, p).
Tensor feature_matrix(std::span<const LabeledSample> samples);

// CSV: header x0..x9,p,y,truth; truth is '|'-joined 0-based indices. 17 significant digits.
void write_csv(std::span<const LabeledSample> samples, const std::string& path);
std::vector<LabeledSample> read_csv(const std::string& path);

}  // namespace l2x
