#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "l2x/autodiff.hpp"
#include "l2x/models.hpp"
#include "l2x/synthetic.hpp"

namespace l2x {

struct RmsPropConfig {
  double learning_rate = 0.001;
  double decay = 0.9;
  double epsilon = 1e-7;
};

/// acc <- rho * acc + (1 - rho) * g^2;  p <- p - lr * g / (sqrt(acc) + eps).
class RmsProp {
 public:
  RmsProp(const ParameterSet& params, RmsPropConfig config = {});

  // Descent step. Throws ContractError when the layouts of params, grads and state differ.
  void update(ParameterSet& params, const ParameterSet& grads);

  const ParameterSet& accumulators() const noexcept { return accumulators_; }
  const RmsPropConfig& config() const noexcept { return config_; }

 private:
  RmsPropConfig config_;
  ParameterSet accumulators_;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double temperature = kDefaultTemperature;
  std::size_t batch_size = 1000;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t k = 1;
  // Gumbel noise matrices per example per step.
  std::size_t noise_draws = 1;

  void validate(std::size_t d) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double objective = 0.0;  // mean loss (classifier) or mean objective (L2X) over the epoch
  double wall_ms = 0.0;
};

void write_curve_csv(std::span<const EpochRecord> curve, const std::string& path);

// ---------------------------------------------------------------- classifier

struct ClassifierArchitecture {
  std::size_t hidden_layers = 3;
  std::size_t hidden_width = kHiddenWidth;
};

struct ClassifierTrainResult {
  Classifier model;
  std::vector<EpochRecord> curve;
  // Agreement with the sampled labels of the validation set.
  double validation_accuracy = 0.0;
  // Agreement with the Bayes decision argmax of the exact P(Y | x).
  double bayes_agreement = 0.0;
  // Best achievable label accuracy, mean of max(p, 1 - p) over the validation set.
  double bayes_accuracy = 0.0;
};

// Cross-entropy on sampled hard labels. Validation metrics are zero when `valid` is empty.
ClassifierTrainResult train_classifier(std::span<const LabeledSample> train,
                                       std::span<const LabeledSample> valid,
                                       const ClassifierArchitecture& arch, const TrainConfig& config);

// Fraction of rows whose argmax of `probs` equals `labels`.
double accuracy(const Tensor& probs, std::span<const int> labels);

// ---------------------------------------------------------------- L2X objective

inline constexpr double kProbabilityFloor = 1e-12;

/// mean_b sum_y model_probs[b, y] * log(max(q_probs[b, y], 1e-12)).
Var expected_log_likelihood(Var q_probs, const Tensor& model_probs);

/// Objective on a graph: explainer scores -> relaxed mask (noise is [k x batch x d], or
/// [draws*k x batch x d] to average several draws) -> variational prediction on V * x.
Var l2x_objective(const Explainer& explainer, const Binding& explainer_params,
                  const VariationalNet& variational, const Binding& variational_params, Var x,
                  const Tensor& model_probs, const Tensor& noise, double temperature, std::size_t k);

struct ObjectiveEstimate {
  double value = 0.0;
  std::size_t batch_size = 0;
  std::uint64_t noise_seed = 0;
};

// Evaluates the objective with the classifier frozen; noise is [k x batch x d].
ObjectiveEstimate l2x_objective(const Tensor& x, const Classifier& classifier,
                                const Explainer& explainer, const VariationalNet& variational,
                                const Tensor& noise, double temperature, std::size_t k,
                                std::uint64_t noise_seed = 0);

struct L2xArchitecture {
  std::size_t explainer_hidden_layers = 2;
  std::size_t variational_hidden_layers = 3;
  std::size_t hidden_width = kHiddenWidth;
};

struct L2xTrainResult {
  Explainer explainer;
  VariationalNet variational;
  std::vector<EpochRecord> curve;
};

// Joint RMSprop ascent on the objective. Labels come from the classifier's probabilities.
L2xTrainResult train_l2x(const Tensor& x, const Classifier& classifier, const L2xArchitecture& arch,
                         const TrainConfig& config);

}  // namespace l2x
