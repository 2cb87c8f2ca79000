#include "l2x/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "l2x/errors.hpp"
#include "l2x/rng.hpp"
#include "l2x/sampling.hpp"

namespace l2x {

// ---------------------------------------------------------------- RMSprop

RmsProp::RmsProp(const ParameterSet& params, RmsPropConfig config)
    : config_(config), accumulators_(params.zeros_like()) {
  if (!(config_.learning_rate > 0.0) || !(config_.decay >= 0.0 && config_.decay < 1.0) ||
      !(config_.epsilon > 0.0)) {
    throw ParameterError("RMSprop needs lr > 0, 0 <= rho < 1, eps > 0");
  }
}

void RmsProp::update(ParameterSet& params, const ParameterSet& grads) {
  if (!params.same_layout(accumulators_) || !grads.same_layout(accumulators_)) {
    throw ContractError("RMSprop: parameter, gradient and state layouts differ");
  }
  const double rho = config_.decay;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params.tensor(t);
    const Tensor& g = grads.tensor(t);
    Tensor& acc = accumulators_.tensor(t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc[i] = rho * acc[i] + (1.0 - rho) * g[i] * g[i];
      p[i] -= config_.learning_rate * g[i] / (std::sqrt(acc[i]) + config_.epsilon);
    }
  }
}

// ---------------------------------------------------------------- config & curves

void TrainConfig::validate(std::size_t d) const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  if (noise_draws == 0) throw ParameterError("noise draws must be positive");
  if (k < 1 || k > d) {
    throw ParameterError("k=" + std::to_string(k) + " must lie in [1, d=" + std::to_string(d) + "]");
  }
}

void write_curve_csv(std::span<const EpochRecord> curve, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "epoch,objective,wall_ms\n" << std::setprecision(17);
  for (const auto& r : curve) out << r.epoch << ',' << r.objective << ',' << r.wall_ms << '\n';
  if (!out) throw IoError("failed writing " + path);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  const std::size_t c = t.cols();
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(t.data() + rows[i] * c, c, out.data() + i * c);
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Tensor leading_range(const Tensor& t, std::size_t begin, std::size_t count) {
  Shape shape = t.shape();
  const std::size_t inner = t.size() / shape[0];
  shape[0] = count;
  std::vector<double> values(t.data() + begin * inner, t.data() + (begin + count) * inner);
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

// ---------------------------------------------------------------- classifier

double accuracy(const Tensor& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size()) throw DataError("accuracy: row count differs from label count");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto row = probs.row(r);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    hits += best == labels[r] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ClassifierTrainResult train_classifier(std::span<const LabeledSample> train,
                                       std::span<const LabeledSample> valid,
                                       const ClassifierArchitecture& arch, const TrainConfig& config) {
  if (train.empty()) throw DataError("cannot train a classifier on an empty dataset");
  const Tensor x = feature_matrix(train);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (config.batch_size == 0 || !(config.learning_rate > 0.0)) {
    throw ParameterError("classifier training needs batch size > 0 and learning rate > 0");
  }

  Tensor onehot({n, kSyntheticClasses});
  for (std::size_t i = 0; i < n; ++i) onehot.at(i, static_cast<std::size_t>(train[i].y)) = 1.0;

  Rng init = make_rng(config.seed, "init");
  ClassifierTrainResult result{
      make_classifier(d, kSyntheticClasses, init, arch.hidden_layers, arch.hidden_width), {}, 0, 0, 0};
  Mlp& net = result.model.net;
  RmsProp optimizer(net.params(), RmsPropConfig{config.learning_rate});
  Rng shuffle = make_rng(config.seed, "shuffle");

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = Clock::now();
    const auto order = shuffled_indices(n, shuffle);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const std::span<const std::size_t> rows(order.data() + b, std::min(config.batch_size, n - b));
      Graph g;
      Binding bound = g.bind(net.params());
      Var xb = g.constant(gather_rows(x, rows));
      Var target = g.constant(gather_rows(onehot, rows));
      Var logp = log_softmax(net.logits(bound, xb));
      Var loss = scale(sum(mul(logp, target)), -1.0 / static_cast<double>(rows.size()));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite classifier loss " + std::to_string(value) + " at epoch " +
                           std::to_string(epoch) + " step " + std::to_string(steps));
      }
      g.backward(loss);
      optimizer.update(net.params(), bound.gradients());
      loss_sum += value;
      ++steps;
    }
    result.curve.push_back({epoch + 1, loss_sum / static_cast<double>(steps), elapsed_ms(start)});
  }

  if (!valid.empty()) {
    const Tensor probs = classifier_forward(result.model, feature_matrix(valid));
    std::vector<int> labels;
    std::vector<int> bayes;
    double best = 0.0;
    for (const auto& s : valid) {
      labels.push_back(s.y);
      bayes.push_back(s.p > 0.5 ? 1 : 0);
      best += std::max(s.p, 1.0 - s.p);
    }
    result.validation_accuracy = accuracy(probs, labels);
    result.bayes_agreement = accuracy(probs, bayes);
    result.bayes_accuracy = best / static_cast<double>(valid.size());
  }
  result.model.evaluations.reset();
  return result;
}

// ---------------------------------------------------------------- L2X objective

Var expected_log_likelihood(Var q_probs, const Tensor& model_probs) {
  if (q_probs.shape() != model_probs.shape()) {
    throw ContractError("class distributions disagree: " + shape_string(q_probs.shape()) + " vs " +
                        shape_string(model_probs.shape()));
  }
  Var weights = q_probs.graph().constant(model_probs);
  Var logq = log(clamp_min(q_probs, kProbabilityFloor));
  return scale(sum(mul(weights, logq)), 1.0 / static_cast<double>(model_probs.rows()));
}

Var l2x_objective(const Explainer& explainer, const Binding& explainer_params,
                  const VariationalNet& variational, const Binding& variational_params, Var x,
                  const Tensor& model_probs, const Tensor& noise, double temperature, std::size_t k) {
  if (model_probs.cols() != variational.net.spec().output_width()) {
    throw ContractError("classifier has " + std::to_string(model_probs.cols()) +
                        " classes but the variational net predicts " +
                        std::to_string(variational.net.spec().output_width()));
  }
  if (k == 0 || noise.rank() != 3 || noise.shape()[0] % k != 0) {
    throw ContractError("noise " + shape_string(noise.shape()) + " is not a stack of k=" +
                        std::to_string(k) + " row blocks");
  }
  const std::size_t draws = noise.shape()[0] / k;
  Var scores = explainer.net.forward(explainer_params, x);
  Var total;
  for (std::size_t r = 0; r < draws; ++r) {
    Var v = relaxed_subset_mask(scores, leading_range(noise, r * k, k), temperature);
    Var q = variational.net.forward(variational_params, mul(v, x));
    Var ell = expected_log_likelihood(q, model_probs);
    total = r == 0 ? ell : add(total, ell);
  }
  return draws == 1 ? total : scale(total, 1.0 / static_cast<double>(draws));
}

ObjectiveEstimate l2x_objective(const Tensor& x, const Classifier& classifier,
                                const Explainer& explainer, const VariationalNet& variational,
                                const Tensor& noise, double temperature, std::size_t k,
                                std::uint64_t noise_seed) {
  if (classifier.classes() != variational.net.spec().output_width()) {
    throw ContractError("classifier and variational net disagree on the class count");
  }
  if (noise.rank() != 3 || noise.shape()[0] != k) {
    throw ContractError("noise must hold exactly k=" + std::to_string(k) + " rows per example");
  }
  const Tensor probs = classifier_forward(classifier, x);
  Graph g;
  Binding eb = g.bind(explainer.net.params(), false);
  Binding vb = g.bind(variational.net.params(), false);
  Var value = l2x_objective(explainer, eb, variational, vb, g.constant(x), probs, noise, temperature, k);
  return ObjectiveEstimate{value.value().item(), x.rows(), noise_seed};
}

L2xTrainResult train_l2x(const Tensor& x, const Classifier& classifier, const L2xArchitecture& arch,
                         const TrainConfig& config) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  config.validate(d);
  if (classifier.features() != d) throw DimensionError("classifier input width differs from the data");

  // The classifier is frozen: its class distributions are computed once.
  const Tensor model_probs = classifier_forward(classifier, x);

  Rng init = make_rng(config.seed, "init");
  L2xTrainResult result{
      make_explainer(d, init, arch.explainer_hidden_layers, arch.hidden_width),
      make_variational(d, classifier.classes(), init, arch.variational_hidden_layers, arch.hidden_width),
      {}};
  RmsProp explainer_opt(result.explainer.net.params(), RmsPropConfig{config.learning_rate});
  RmsProp variational_opt(result.variational.net.params(), RmsPropConfig{config.learning_rate});
  Rng shuffle = make_rng(config.seed, "shuffle");
  Rng noise_rng = make_rng(config.seed, "noise");

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = Clock::now();
    const auto order = shuffled_indices(n, shuffle);
    double objective_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const std::span<const std::size_t> rows(order.data() + b, std::min(config.batch_size, n - b));
      const Tensor noise = sample_gumbel(noise_rng, {config.noise_draws * config.k, rows.size(), d});
      Graph g;
      Binding eb = g.bind(result.explainer.net.params());
      Binding vb = g.bind(result.variational.net.params());
      Var objective = l2x_objective(result.explainer, eb, result.variational, vb,
                                    g.constant(gather_rows(x, rows)), gather_rows(model_probs, rows),
                                    noise, config.temperature, config.k);
      const double value = objective.value().item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite L2X objective " + std::to_string(value) + " at step " +
                           std::to_string(step));
      }
      // Ascent on the objective is descent on its negation.
      g.backward(neg(objective));
      explainer_opt.update(result.explainer.net.params(), eb.gradients());
      variational_opt.update(result.variational.net.params(), vb.gradients());
      objective_sum += value;
      ++steps;
      ++step;
    }
    result.curve.push_back({epoch + 1, objective_sum / static_cast<double>(steps), elapsed_ms(start)});
  }
  return result;
}

}  // namespace l2x
