#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "l2x/pipeline.hpp"

using namespace l2x;

namespace {

struct Trained {
  std::vector<LabeledSample> samples;
  std::span<const LabeledSample> train, valid;
  ClassifierTrainResult classifier;
  L2xTrainResult l2x;
};

// Default protocol: 1e5 training and 1e4 validation samples, seed 1.
Trained train_default(DatasetKind kind) {
  configure_allocator();
  Trained t;
  t.samples = generate(kind, 110'000, 1);
  t.train = std::span<const LabeledSample>(t.samples.data(), 100'000);
  t.valid = std::span<const LabeledSample>(t.samples.data() + 100'000, 10'000);
  TrainConfig clf;
  clf.seed = 1;
  t.classifier = train_classifier(t.train, t.valid, ClassifierArchitecture{}, clf);
  TrainConfig cfg;
  cfg.seed = 1;
  cfg.k = truth_size(kind);
  t.l2x = train_l2x(feature_matrix(t.train), t.classifier.model, L2xArchitecture{}, cfg);
  return t;
}

// Mean over rows of sum_y P_model(y | x) log q(y | x masked to `keep`).
double masked_log_likelihood(const Trained& t, const FeatureSet& keep) {
  const Tensor x = feature_matrix(t.valid);
  const Tensor p = classifier_forward(t.classifier.model, x);
  const Tensor q = variational_forward(t.l2x.variational, mask_input(x, keep));
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t y = 0; y < p.cols(); ++y) total += p.at(r, y) * std::log(std::max(q.at(r, y), 1e-12));
  }
  return total / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("xor: trained classifier and explainer") {
  const Trained t = train_default(DatasetKind::xor_);

  Tensor x(Shape{1, 10});
  x.at(0, 0) = 2.0;
  x.at(0, 1) = 2.0;
  const std::vector<double> probe(x.values().begin(), x.values().end());
  const Tensor p = classifier_forward(t.classifier.model, x);
  MESSAGE("P(Y=1 | x=(2,2,0,...)) = " << p.at(0, 1) << ", exact " << exact_probability(DatasetKind::xor_, probe));
  CHECK(p.at(0, 1) > 0.9);

  const auto explanations = explain_all(Method::l2x, feature_matrix(t.valid), 2, nullptr, &t.l2x.explainer);
  std::size_t hits = 0;
  for (const auto& e : explanations) hits += e.selected == FeatureSet{0, 1} ? 1 : 0;
  const double rate = static_cast<double>(hits) / static_cast<double>(explanations.size());
  MESSAGE("top-2 = {X1, X2} on " << rate << " of validation samples");
  CHECK(rate >= 0.9);
}

TEST_CASE("orange skin: classifier quality and variational likelihood of true versus noise features") {
  const Trained t = train_default(DatasetKind::orange_skin);
  MESSAGE("Bayes agreement " << t.classifier.bayes_agreement << ", accuracy " << t.classifier.validation_accuracy
                             << " of Bayes " << t.classifier.bayes_accuracy);
  CHECK(t.classifier.bayes_agreement >= 0.85);
  CHECK(t.classifier.validation_accuracy >= 0.95 * t.classifier.bayes_accuracy);

  const double truth = masked_log_likelihood(t, {0, 1, 2, 3});
  const double noise = masked_log_likelihood(t, {4, 5, 6, 7});
  MESSAGE("masked log-likelihood: true features " << truth << ", noise features " << noise);
  CHECK(truth > noise);
}
