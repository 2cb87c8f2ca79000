#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "l2x/errors.hpp"
#include "l2x/evaluation.hpp"
#include "l2x/training.hpp"
#include "support/objective_reference.hpp"

using namespace l2x;

namespace {

Tensor random_input(Rng& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor x(Shape{rows, cols});
  for (auto& v : x.values()) v = n(rng);
  return x;
}

std::vector<LabeledSample> separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LabeledSample> out(n);
  for (auto& s : out) {
    s.x.resize(3);
    for (auto& v : s.x) v = normal(rng);
    s.x[0] += s.x[0] >= 0 ? 0.5 : -0.5;
    s.p = s.x[0] > 0 ? 1.0 : 0.0;
    s.y = s.x[0] > 0 ? 1 : 0;
    s.truth = {0};
  }
  return out;
}

struct Toy {
  Classifier classifier;
  Explainer explainer;
  VariationalNet variational;
};

Toy small_networks(std::uint64_t seed, std::size_t d, std::size_t width) {
  Rng rng(seed);
  return {make_classifier(d, 2, rng, 1, width), make_explainer(d, rng, 1, width),
          make_variational(d, 2, rng, 1, width)};
}

}  // namespace

TEST_CASE("rmsprop leaves parameters alone on zero gradient") {
  ParameterSet p;
  p.add("w", Tensor::vector({1.5, -2.0}));
  const ParameterSet before = p;
  RmsProp opt(p);
  opt.update(p, p.zeros_like());
  CHECK(p == before);
}

TEST_CASE("rmsprop first step") {
  ParameterSet p;
  p.add("w", Tensor::vector({0.0}));
  RmsProp opt(p);
  ParameterSet g;
  g.add("w", Tensor::vector({1.0}));
  opt.update(p, g);
  const double expected = -0.001 / (std::sqrt(0.1) + 1e-7);
  CHECK(p.get("w")[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(std::fabs(p.get("w")[0] - (-0.0031623)) < 5e-8);
  CHECK(opt.accumulators().get("w")[0] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("rmsprop step size saturates at the learning rate") {
  ParameterSet p;
  p.add("w", Tensor::vector({0.0}));
  RmsProp opt(p);
  ParameterSet g;
  g.add("w", Tensor::vector({2.0}));
  // Independent iteration of the recurrence.
  double acc = 0.0, w = 0.0;
  double last_step = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double before = p.get("w")[0];
    opt.update(p, g);
    last_step = p.get("w")[0] - before;
    acc = 0.9 * acc + 0.1 * 4.0;
    w -= 0.001 * 2.0 / (std::sqrt(acc) + 1e-7);
  }
  CHECK(p.get("w")[0] == doctest::Approx(w).epsilon(1e-12));
  CHECK(std::fabs(std::fabs(last_step) - 0.001) < 1e-9);
  for (double v : opt.accumulators().get("w").values()) CHECK(v >= 0.0);
}

TEST_CASE("rmsprop layout mismatch") {
  ParameterSet p;
  p.add("w", Tensor::vector({0.0, 1.0}));
  RmsProp opt(p);
  ParameterSet g;
  g.add("w", Tensor::vector({1.0}));
  CHECK_THROWS_AS(opt.update(p, g), ContractError);
  ParameterSet renamed;
  renamed.add("v", Tensor::vector({1.0, 1.0}));
  CHECK_THROWS_AS(opt.update(p, renamed), ContractError);
  CHECK_THROWS_AS(RmsProp(p, RmsPropConfig{0.0}), ParameterError);
}

TEST_CASE("classifier learns separable data") {
  const auto train = separable(2000, 1);
  const auto valid = separable(500, 2);
  TrainConfig cfg;
  cfg.batch_size = 50;
  cfg.epochs = 20;
  cfg.seed = 3;
  const auto result = train_classifier(train, valid, ClassifierArchitecture{1, 16}, cfg);
  CHECK(result.validation_accuracy > 0.99);
  CHECK(result.bayes_accuracy == 1.0);
  CHECK(result.curve.size() == 20);
  CHECK(result.curve.back().objective < result.curve.front().objective);
}

TEST_CASE("classifier training is deterministic and rejects empty data") {
  const auto train = separable(300, 4);
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.epochs = 2;
  cfg.seed = 9;
  const auto a = train_classifier(train, {}, ClassifierArchitecture{2, 8}, cfg);
  const auto b = train_classifier(train, {}, ClassifierArchitecture{2, 8}, cfg);
  CHECK(a.model.net.params() == b.model.net.params());
  CHECK(a.curve[1].objective == b.curve[1].objective);
  CHECK_THROWS_AS(train_classifier({}, {}, ClassifierArchitecture{}, cfg), DataError);
}

TEST_CASE("objective is -log c under a uniform variational head") {
  Rng rng(5);
  const std::size_t d = 6;
  Toy t = small_networks(6, d, 8);
  t.variational = VariationalNet{Mlp::zeros(make_spec(d, 1, 8, 2, Head::softmax_classifier))};
  const Tensor x = random_input(rng, 20, d);
  const Tensor noise = sample_gumbel(rng, {2, 20, d});
  const auto est = l2x_objective(x, t.classifier, t.explainer, t.variational, noise, 0.1, 2, 77);
  CHECK(est.value == doctest::Approx(-std::log(2.0)).epsilon(1e-14));
  CHECK(est.batch_size == 20);
  CHECK(est.noise_seed == 77);
}

TEST_CASE("objective is never positive") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    Toy t = small_networks(seed, 5, 12);
    const Tensor x = random_input(rng, 16, 5);
    const Tensor noise = sample_gumbel(rng, {3, 16, 5});
    CHECK(l2x_objective(x, t.classifier, t.explainer, t.variational, noise, 0.1, 3).value <= 0.0);
  }
}

TEST_CASE("objective contract errors") {
  Rng rng(7);
  Toy t = small_networks(7, 4, 6);
  const Tensor x = random_input(rng, 3, 4);
  const VariationalNet three = make_variational(4, 3, rng, 1, 6);
  CHECK_THROWS_AS(l2x_objective(x, t.classifier, t.explainer, three, sample_gumbel(rng, {2, 3, 4}), 0.1, 2),
                  ContractError);
  CHECK_THROWS_AS(
      l2x_objective(x, t.classifier, t.explainer, t.variational, sample_gumbel(rng, {1, 3, 4}), 0.1, 2),
      ContractError);
}

TEST_CASE("objective equals -H(Y|X_S) when q is the exact conditional") {
  // Enumerate a finite joint with uniform marginal: the batch is the alphabet itself,
  // model probabilities are P(Y|x) and q is P(Y|x_S), so the batch mean is exact.
  Rng rng(8);
  DiscreteJoint joint = random_joint(rng, 4, 3);
  joint.px.assign(joint.xs.size(), 1.0 / static_cast<double>(joint.xs.size()));
  const FeatureSet subset = {1, 3};
  const auto table = exact_conditional(joint, subset);
  const std::size_t n = joint.xs.size();
  Tensor model(Shape{n, 3});
  Tensor q(Shape{n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cond = table.at(project(joint.xs[i], subset));
    for (std::size_t y = 0; y < 3; ++y) {
      model.at(i, y) = joint.py_given_x[i][y];
      q.at(i, y) = cond[y];
    }
  }
  Graph g;
  const double value = expected_log_likelihood(g.constant(q), model).value().item();
  CHECK(value == doctest::Approx(-conditional_entropy(joint, subset)).epsilon(1e-12));
}

TEST_CASE("objective gradients match central differences at fixed noise") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const std::size_t d = 5, k = 2, batch = 6;
    Toy t = small_networks(200 + seed, d, 6);
    const Tensor x = random_input(rng, batch, d);
    const Tensor probs = classifier_forward(t.classifier, x);
    const Tensor noise = sample_gumbel(rng, {k, batch, d});

    ParameterSet joint;
    const auto& ep = t.explainer.net.params();
    const auto& vp = t.variational.net.params();
    for (std::size_t i = 0; i < ep.size(); ++i) joint.add("e." + ep.name(i), ep.tensor(i));
    for (std::size_t i = 0; i < vp.size(); ++i) joint.add("v." + vp.name(i), vp.tensor(i));

    auto f = [&](Graph& g, const Binding& b) {
      Explainer e = t.explainer;
      VariationalNet v = t.variational;
      // Rebind the joint leaves to the two networks' parameter order.
      std::vector<Var> e_vars, v_vars;
      for (std::size_t i = 0; i < ep.size(); ++i) e_vars.push_back(b[i]);
      for (std::size_t i = 0; i < vp.size(); ++i) v_vars.push_back(b[ep.size() + i]);
      const Binding eb(&g, &e.net.params(), e_vars);
      const Binding vb(&g, &v.net.params(), v_vars);
      return l2x_objective(e, eb, v, vb, g.constant(x), probs, noise, 0.5, k);
    };
    // Step 1e-5: with 1e-6 roundoff dominates on gradients near 1e-8.
    const auto report = finite_diff_check(f, joint, 1e-5);
    worst = std::max(worst, report.max_relative_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("objective gradients at tau = 0.1 match central differences of a long-double reference") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const std::size_t d = 5, k = 2, batch = 6;
    Toy t = small_networks(200 + seed, d, 6);
    const Tensor x = random_input(rng, batch, d);
    const Tensor probs = classifier_forward(t.classifier, x);
    const Tensor noise = sample_gumbel(rng, {k, batch, d});

    Graph g;
    Binding eb = g.bind(t.explainer.net.params());
    Binding vb = g.bind(t.variational.net.params());
    Var value = l2x_objective(t.explainer, eb, t.variational, vb, g.constant(x), probs, noise, 0.1, k);
    g.backward(value);

    ParameterSet joint, analytic;
    const auto& ep = t.explainer.net.params();
    const auto& vp = t.variational.net.params();
    const ParameterSet eg = eb.gradients(), vg = vb.gradients();
    for (std::size_t i = 0; i < ep.size(); ++i) {
      joint.add("e." + ep.name(i), ep.tensor(i));
      analytic.add("e." + ep.name(i), eg.tensor(i));
    }
    for (std::size_t i = 0; i < vp.size(); ++i) {
      joint.add("v." + vp.name(i), vp.tensor(i));
      analytic.add("v." + vp.name(i), vg.tensor(i));
    }
    auto ref = [&](const ParameterSet& p) {
      return reference::l2x_objective(t.explainer.net.spec(), t.variational.net.spec(), p, x, probs, noise,
                                      0.1L, k);
    };
    CHECK(static_cast<double>(ref(joint)) == doctest::Approx(value.value().item()).epsilon(1e-12));
    worst = std::max(worst, reference::max_relative_error(joint, analytic, ref, 1e-6));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("l2x training keeps the classifier frozen and is deterministic") {
  Rng rng(10);
  const std::size_t d = 6;
  Toy t = small_networks(11, d, 10);
  const ParameterSet before = t.classifier.net.params();
  const Tensor x = random_input(rng, 200, d);
  TrainConfig cfg;
  cfg.k = 2;
  cfg.batch_size = 50;
  cfg.epochs = 3;
  cfg.seed = 12;
  const L2xArchitecture arch{1, 1, 10};
  const auto a = train_l2x(x, t.classifier, arch, cfg);
  CHECK(t.classifier.net.params() == before);
  const auto b = train_l2x(x, t.classifier, arch, cfg);
  REQUIRE(a.curve.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) CHECK(a.curve[e].objective == b.curve[e].objective);
  CHECK(a.explainer.net.params() == b.explainer.net.params());
  CHECK(a.variational.net.params() == b.variational.net.params());
  for (const auto& r : a.curve) CHECK(r.objective <= 0.0);
}

TEST_CASE("objective at initialisation is close to -log 2") {
  Rng rng(13);
  const std::size_t d = 10;
  Rng init(14);
  const Classifier c = make_classifier(d, 2, init);
  const Explainer e = make_explainer(d, init);
  const VariationalNet q = make_variational(d, 2, init);
  const Tensor x = random_input(rng, 500, d);
  const auto est = l2x_objective(x, c, e, q, sample_gumbel(rng, {2, 500, d}), 0.1, 2);
  CHECK(std::fabs(est.value + std::log(2.0)) < 0.1);
}

TEST_CASE("l2x training errors") {
  Rng rng(15);
  Toy t = small_networks(16, 4, 6);
  Tensor x = random_input(rng, 40, 4);
  TrainConfig cfg;
  cfg.k = 5;
  CHECK_THROWS_AS(train_l2x(x, t.classifier, L2xArchitecture{1, 1, 6}, cfg), ParameterError);
  cfg.k = 2;
  cfg.batch_size = 10;
  cfg.epochs = 1;
  x.at(3, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)train_l2x(x, t.classifier, L2xArchitecture{1, 1, 6}, cfg);
    FAIL("NaN input accepted");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("training curve csv") {
  const std::vector<EpochRecord> curve = {{1, -0.5, 12.0}, {2, -0.25, 11.5}};
  const auto path = (std::filesystem::temp_directory_path() / "l2x_curve.csv").string();
  write_curve_csv(curve, path);
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "epoch,objective,wall_ms");
  CHECK(first == "1,-0.5,12");
  std::filesystem::remove(path);
}
