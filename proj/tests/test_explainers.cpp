#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "l2x/errors.hpp"
#include "l2x/explainers.hpp"

using namespace l2x;

namespace {

// Class-1 logit w.x and class-0 logit 0, using relu(x) - relu(-x) = x in the hidden layer.
Classifier linear_classifier(const std::vector<double>& w) {
  const std::size_t d = w.size();
  const MlpSpec spec = make_spec(d, 1, 2 * d, 2, Head::softmax_classifier);
  Mlp net = Mlp::zeros(spec);
  Tensor& w0 = net.params().get(Mlp::weight_name(0));
  Tensor& w1 = net.params().get(Mlp::weight_name(1));
  for (std::size_t i = 0; i < d; ++i) {
    w0.at(i, i) = 1.0;
    w0.at(i, d + i) = -1.0;
    w1.at(i, 1) = w[i];
    w1.at(d + i, 1) = -w[i];
  }
  return Classifier{std::move(net), {}};
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::l2x, Method::saliency, Method::taylor, Method::taylor_abs}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_method("lime"), ParameterError);
}

TEST_CASE("saliency of a linear logit is |w|") {
  const std::vector<double> w = {0.5, -2.0, 0.0, 1.25};
  const Classifier c = linear_classifier(w);
  const std::vector<double> x = {1.0, -1.0, 0.3, 2.0};  // w.x = 0.5 + 2 + 2.5 > 0, class 1
  const Explanation e = explain_saliency(c, x, 2);
  CHECK(e.method == Method::saliency);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(e.scores[i] == doctest::Approx(std::fabs(w[i])));
  CHECK(e.selected == FeatureSet{1, 3});
  // The ignored feature scores exactly zero whatever its value.
  std::vector<double> shifted = x;
  shifted[2] = 17.0;
  CHECK(explain_saliency(c, shifted, 2).scores[2] == 0.0);
}

TEST_CASE("taylor of a linear logit is w_i x_i, signed and absolute") {
  const std::vector<double> w = {0.5, -2.0, 0.0, 1.25};
  const Classifier c = linear_classifier(w);
  const std::vector<double> x = {1.0, -1.0, 0.3, 2.0};
  const Explanation e = explain_taylor(c, x, 2);
  CHECK(e.method == Method::taylor);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(e.scores[i] == doctest::Approx(w[i] * x[i]));
  CHECK(e.selected == FeatureSet{1, 3});

  const std::vector<double> y = {-1.0, -1.0, 0.3, 2.0};  // w.y = -0.5 + 2 + 2.5 > 0
  const Explanation signed_e = explain_taylor(c, y, 1);
  const Explanation abs_e = explain_taylor(c, y, 1, 0, true);
  CHECK(signed_e.scores[0] == doctest::Approx(-0.5));
  CHECK(abs_e.scores[0] == doctest::Approx(0.5));
  CHECK(abs_e.method == Method::taylor_abs);
}

TEST_CASE("taylor at the origin ties and selects the lowest indices") {
  Rng rng(2);
  const Classifier c = make_classifier(6, 2, rng, 2, 16);
  const Explanation e = explain_taylor(c, std::vector<double>(6, 0.0), 3);
  for (double s : e.scores) CHECK(s == 0.0);
  CHECK(e.selected == FeatureSet{0, 1, 2});
}

TEST_CASE("l2x explanations use the explainer only") {
  Rng rng(3);
  const Explainer ex = make_explainer(10, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(10);
  for (auto& v : x) v = n(rng);

  const Explanation a = explain_l2x(ex, x, 3, 7);
  const Explanation b = explain_l2x(ex, x, 3, 7);
  CHECK(a.scores == b.scores);
  CHECK(a.selected == b.selected);
  CHECK(a.sample_id == 7);
  CHECK(a.selected == hard_top_k(a.scores, 3));
  CHECK(explain_l2x(ex, x, 10).selected.size() == 10);
  CHECK_THROWS_AS(explain_l2x(ex, x, 11), ParameterError);
  CHECK_THROWS_AS(explain_l2x(ex, x, 0), ParameterError);
}

TEST_CASE("explain_all keeps row order, counts classifier use and respects k") {
  Rng rng(4);
  const std::size_t d = 8;
  const Classifier c = make_classifier(d, 2, rng, 2, 12);
  const Explainer ex = make_explainer(d, rng, 2, 12);
  Tensor x(Shape{25, d});
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : x.values()) v = n(rng);

  c.evaluations.reset();
  const auto l2x = explain_all(Method::l2x, x, 3, &c, &ex);
  CHECK(c.evaluations.count() == 0);
  const auto sal = explain_all(Method::saliency, x, 3, &c, &ex);
  CHECK(c.evaluations.count() == 25);

  for (const auto* batch : {&l2x, &sal}) {
    REQUIRE(batch->size() == 25);
    for (std::size_t i = 0; i < 25; ++i) {
      CHECK((*batch)[i].sample_id == i);
      CHECK((*batch)[i].selected.size() == 3);
      CHECK((*batch)[i].selected == hard_top_k((*batch)[i].scores, 3));
      for (auto j : (*batch)[i].selected) CHECK(j < d);
    }
  }

  const auto threaded = explain_all(Method::taylor, x, 3, &c, &ex, 4);
  const auto serial = explain_all(Method::taylor, x, 3, &c, &ex, 1);
  for (std::size_t i = 0; i < 25; ++i) CHECK(threaded[i].scores == serial[i].scores);

  CHECK_THROWS_AS(explain_all(Method::l2x, x, 3, &c, nullptr), ContractError);
  CHECK_THROWS_AS(explain_all(Method::taylor, x, 3, nullptr, &ex), ContractError);
}

TEST_CASE("l2x explanation cost is far below a millisecond per sample") {
  Rng rng(5);
  const Explainer ex = make_explainer(10, rng);
  Tensor x(Shape{2000, 10});
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : x.values()) v = n(rng);
  const auto out = explain_all(Method::l2x, x, 2, nullptr, &ex);
  double total_ns = 0.0;
  for (const auto& e : out) total_ns += static_cast<double>(e.wall_ns);
  CHECK(total_ns / 2000.0 < 1e6);
}

TEST_CASE("jsonl round-trip") {
  Rng rng(6);
  const Explainer ex = make_explainer(4, rng, 1, 8);
  Tensor x(Shape{3, 4}, 0.25);
  const auto out = explain_all(Method::l2x, x, 2, nullptr, &ex);
  const auto path = (std::filesystem::temp_directory_path() / "l2x_expl.jsonl").string();
  write_explanations_jsonl(out, path);
  const auto back = read_explanations_jsonl(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].scores == out[i].scores);
    CHECK(back[i].selected == out[i].selected);
    CHECK(back[i].method == Method::l2x);
    CHECK(back[i].wall_ns == out[i].wall_ns);
  }
  {
    std::ofstream bad(path);
    bad << R"({"id":0,"method":"l2x","scores":[1,2],"selected":[1],"ns":5})" << '\n' << "{oops\n";
  }
  try {
    (void)read_explanations_jsonl(path);
    FAIL("malformed line accepted");
  } catch (const ParseError& e) {
    CHECK(e.position() == 2);
  }
  std::filesystem::remove(path);
}
