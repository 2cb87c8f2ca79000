#include "l2x/explainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "l2x/errors.hpp"

namespace l2x {

const char* method_name(Method method) {
  switch (method) {
    case Method::l2x: return "l2x";
    case Method::saliency: return "saliency";
    case Method::taylor: return "taylor";
    case Method::taylor_abs: return "taylor_abs";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "l2x") return Method::l2x;
  if (name == "saliency") return Method::saliency;
  if (name == "taylor") return Method::taylor;
  if (name == "taylor_abs") return Method::taylor_abs;
  throw ParameterError("unknown explanation method: " + name);
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t since_ns(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

void check_k(std::size_t k, std::size_t d) {
  if (k < 1 || k > d) {
    throw ParameterError("k=" + std::to_string(k) + " must lie in [1, d=" + std::to_string(d) + "]");
  }
}

// Gradient of the argmax class logit with respect to the input row.
std::vector<double> logit_gradient(const Classifier& classifier, const std::vector<double>& x) {
  Graph g;
  Var input = g.variable(Tensor({1, x.size()}, x));
  Var logits = classifier.logits(g, input);
  const auto row = logits.value().row(0);
  const auto cls = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  Tensor onehot(logits.shape());
  onehot[cls] = 1.0;
  g.backward(sum(mul(logits, g.constant(std::move(onehot)))));
  const Tensor grad = g.grad(input);
  return std::vector<double>(grad.values().begin(), grad.values().end());
}

}  // namespace

Explanation explain_l2x(const Explainer& explainer, const std::vector<double>& x, std::size_t k,
                        std::size_t sample_id) {
  const auto start = Clock::now();
  check_k(k, x.size());
  const Tensor scores = explainer_scores(explainer, Tensor({1, x.size()}, x));
  Explanation e;
  e.sample_id = sample_id;
  e.method = Method::l2x;
  e.scores.assign(scores.values().begin(), scores.values().end());
  e.selected = hard_top_k(e.scores, k);
  e.wall_ns = since_ns(start);
  return e;
}

Explanation explain_saliency(const Classifier& classifier, const std::vector<double>& x, std::size_t k,
                             std::size_t sample_id) {
  const auto start = Clock::now();
  check_k(k, x.size());
  Explanation e;
  e.sample_id = sample_id;
  e.method = Method::saliency;
  e.scores = logit_gradient(classifier, x);
  for (auto& s : e.scores) s = std::fabs(s);
  e.selected = hard_top_k(e.scores, k);
  e.wall_ns = since_ns(start);
  return e;
}

Explanation explain_taylor(const Classifier& classifier, const std::vector<double>& x, std::size_t k,
                           std::size_t sample_id, bool absolute) {
  const auto start = Clock::now();
  check_k(k, x.size());
  Explanation e;
  e.sample_id = sample_id;
  e.method = absolute ? Method::taylor_abs : Method::taylor;
  e.scores = logit_gradient(classifier, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    e.scores[i] *= x[i];
    if (absolute) e.scores[i] = std::fabs(e.scores[i]);
  }
  e.selected = hard_top_k(e.scores, k);
  e.wall_ns = since_ns(start);
  return e;
}

std::vector<Explanation> explain_all(Method method, const Tensor& x, std::size_t k,
                                     const Classifier* classifier, const Explainer* explainer,
                                     std::size_t threads) {
  if (method == Method::l2x && !explainer) throw ContractError("L2X explanations need an explainer");
  if (method != Method::l2x && !classifier) throw ContractError("gradient methods need a classifier");
  const std::size_t n = x.rows();
  std::vector<Explanation> out(n);

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = x.row(i);
      const std::vector<double> xi(row.begin(), row.end());
      switch (method) {
        case Method::l2x: out[i] = explain_l2x(*explainer, xi, k, i); break;
        case Method::saliency: out[i] = explain_saliency(*classifier, xi, k, i); break;
        case Method::taylor: out[i] = explain_taylor(*classifier, xi, k, i, false); break;
        case Method::taylor_abs: out[i] = explain_taylor(*classifier, xi, k, i, true); break;
      }
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    run(0, n);
    return out;
  }
  std::vector<std::jthread> workers;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) workers.emplace_back(run, begin, end);
  }
  workers.clear();
  return out;
}

void write_explanations_jsonl(const std::vector<Explanation>& explanations, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& e : explanations) {
    nlohmann::json j;
    j["id"] = e.sample_id;
    j["method"] = method_name(e.method);
    j["scores"] = e.scores;
    j["selected"] = e.selected;
    j["ns"] = e.wall_ns;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<Explanation> read_explanations_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Explanation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Explanation e;
      e.sample_id = j.at("id").get<std::size_t>();
      e.method = parse_method(j.at("method").get<std::string>());
      e.scores = j.at("scores").get<std::vector<double>>();
      e.selected = j.at("selected").get<FeatureSet>();
      e.wall_ns = j.at("ns").get<std::int64_t>();
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("line " + std::to_string(line_no) + ": " + ex.what(), line_no);
    } catch (const ParameterError& ex) {
      throw ParseError("line " + std::to_string(line_no) + ": " + ex.what(), line_no);
    }
  }
  if (out.empty()) throw DataError(path + " holds no explanations");
  return out;
}

}  // namespace l2x
