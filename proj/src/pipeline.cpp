#include "l2x/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "l2x/errors.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace l2x {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

nlohmann::json box_json(const BoxSummary& s) {
  return {{"min", s.min}, {"q1", s.q1}, {"median", s.median},
          {"mean", s.mean}, {"q3", s.q3}, {"max", s.max}};
}

nlohmann::json post_hoc_entry(const PostHocReport& r) {
  return {{"method", r.method}, {"accuracy", r.accuracy}, {"matches", r.matches}, {"n", r.n}, {"k", r.k}};
}

nlohmann::json run_header(const BenchmarkResult& r) {
  return {{"dataset", dataset_name(r.dataset)}, {"seed", r.seed}, {"n_train", r.n_train},
          {"n_valid", r.n_valid}, {"k", r.k}};
}

}  // namespace

const MethodOutcome& BenchmarkResult::outcome(Method method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw ContractError(std::string("no outcome recorded for method ") + method_name(method));
}

void evaluate_methods(BenchmarkResult& result, const Classifier& classifier, const Explainer* explainer,
                      std::span<const LabeledSample> valid, const std::vector<Method>& methods,
                      std::size_t threads) {
  if (valid.empty()) throw DataError("no validation samples to explain");
  const Tensor x = feature_matrix(valid);
  const std::size_t d = x.cols();
  std::vector<FeatureSet> truths;
  truths.reserve(valid.size());
  for (const auto& s : valid) truths.push_back(s.truth);
  result.n_valid = valid.size();
  if (result.k == 0) result.k = truths.front().size();

  result.truth_post_hoc = post_hoc_accuracy(classifier, x, truths, "truth");

  for (Method method : methods) {
    MethodOutcome outcome;
    outcome.method = method;
    classifier.evaluations.reset();
    const auto start = Clock::now();
    outcome.explanations = explain_all(method, x, result.k, &classifier, explainer, threads);
    outcome.explain_ms = ms_since(start);
    outcome.classifier_evaluations = classifier.evaluations.count();
    outcome.sample_ns.reserve(outcome.explanations.size());
    for (const auto& e : outcome.explanations) outcome.sample_ns.push_back(e.wall_ns);
    outcome.ranks = median_rank(outcome.explanations, truths, d);
    outcome.post_hoc = post_hoc_accuracy(classifier, x, outcome.explanations);
    result.methods.push_back(std::move(outcome));
  }
  classifier.evaluations.reset();
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  if (config.n_train == 0 || config.n_valid == 0) throw ParameterError("sample counts must be positive");
  BenchmarkResult result;
  result.dataset = config.dataset;
  result.seed = config.seed;
  result.n_train = config.n_train;
  result.k = truth_size(config.dataset);

  // One generation call, split into train and validation, keeps both on the "data" substream.
  const auto all = generate(config.dataset, config.n_train + config.n_valid, config.seed, config.data_options);
  const std::span<const LabeledSample> train(all.data(), config.n_train);
  const std::span<const LabeledSample> valid(all.data() + config.n_train, config.n_valid);

  TrainConfig classifier_cfg = config.classifier_train;
  classifier_cfg.seed = config.seed;
  classifier_cfg.k = 1;
  auto start = Clock::now();
  ClassifierTrainResult trained = train_classifier(train, valid, config.classifier_arch, classifier_cfg);
  result.classifier_train_ms = ms_since(start);
  result.classifier_curve = trained.curve;
  result.classifier_validation_accuracy = trained.validation_accuracy;
  result.classifier_bayes_agreement = trained.bayes_agreement;
  result.bayes_accuracy = trained.bayes_accuracy;

  std::optional<L2xTrainResult> l2x;
  if (std::find(config.methods.begin(), config.methods.end(), Method::l2x) != config.methods.end()) {
    TrainConfig l2x_cfg = config.l2x_train;
    l2x_cfg.seed = config.seed;
    l2x_cfg.k = result.k;
    start = Clock::now();
    l2x = train_l2x(feature_matrix(train), trained.model, config.l2x_arch, l2x_cfg);
    result.l2x_train_ms = ms_since(start);
    result.l2x_curve = l2x->curve;
  }

  evaluate_methods(result, trained.model, l2x ? &l2x->explainer : nullptr, valid, config.methods,
                   config.threads);
  return result;
}

nlohmann::json summary_json(const BenchmarkResult& r) {
  nlohmann::json run = run_header(r);
  run["classifier"] = {{"validation_accuracy", r.classifier_validation_accuracy},
                       {"bayes_agreement", r.classifier_bayes_agreement},
                       {"bayes_accuracy", r.bayes_accuracy}};
  run["methods"] = nlohmann::json::array();
  for (const auto& m : r.methods) {
    nlohmann::json box = box_json(m.ranks.summary);
    box["optimal"] = m.ranks.optimal_median;
    run["methods"].push_back({{"method", method_name(m.method)},
                              {"median_rank", box},
                              {"post_hoc_accuracy", m.post_hoc.accuracy}});
  }
  return run;
}

nlohmann::json post_hoc_json(const BenchmarkResult& r) {
  nlohmann::json run = run_header(r);
  run["reference"] = post_hoc_entry(r.truth_post_hoc);
  run["methods"] = nlohmann::json::array();
  for (const auto& m : r.methods) run["methods"].push_back(post_hoc_entry(m.post_hoc));
  return run;
}

nlohmann::json report_json(const BenchmarkResult& r) {
  nlohmann::json run = summary_json(r);
  run["post_hoc"] = post_hoc_json(r);
  nlohmann::json timing;
  timing["classifier_train_ms"] = r.classifier_train_ms ? nlohmann::json(*r.classifier_train_ms) : nullptr;
  timing["l2x_train_ms"] = r.l2x_train_ms ? nlohmann::json(*r.l2x_train_ms) : nullptr;
  timing["explain"] = nlohmann::json::array();
  for (const auto& m : r.methods) {
    std::vector<std::int64_t> ns = m.sample_ns;
    std::sort(ns.begin(), ns.end());
    const double mean = ns.empty() ? 0.0
                                   : static_cast<double>(std::accumulate(ns.begin(), ns.end(), std::int64_t{0})) /
                                         static_cast<double>(ns.size());
    timing["explain"].push_back({{"method", method_name(m.method)},
                                 {"samples", ns.size()},
                                 {"total_ms", m.explain_ms},
                                 {"per_sample_ns", {{"mean", mean},
                                                    {"median", ns.empty() ? 0 : ns[ns.size() / 2]},
                                                    {"max", ns.empty() ? 0 : ns.back()}}},
                                 {"classifier_evaluations", m.classifier_evaluations}});
  }
  run["timing"] = timing;
  nlohmann::json curves;
  auto curve_json = [](const std::vector<EpochRecord>& c) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : c) a.push_back({{"epoch", e.epoch}, {"objective", e.objective}, {"wall_ms", e.wall_ms}});
    return a;
  };
  curves["classifier"] = curve_json(r.classifier_curve);
  curves["l2x"] = curve_json(r.l2x_curve);
  run["curves"] = curves;
  return run;
}

void write_median_rank_csv(const std::vector<BenchmarkResult>& results, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "method,dataset,median_rank\n";
  for (const auto& r : results) {
    for (const auto& m : r.methods) {
      for (double v : m.ranks.per_sample) out << method_name(m.method) << ',' << dataset_name(r.dataset) << ',' << v << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void write_benchmark_outputs(const std::vector<BenchmarkResult>& results, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  nlohmann::json summary = nlohmann::json::array();
  nlohmann::json post_hoc = nlohmann::json::array();
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : results) {
    summary.push_back(summary_json(r));
    post_hoc.push_back(post_hoc_json(r));
    runs.push_back(report_json(r));
  }
  write_median_rank_csv(results, (base / "median_ranks.csv").string());
  write_json({{"runs", summary}}, (base / "summary.json").string());
  write_json({{"runs", post_hoc}}, (base / "posthoc.json").string());
  write_json({{"format", "l2x-benchmark-report"}, {"version", 1}, {"runs", runs}}, (base / "report.json").string());
}

void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace l2x
