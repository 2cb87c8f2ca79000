#pragma once

#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "l2x/evaluation.hpp"
#include "l2x/explainers.hpp"
#include "l2x/synthetic.hpp"
#include "l2x/training.hpp"

namespace l2x {

struct BenchmarkConfig {
  DatasetKind dataset = DatasetKind::xor_;
  std::size_t n_train = 100'000;
  std::size_t n_valid = 10'000;
  std::uint64_t seed = 1;
  DatasetOptions data_options;
  ClassifierArchitecture classifier_arch;
  TrainConfig classifier_train;  // k and temperature unused
  L2xArchitecture l2x_arch;
  TrainConfig l2x_train;         // k is overwritten with the dataset's truth size
  std::vector<Method> methods = {Method::l2x, Method::saliency, Method::taylor};
  std::size_t threads = 1;
};

struct MethodOutcome {
  Method method = Method::l2x;
  MedianRankReport ranks;
  PostHocReport post_hoc;
  std::vector<std::int64_t> sample_ns;
  double explain_ms = 0.0;
  // Classifier rows evaluated while explaining.
  std::size_t classifier_evaluations = 0;
  std::vector<Explanation> explanations;
};

struct BenchmarkResult {
  DatasetKind dataset = DatasetKind::xor_;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t k = 0;
  double classifier_validation_accuracy = 0.0;
  double classifier_bayes_agreement = 0.0;
  double bayes_accuracy = 0.0;
  std::optional<double> classifier_train_ms;
  std::optional<double> l2x_train_ms;
  std::vector<EpochRecord> classifier_curve;
  std::vector<EpochRecord> l2x_curve;
  PostHocReport truth_post_hoc;  // masking to the ground-truth features
  std::vector<MethodOutcome> methods;

  const MethodOutcome& outcome(Method method) const;
};

// Explains and scores every validation sample with each method.
void evaluate_methods(BenchmarkResult& result, const Classifier& classifier, const Explainer* explainer,
                      std::span<const LabeledSample> valid, const std::vector<Method>& methods,
                      std::size_t threads);

// Generates data, trains the classifier and the explainer, then evaluates.
BenchmarkResult run_benchmark(const BenchmarkConfig& config);

// Deterministic metrics only (no wall times).
nlohmann::json summary_json(const BenchmarkResult& result);
nlohmann::json post_hoc_json(const BenchmarkResult& result);
// Everything, including the timing section.
nlohmann::json report_json(const BenchmarkResult& result);

void write_median_rank_csv(const std::vector<BenchmarkResult>& results, const std::string& path);
void write_json(const nlohmann::json& j, const std::string& path);

/// Writes median_ranks.csv, summary.json, posthoc.json (deterministic) and
/// report.json (with timing) into `dir`, creating it if needed.
void write_benchmark_outputs(const std::vector<BenchmarkResult>& results, const std::string& dir);

// Keeps freed tensor buffers in the heap instead of returning them to the OS
// after every step. No effect outside glibc.
void configure_allocator();

}  // namespace l2x
