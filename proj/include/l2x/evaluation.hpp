#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "l2x/explainers.hpp"
#include "l2x/models.hpp"
#include "l2x/rng.hpp"
#include "l2x/sampling.hpp"

namespace l2x {

// ---------------------------------------------------------------- median rank

struct BoxSummary {
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

// Quartiles by linear interpolation between order statistics.
BoxSummary summarize(std::vector<double> values);

// 1-based rank of every feature when sorted by descending score; ties go to the lower index.
std::vector<std::size_t> feature_ranks(std::span<const double> scores);
double sample_median_rank(std::span<const double> scores, const FeatureSet& truth);

struct MedianRankReport {
  std::vector<double> per_sample;
  BoxSummary summary;
  double optimal_median = 0.0;  // (|truth| + 1) / 2
};

MedianRankReport median_rank(const std::vector<Explanation>& explanations,
                             const std::vector<FeatureSet>& truths, std::size_t d);

// ---------------------------------------------------------------- post-hoc accuracy

struct PostHocReport {
  double accuracy = 0.0;
  std::size_t matches = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  std::string method;
};

/// Fraction of samples whose prediction on the input with unselected features
/// zeroed agrees with the prediction on the full input.
PostHocReport post_hoc_accuracy(const Classifier& classifier, const Tensor& x,
                                const std::vector<FeatureSet>& selections, const std::string& method);
PostHocReport post_hoc_accuracy(const Classifier& classifier, const Tensor& x,
                                const std::vector<Explanation>& explanations);

// ---------------------------------------------------------------- discrete oracle

/// Finite joint of categorical features X and a class Y given through P(Y | x).
struct DiscreteJoint {
  std::vector<std::vector<int>> xs;
  std::vector<double> px;
  std::vector<std::vector<double>> py_given_x;

  std::size_t features() const { return xs.empty() ? 0 : xs.front().size(); }
  std::size_t classes() const { return py_given_x.empty() ? 0 : py_given_x.front().size(); }
  // Throws DataError unless px and every conditional row are distributions.
  void validate() const;
};

using ConditionalTable = std::map<std::vector<int>, std::vector<double>>;

std::vector<int> project(const std::vector<int>& x, const FeatureSet& subset);
// P(Y | x_S) for every observed value of x_S.
ConditionalTable exact_conditional(const DiscreteJoint& joint, const FeatureSet& subset);

double class_entropy(const DiscreteJoint& joint);
double conditional_entropy(const DiscreteJoint& joint, const FeatureSet& subset);

// I(X_S; Y) = H(Y) - H(Y | X_S), in nats.
double exact_mutual_information(const DiscreteJoint& joint, const FeatureSet& subset);

// E_m[-log P(Y | x_S) | x] for the x at `index`.
double expected_code_length(const DiscreteJoint& joint, std::size_t index, const FeatureSet& subset);

/// Mutual-information objective of a deterministic per-x selection rule:
/// H(Y) + sum_x p(x) sum_y P(y|x) log P(y | x_{rule(x)}).
double selection_rule_objective(const DiscreteJoint& joint, const std::vector<FeatureSet>& rule);

std::vector<FeatureSet> all_subsets(std::size_t d, std::size_t k);

struct OracleLimits {
  std::size_t max_subset_evaluations = 50'000'000;  // |alphabet| * C(d, k)
  std::size_t max_exhaustive_rules = 20'000;
  std::size_t random_rules = 200;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
};

struct BestSubsetResult {
  FeatureSet best_subset;  // best single subset used for every x
  double best_mutual_information = 0.0;

  std::vector<FeatureSet> optimal_rule;                // per-x minimiser of expected code length
  std::vector<std::vector<FeatureSet>> optimal_sets;   // all minimisers within tolerance
  double optimal_rule_value = 0.0;

  std::size_t rules_checked = 0;
  bool exhaustive = false;
  bool forward_direction = false;   // no checked rule beats the per-x optimum
  bool reverse_direction = false;   // every rule attaining the optimum agrees with it a.s.
  bool argmax_contribution = false; // per-x argmin code length == per-x argmax MI contribution
  bool constant_rules_match_mi = false;

  bool consistent() const {
    return forward_direction && reverse_direction && argmax_contribution && constant_rules_match_mi;
  }
};

// Throws ResourceError when |alphabet| * C(d, k) exceeds the limit.
BestSubsetResult brute_force_best_subset(const DiscreteJoint& joint, std::size_t k,
                                         const OracleLimits& limits = {});

/// E[log P(Y | X_S)] - E[log Q(Y | X_S)] with Y drawn from P(Y | X). Non-negative; zero iff q
/// equals the exact conditional on the support.
double jensen_gap(const DiscreteJoint& joint, const FeatureSet& subset, const ConditionalTable& q);

// Random joint over {0,1}^d with Dirichlet(1) class rows and a Dirichlet(1) marginal.
DiscreteJoint random_joint(Rng& rng, std::size_t d, std::size_t classes);
// Uniform X over {0,1}^d, Y = X1 xor X2 flipped with probability `noise`.
DiscreteJoint xor_joint(std::size_t d, double noise);

struct OracleSuiteReport {
  std::size_t joints = 0;
  std::size_t theorem_passed = 0;
  std::size_t jensen_passed = 0;
  double max_kl_mismatch = 0.0;   // |jensen gap - averaged KL| over all checks
  double min_jensen_gap = 0.0;    // smallest gap seen over random q (must be >= 0)
  double max_exact_gap = 0.0;     // largest |gap| when q is the exact conditional
  bool passed() const { return theorem_passed == joints && jensen_passed == joints; }
};

/// Random joints with d in [2, max_d], binary features, c in [2, max_c]; runs the
/// selection-rule checks for every k and the Jensen checks for every subset.
OracleSuiteReport run_oracle_suite(std::size_t joints, std::uint64_t seed, std::size_t max_d = 6,
                                   std::size_t max_classes = 3, double tolerance = 1e-10);

}  // namespace l2x
