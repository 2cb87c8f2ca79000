#include "l2x/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "l2x/errors.hpp"

namespace l2x {

// ---------------------------------------------------------------- median rank

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile(values, 0.5);
}

}  // namespace

BoxSummary summarize(std::vector<double> values) {
  if (values.empty()) throw DataError("cannot summarise an empty list");
  std::sort(values.begin(), values.end());
  BoxSummary s;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return s;
}

std::vector<std::size_t> feature_ranks(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> ranks(scores.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r + 1;
  return ranks;
}

double sample_median_rank(std::span<const double> scores, const FeatureSet& truth) {
  if (truth.empty()) throw DataError("sample has no ground-truth features");
  const auto ranks = feature_ranks(scores);
  std::vector<double> truth_ranks;
  for (auto i : truth) {
    if (i >= scores.size()) {
      throw DataError("truth index " + std::to_string(i) + " out of range for d=" +
                      std::to_string(scores.size()));
    }
    truth_ranks.push_back(static_cast<double>(ranks[i]));
  }
  return median_of(std::move(truth_ranks));
}

MedianRankReport median_rank(const std::vector<Explanation>& explanations,
                             const std::vector<FeatureSet>& truths, std::size_t d) {
  if (explanations.size() != truths.size()) {
    throw DataError("median rank: " + std::to_string(explanations.size()) + " explanations for " +
                    std::to_string(truths.size()) + " samples");
  }
  if (explanations.empty()) throw DataError("median rank: no samples");
  MedianRankReport report;
  report.per_sample.reserve(explanations.size());
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    if (explanations[i].scores.size() != d) {
      throw DataError("explanation " + std::to_string(i) + " carries " +
                      std::to_string(explanations[i].scores.size()) + " scores, expected " +
                      std::to_string(d));
    }
    report.per_sample.push_back(sample_median_rank(explanations[i].scores, truths[i]));
  }
  report.summary = summarize(report.per_sample);
  report.optimal_median = (static_cast<double>(truths.front().size()) + 1.0) / 2.0;
  return report;
}

// ---------------------------------------------------------------- post-hoc accuracy

namespace {

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

PostHocReport post_hoc_accuracy(const Classifier& classifier, const Tensor& x,
                                const std::vector<FeatureSet>& selections, const std::string& method) {
  if (selections.size() != x.rows()) {
    throw DataError("post-hoc accuracy: " + std::to_string(selections.size()) + " selections for " +
                    std::to_string(x.rows()) + " samples");
  }
  Tensor masked = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = masked.row(i);
    std::vector<char> keep(x.cols(), 0);
    for (auto j : selections[i]) {
      if (j >= x.cols()) throw DataError("selected feature " + std::to_string(j) + " out of range");
      keep[j] = 1;
    }
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (!keep[j]) row[j] = 0.0;
    }
  }
  const Tensor full = classifier_forward(classifier, x);
  const Tensor reduced = classifier_forward(classifier, masked);
  PostHocReport report;
  report.n = x.rows();
  report.k = selections.empty() ? 0 : selections.front().size();
  report.method = method;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    report.matches += argmax_row(full.row(i)) == argmax_row(reduced.row(i)) ? 1 : 0;
  }
  report.accuracy = static_cast<double>(report.matches) / static_cast<double>(report.n);
  return report;
}

PostHocReport post_hoc_accuracy(const Classifier& classifier, const Tensor& x,
                                const std::vector<Explanation>& explanations) {
  std::vector<FeatureSet> selections;
  selections.reserve(explanations.size());
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    if (explanations[i].sample_id != i) throw DataError("explanations are not aligned with samples");
    selections.push_back(explanations[i].selected);
  }
  const std::string method = explanations.empty() ? "" : method_name(explanations.front().method);
  return post_hoc_accuracy(classifier, x, selections, method);
}

// ---------------------------------------------------------------- discrete joints

void DiscreteJoint::validate() const {
  if (xs.empty() || xs.size() != px.size() || xs.size() != py_given_x.size()) {
    throw DataError("discrete joint tables have inconsistent sizes");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != features()) throw DataError("feature vectors differ in length");
    if (px[i] < 0.0) throw DataError("negative marginal probability");
    total += px[i];
    if (py_given_x[i].size() != classes()) throw DataError("conditional rows differ in length");
    double row = 0.0;
    for (double p : py_given_x[i]) {
      if (p < 0.0) throw DataError("negative conditional probability");
      row += p;
    }
    if (std::fabs(row - 1.0) > 1e-9) throw DataError("conditional row does not sum to 1");
  }
  if (std::fabs(total - 1.0) > 1e-9) throw DataError("marginal does not sum to 1");
}

std::vector<int> project(const std::vector<int>& x, const FeatureSet& subset) {
  std::vector<int> out;
  out.reserve(subset.size());
  for (auto i : subset) out.push_back(x[i]);
  return out;
}

namespace {

void check_subset(const DiscreteJoint& joint, const FeatureSet& subset) {
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (subset[i] >= joint.features() || (i && subset[i] <= subset[i - 1])) {
      throw ParameterError("feature subset must be strictly increasing indices below d=" +
                           std::to_string(joint.features()));
    }
  }
}

double plogp_sum(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace

ConditionalTable exact_conditional(const DiscreteJoint& joint, const FeatureSet& subset) {
  check_subset(joint, subset);
  std::map<std::vector<int>, double> mass;
  ConditionalTable table;
  for (std::size_t i = 0; i < joint.xs.size(); ++i) {
    const auto key = project(joint.xs[i], subset);
    auto& row = table[key];
    row.resize(joint.classes(), 0.0);
    for (std::size_t y = 0; y < joint.classes(); ++y) row[y] += joint.px[i] * joint.py_given_x[i][y];
    mass[key] += joint.px[i];
  }
  for (auto& [key, row] : table) {
    const double m = mass[key];
    for (auto& v : row) v = m > 0.0 ? v / m : 1.0 / static_cast<double>(joint.classes());
  }
  return table;
}

double class_entropy(const DiscreteJoint& joint) {
  std::vector<double> py(joint.classes(), 0.0);
  for (std::size_t i = 0; i < joint.xs.size(); ++i) {
    for (std::size_t y = 0; y < joint.classes(); ++y) py[y] += joint.px[i] * joint.py_given_x[i][y];
  }
  return plogp_sum(py);
}

double conditional_entropy(const DiscreteJoint& joint, const FeatureSet& subset) {
  check_subset(joint, subset);
  std::map<std::vector<int>, double> mass;
  for (std::size_t i = 0; i < joint.xs.size(); ++i) mass[project(joint.xs[i], subset)] += joint.px[i];
  const auto table = exact_conditional(joint, subset);
  double h = 0.0;
  for (const auto& [key, row] : table) h += mass[key] * plogp_sum(row);
  return h;
}

double exact_mutual_information(const DiscreteJoint& joint, const FeatureSet& subset) {
  joint.validate();
  return class_entropy(joint) - conditional_entropy(joint, subset);
}

namespace {

double code_length(const std::vector<double>& py_x, const std::vector<double>& py_xs) {
  double total = 0.0;
  for (std::size_t y = 0; y < py_x.size(); ++y) {
    if (py_x[y] > 0.0) total -= py_x[y] * std::log(py_xs[y]);
  }
  return total;
}

}  // namespace

double expected_code_length(const DiscreteJoint& joint, std::size_t index, const FeatureSet& subset) {
  const auto table = exact_conditional(joint, subset);
  return code_length(joint.py_given_x.at(index), table.at(project(joint.xs[index], subset)));
}

double selection_rule_objective(const DiscreteJoint& joint, const std::vector<FeatureSet>& rule) {
  joint.validate();
  if (rule.size() != joint.xs.size()) throw DataError("selection rule must give one subset per x");
  std::map<FeatureSet, ConditionalTable> cache;
  double total = class_entropy(joint);
  for (std::size_t i = 0; i < joint.xs.size(); ++i) {
    auto it = cache.find(rule[i]);
    if (it == cache.end()) it = cache.emplace(rule[i], exact_conditional(joint, rule[i])).first;
    total -= joint.px[i] * code_length(joint.py_given_x[i], it->second.at(project(joint.xs[i], rule[i])));
  }
  return total;
}

std::vector<FeatureSet> all_subsets(std::size_t d, std::size_t k) {
  std::vector<FeatureSet> out;
  if (k > d) return out;
  FeatureSet current(k);
  std::iota(current.begin(), current.end(), std::size_t{0});
  while (true) {
    out.push_back(current);
    std::size_t i = k;
    while (i > 0 && current[i - 1] == d - k + (i - 1)) --i;
    if (i == 0) break;
    ++current[i - 1];
    for (std::size_t j = i; j < k; ++j) current[j] = current[j - 1] + 1;
  }
  return out;
}

BestSubsetResult brute_force_best_subset(const DiscreteJoint& joint, std::size_t k,
                                         const OracleLimits& limits) {
  joint.validate();
  const std::size_t d = joint.features();
  const std::size_t n = joint.xs.size();
  if (k < 1 || k > d) throw ParameterError("subset size must lie in [1, d]");
  const auto subsets = all_subsets(d, k);
  if (n * subsets.size() > limits.max_subset_evaluations) {
    throw ResourceError("enumeration of " + std::to_string(subsets.size()) + " subsets over " +
                        std::to_string(n) + " inputs exceeds the configured cap");
  }
  const double tol = limits.tolerance;
  const double hy = class_entropy(joint);

  // code[i][s]: expected code length at x_i using subset s.
  std::vector<std::vector<double>> code(n, std::vector<double>(subsets.size()));
  BestSubsetResult result;
  result.constant_rules_match_mi = true;
  result.best_mutual_information = -1.0;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    const auto table = exact_conditional(joint, subsets[s]);
    for (std::size_t i = 0; i < n; ++i) {
      code[i][s] = code_length(joint.py_given_x[i], table.at(project(joint.xs[i], subsets[s])));
    }
    const double mi = exact_mutual_information(joint, subsets[s]);
    const std::vector<FeatureSet> constant(n, subsets[s]);
    if (std::fabs(selection_rule_objective(joint, constant) - mi) > tol) {
      result.constant_rules_match_mi = false;
    }
    if (mi > result.best_mutual_information + tol) {
      result.best_mutual_information = mi;
      result.best_subset = subsets[s];
    }
  }

  // Per-x minimiser of expected code length, and the per-x maximiser of the
  // pointwise contribution sum_y P(y|x) log(P(y|x_S) / P(y)), found independently.
  std::vector<double> py(joint.classes(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t y = 0; y < joint.classes(); ++y) py[y] += joint.px[i] * joint.py_given_x[i][y];
  }
  std::vector<std::size_t> best_index(n);
  result.optimal_rule.resize(n);
  result.optimal_sets.resize(n);
  result.argmax_contribution = true;
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::min_element(code[i].begin(), code[i].end());
    best_index[i] = static_cast<std::size_t>(it - code[i].begin());
    result.optimal_rule[i] = subsets[best_index[i]];
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      if (joint.px[i] * (code[i][s] - *it) <= tol) result.optimal_sets[i].push_back(subsets[s]);
    }
    std::size_t contribution_best = 0;
    double contribution_max = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      const auto table = exact_conditional(joint, subsets[s]);
      const auto& row = table.at(project(joint.xs[i], subsets[s]));
      double c = 0.0;
      for (std::size_t y = 0; y < joint.classes(); ++y) {
        if (joint.py_given_x[i][y] > 0.0) c += joint.py_given_x[i][y] * std::log(row[y] / py[y]);
      }
      if (c > contribution_max) {
        contribution_max = c;
        contribution_best = s;
      }
    }
    if (std::fabs(code[i][contribution_best] - code[i][best_index[i]]) > tol) {
      result.argmax_contribution = false;
    }
  }
  result.optimal_rule_value = selection_rule_objective(joint, result.optimal_rule);

  // Rule value through the cached code-length table.
  auto value_of = [&](const std::vector<std::size_t>& rule) {
    double v = hy;
    for (std::size_t i = 0; i < n; ++i) v -= joint.px[i] * code[i][rule[i]];
    return v;
  };
  auto agrees_with_optimum = [&](const std::vector<std::size_t>& rule) {
    for (std::size_t i = 0; i < n; ++i) {
      if (joint.px[i] * (code[i][rule[i]] - code[i][best_index[i]]) > tol) return false;
    }
    return true;
  };

  result.forward_direction = true;
  result.reverse_direction = true;
  auto check_rule = [&](const std::vector<std::size_t>& rule) {
    const double v = value_of(rule);
    ++result.rules_checked;
    if (v > result.optimal_rule_value + tol) result.forward_direction = false;
    if (v >= result.optimal_rule_value - tol && !agrees_with_optimum(rule)) {
      result.reverse_direction = false;
    }
  };

  // Exhaustive enumeration of all |subsets|^n rules when small enough.
  double rule_count = 1.0;
  for (std::size_t i = 0; i < n && rule_count <= static_cast<double>(limits.max_exhaustive_rules); ++i) {
    rule_count *= static_cast<double>(subsets.size());
  }
  if (rule_count <= static_cast<double>(limits.max_exhaustive_rules)) {
    result.exhaustive = true;
    std::vector<std::size_t> rule(n, 0);
    while (true) {
      check_rule(rule);
      std::size_t pos = 0;
      while (pos < n && ++rule[pos] == subsets.size()) rule[pos++] = 0;
      if (pos == n) break;
    }
    return result;
  }

  // Otherwise: every constant rule, every single-input deviation from the optimum, and random rules.
  for (std::size_t s = 0; s < subsets.size(); ++s) check_rule(std::vector<std::size_t>(n, s));
  for (std::size_t i = 0; i < n; ++i) {
    auto rule = best_index;
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      rule[i] = s;
      check_rule(rule);
    }
  }
  Rng rng(limits.seed);
  std::uniform_int_distribution<std::size_t> pick(0, subsets.size() - 1);
  for (std::size_t r = 0; r < limits.random_rules; ++r) {
    std::vector<std::size_t> rule(n);
    for (auto& s : rule) s = pick(rng);
    check_rule(rule);
  }
  return result;
}

double jensen_gap(const DiscreteJoint& joint, const FeatureSet& subset, const ConditionalTable& q) {
  joint.validate();
  for (const auto& [key, row] : q) {
    double total = 0.0;
    for (double v : row) {
      if (v < 0.0) throw DataError("variational table has a negative probability");
      total += v;
    }
    if (row.size() != joint.classes() || std::fabs(total - 1.0) > 1e-9) {
      throw DataError("variational table row is not a distribution over the classes");
    }
  }
  const auto exact = exact_conditional(joint, subset);
  double gap = 0.0;
  for (std::size_t i = 0; i < joint.xs.size(); ++i) {
    const auto key = project(joint.xs[i], subset);
    const auto it = q.find(key);
    if (it == q.end()) throw DataError("variational table misses a value of x_S");
    const auto& p_row = exact.at(key);
    for (std::size_t y = 0; y < joint.classes(); ++y) {
      const double w = joint.px[i] * joint.py_given_x[i][y];
      if (w > 0.0) gap += w * (std::log(p_row[y]) - std::log(it->second[y]));
    }
  }
  return gap;
}

// ---------------------------------------------------------------- joints for tests and the CLI

namespace {

std::vector<double> dirichlet_ones(Rng& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> out(n);
  double total = 0.0;
  for (auto& v : out) {
    v = e(rng);
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

std::vector<std::vector<int>> binary_alphabet(std::size_t d) {
  std::vector<std::vector<int>> xs;
  for (std::size_t m = 0; m < (std::size_t{1} << d); ++m) {
    std::vector<int> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = static_cast<int>((m >> j) & 1U);
    xs.push_back(std::move(x));
  }
  return xs;
}

}  // namespace

DiscreteJoint random_joint(Rng& rng, std::size_t d, std::size_t classes) {
  DiscreteJoint joint;
  joint.xs = binary_alphabet(d);
  joint.px = dirichlet_ones(rng, joint.xs.size());
  for (std::size_t i = 0; i < joint.xs.size(); ++i) joint.py_given_x.push_back(dirichlet_ones(rng, classes));
  return joint;
}

DiscreteJoint xor_joint(std::size_t d, double noise) {
  DiscreteJoint joint;
  joint.xs = binary_alphabet(d);
  joint.px.assign(joint.xs.size(), 1.0 / static_cast<double>(joint.xs.size()));
  for (const auto& x : joint.xs) {
    const int y = x[0] ^ x[1];
    std::vector<double> row(2);
    row[static_cast<std::size_t>(y)] = 1.0 - noise;
    row[static_cast<std::size_t>(1 - y)] = noise;
    joint.py_given_x.push_back(row);
  }
  return joint;
}

OracleSuiteReport run_oracle_suite(std::size_t joints, std::uint64_t seed, std::size_t max_d,
                                   std::size_t max_classes, double tolerance) {
  OracleSuiteReport report;
  Rng rng = make_rng(seed, "oracle");
  std::uniform_int_distribution<std::size_t> pick_d(2, max_d);
  std::uniform_int_distribution<std::size_t> pick_c(2, max_classes);
  for (std::size_t j = 0; j < joints; ++j) {
    const std::size_t d = pick_d(rng);
    const DiscreteJoint joint = random_joint(rng, d, pick_c(rng));
    ++report.joints;

    OracleLimits limits;
    limits.seed = rng();
    limits.tolerance = tolerance;
    bool theorem_ok = true;
    for (std::size_t k = 1; k <= d; ++k) theorem_ok = theorem_ok && brute_force_best_subset(joint, k, limits).consistent();
    report.theorem_passed += theorem_ok ? 1 : 0;

    bool jensen_ok = true;
    for (std::size_t k = 1; k <= d; ++k) {
      for (const auto& subset : all_subsets(d, k)) {
        const auto exact = exact_conditional(joint, subset);
        const double zero_gap = jensen_gap(joint, subset, exact);
        report.max_exact_gap = std::max(report.max_exact_gap, std::fabs(zero_gap));
        jensen_ok = jensen_ok && std::fabs(zero_gap) <= 1e-12;

        // Perturb one row of the exact conditional; the gap must be positive and equal the
        // p(x_S)-weighted KL divergence computed directly.
        ConditionalTable q = exact;
        std::map<std::vector<int>, double> mass;
        for (std::size_t i = 0; i < joint.xs.size(); ++i) mass[project(joint.xs[i], subset)] += joint.px[i];
        auto& row = q.begin()->second;
        const auto argmax = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        const double moved = 0.5 * row[argmax];
        row[argmax] -= moved;
        for (std::size_t y = 0; y < row.size(); ++y) {
          if (y != argmax) row[y] += moved / static_cast<double>(row.size() - 1);
        }
        const double gap = jensen_gap(joint, subset, q);
        double kl = 0.0;
        for (const auto& [key, p_row] : exact) {
          for (std::size_t y = 0; y < p_row.size(); ++y) {
            if (p_row[y] > 0.0) kl += mass[key] * p_row[y] * std::log(p_row[y] / q.at(key)[y]);
          }
        }
        report.max_kl_mismatch = std::max(report.max_kl_mismatch, std::fabs(gap - kl));
        report.min_jensen_gap = j == 0 && k == 1 && subset == all_subsets(d, 1).front()
                                    ? gap
                                    : std::min(report.min_jensen_gap, gap);
        jensen_ok = jensen_ok && gap > 0.0 && std::fabs(gap - kl) <= 1e-12;
      }
    }
    report.jensen_passed += jensen_ok ? 1 : 0;
  }
  return report;
}

}  // namespace l2x
