#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "l2x/models.hpp"
#include "l2x/sampling.hpp"
#include "l2x/tensor.hpp"

namespace l2x {

enum class Method { l2x, saliency, taylor, taylor_abs };

const char* method_name(Method method);
Method parse_method(const std::string& name);

struct Explanation {
  std::size_t sample_id = 0;
  Method method = Method::l2x;
  std::vector<double> scores;
  FeatureSet selected;
  std::int64_t wall_ns = 0;
};

// Top-k by the explainer's scores from one explainer forward pass; never touches the classifier.
Explanation explain_l2x(const Explainer& explainer, const std::vector<double>& x, std::size_t k,
                        std::size_t sample_id = 0);

// |d logit_c / d x_i| where c is the classifier's argmax at x.
Explanation explain_saliency(const Classifier& classifier, const std::vector<double>& x, std::size_t k,
                             std::size_t sample_id = 0);

// x_i * d logit_c / d x_i, ranked signed (or by magnitude when `absolute`).
Explanation explain_taylor(const Classifier& classifier, const std::vector<double>& x, std::size_t k,
                           std::size_t sample_id = 0, bool absolute = false);

/// Explains every row of `x`, each sample timed individually. `threads` > 1 splits the
/// rows into contiguous shards; the output order is always the row order.
std::vector<Explanation> explain_all(Method method, const Tensor& x, std::size_t k,
                                     const Classifier* classifier, const Explainer* explainer,
                                     std::size_t threads = 1);

// JSON-lines: {"id","method","scores","selected","ns"} per line.
void write_explanations_jsonl(const std::vector<Explanation>& explanations, const std::string& path);
std::vector<Explanation> read_explanations_jsonl(const std::string& path);

}  // namespace l2x
