#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "l2x/autodiff.hpp"
#include "l2x/rng.hpp"
#include "l2x/sampling.hpp"
#include "l2x/tensor.hpp"

namespace l2x {

enum class Head { softmax_classifier, linear_scores };

const char* head_name(Head head);
Head parse_head(const std::string& name);

inline constexpr std::size_t kHiddenWidth = 200;

/// Dense ReLU network. widths = {input, hidden..., output}.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Head head = Head::softmax_classifier;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  // Throws ParameterError unless there is at least one hidden layer and all widths are positive.
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

MlpSpec make_spec(std::size_t input, std::size_t hidden_layers, std::size_t hidden_width,
                  std::size_t output, Head head);

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, ParameterSet params);

  // Glorot-uniform weights, zero biases.
  static Mlp initialize(const MlpSpec& spec, Rng& rng);
  static Mlp zeros(const MlpSpec& spec);

  const MlpSpec& spec() const noexcept { return spec_; }
  const ParameterSet& params() const noexcept { return params_; }
  ParameterSet& params() noexcept { return params_; }

  // Final dense layer output, before the head.
  Var logits(const Binding& bound, Var x) const;
  // Logits passed through the head (softmax rows or raw scores).
  Var forward(const Binding& bound, Var x) const;
  Tensor predict(const Tensor& x) const;

  static std::string weight_name(std::size_t layer);
  static std::string bias_name(std::size_t layer);

 private:
  void check_input(const Tensor& x) const;

  MlpSpec spec_;
  ParameterSet params_;
};

// Copyable evaluation counter for the model being explained.
class EvalCounter {
 public:
  EvalCounter() = default;
  EvalCounter(const EvalCounter& other) : count_(other.count()) {}
  EvalCounter& operator=(const EvalCounter& other) {
    count_.store(other.count());
    return *this;
  }
  void add(std::size_t n) const { count_.fetch_add(n, std::memory_order_relaxed); }
  std::size_t count() const { return count_.load(std::memory_order_relaxed); }
  void reset() const { count_.store(0); }

 private:
  mutable std::atomic<std::size_t> count_{0};
};

/// The black-box model P_m(y | x) under explanation.
struct Classifier {
  Mlp net;
  EvalCounter evaluations;  // rows pushed through the network

  std::size_t classes() const { return net.spec().output_width(); }
  std::size_t features() const { return net.spec().input_width(); }
  // Pre-softmax logits on a graph; params enter as frozen constants.
  Var logits(Graph& g, Var x) const;
};

/// Maps an input to d importance scores, read as unnormalised log-weights.
struct Explainer {
  Mlp net;
};

/// Approximates the model's class distribution from a masked input.
struct VariationalNet {
  Mlp net;
};

Classifier make_classifier(std::size_t d, std::size_t classes, Rng& rng,
                           std::size_t hidden_layers = 3, std::size_t hidden_width = kHiddenWidth);
Explainer make_explainer(std::size_t d, Rng& rng, std::size_t hidden_layers = 2,
                         std::size_t hidden_width = kHiddenWidth);
VariationalNet make_variational(std::size_t d, std::size_t classes, Rng& rng,
                                std::size_t hidden_layers = 3,
                                std::size_t hidden_width = kHiddenWidth);

// Row-stochastic [batch x c] class probabilities.
Tensor classifier_forward(const Classifier& m, const Tensor& x);
Tensor explainer_scores(const Explainer& e, const Tensor& x);
Tensor variational_forward(const VariationalNet& q, const Tensor& x_masked);

// Zeroes every entry outside `selected`.
Tensor mask_input(const Tensor& x, const FeatureSet& selected);
// Elementwise product with the relaxed mask.
Tensor mask_input(const Tensor& x, const RelaxedMask& mask);

// Model file: "L2XM", u32 version, u32 length + JSON header, then raw little-endian doubles.
inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class NetworkRole { classifier, explainer, variational };
const char* role_name(NetworkRole role);

struct NetworkFile {
  NetworkRole role = NetworkRole::classifier;
  Mlp net;
};

std::vector<std::uint8_t> serialize(const Mlp& net, NetworkRole role);
NetworkFile deserialize(std::span<const std::uint8_t> bytes);

void save_network(const std::string& path, const Mlp& net, NetworkRole role);
// Throws VersionError when the stored role differs from `expected`.
Mlp load_network(const std::string& path, NetworkRole expected);

}  // namespace l2x
