#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2x/tensor.hpp"

namespace l2x {

/// Named tensors with a stable, insertion-ordered iteration order. Names are unique.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }

  std::optional<std::size_t> find(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::size_t scalar_count() const;
  // Same names and shapes, in the same order.
  bool same_layout(const ParameterSet& other) const;
  ParameterSet zeros_like() const;

  bool operator==(const ParameterSet& other) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

enum class OpKind {
  constant,
  variable,
  parameter,
  matmul,
  add,
  sub,
  mul,
  max,
  relu,
  sigmoid,
  exp,
  log,
  neg,
  abs,
  add_bias,
  scale,
  clamp_min,
  softmax,
  log_softmax,
  sum,
  mean,
  reduce_max,
};

const char* op_name(OpKind op);

struct TapeNode {
  OpKind op = OpKind::constant;
  std::array<int, 2> parents{-1, -1};
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  double scalar = 0.0;     // temperature, scale factor or clamp floor
  int axis = -1;           // reduction axis, -1 for a full reduction
  std::vector<std::size_t> argmax;  // reduce_max: winning flat index per output entry
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  int id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Parameter leaves registered for one ParameterSet, in its iteration order.
class Binding {
 public:
  Binding() = default;
  Binding(const Graph* graph, const ParameterSet* params, std::vector<Var> vars)
      : graph_(graph), params_(params), vars_(std::move(vars)) {}

  Var operator[](const std::string& name) const;
  Var operator[](std::size_t i) const { return vars_[i]; }
  std::size_t size() const noexcept { return vars_.size(); }

  // Gradient per parameter after Graph::backward; unreached parameters get zeros.
  ParameterSet gradients() const;

 private:
  const Graph* graph_ = nullptr;
  const ParameterSet* params_ = nullptr;
  std::vector<Var> vars_;
};

/// Define-by-run tape. Nodes are appended in creation order, which is a
/// topological order, so backward is a single reverse sweep.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var parameter(const Tensor& value);
  // Registers every tensor of `params` as a leaf. Frozen bindings take part in the
  // forward pass but receive no gradient.
  Binding bind(const ParameterSet& params, bool trainable = true);

  // Reverse sweep from a one-element root. Gradients from earlier sweeps are discarded.
  void backward(Var root);

  // Adjoint of a node after backward; zeros when the node was not reached.
  Tensor grad(Var v) const;

  const TapeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  Var push(TapeNode node);

 private:
  void backward_node(std::size_t id);
  Tensor& grad_slot(int id);

  std::vector<TapeNode> nodes_;
};

// Matrix product of [m x n] by [n x p].
Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Elementwise maximum; on ties the gradient goes to `a`.
Var max(Var a, Var b);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
// Throws DomainError if any entry is <= 0.
Var log(Var a);
Var neg(Var a);
Var abs(Var a);
// [batch x n] plus a bias of n entries, broadcast over rows.
Var add_bias(Var a, Var bias);
Var scale(Var a, double factor);
Var clamp_min(Var a, double floor);

enum class Elementwise { add, mul, max, relu, sigmoid, exp, log, neg, abs };
Var elementwise(Elementwise op, Var a, std::optional<Var> b = std::nullopt);

// Softmax of logits / temperature along the last axis, stabilised by max subtraction.
Var softmax(Var logits, double temperature = 1.0);
Var log_softmax(Var logits, double temperature = 1.0);

enum class Reduce { sum, mean, max };
// Without an axis the result has shape [1]. reduce max ties resolve to the lowest index.
Var reduce(Reduce op, Var a, std::optional<int> axis = std::nullopt);
inline Var sum(Var a, std::optional<int> axis = std::nullopt) { return reduce(Reduce::sum, a, axis); }
inline Var mean(Var a, std::optional<int> axis = std::nullopt) { return reduce(Reduce::mean, a, axis); }
inline Var reduce_max(Var a, std::optional<int> axis = std::nullopt) {
  return reduce(Reduce::max, a, axis);
}

// Builds a scalar objective on a fresh graph from the bound parameters.
using ScalarFunction = std::function<Var(Graph&, const Binding&)>;

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose one-sided differences disagree, i.e. sitting on a kink.
  std::vector<std::pair<std::string, std::size_t>> excluded;
};

/// Compares reverse-mode gradients against central differences for every
/// parameter coordinate. Relative error uses max(1e-8, |analytic| + |numeric|).
FiniteDiffReport finite_diff_check(const ScalarFunction& f, const ParameterSet& params,
                                   double step = 1e-6);

}  // namespace l2x
