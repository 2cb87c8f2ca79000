#include "l2x/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "l2x/errors.hpp"

namespace l2x {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

// ---------------------------------------------------------------- ParameterSet

void ParameterSet::add(std::string name, Tensor value) {
  if (find(name)) throw ContractError("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  auto i = find(name);
  if (!i) throw ContractError("unknown parameter: " + name);
  return tensors_[*i];
}

Tensor& ParameterSet::get(const std::string& name) {
  auto i = find(name);
  if (!i) throw ContractError("unknown parameter: " + name);
  return tensors_[*i];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (names_[i] != other.names_[i] || tensors_[i].shape() != other.tensors_[i].shape()) {
      return false;
    }
  }
  return true;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], Tensor::zeros(tensors_[i].shape()));
  return out;
}

// ---------------------------------------------------------------- Graph

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::constant: return "constant";
    case OpKind::variable: return "variable";
    case OpKind::parameter: return "parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::max: return "max";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::neg: return "neg";
    case OpKind::abs: return "abs";
    case OpKind::add_bias: return "add_bias";
    case OpKind::scale: return "scale";
    case OpKind::clamp_min: return "clamp_min";
    case OpKind::softmax: return "softmax";
    case OpKind::log_softmax: return "log_softmax";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::reduce_max: return "reduce_max";
  }
  return "?";
}

const Tensor& Var::value() const { return graph_->node(id_).value; }

Var Graph::push(TapeNode node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Graph::constant(Tensor value) {
  TapeNode n;
  n.op = OpKind::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  TapeNode n;
  n.op = OpKind::variable;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::parameter(const Tensor& value) {
  TapeNode n;
  n.op = OpKind::parameter;
  n.value = value;
  n.requires_grad = true;
  return push(std::move(n));
}

Binding Graph::bind(const ParameterSet& params, bool trainable) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars.push_back(trainable ? parameter(params.tensor(i)) : constant(params.tensor(i)));
  }
  return Binding(this, &params, std::move(vars));
}

Var Binding::operator[](const std::string& name) const {
  auto i = params_->find(name);
  if (!i) throw ContractError("unknown parameter: " + name);
  return vars_[*i];
}

ParameterSet Binding::gradients() const {
  ParameterSet out;
  for (std::size_t i = 0; i < vars_.size(); ++i) out.add(params_->name(i), graph_->grad(vars_[i]));
  return out;
}

Tensor Graph::grad(Var v) const {
  const auto& n = node(v.id());
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return n.grad;
}

Tensor& Graph::grad_slot(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Graph::backward(Var root) {
  if (root.id() < 0 || static_cast<std::size_t>(root.id()) >= nodes_.size()) {
    throw ContractError("backward root does not belong to this graph");
  }
  const auto& r = nodes_[static_cast<std::size_t>(root.id())];
  if (r.value.size() != 1) {
    throw ContractError("backward root must be scalar, got shape " + shape_string(r.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!r.requires_grad) return;
  grad_slot(root.id())[0] = 1.0;
  for (std::size_t id = static_cast<std::size_t>(root.id()) + 1; id-- > 0;) {
    if (nodes_[id].requires_grad && !nodes_[id].grad.empty()) backward_node(id);
  }
}

namespace {

void require_same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) throw ContractError("operands belong to different graphs");
}

void require_same_shape(const char* op, Var a, Var b) {
  require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Var make_unary(OpKind op, Var a, Tensor value, double scalar = 0.0) {
  TapeNode n;
  n.op = op;
  n.parents = {a.id(), -1};
  n.value = std::move(value);
  n.requires_grad = a.graph().node(a.id()).requires_grad;
  n.scalar = scalar;
  return a.graph().push(std::move(n));
}

Var make_binary(OpKind op, Var a, Var b, Tensor value) {
  TapeNode n;
  n.op = op;
  n.parents = {a.id(), b.id()};
  n.value = std::move(value);
  n.requires_grad =
      a.graph().node(a.id()).requires_grad || b.graph().node(b.id()).requires_grad;
  return a.graph().push(std::move(n));
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tensor softmax_forward(const Tensor& x, double temperature, bool log_space) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.size() / d;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double* o = out.data() + r * d;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j) m = std::max(m, in[j] / temperature);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = in[j] / temperature - m;
      z += std::exp(o[j]);
    }
    if (log_space) {
      const double lz = std::log(z);
      for (std::size_t j = 0; j < d; ++j) o[j] -= lz;
    } else {
      for (std::size_t j = 0; j < d; ++j) o[j] = std::exp(o[j]) / z;
    }
  }
  return out;
}

}  // namespace

void Graph::backward_node(std::size_t id) {
  // Copy the metadata we need; grad_slot may reallocate nothing but keep references simple.
  const TapeNode& n = nodes_[id];
  const Tensor& g = n.grad;
  const int pa = n.parents[0];
  const int pb = n.parents[1];
  auto wants = [&](int p) { return p >= 0 && nodes_[static_cast<std::size_t>(p)].requires_grad; };
  auto val = [&](int p) -> const Tensor& { return nodes_[static_cast<std::size_t>(p)].value; };

  switch (n.op) {
    case OpKind::constant:
    case OpKind::variable:
    case OpKind::parameter:
      return;
    case OpKind::matmul: {
      const Tensor& a = val(pa);
      const Tensor& b = val(pb);
      ConstMap G(g.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
      if (wants(pa)) {
        Tensor& ga = grad_slot(pa);
        ConstMap B(b.data(), static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols()));
        MutMap GA(ga.data(), static_cast<Eigen::Index>(ga.rows()), static_cast<Eigen::Index>(ga.cols()));
        GA.noalias() += G * B.transpose();
      }
      if (wants(pb)) {
        Tensor& gb = grad_slot(pb);
        ConstMap A(a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
        MutMap GB(gb.data(), static_cast<Eigen::Index>(gb.rows()), static_cast<Eigen::Index>(gb.cols()));
        GB.noalias() += A.transpose() * G;
      }
      return;
    }
    case OpKind::add:
    case OpKind::sub: {
      if (wants(pa)) {
        Tensor& ga = grad_slot(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(pb)) {
        Tensor& gb = grad_slot(pb);
        const double sign = n.op == OpKind::sub ? -1.0 : 1.0;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      return;
    }
    case OpKind::mul: {
      const Tensor& a = val(pa);
      const Tensor& b = val(pb);
      if (wants(pa)) {
        Tensor& ga = grad_slot(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(pb)) {
        Tensor& gb = grad_slot(pb);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      return;
    }
    case OpKind::max: {
      const Tensor& a = val(pa);
      const Tensor& b = val(pb);
      const bool wa = wants(pa);
      const bool wb = wants(pb);
      Tensor* ga = wa ? &grad_slot(pa) : nullptr;
      Tensor* gb = wb ? &grad_slot(pb) : nullptr;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a[i] >= b[i]) {
          if (wa) (*ga)[i] += g[i];
        } else if (wb) {
          (*gb)[i] += g[i];
        }
      }
      return;
    }
    case OpKind::relu:
    case OpKind::sigmoid:
    case OpKind::exp:
    case OpKind::log:
    case OpKind::neg:
    case OpKind::abs:
    case OpKind::scale:
    case OpKind::clamp_min: {
      if (!wants(pa)) return;
      const Tensor& a = val(pa);
      const Tensor& y = n.value;
      Tensor& ga = grad_slot(pa);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = 0.0;
        switch (n.op) {
          case OpKind::relu: d = a[i] > 0.0 ? 1.0 : 0.0; break;
          case OpKind::sigmoid: d = y[i] * (1.0 - y[i]); break;
          case OpKind::exp: d = y[i]; break;
          case OpKind::log: d = 1.0 / a[i]; break;
          case OpKind::neg: d = -1.0; break;
          case OpKind::abs: d = a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0); break;
          case OpKind::scale: d = n.scalar; break;
          case OpKind::clamp_min: d = a[i] > n.scalar ? 1.0 : 0.0; break;
          default: break;
        }
        ga[i] += g[i] * d;
      }
      return;
    }
    case OpKind::add_bias: {
      const std::size_t c = g.shape().back();
      const std::size_t rows = g.size() / c;
      if (wants(pa)) {
        Tensor& ga = grad_slot(pa);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(pb)) {
        Tensor& gb = grad_slot(pb);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < c; ++j) gb[j] += g[r * c + j];
        }
      }
      return;
    }
    case OpKind::softmax:
    case OpKind::log_softmax: {
      if (!wants(pa)) return;
      const Tensor& y = n.value;
      Tensor& ga = grad_slot(pa);
      const std::size_t d = y.shape().back();
      const std::size_t rows = y.size() / d;
      const double inv_t = 1.0 / n.scalar;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* yr = y.data() + r * d;
        const double* gr = g.data() + r * d;
        double* out = ga.data() + r * d;
        if (n.op == OpKind::softmax) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
          for (std::size_t j = 0; j < d; ++j) out[j] += inv_t * yr[j] * (gr[j] - dot);
        } else {
          double total = 0.0;
          for (std::size_t j = 0; j < d; ++j) total += gr[j];
          for (std::size_t j = 0; j < d; ++j) out[j] += inv_t * (gr[j] - std::exp(yr[j]) * total);
        }
      }
      return;
    }
    case OpKind::sum:
    case OpKind::mean: {
      if (!wants(pa)) return;
      const Tensor& a = val(pa);
      Tensor& ga = grad_slot(pa);
      if (n.axis < 0) {
        const double f = n.op == OpKind::mean ? 1.0 / static_cast<double>(a.size()) : 1.0;
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[0] * f;
        return;
      }
      const auto s = split_at(a.shape(), static_cast<std::size_t>(n.axis));
      const double f = n.op == OpKind::mean ? 1.0 / static_cast<double>(s.extent) : 1.0;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t e = 0; e < s.extent; ++e) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            ga[(o * s.extent + e) * s.inner + i] += g[o * s.inner + i] * f;
          }
        }
      }
      return;
    }
    case OpKind::reduce_max: {
      if (!wants(pa)) return;
      Tensor& ga = grad_slot(pa);
      for (std::size_t i = 0; i < n.argmax.size(); ++i) ga[n.argmax[i]] += g[i];
      return;
    }
  }
}

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(A.shape()) + " and " +
                         shape_string(B.shape()));
  }
  Tensor out({A.rows(), B.cols()});
  ConstMap MA(A.data(), static_cast<Eigen::Index>(A.rows()), static_cast<Eigen::Index>(A.cols()));
  ConstMap MB(B.data(), static_cast<Eigen::Index>(B.rows()), static_cast<Eigen::Index>(B.cols()));
  MutMap MO(out.data(), static_cast<Eigen::Index>(out.rows()), static_cast<Eigen::Index>(out.cols()));
  MO.noalias() = MA * MB;
  return make_binary(OpKind::matmul, a, b, std::move(out));
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  return make_binary(OpKind::add, a, b,
                     map_binary(a.value(), b.value(), [](double x, double y) { return x + y; }));
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  return make_binary(OpKind::sub, a, b,
                     map_binary(a.value(), b.value(), [](double x, double y) { return x - y; }));
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  return make_binary(OpKind::mul, a, b,
                     map_binary(a.value(), b.value(), [](double x, double y) { return x * y; }));
}

Var max(Var a, Var b) {
  require_same_shape("max", a, b);
  return make_binary(OpKind::max, a, b, map_binary(a.value(), b.value(), [](double x, double y) {
                       return x >= y ? x : y;
                     }));
}

Var relu(Var a) {
  // NaN passes through so non-finite inputs surface in the loss.
  return make_unary(OpKind::relu, a,
                    map_unary(a.value(), [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; }));
}

Var sigmoid(Var a) {
  return make_unary(OpKind::sigmoid, a, map_unary(a.value(), [](double x) {
                      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                      const double e = std::exp(x);
                      return e / (1.0 + e);
                    }));
}

Var exp(Var a) {
  return make_unary(OpKind::exp, a, map_unary(a.value(), [](double x) { return std::exp(x); }));
}

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return make_unary(OpKind::log, a, map_unary(a.value(), [](double x) { return std::log(x); }));
}

Var neg(Var a) {
  return make_unary(OpKind::neg, a, map_unary(a.value(), [](double x) { return -x; }));
}

Var abs(Var a) {
  return make_unary(OpKind::abs, a, map_unary(a.value(), [](double x) { return std::fabs(x); }));
}

Var add_bias(Var a, Var bias) {
  require_same_graph(a, bias);
  const Tensor& A = a.value();
  const Tensor& b = bias.value();
  const std::size_t c = A.shape().back();
  const bool ok = A.rank() == 2 && b.size() == c &&
                  (b.rank() == 1 || (b.rank() == 2 && b.shape()[0] == 1));
  if (!ok) {
    throw DimensionError("add_bias: cannot add bias " + shape_string(b.shape()) + " to " +
                         shape_string(A.shape()));
  }
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % c];
  return make_binary(OpKind::add_bias, a, bias, std::move(out));
}

Var scale(Var a, double factor) {
  return make_unary(OpKind::scale, a, map_unary(a.value(), [factor](double x) { return x * factor; }),
                    factor);
}

Var clamp_min(Var a, double floor) {
  return make_unary(OpKind::clamp_min, a,
                    map_unary(a.value(), [floor](double x) { return x > floor ? x : floor; }), floor);
}

Var elementwise(Elementwise op, Var a, std::optional<Var> b) {
  auto need_b = [&]() -> Var {
    if (!b) throw ContractError("binary elementwise op requires a second operand");
    return *b;
  };
  switch (op) {
    case Elementwise::add: return add(a, need_b());
    case Elementwise::mul: return mul(a, need_b());
    case Elementwise::max: return max(a, need_b());
    case Elementwise::relu: return relu(a);
    case Elementwise::sigmoid: return sigmoid(a);
    case Elementwise::exp: return exp(a);
    case Elementwise::log: return log(a);
    case Elementwise::neg: return neg(a);
    case Elementwise::abs: return abs(a);
  }
  throw ContractError("unknown elementwise op");
}

Var softmax(Var logits, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be positive");
  return make_unary(OpKind::softmax, logits, softmax_forward(logits.value(), temperature, false),
                    temperature);
}

Var log_softmax(Var logits, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax temperature must be positive");
  return make_unary(OpKind::log_softmax, logits, softmax_forward(logits.value(), temperature, true),
                    temperature);
}

Var reduce(Reduce op, Var a, std::optional<int> axis) {
  const Tensor& A = a.value();
  TapeNode n;
  n.parents = {a.id(), -1};
  n.requires_grad = a.graph().node(a.id()).requires_grad;
  n.op = op == Reduce::sum ? OpKind::sum : (op == Reduce::mean ? OpKind::mean : OpKind::reduce_max);

  if (!axis) {
    double acc = 0.0;
    if (op == Reduce::max) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < A.size(); ++i) {
        if (A[i] > A[best]) best = i;
      }
      acc = A[best];
      n.argmax = {best};
    } else {
      for (double v : A.values()) acc += v;
      if (op == Reduce::mean) acc /= static_cast<double>(A.size());
    }
    n.value = Tensor::scalar(acc);
    return a.graph().push(std::move(n));
  }

  const int rank = static_cast<int>(A.rank());
  if (*axis < 0 || *axis >= rank) {
    throw DimensionError("reduce: axis " + std::to_string(*axis) + " invalid for shape " +
                         shape_string(A.shape()));
  }
  n.axis = *axis;
  const auto s = split_at(A.shape(), static_cast<std::size_t>(*axis));
  Shape out_shape;
  for (int i = 0; i < rank; ++i) {
    if (i != *axis) out_shape.push_back(A.shape()[static_cast<std::size_t>(i)]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  if (op == Reduce::max) n.argmax.assign(out.size(), 0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t dst = o * s.inner + i;
      if (op == Reduce::max) {
        std::size_t best = o * s.extent * s.inner + i;
        for (std::size_t e = 1; e < s.extent; ++e) {
          const std::size_t src = (o * s.extent + e) * s.inner + i;
          if (A[src] > A[best]) best = src;
        }
        out[dst] = A[best];
        n.argmax[dst] = best;
      } else {
        double acc = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) acc += A[(o * s.extent + e) * s.inner + i];
        out[dst] = op == Reduce::mean ? acc / static_cast<double>(s.extent) : acc;
      }
    }
  }
  n.value = std::move(out);
  return a.graph().push(std::move(n));
}

// ---------------------------------------------------------------- gradient check

FiniteDiffReport finite_diff_check(const ScalarFunction& f, const ParameterSet& params, double step) {
  if (!(step > 0.0)) throw ParameterError("finite difference step must be positive");

  ParameterSet analytic;
  {
    Graph g;
    Binding b = g.bind(params);
    Var root = f(g, b);
    g.backward(root);
    analytic = b.gradients();
  }

  auto evaluate = [&](const ParameterSet& p) {
    Graph g;
    Binding b = g.bind(p);
    return f(g, b).value().item();
  };

  FiniteDiffReport report;
  ParameterSet work = params;
  const double center = evaluate(params);
  for (std::size_t t = 0; t < work.size(); ++t) {
    for (std::size_t i = 0; i < work.tensor(t).size(); ++i) {
      const double original = work.tensor(t)[i];
      work.tensor(t)[i] = original + step;
      const double up = evaluate(work);
      work.tensor(t)[i] = original - step;
      const double down = evaluate(work);
      work.tensor(t)[i] = original;

      const double forward_slope = (up - center) / step;
      const double backward_slope = (center - down) / step;
      const double slope_gap = std::fabs(forward_slope - backward_slope);
      if (slope_gap > 1e-2 * std::max(std::fabs(forward_slope), std::fabs(backward_slope)) + 1e-5) {
        report.excluded.emplace_back(work.name(t), i);
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double exact = analytic.tensor(t)[i];
      const double denom = std::max(1e-8, std::fabs(exact) + std::fabs(numeric));
      report.max_relative_error = std::max(report.max_relative_error, std::fabs(exact - numeric) / denom);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace l2x
