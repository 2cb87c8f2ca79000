#include "l2x/models.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "l2x/errors.hpp"

namespace l2x {

const char* head_name(Head head) {
  return head == Head::softmax_classifier ? "softmax" : "linear";
}

Head parse_head(const std::string& name) {
  if (name == "softmax") return Head::softmax_classifier;
  if (name == "linear") return Head::linear_scores;
  throw ParameterError("unknown network head: " + name);
}

void MlpSpec::validate() const {
  if (widths.size() < 3) throw ParameterError("an MLP needs at least one hidden layer");
  for (auto w : widths) {
    if (w == 0) throw ParameterError("layer widths must be positive");
  }
}

MlpSpec make_spec(std::size_t input, std::size_t hidden_layers, std::size_t hidden_width,
                  std::size_t output, Head head) {
  MlpSpec spec;
  spec.widths.push_back(input);
  for (std::size_t i = 0; i < hidden_layers; ++i) spec.widths.push_back(hidden_width);
  spec.widths.push_back(output);
  spec.head = head;
  spec.validate();
  return spec;
}

std::string Mlp::weight_name(std::size_t layer) { return "dense" + std::to_string(layer) + ".weight"; }
std::string Mlp::bias_name(std::size_t layer) { return "dense" + std::to_string(layer) + ".bias"; }

Mlp::Mlp(MlpSpec spec, ParameterSet params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != 2 * spec_.layer_count()) {
    throw ContractError("parameter count does not match the network spec");
  }
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    const Shape w{spec_.widths[l], spec_.widths[l + 1]};
    const Shape b{spec_.widths[l + 1]};
    if (params_.name(2 * l) != weight_name(l) || params_.tensor(2 * l).shape() != w ||
        params_.name(2 * l + 1) != bias_name(l) || params_.tensor(2 * l + 1).shape() != b) {
      throw ContractError("parameters of layer " + std::to_string(l) + " do not match the spec");
    }
  }
}

Mlp Mlp::initialize(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParameterSet params;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.widths[l];
    const std::size_t out = spec.widths[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-a, a);
    Tensor w({in, out});
    for (auto& v : w.values()) v = dist(rng);
    params.add(weight_name(l), std::move(w));
    params.add(bias_name(l), Tensor::zeros({out}));
  }
  return Mlp(spec, std::move(params));
}

Mlp Mlp::zeros(const MlpSpec& spec) {
  spec.validate();
  ParameterSet params;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    params.add(weight_name(l), Tensor::zeros({spec.widths[l], spec.widths[l + 1]}));
    params.add(bias_name(l), Tensor::zeros({spec.widths[l + 1]}));
  }
  return Mlp(spec, std::move(params));
}

void Mlp::check_input(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != spec_.input_width()) {
    throw DimensionError("network expects [batch x " + std::to_string(spec_.input_width()) +
                         "] input, got " + shape_string(x.shape()));
  }
}

Var Mlp::logits(const Binding& bound, Var x) const {
  check_input(x.value());
  Var h = x;
  for (std::size_t l = 0; l < spec_.layer_count(); ++l) {
    h = add_bias(matmul(h, bound[2 * l]), bound[2 * l + 1]);
    if (l + 1 < spec_.layer_count()) h = relu(h);
  }
  return h;
}

Var Mlp::forward(const Binding& bound, Var x) const {
  Var z = logits(bound, x);
  return spec_.head == Head::softmax_classifier ? softmax(z) : z;
}

Tensor Mlp::predict(const Tensor& x) const {
  check_input(x);
  Graph g;
  Binding bound = g.bind(params_, false);
  return forward(bound, g.constant(x)).value();
}

Var Classifier::logits(Graph& g, Var x) const {
  evaluations.add(x.value().rank() == 2 ? x.value().rows() : 1);
  Binding bound = g.bind(net.params(), false);
  return net.logits(bound, x);
}

Classifier make_classifier(std::size_t d, std::size_t classes, Rng& rng, std::size_t hidden_layers,
                           std::size_t hidden_width) {
  return Classifier{
      Mlp::initialize(make_spec(d, hidden_layers, hidden_width, classes, Head::softmax_classifier), rng),
      {}};
}

Explainer make_explainer(std::size_t d, Rng& rng, std::size_t hidden_layers, std::size_t hidden_width) {
  return Explainer{
      Mlp::initialize(make_spec(d, hidden_layers, hidden_width, d, Head::linear_scores), rng)};
}

VariationalNet make_variational(std::size_t d, std::size_t classes, Rng& rng,
                                std::size_t hidden_layers, std::size_t hidden_width) {
  return VariationalNet{Mlp::initialize(
      make_spec(d, hidden_layers, hidden_width, classes, Head::softmax_classifier), rng)};
}

Tensor classifier_forward(const Classifier& m, const Tensor& x) {
  Tensor out = m.net.predict(x);
  m.evaluations.add(x.rows());
  return out;
}

Tensor explainer_scores(const Explainer& e, const Tensor& x) { return e.net.predict(x); }

Tensor variational_forward(const VariationalNet& q, const Tensor& x_masked) {
  return q.net.predict(x_masked);
}

Tensor mask_input(const Tensor& x, const FeatureSet& selected) {
  const std::size_t d = x.shape().back();
  std::vector<char> keep(d, 0);
  for (auto i : selected) {
    if (i >= d) throw DimensionError("mask index " + std::to_string(i) + " out of range for d=" +
                                     std::to_string(d));
    keep[i] = 1;
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!keep[i % d]) out[i] = 0.0;
  }
  return out;
}

Tensor mask_input(const Tensor& x, const RelaxedMask& mask) {
  const std::size_t d = x.shape().back();
  if (mask.values.size() != d) {
    throw DimensionError("relaxed mask has " + std::to_string(mask.values.size()) +
                         " entries, input has " + std::to_string(d) + " features");
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask.values[i % d];
  return out;
}

// ---------------------------------------------------------------- model files

const char* role_name(NetworkRole role) {
  switch (role) {
    case NetworkRole::classifier: return "classifier";
    case NetworkRole::explainer: return "explainer";
    case NetworkRole::variational: return "variational";
  }
  return "?";
}

namespace {

constexpr char kMagic[4] = {'L', '2', 'X', 'M'};

NetworkRole parse_role(const std::string& s) {
  if (s == "classifier") return NetworkRole::classifier;
  if (s == "explainer") return NetworkRole::explainer;
  if (s == "variational") return NetworkRole::variational;
  throw VersionError("unknown network role: " + s);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("model file truncated while reading ") + what + " at offset " +
                           std::to_string(pos_),
                       pos_);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Mlp& net, NetworkRole role) {
  nlohmann::json header;
  header["role"] = role_name(role);
  header["head"] = head_name(net.spec().head);
  header["widths"] = net.spec().widths;
  auto tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    tensors.push_back({{"name", net.params().name(i)}, {"shape", net.params().tensor(i).shape()}});
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    for (double v : net.params().tensor(i).values()) put_f64(out, v);
  }
  return out;
}

NetworkFile deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.text(4, "magic") != std::string(kMagic, 4)) throw ParseError("bad model file magic", 0);
  const auto version = in.u32("version");
  if (version != kModelFormatVersion) {
    throw VersionError("unsupported model format version " + std::to_string(version));
  }
  const auto header_len = in.u32("header length");
  const std::size_t header_at = in.offset();
  const std::string text = in.text(header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed model header: ") + e.what(), header_at + e.byte);
  }

  NetworkFile file;
  MlpSpec spec;
  ParameterSet params;
  try {
    file.role = parse_role(header.at("role").get<std::string>());
    spec.head = parse_head(header.at("head").get<std::string>());
    spec.widths = header.at("widths").get<std::vector<std::size_t>>();
    for (const auto& t : header.at("tensors")) {
      Shape shape = t.at("shape").get<Shape>();
      in.need(shape_size(shape) * 8, "tensor payload");
      Tensor tensor(shape);
      for (auto& v : tensor.values()) v = in.f64();
      params.add(t.at("name").get<std::string>(), std::move(tensor));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid model header: ") + e.what(), header_at);
  } catch (const ParameterError& e) {
    throw VersionError(std::string("model spec not understood: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("invalid tensor shape in header: ") + e.what(), header_at);
  } catch (const ContractError& e) {
    throw ParseError(std::string("invalid tensor list in header: ") + e.what(), header_at);
  }
  if (!in.done()) {
    throw ParseError("trailing bytes after tensor payload at offset " + std::to_string(in.offset()),
                     in.offset());
  }
  try {
    file.net = Mlp(std::move(spec), std::move(params));
  } catch (const std::logic_error& e) {
    throw VersionError(std::string("model spec mismatch: ") + e.what());
  }
  return file;
}

void save_network(const std::string& path, const Mlp& net, NetworkRole role) {
  const auto bytes = serialize(net, role);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

Mlp load_network(const std::string& path, NetworkRole expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  NetworkFile file = deserialize(bytes);
  if (file.role != expected) {
    throw VersionError(path + " holds a " + role_name(file.role) + " network, expected " +
                       role_name(expected));
  }
  return std::move(file.net);
}

}  // namespace l2x
