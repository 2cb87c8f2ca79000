#include "l2x/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "l2x/errors.hpp"
#include "l2x/rng.hpp"

namespace l2x {

DatasetKind parse_dataset_kind(const std::string& name) {
  std::string s = name;
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "xor") return DatasetKind::xor_;
  if (s == "orange_skin") return DatasetKind::orange_skin;
  if (s == "nonlinear_additive" || s == "additive") return DatasetKind::nonlinear_additive;
  if (s == "switch") return DatasetKind::switch_;
  throw ParameterError("unknown dataset: " + name);
}

const char* dataset_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::xor_: return "xor";
    case DatasetKind::orange_skin: return "orange_skin";
    case DatasetKind::nonlinear_additive: return "nonlinear_additive";
    case DatasetKind::switch_: return "switch";
  }
  return "?";
}

std::size_t truth_size(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::xor_: return 2;
    case DatasetKind::orange_skin:
    case DatasetKind::nonlinear_additive: return 4;
    case DatasetKind::switch_: return 5;
  }
  return 0;
}

namespace {

double orange_logit(std::span<const double> x, std::size_t first) {
  double s = 0.0;
  for (std::size_t i = first; i < first + 4; ++i) s += x[i] * x[i];
  return s - 4.0;
}

double additive_logit(std::span<const double> x, std::size_t first, const DatasetOptions& options) {
  return -options.additive_sin_scale * std::sin(2.0 * x[first]) + 2.0 * std::fabs(x[first + 1]) +
         x[first + 2] + std::exp(-x[first + 3]);
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double dataset_logit(DatasetKind kind, std::span<const double> x, Component component,
                     const DatasetOptions& options) {
  if (x.size() != kSyntheticFeatures) {
    throw DimensionError("synthetic datasets have 10 features, got " + std::to_string(x.size()));
  }
  switch (kind) {
    case DatasetKind::xor_: return x[0] * x[1];
    case DatasetKind::orange_skin: return orange_logit(x, 0);
    case DatasetKind::nonlinear_additive: return additive_logit(x, 0, options);
    case DatasetKind::switch_:
      if (component == Component::plus) return orange_logit(x, 1);
      if (component == Component::minus) return additive_logit(x, 5, options);
      throw ContractError("switch dataset needs the mixture component of X1");
  }
  throw ParameterError("unknown dataset kind");
}

double exact_probability(DatasetKind kind, std::span<const double> x, Component component,
                         const DatasetOptions& options) {
  return stable_sigmoid(dataset_logit(kind, x, component, options));
}

FeatureSet truth_features(DatasetKind kind, Component component) {
  switch (kind) {
    case DatasetKind::xor_: return {0, 1};
    case DatasetKind::orange_skin:
    case DatasetKind::nonlinear_additive: return {0, 1, 2, 3};
    case DatasetKind::switch_:
      if (component == Component::plus) return {0, 1, 2, 3, 4};
      if (component == Component::minus) return {0, 5, 6, 7, 8};
      throw ContractError("switch dataset needs the mixture component of X1");
  }
  throw ParameterError("unknown dataset kind");
}

std::vector<LabeledSample> generate(DatasetKind kind, std::size_t n, std::uint64_t seed,
                                    const DatasetOptions& options) {
  if (n == 0) throw ParameterError("sample count must be at least 1");
  Rng rng = make_rng(seed, "data");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<LabeledSample> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    LabeledSample sample;
    sample.x.resize(kSyntheticFeatures);
    if (kind == DatasetKind::switch_) {
      sample.component = uniform(rng) < 0.5 ? Component::plus : Component::minus;
    }
    for (auto& v : sample.x) v = normal(rng);
    if (sample.component == Component::plus) sample.x[0] += 3.0;
    if (sample.component == Component::minus) sample.x[0] -= 3.0;
    sample.p = exact_probability(kind, sample.x, sample.component, options);
    sample.y = uniform(rng) < sample.p ? 1 : 0;
    sample.truth = truth_features(kind, sample.component);
    out.push_back(std::move(sample));
  }
  return out;
}

Tensor feature_matrix(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw DataError("no samples");
  const std::size_t d = samples.front().x.size();
  Tensor out({samples.size(), d});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].x.size() != d) throw DataError("samples have inconsistent feature counts");
    std::copy(samples[i].x.begin(), samples[i].x.end(), out.row(i).begin());
  }
  return out;
}

// ---------------------------------------------------------------- CSV

void write_csv(std::span<const LabeledSample> samples, const std::string& path) {
  if (samples.empty()) throw DataError("refusing to write an empty dataset");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::size_t d = samples.front().x.size();
  for (std::size_t j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "p,y,truth\n";
  out << std::setprecision(17);
  for (const auto& s : samples) {
    for (double v : s.x) out << v << ',';
    out << s.p << ',' << s.y << ',';
    for (std::size_t i = 0; i < s.truth.size(); ++i) {
      if (i) out << '|';
      out << s.truth[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + std::string(field) + "'",
                     line);
  }
  return value;
}

Component infer_component(const FeatureSet& truth) {
  if (truth.size() != 5) return Component::none;
  return std::find(truth.begin(), truth.end(), 1) != truth.end() ? Component::plus : Component::minus;
}

}  // namespace

std::vector<LabeledSample> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError(path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split(line, ',');
  std::size_t d = 0;
  while (d < header.size() && header[d] == "x" + std::to_string(d)) ++d;
  if (d == 0 || header.size() != d + 3 || header[d] != "p" || header[d + 1] != "y" ||
      header[d + 2] != "truth") {
    throw ParseError("line 1: expected header x0..x" + std::to_string(d ? d - 1 : 0) + ",p,y,truth", 1);
  }

  std::vector<LabeledSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != d + 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 3) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    LabeledSample s;
    s.x.reserve(d);
    for (std::size_t j = 0; j < d; ++j) s.x.push_back(parse_number<double>(fields[j], line_no, "feature"));
    s.p = parse_number<double>(fields[d], line_no, "probability");
    s.y = parse_number<int>(fields[d + 1], line_no, "label");
    if (s.p < 0.0 || s.p > 1.0 || (s.y != 0 && s.y != 1)) {
      throw ParseError("line " + std::to_string(line_no) + ": probability or label out of range", line_no);
    }
    if (!fields[d + 2].empty()) {
      for (auto part : split(fields[d + 2], '|')) {
        const auto idx = parse_number<std::size_t>(part, line_no, "truth index");
        if (idx >= d) {
          throw ParseError("line " + std::to_string(line_no) + ": truth index out of range", line_no);
        }
        s.truth.push_back(idx);
      }
    }
    std::sort(s.truth.begin(), s.truth.end());
    s.component = infer_component(s.truth);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw DataError(path + " has no data rows");
  return samples;
}

}  // namespace l2x
