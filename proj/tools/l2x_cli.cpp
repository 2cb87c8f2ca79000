#include <CLI11.hpp>
#include <algorithm>
#include <optional>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "l2x/errors.hpp"
#include "l2x/pipeline.hpp"

using namespace l2x;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options of one training run, shared by train-model, train-explainer and benchmark.
struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 1000;
  double learning_rate = 0.001;
};

void add_train_options(CLI::App* app, TrainOptions& t, const std::string& prefix = "") {
  app->add_option("--" + prefix + "epochs", t.epochs, "Training epochs")->capture_default_str();
  app->add_option("--" + prefix + "batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--" + prefix + "lr", t.learning_rate, "RMSprop step size")->capture_default_str();
}

TrainConfig to_config(const TrainOptions& t, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = t.epochs;
  c.batch_size = t.batch_size;
  c.learning_rate = t.learning_rate;
  c.seed = seed;
  return c;
}

DatasetKind dataset_or_usage(const std::string& name) {
  try {
    return parse_dataset_kind(name);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
}

Method method_or_usage(const std::string& name) {
  try {
    return parse_method(name);
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
}

// Truth size shared by every sample, used as the default k.
std::size_t truth_size_of(const std::vector<LabeledSample>& samples) {
  const std::size_t k = samples.front().truth.size();
  for (const auto& s : samples) {
    if (s.truth.size() != k) throw DataError("samples disagree on the number of true features");
  }
  if (k == 0) throw UsageError("data has no true features recorded; pass --k");
  return k;
}

std::vector<Explanation> in_sample_order(std::vector<Explanation> e) {
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i].sample_id != i) throw DataError("explanations are not in sample order at line " + std::to_string(i + 1));
  }
  return e;
}

// Appends "--key=value" for every key=value line of `path` whose option is not already on the
// command line, so flags win over file values.
std::vector<std::string> merge_config(std::vector<std::string> args, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  std::size_t number = 0;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(number) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    for (auto& c : key) c = c == '_' ? '-' : c;
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : args) given = given || a == flag || a.rfind(flag + "=", 0) == 0;
    if (given) continue;
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag + "=" + value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

void print_classifier_metrics(const ClassifierTrainResult& r) {
  std::printf("validation accuracy %.4f, Bayes agreement %.4f, Bayes accuracy %.4f\n", r.validation_accuracy,
              r.bayes_agreement, r.bayes_accuracy);
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();

  CLI::App app{"Instancewise feature selection by learning to explain"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::size_t threads = 1;
  app.add_option("--config", config_path, "key=value file; command-line flags take precedence");
  app.add_option("--threads", threads, "Worker threads for explanation (L2X_THREADS)")
      ->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "Sample a synthetic dataset to CSV");
  std::string gen_dataset, gen_out;
  std::size_t gen_n = 10000;
  std::uint64_t gen_seed = 1;
  double gen_scale = DatasetOptions{}.additive_sin_scale;
  gen->add_option("--dataset", gen_dataset, "xor, orange_skin, nonlinear_additive or switch")->required();
  gen->add_option("--n", gen_n, "Number of samples")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Root seed")->capture_default_str();
  gen->add_option("--additive-scale", gen_scale, "Coefficient of sin(2 X1) in the additive logit")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "Output CSV")->required();

  // train-model
  auto* tm = app.add_subcommand("train-model", "Train the black-box classifier");
  std::string tm_data, tm_valid, tm_out, tm_curve;
  std::uint64_t tm_seed = 1;
  TrainOptions tm_train;
  ClassifierArchitecture tm_arch;
  tm->add_option("--data", tm_data, "Training CSV")->required();
  tm->add_option("--valid", tm_valid, "Validation CSV");
  tm->add_option("--out", tm_out, "Classifier checkpoint")->required();
  tm->add_option("--curve", tm_curve, "Training curve CSV");
  tm->add_option("--seed", tm_seed, "Root seed")->capture_default_str();
  tm->add_option("--hidden-layers", tm_arch.hidden_layers, "Hidden layers")->capture_default_str();
  tm->add_option("--hidden-width", tm_arch.hidden_width, "Hidden width")->capture_default_str();
  add_train_options(tm, tm_train);

  // train-explainer
  auto* te = app.add_subcommand("train-explainer", "Train the L2X explainer against a classifier");
  std::string te_data, te_model, te_out, te_var_out, te_curve;
  std::uint64_t te_seed = 1;
  std::size_t te_k = 0;
  double te_tau = kDefaultTemperature;
  TrainOptions te_train;
  L2xArchitecture te_arch;
  te->add_option("--data", te_data, "Training CSV")->required();
  te->add_option("--model", te_model, "Classifier checkpoint")->required();
  te->add_option("--out", te_out, "Explainer checkpoint")->required();
  te->add_option("--variational-out", te_var_out, "Variational network checkpoint");
  te->add_option("--curve", te_curve, "Training curve CSV");
  te->add_option("--k", te_k, "Features per explanation (default: number of true features)");
  te->add_option("--tau", te_tau, "Concrete temperature")->capture_default_str();
  te->add_option("--seed", te_seed, "Root seed")->capture_default_str();
  te->add_option("--explainer-layers", te_arch.explainer_hidden_layers, "Explainer hidden layers")
      ->capture_default_str();
  te->add_option("--variational-layers", te_arch.variational_hidden_layers, "Variational hidden layers")
      ->capture_default_str();
  te->add_option("--hidden-width", te_arch.hidden_width, "Hidden width")->capture_default_str();
  add_train_options(te, te_train);

  // explain
  auto* ex = app.add_subcommand("explain", "Explain every sample of a dataset");
  std::string ex_data, ex_model, ex_explainer, ex_method = "l2x", ex_out;
  std::size_t ex_k = 0;
  bool ex_abs = false;
  ex->add_option("--data", ex_data, "Samples CSV")->required();
  ex->add_option("--method", ex_method, "l2x, saliency, taylor or taylor_abs")->capture_default_str();
  ex->add_flag("--abs", ex_abs, "Rank Taylor scores by magnitude");
  ex->add_option("--model", ex_model, "Classifier checkpoint (saliency, taylor)");
  ex->add_option("--explainer", ex_explainer, "Explainer checkpoint (l2x)");
  ex->add_option("--k", ex_k, "Features per explanation (default: number of true features)");
  ex->add_option("--out", ex_out, "Explanations JSONL")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Median rank and post-hoc accuracy of explanations");
  std::string ev_data, ev_expl, ev_model, ev_csv, ev_json, ev_label = "custom";
  ev->add_option("--data", ev_data, "Samples CSV with ground truth")->required();
  ev->add_option("--explanations", ev_expl, "Explanations JSONL")->required();
  ev->add_option("--model", ev_model, "Classifier checkpoint for post-hoc accuracy");
  ev->add_option("--dataset", ev_label, "Dataset label in the CSV output")->capture_default_str();
  ev->add_option("--out-csv", ev_csv, "Per-sample median ranks CSV");
  ev->add_option("--out-json", ev_json, "Summary JSON");

  // benchmark
  auto* bm = app.add_subcommand("benchmark", "Compare L2X, Saliency and Taylor");
  std::vector<std::string> bm_datasets, bm_methods = {"l2x", "saliency", "taylor"};
  bool bm_all = false;
  std::uint64_t bm_seed = 1;
  std::size_t bm_train_n = 100'000, bm_valid_n = 10'000;
  std::string bm_out = "benchmark_out", bm_data, bm_model, bm_explainer;
  TrainOptions bm_clf, bm_l2x;
  bm->add_option("--dataset", bm_datasets, "Dataset(s); repeatable")->required();
  bm->add_flag("--all", bm_all, "Run the full pipeline: generate, train classifier and explainer, evaluate");
  bm->add_option("--seed", bm_seed, "Root seed")->capture_default_str();
  bm->add_option("--n-train", bm_train_n, "Training samples")->capture_default_str();
  bm->add_option("--n-valid", bm_valid_n, "Validation samples")->capture_default_str();
  bm->add_option("--methods", bm_methods, "Methods to compare")->delimiter(',');
  bm->add_option("--out-dir", bm_out, "Output directory")->capture_default_str();
  bm->add_option("--data", bm_data, "Validation CSV (without --all)");
  bm->add_option("--model", bm_model, "Classifier checkpoint (without --all)");
  bm->add_option("--explainer", bm_explainer, "Explainer checkpoint (without --all)");
  add_train_options(bm, bm_clf);
  add_train_options(bm, bm_l2x, "l2x-");

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exact checks on random discrete joints");
  std::size_t orc_joints = 100, orc_max_d = 6, orc_max_c = 3;
  std::uint64_t orc_seed = 1;
  double orc_tol = 1e-10;
  orc->add_option("--joints", orc_joints, "Random joints")->capture_default_str();
  orc->add_option("--seed", orc_seed, "Seed")->capture_default_str();
  orc->add_option("--max-d", orc_max_d, "Largest feature count")->capture_default_str();
  orc->add_option("--max-classes", orc_max_c, "Largest class count")->capture_default_str();
  orc->add_option("--tolerance", orc_tol, "Comparison tolerance")->capture_default_str();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        continue;
      }
      args = merge_config(args, path);
      break;
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (app.count("--threads") == 0) {
      if (const char* env = std::getenv("L2X_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (*end != '\0' || env[0] == '-') throw UsageError(std::string("L2X_THREADS is not a count: ") + env);
        threads = static_cast<std::size_t>(v);
      }
    }
    if (threads == 0) throw UsageError("thread count must be positive");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }

  try {
    if (*gen) {
      DatasetOptions opts;
      opts.additive_sin_scale = gen_scale;
      const auto samples = generate(dataset_or_usage(gen_dataset), gen_n, gen_seed, opts);
      write_csv(samples, gen_out);
      double positive = 0.0;
      for (const auto& s : samples) positive += s.y;
      std::printf("wrote %zu samples of %s to %s, positive fraction %.4f\n", samples.size(),
                  dataset_name(parse_dataset_kind(gen_dataset)), gen_out.c_str(), positive / samples.size());
    } else if (*tm) {
      if (tm_train.epochs == 0) std::fprintf(stderr, "warning: --epochs 0 writes an untrained classifier\n");
      const auto train = read_csv(tm_data);
      const auto valid = tm_valid.empty() ? std::vector<LabeledSample>{} : read_csv(tm_valid);
      const auto r = train_classifier(train, valid, tm_arch, to_config(tm_train, tm_seed));
      save_network(tm_out, r.model.net, NetworkRole::classifier);
      if (!tm_curve.empty()) write_curve_csv(r.curve, tm_curve);
      std::printf("trained classifier on %zu samples, wrote %s\n", train.size(), tm_out.c_str());
      if (!valid.empty()) print_classifier_metrics(r);
    } else if (*te) {
      if (te_train.epochs == 0) std::fprintf(stderr, "warning: --epochs 0 writes an untrained explainer\n");
      const auto train = read_csv(te_data);
      const Classifier classifier{load_network(te_model, NetworkRole::classifier), {}};
      TrainConfig cfg = to_config(te_train, te_seed);
      cfg.k = te_k > 0 ? te_k : truth_size_of(train);
      cfg.temperature = te_tau;
      const auto r = train_l2x(feature_matrix(train), classifier, te_arch, cfg);
      save_network(te_out, r.explainer.net, NetworkRole::explainer);
      if (!te_var_out.empty()) save_network(te_var_out, r.variational.net, NetworkRole::variational);
      if (!te_curve.empty()) write_curve_csv(r.curve, te_curve);
      std::printf("trained explainer (k=%zu) on %zu samples, final objective %.6f, wrote %s\n", cfg.k,
                  train.size(), r.curve.empty() ? 0.0 : r.curve.back().objective, te_out.c_str());
    } else if (*ex) {
      Method method = method_or_usage(ex_method);
      if (ex_abs) {
        if (method != Method::taylor && method != Method::taylor_abs) throw UsageError("--abs applies to taylor");
        method = Method::taylor_abs;
      }
      const auto samples = read_csv(ex_data);
      const std::size_t k = ex_k > 0 ? ex_k : truth_size_of(samples);
      std::optional<Classifier> classifier;
      std::optional<Explainer> explainer;
      if (method == Method::l2x) {
        if (ex_explainer.empty()) throw UsageError("--explainer is required for l2x");
        explainer = Explainer{load_network(ex_explainer, NetworkRole::explainer)};
      } else {
        if (ex_model.empty()) throw UsageError("--model is required for gradient methods");
        classifier = Classifier{load_network(ex_model, NetworkRole::classifier), {}};
      }
      const auto out = explain_all(method, feature_matrix(samples), k, classifier ? &*classifier : nullptr,
                                   explainer ? &*explainer : nullptr, threads);
      write_explanations_jsonl(out, ex_out);
      std::printf("explained %zu samples with %s (k=%zu), wrote %s\n", out.size(), method_name(method), k,
                  ex_out.c_str());
    } else if (*ev) {
      const auto samples = read_csv(ev_data);
      const auto explanations = in_sample_order(read_explanations_jsonl(ev_expl));
      if (explanations.size() != samples.size()) {
        throw DataError(std::to_string(explanations.size()) + " explanations for " +
                        std::to_string(samples.size()) + " samples");
      }
      std::vector<FeatureSet> truths;
      for (const auto& s : samples) truths.push_back(s.truth);
      const std::size_t d = samples.front().x.size();
      const MedianRankReport ranks = median_rank(explanations, truths, d);
      const std::string method = method_name(explanations.front().method);
      nlohmann::json j = {{"dataset", ev_label},
                          {"method", method},
                          {"n", samples.size()},
                          {"median_rank",
                           {{"min", ranks.summary.min},
                            {"q1", ranks.summary.q1},
                            {"median", ranks.summary.median},
                            {"mean", ranks.summary.mean},
                            {"q3", ranks.summary.q3},
                            {"max", ranks.summary.max},
                            {"optimal", ranks.optimal_median}}}};
      if (!ev_model.empty()) {
        const Classifier classifier{load_network(ev_model, NetworkRole::classifier), {}};
        const Tensor x = feature_matrix(samples);
        j["post_hoc_accuracy"] = post_hoc_accuracy(classifier, x, explanations).accuracy;
        j["reference_post_hoc_accuracy"] = post_hoc_accuracy(classifier, x, truths, "truth").accuracy;
      }
      if (!ev_csv.empty()) {
        std::ofstream out(ev_csv, std::ios::trunc);
        if (!out) throw IoError("cannot open " + ev_csv + " for writing");
        out << "method,dataset,median_rank\n";
        for (double r : ranks.per_sample) out << method << ',' << ev_label << ',' << r << '\n';
        if (!out) throw IoError("failed writing " + ev_csv);
      }
      if (!ev_json.empty()) write_json(j, ev_json);
      std::cout << j.dump(2) << '\n';
    } else if (*bm) {
      std::vector<Method> methods;
      for (const auto& m : bm_methods) methods.push_back(method_or_usage(m));
      std::vector<BenchmarkResult> results;
      if (bm_all) {
        for (const auto& name : bm_datasets) {
          BenchmarkConfig cfg;
          cfg.dataset = dataset_or_usage(name);
          cfg.seed = bm_seed;
          cfg.n_train = bm_train_n;
          cfg.n_valid = bm_valid_n;
          cfg.classifier_train = to_config(bm_clf, bm_seed);
          cfg.l2x_train = to_config(bm_l2x, bm_seed);
          cfg.methods = methods;
          cfg.threads = threads;
          results.push_back(run_benchmark(cfg));
        }
      } else {
        if (bm_datasets.size() != 1) throw UsageError("trained artifacts cover exactly one --dataset");
        if (bm_data.empty() || bm_model.empty()) throw UsageError("without --all, pass --data and --model");
        const bool needs_explainer = std::find(methods.begin(), methods.end(), Method::l2x) != methods.end();
        if (needs_explainer && bm_explainer.empty()) throw UsageError("l2x needs --explainer");
        const auto valid = read_csv(bm_data);
        const Classifier classifier{load_network(bm_model, NetworkRole::classifier), {}};
        std::optional<Explainer> explainer;
        if (needs_explainer) explainer = Explainer{load_network(bm_explainer, NetworkRole::explainer)};
        BenchmarkResult r;
        r.dataset = dataset_or_usage(bm_datasets.front());
        r.seed = bm_seed;
        r.k = truth_size_of(valid);
        evaluate_methods(r, classifier, explainer ? &*explainer : nullptr, valid, methods, threads);
        results.push_back(std::move(r));
      }
      write_benchmark_outputs(results, bm_out);
      for (const auto& r : results) {
        std::printf("%s:", dataset_name(r.dataset));
        for (const auto& m : r.methods) {
          std::printf(" %s median rank %.1f post-hoc %.4f;", method_name(m.method), m.ranks.summary.median,
                      m.post_hoc.accuracy);
        }
        std::printf("\n");
      }
      std::printf("wrote %s\n", bm_out.c_str());
    } else if (*orc) {
      const OracleSuiteReport r = run_oracle_suite(orc_joints, orc_seed, orc_max_d, orc_max_c, orc_tol);
      const nlohmann::json j = {{"joints", r.joints},
                                {"selection_rule_passed", r.theorem_passed},
                                {"jensen_passed", r.jensen_passed},
                                {"max_exact_gap", r.max_exact_gap},
                                {"min_perturbed_gap", r.min_jensen_gap},
                                {"max_kl_mismatch", r.max_kl_mismatch},
                                {"passed", r.passed()}};
      std::cout << j.dump(2) << '\n';
      return r.passed() ? kExitOk : kExitFailure;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
