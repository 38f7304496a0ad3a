// Command-line experiment harness: run, gridsearch, export-alpha,
// export-hist, eval. Exit codes: 0 success, 1 config error, 2 data error,
// 3 runtime error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "dalkit/experiment.hpp"
#include "dalkit/serialize.hpp"

using namespace dalkit;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

// --set optimizer.learning_rate=0.01 style dotted-path overrides. The value
// is parsed as JSON when possible and kept as a string otherwise.
void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + spec + "'");
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  json* node = &j;
  std::stringstream keys(path);
  std::string key, next;
  if (!std::getline(keys, key, '.'))
    throw ConfigError("--set has an empty key path");
  while (std::getline(keys, next, '.')) {
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null())
      throw ConfigError("--set path '" + path + "' crosses a non-object");
    key = next;
  }
  (*node)[key] = value;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse seed '" + tok + "'");
    }
  }
  return out;
}

Tensor load_features(const std::string& path, bool labeled) {
  if (labeled) return load_labeled_tabular(path).features;
  return load_unlabeled_tabular(path).features;
}

struct CommonOverrides {
  std::vector<std::string> sets;
  std::string variant;
  std::string output_dir;
  std::string seeds;
  double lambda = -1.0;
  long epochs = -1;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--set", sets,
                    "Override a config key, e.g. optimizer.momentum=0.8");
    cmd->add_option("--variant", variant,
                    "source | entropy | autodial_fixed | autodial");
    cmd->add_option("--output-dir", output_dir, "Output directory");
    cmd->add_option("--lambda", lambda, "Entropy-loss weight");
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--seeds", seeds, "Comma-separated seed list");
  }

  ExperimentConfig build(const std::string& config_path) const {
    json j = load_json_file(config_path);
    for (const std::string& s : sets) apply_override(j, s);
    if (!variant.empty()) j["variant"] = variant;
    if (!output_dir.empty()) j["output_dir"] = output_dir;
    if (lambda >= 0.0) j["loss"]["lambda"] = lambda;
    if (epochs >= 0) j["epochs"] = epochs;
    if (!seeds.empty()) j["seeds"] = parse_seed_list(seeds);
    return parse_config(j);
  }
};

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Domain-alignment training kit: cross-domain normalization layers "
      "with a learnable mixing factor, entropy-prior training and an "
      "ablation harness.\n"
      "Datasets are delimited numeric text (comma or whitespace, '.' "
      "decimals, UTF-8), one sample per line, optional header row; labeled "
      "files carry the class index in the final column."};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Train per config, write reports");
  std::string run_config;
  run_cmd->add_option("config", run_config, "JSON config path")->required();
  CommonOverrides run_over;
  run_over.add_options(run_cmd);

  // gridsearch
  auto* grid_cmd = app.add_subcommand(
      "gridsearch", "Pick lambda by held-out source accuracy");
  std::string grid_config, grid_candidates, grid_out;
  double grid_holdout = 0.2;
  grid_cmd->add_option("config", grid_config, "JSON config path")->required();
  grid_cmd->add_option("--candidates", grid_candidates,
                       "Comma-separated lambda values")->required();
  grid_cmd->add_option("--holdout", grid_holdout,
                       "Held-out source fraction (default 0.2)");
  grid_cmd->add_option("-o,--output", grid_out, "Optional table output path");
  CommonOverrides grid_over;
  grid_over.add_options(grid_cmd);

  // export-alpha
  auto* alpha_cmd = app.add_subcommand(
      "export-alpha", "Export the mixing-factor trace of a finished run");
  std::string alpha_report, alpha_out;
  long alpha_seed_index = 0;
  alpha_cmd->add_option("report", alpha_report, "report.json of a run")
      ->required();
  alpha_cmd->add_option("-o,--output", alpha_out, "Output path")->required();
  alpha_cmd->add_option("--seed-index", alpha_seed_index,
                        "Which seed's trace to export (default 0)");

  // export-hist
  auto* hist_cmd = app.add_subcommand(
      "export-hist", "Export post-alignment feature histograms");
  std::string hist_model, hist_source, hist_target, hist_out;
  long hist_layer = 0, hist_bins = 40, hist_channels = 4;
  std::uint64_t hist_seed = 0;
  bool hist_labeled = false;
  hist_cmd->add_option("model", hist_model, "Trained model file")->required();
  hist_cmd->add_option("--source", hist_source, "Source dataset")->required();
  hist_cmd->add_option("--target", hist_target, "Target dataset")->required();
  hist_cmd->add_flag("--labeled", hist_labeled,
                     "Datasets carry a trailing label column");
  hist_cmd->add_option("--layer", hist_layer, "Alignment layer index");
  hist_cmd->add_option("--bins", hist_bins, "Histogram bins");
  hist_cmd->add_option("--channels", hist_channels, "Sampled channel count");
  hist_cmd->add_option("--sample-seed", hist_seed, "Channel sampling seed");
  hist_cmd->add_option("-o,--output", hist_out, "Output path")->required();

  // eval
  auto* eval_cmd = app.add_subcommand(
      "eval", "Evaluate a model on a dataset (or emit predictions)");
  std::string eval_model, eval_data, eval_domain = "target", eval_out;
  bool eval_labeled = false;
  eval_cmd->add_option("model", eval_model, "Trained model file")->required();
  eval_cmd->add_option("data", eval_data, "Dataset path")->required();
  eval_cmd->add_flag("--labeled", eval_labeled,
                     "Dataset carries a trailing label column");
  eval_cmd->add_option("--domain", eval_domain,
                       "Normalization path: source | target (default target)");
  eval_cmd->add_option("-o,--output", eval_out,
                       "Write predictions here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (run_cmd->parsed()) {
    return guarded([&] {
      const ExperimentConfig cfg = run_over.build(run_config);
      const RunReport report = run_experiment(cfg);
      std::cout.precision(6);
      for (const SeedRecord& r : report.seeds)
        std::cout << "seed " << r.seed << ": target accuracy "
                  << r.final_target_accuracy << '\n';
      std::cout << "mean " << report.mean_target_accuracy << " +- "
                << report.stddev_target_accuracy << " over "
                << report.seeds.size() << " seeds\n"
                << "outputs in " << cfg.output_dir << '\n';
    });
  }

  if (grid_cmd->parsed()) {
    return guarded([&] {
      const ExperimentConfig cfg = grid_over.build(grid_config);
      const GridSearchResult result =
          grid_search_lambda(cfg, parse_double_list(grid_candidates),
                             grid_holdout);
      std::cout.precision(6);
      std::cout << "# lambda holdout_accuracy\n";
      for (const auto& [lambda, acc] : result.table)
        std::cout << lambda << ' ' << acc << '\n';
      std::cout << "best lambda: " << result.best_lambda << '\n';
      if (!grid_out.empty()) {
        std::ofstream out(grid_out);
        if (!out) throw DataError("cannot write '" + grid_out + "'");
        out << "# lambda holdout_accuracy\n";
        out.precision(12);
        for (const auto& [lambda, acc] : result.table)
          out << lambda << ' ' << acc << '\n';
        out << "# best " << result.best_lambda << '\n';
      }
    });
  }

  if (alpha_cmd->parsed()) {
    return guarded([&] {
      const RunReport report = load_report(alpha_report);
      export_alpha_trace(report, alpha_out, alpha_seed_index);
      std::cout << "wrote " << alpha_out << '\n';
    });
  }

  if (hist_cmd->parsed()) {
    return guarded([&] {
      Network net = load_model(hist_model);
      const Tensor source = load_features(hist_source, hist_labeled);
      const Tensor target = load_features(hist_target, hist_labeled);
      export_histograms(net, source, target, hist_layer, hist_bins,
                        hist_channels, hist_seed, hist_out);
      std::cout << "wrote " << hist_out << '\n';
    });
  }

  if (eval_cmd->parsed()) {
    return guarded([&] {
      Network net = load_model(eval_model);
      const Domain domain = [&] {
        if (eval_domain == "source") return Domain::source;
        if (eval_domain == "target") return Domain::target;
        throw ConfigError("--domain must be 'source' or 'target'");
      }();

      if (eval_labeled) {
        const LabeledSet set = load_labeled_tabular(eval_data);
        Network frozen = net;
        const double acc = evaluate_accuracy(frozen, set, domain);
        std::cout.precision(6);
        std::cout << "accuracy " << acc << " on " << set.size()
                  << " samples\n";
        return;
      }

      const UnlabeledSet set = load_unlabeled_tabular(eval_data);
      const BatchLayout layout = domain == Domain::source
                                     ? BatchLayout{set.size(), 0}
                                     : BatchLayout{0, set.size()};
      const Tensor probs = net.forward(set.features, layout, RunMode::eval);
      std::ostream* out = &std::cout;
      std::ofstream file;
      if (!eval_out.empty()) {
        file.open(eval_out);
        if (!file) throw DataError("cannot write '" + eval_out + "'");
        out = &file;
      }
      for (Index i = 0; i < probs.batch(); ++i) {
        Index best = 0;
        for (Index c = 1; c < probs.extent(1); ++c)
          if (probs(i, c) > probs(i, best)) best = c;
        (*out) << best << '\n';
      }
    });
  }

  return 0;
}
