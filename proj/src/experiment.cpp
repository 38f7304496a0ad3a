#include "dalkit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "dalkit/serialize.hpp"

namespace dalkit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

int argmax_row(const Tensor& probs, Index row) {
  int best = 0;
  double best_p = probs(row, 0);
  for (Index c = 1; c < probs.extent(1); ++c)
    if (probs(row, c) > best_p) {
      best_p = probs(row, c);
      best = static_cast<int>(c);
    }
  return best;
}

void write_metrics(const SeedRecord& record, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "# epoch l_source l_target total target_accuracy learning_rate"
         " alpha...\n";
  out.precision(12);
  for (std::size_t e = 0; e < record.epochs.size(); ++e) {
    const EpochRecord& r = record.epochs[e];
    out << e << ' ' << r.l_source << ' ' << r.l_target << ' ' << r.total << ' '
        << r.target_accuracy << ' ' << r.learning_rate;
    for (double a : r.alphas) out << ' ' << a;
    out << '\n';
  }
}

json record_to_json(const SeedRecord& record) {
  json epochs = json::array();
  for (const EpochRecord& r : record.epochs)
    epochs.push_back({{"l_source", r.l_source},
                      {"l_target", r.l_target},
                      {"total", r.total},
                      {"target_accuracy", r.target_accuracy},
                      {"learning_rate", r.learning_rate},
                      {"alphas", r.alphas}});
  json trace = json::array();
  for (const AlphaSample& s : record.alpha_trace)
    trace.push_back({{"iteration", s.iteration}, {"alphas", s.alphas}});
  return {{"seed", record.seed},
          {"epochs", epochs},
          {"alpha_trace", trace},
          {"final_target_accuracy", record.final_target_accuracy}};
}

SeedRecord record_from_json(const json& j) {
  SeedRecord record;
  record.seed = j.at("seed").get<std::uint64_t>();
  for (const json& e : j.at("epochs")) {
    EpochRecord r;
    r.l_source = e.at("l_source").get<double>();
    r.l_target = e.at("l_target").get<double>();
    r.total = e.at("total").get<double>();
    r.target_accuracy = e.at("target_accuracy").get<double>();
    r.learning_rate = e.at("learning_rate").get<double>();
    r.alphas = e.at("alphas").get<std::vector<double>>();
    record.epochs.push_back(std::move(r));
  }
  for (const json& s : j.at("alpha_trace")) {
    AlphaSample sample;
    sample.iteration = s.at("iteration").get<Index>();
    sample.alphas = s.at("alphas").get<std::vector<double>>();
    record.alpha_trace.push_back(std::move(sample));
  }
  record.final_target_accuracy = j.at("final_target_accuracy").get<double>();
  return record;
}

}  // namespace

DomainPair make_data(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  if (cfg.synthetic) {
    ShiftSpec spec = cfg.shift;
    spec.seed = mix_seed(spec.seed, run_seed);
    return generate_shifted_gaussians(spec);
  }
  DomainPair pair;
  pair.source = load_labeled_tabular(cfg.source_path);
  pair.target = load_labeled_tabular(cfg.target_path);
  const Index k = std::max(pair.source.class_count, pair.target.class_count);
  pair.source.class_count = pair.target.class_count = k;
  return pair;
}

double evaluate_accuracy(Network& frozen_net, const LabeledSet& set,
                         Domain domain) {
  if (set.size() == 0) throw DataError("cannot evaluate an empty set");
  const BatchLayout layout = domain == Domain::source
                                 ? BatchLayout{set.size(), 0}
                                 : BatchLayout{0, set.size()};
  const Tensor probs = frozen_net.forward(set.features, layout, RunMode::eval);
  Index hits = 0;
  for (Index i = 0; i < set.size(); ++i)
    if (argmax_row(probs, i) == set.labels[static_cast<std::size_t>(i)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

TrainOutcome train_single(const ExperimentConfig& cfg, const LabeledSet& source,
                          const LabeledSet& target, std::uint64_t seed,
                          const StepHook& hook) {
  const Index input_dim = source.features.extent(1);
  if (target.features.extent(1) != input_dim)
    throw DataError("source and target feature dimensionality differ");
  const Index class_count = source.class_count;
  const LossConfig loss_cfg{cfg.lambda, class_count};

  Network net =
      build_network(cfg, input_dim, class_count, mix_seed(seed, 0x1217));

  auto [n_src, n_tgt] =
      cfg.proportional
          ? proportional_counts(cfg.batch_total, source.size(), target.size())
          : std::pair<Index, Index>{cfg.batch_source, cfg.batch_target};
  BatchStream stream(source, strip_labels(target), n_src, n_tgt,
                     mix_seed(seed, 0xb57c));

  OptimizerState opt;
  opt.base_learning_rate = cfg.learning_rate;
  opt.momentum = cfg.momentum;
  opt.weight_decay = cfg.weight_decay;
  opt.schedule = cfg.schedule;

  const Index total_iters = cfg.epochs * stream.batches_per_epoch();
  SeedRecord record;
  record.seed = seed;

  Index iteration = 0;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    stream.start_epoch(epoch);
    EpochRecord er;
    Index batches = 0;
    while (auto batch = stream.next()) {
      const Tensor probs =
          net.forward(batch->features, batch->layout(), RunMode::train);
      const FusedLossResult fused = fused_softmax_loss(
          probs, batch->n_source, batch->source_labels, loss_cfg);
      net.backward(fused.logit_grad);

      const double progress =
          total_iters > 1
              ? static_cast<double>(iteration) / static_cast<double>(total_iters - 1)
              : 0.0;
      auto params = net.params();
      er.learning_rate = sgd_step(opt, params, progress, epoch);
      net.clip_alphas();
      if (hook) hook(net, iteration);

      record.alpha_trace.push_back({iteration, net.alphas()});
      er.l_source += fused.value.l_source;
      er.l_target += fused.value.l_target;
      er.total += fused.value.total;
      ++batches;
      ++iteration;
    }
    er.l_source /= static_cast<double>(batches);
    er.l_target /= static_cast<double>(batches);
    er.total /= static_cast<double>(batches);
    er.alphas = net.alphas();

    Network snapshot = net;
    snapshot.freeze_alignment();
    er.target_accuracy = evaluate_accuracy(snapshot, target, Domain::target);
    record.epochs.push_back(std::move(er));
  }

  net.freeze_alignment();
  record.final_target_accuracy =
      evaluate_accuracy(net, target, Domain::target);
  return {std::move(net), std::move(record)};
}

double aggregate_mean(const RunReport& report) {
  if (report.seeds.empty()) return 0.0;
  double sum = 0.0;
  for (const SeedRecord& r : report.seeds) sum += r.final_target_accuracy;
  return sum / static_cast<double>(report.seeds.size());
}

double aggregate_stddev(const RunReport& report) {
  const std::size_t n = report.seeds.size();
  if (n < 2) return 0.0;
  const double mean = aggregate_mean(report);
  double acc = 0.0;
  for (const SeedRecord& r : report.seeds) {
    const double d = r.final_target_accuracy - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n - 1));
}

RunReport run_experiment(const ExperimentConfig& cfg, const StepHook& hook) {
  validate(cfg);
  fs::create_directories(cfg.output_dir);
  {
    std::ofstream out = open_out(cfg.output_dir + "/config.json");
    out << config_to_json(cfg).dump(2) << '\n';
  }

  RunReport report;
  for (std::uint64_t seed : cfg.seeds) {
    const DomainPair data = make_data(cfg, seed);
    TrainOutcome outcome = train_single(cfg, data.source, data.target, seed, hook);

    const std::string seed_dir =
        cfg.output_dir + "/seed_" + std::to_string(seed);
    fs::create_directories(seed_dir);
    write_metrics(outcome.record, seed_dir + "/metrics.tsv");
    save_model(outcome.net, seed_dir + "/model.bin");
    report.seeds.push_back(std::move(outcome.record));
  }
  report.mean_target_accuracy = aggregate_mean(report);
  report.stddev_target_accuracy = aggregate_stddev(report);

  save_report(report, cfg.output_dir + "/report.json");
  export_alpha_trace(report, cfg.output_dir + "/alpha_trace.tsv", 0);

  std::ofstream summary = open_out(cfg.output_dir + "/summary.tsv");
  summary << "# seed final_target_accuracy\n";
  summary.precision(12);
  for (const SeedRecord& r : report.seeds)
    summary << r.seed << ' ' << r.final_target_accuracy << '\n';
  summary << "# mean " << report.mean_target_accuracy << " stddev "
          << report.stddev_target_accuracy << '\n';
  return report;
}

void save_report(const RunReport& report, const std::string& path) {
  json seeds = json::array();
  for (const SeedRecord& r : report.seeds) seeds.push_back(record_to_json(r));
  const json j = {{"seeds", seeds},
                  {"mean_target_accuracy", report.mean_target_accuracy},
                  {"stddev_target_accuracy", report.stddev_target_accuracy}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("report '" + path + "': " + e.what());
  }
  RunReport report;
  for (const json& s : j.at("seeds"))
    report.seeds.push_back(record_from_json(s));
  report.mean_target_accuracy = j.at("mean_target_accuracy").get<double>();
  report.stddev_target_accuracy = j.at("stddev_target_accuracy").get<double>();
  return report;
}

void export_alpha_trace(const RunReport& report, const std::string& path,
                        Index seed_index) {
  if (seed_index < 0 ||
      seed_index >= static_cast<Index>(report.seeds.size()))
    throw IndexError("seed index out of range");
  const SeedRecord& record =
      report.seeds[static_cast<std::size_t>(seed_index)];
  std::ofstream out = open_out(path);
  out << "# iteration layer_index alpha\n";
  out.precision(12);
  for (const AlphaSample& s : record.alpha_trace)
    for (std::size_t layer = 0; layer < s.alphas.size(); ++layer)
      out << s.iteration << ' ' << layer << ' ' << s.alphas[layer] << '\n';
}

void export_histograms(Network& frozen_net, const Tensor& source_features,
                       const Tensor& target_features, Index align_layer_index,
                       Index bins, Index channel_samples,
                       std::uint64_t sample_seed, const std::string& path) {
  const std::vector<Index> positions = frozen_net.align_positions();
  if (align_layer_index < 0 ||
      align_layer_index >= static_cast<Index>(positions.size()))
    throw IndexError("alignment layer index out of range");
  const Index pos = positions[static_cast<std::size_t>(align_layer_index)];

  const Tensor act_s = frozen_net.activations_after(
      source_features, {source_features.batch(), 0}, RunMode::eval, pos);
  const Tensor act_t = frozen_net.activations_after(
      target_features, {0, target_features.batch()}, RunMode::eval, pos);

  // Random channel subset, recorded in the file header.
  std::vector<Index> channels(static_cast<std::size_t>(act_s.channels()));
  std::iota(channels.begin(), channels.end(), Index{0});
  std::mt19937_64 rng(sample_seed);
  std::shuffle(channels.begin(), channels.end(), rng);
  channels.resize(static_cast<std::size_t>(
      std::min<Index>(channel_samples, act_s.channels())));
  std::sort(channels.begin(), channels.end());

  std::vector<double> vals_s, vals_t;
  for (Index c : channels) {
    const Eigen::ArrayXd vs = channel_values(act_s, c);
    const Eigen::ArrayXd vt = channel_values(act_t, c);
    vals_s.insert(vals_s.end(), vs.data(), vs.data() + vs.size());
    vals_t.insert(vals_t.end(), vt.data(), vt.data() + vt.size());
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* vals : {&vals_s, &vals_t})
    for (double v : *vals) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) {  // constant features: widen to a unit window
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);

  std::vector<long> count_s(static_cast<std::size_t>(bins), 0);
  std::vector<long> count_t(static_cast<std::size_t>(bins), 0);
  auto bin_of = [&](double v) {
    const Index b = static_cast<Index>((v - lo) / width);
    return std::clamp<Index>(b, 0, bins - 1);
  };
  for (double v : vals_s) ++count_s[static_cast<std::size_t>(bin_of(v))];
  for (double v : vals_t) ++count_t[static_cast<std::size_t>(bin_of(v))];

  std::ofstream out = open_out(path);
  out << "# feature histogram after alignment layer " << align_layer_index
      << "\n# sampled_channels";
  for (Index c : channels) out << ' ' << c;
  out << " sample_seed " << sample_seed
      << "\n# bin_left bin_right source_count target_count\n";
  out.precision(12);
  for (Index b = 0; b < bins; ++b)
    out << lo + width * static_cast<double>(b) << ' '
        << lo + width * static_cast<double>(b + 1) << ' '
        << count_s[static_cast<std::size_t>(b)] << ' '
        << count_t[static_cast<std::size_t>(b)] << '\n';
}

GridSearchResult grid_search_lambda(const ExperimentConfig& cfg,
                                    std::vector<double> candidates,
                                    double holdout_fraction) {
  if (candidates.empty())
    throw ConfigError("lambda grid search needs at least one candidate");
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
    throw ConfigError("holdout fraction must lie in (0, 1)");
  std::sort(candidates.begin(), candidates.end());

  // Every candidate must be admissible for the variant before any training.
  for (double lambda : candidates) {
    ExperimentConfig probe = cfg;
    probe.lambda = lambda;
    validate(probe);
  }

  const std::uint64_t seed = cfg.seeds.front();
  const DomainPair data = make_data(cfg, seed);
  const Index n = data.source.size();
  const Index holdout =
      std::max<Index>(1, static_cast<Index>(std::llround(
                             holdout_fraction * static_cast<double>(n))));
  if (holdout >= n)
    throw DataError("source set too small for the requested holdout");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(mix_seed(seed, 0x617d));
  std::shuffle(order.begin(), order.end(), rng);

  auto subset = [&](Index begin, Index end) {
    LabeledSet out;
    out.class_count = data.source.class_count;
    out.features = Tensor({end - begin, data.source.features.extent(1)});
    out.labels.reserve(static_cast<std::size_t>(end - begin));
    for (Index i = begin; i < end; ++i) {
      const Index row = order[static_cast<std::size_t>(i)];
      out.features.matrix().row(i - begin) =
          data.source.features.matrix().row(row);
      out.labels.push_back(data.source.labels[static_cast<std::size_t>(row)]);
    }
    return out;
  };
  const LabeledSet held_out = subset(0, holdout);
  const LabeledSet train_split = subset(holdout, n);

  GridSearchResult result;
  double best_score = -1.0;
  for (double lambda : candidates) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.lambda = lambda;
    TrainOutcome outcome =
        train_single(run_cfg, train_split, data.target, seed, {});
    const double score =
        evaluate_accuracy(outcome.net, held_out, Domain::source);
    result.table.emplace_back(lambda, score);
    if (score > best_score) {  // ties keep the earlier (smaller) lambda
      best_score = score;
      result.best_lambda = lambda;
    }
  }
  return result;
}

}  // namespace dalkit
