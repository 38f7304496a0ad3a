#ifndef DALKIT_EXPERIMENT_HPP_
#define DALKIT_EXPERIMENT_HPP_

#include <functional>
#include <string>
#include <vector>

#include "dalkit/config.hpp"
#include "dalkit/data.hpp"
#include "dalkit/net.hpp"

namespace dalkit {

enum class Domain { source, target };

struct EpochRecord {
  double l_source = 0.0;
  double l_target = 0.0;
  double total = 0.0;
  double target_accuracy = 0.0;
  double learning_rate = 0.0;
  std::vector<double> alphas;
};

struct AlphaSample {
  Index iteration = 0;
  std::vector<double> alphas;  // one entry per alignment layer
};

struct SeedRecord {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  std::vector<AlphaSample> alpha_trace;
  double final_target_accuracy = 0.0;
};

struct RunReport {
  std::vector<SeedRecord> seeds;
  double mean_target_accuracy = 0.0;
  double stddev_target_accuracy = 0.0;
};

/// Invoked after every optimizer step with the updated network.
using StepHook = std::function<void(const Network& net, Index iteration)>;

struct TrainOutcome {
  Network net;  // frozen after training
  SeedRecord record;
};

/// Builds (or derives) the two domains for one run seed. Synthetic data is
/// redrawn per seed so the seed average covers independent replicates; file
/// data is fixed.
DomainPair make_data(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Trains one network per the config on the given data; the target set's
/// labels are used for evaluation only. Returns the frozen network and the
/// full per-epoch record.
TrainOutcome train_single(const ExperimentConfig& cfg, const LabeledSet& source,
                          const LabeledSet& target, std::uint64_t seed,
                          const StepHook& hook = {});

/// Fraction of correctly argmax-classified rows, evaluated along the given
/// domain's frozen normalization path.
double evaluate_accuracy(Network& frozen_net, const LabeledSet& set,
                         Domain domain);

/// Full protocol: per seed, build data, train, freeze, evaluate on the
/// complete target set; aggregate across seeds. Writes the effective
/// config, per-seed metrics and models, the report and the alpha trace
/// into cfg.output_dir.
RunReport run_experiment(const ExperimentConfig& cfg, const StepHook& hook = {});

double aggregate_mean(const RunReport& report);
double aggregate_stddev(const RunReport& report);

void save_report(const RunReport& report, const std::string& path);
RunReport load_report(const std::string& path);

/// Delimited text, one row per (iteration, layer, alpha).
void export_alpha_trace(const RunReport& report, const std::string& path,
                        Index seed_index = 0);

/// Histogram of features taken after one alignment layer (frozen mode),
/// aggregated over randomly sampled channels; rows are
/// (bin_left, bin_right, source_count, target_count).
void export_histograms(Network& frozen_net, const Tensor& source_features,
                       const Tensor& target_features, Index align_layer_index,
                       Index bins, Index channel_samples,
                       std::uint64_t sample_seed, const std::string& path);

struct GridSearchResult {
  double best_lambda = 0.0;
  std::vector<std::pair<double, double>> table;  // (lambda, holdout accuracy)
};

/// Trains one run per candidate on a source split, scores the held-out
/// source rows, and returns the best candidate (ties favor the smaller
/// lambda).
GridSearchResult grid_search_lambda(const ExperimentConfig& cfg,
                                    std::vector<double> candidates,
                                    double holdout_fraction = 0.2);

}  // namespace dalkit

#endif  // DALKIT_EXPERIMENT_HPP_
