#ifndef DALKIT_CONFIG_HPP_
#define DALKIT_CONFIG_HPP_

#include <json.hpp>
#include <string>
#include <vector>

#include "dalkit/data.hpp"
#include "dalkit/net.hpp"

namespace dalkit {

enum class Variant { source, entropy, autodial_fixed, autodial };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// One experiment: ablation variant, topology, loss weight, optimizer,
/// data recipe, batch layout, seeds and output location. Parsed from a
/// JSON config file with full defaulting; the effective (fully defaulted)
/// config is echoed into the output directory for reproducibility.
struct ExperimentConfig {
  Variant variant = Variant::autodial;

  // network
  std::vector<Index> hidden = {32, 32};
  double alpha_init = 0.75;
  double da_eps = 1e-5;
  double da_momentum = 0.1;

  // loss
  double lambda = 0.1;

  // optimizer
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Schedule schedule;

  // data: synthetic benchmark or tabular files (labeled source and labeled
  // target; target labels are used for evaluation only)
  bool synthetic = true;
  ShiftSpec shift;
  std::string source_path;
  std::string target_path;

  // batch layout: explicit counts, or a total split proportionally
  bool proportional = false;
  Index batch_total = 48;
  Index batch_source = 32;
  Index batch_target = 16;

  Index epochs = 30;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "out";

  // histogram export defaults
  Index hist_bins = 40;
  Index hist_channels = 4;
  std::uint64_t hist_seed = 0;

  bool uses_alignment() const {
    return variant == Variant::autodial || variant == Variant::autodial_fixed;
  }
  bool alpha_trainable() const { return variant == Variant::autodial; }
  double effective_alpha_init() const {
    return variant == Variant::autodial_fixed ? 1.0 : alpha_init;
  }
};

/// Parses and validates; unknown keys and variant-inconsistent settings are
/// ConfigErrors, raised before any training starts.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& cfg);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Builds the variant's network: an MLP with one alignment layer after
/// every dense layer (AUTODIAL / AUTODIAL_FIXED) or a plain MLP (SOURCE /
/// ENTROPY), ending in a softmax head over class_count classes.
Network build_network(const ExperimentConfig& cfg, Index input_dim,
                      Index class_count, std::uint64_t init_seed);

}  // namespace dalkit

#endif  // DALKIT_CONFIG_HPP_
