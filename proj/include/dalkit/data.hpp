#ifndef DALKIT_DATA_HPP_
#define DALKIT_DATA_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dalkit/net.hpp"
#include "dalkit/tensor.hpp"

namespace dalkit {

struct LabeledSet {
  Tensor features;          // [n, d]
  std::vector<int> labels;  // one class index per row
  Index class_count = 0;

  Index size() const { return features.batch(); }
};

/// Target-domain training data. Labels are stripped by the type system so
/// they can never reach the training path.
struct UnlabeledSet {
  Tensor features;

  Index size() const { return features.batch(); }
};

UnlabeledSet strip_labels(const LabeledSet& set);

/// One training mini-batch: source rows first, then target rows, with
/// counts fixed across all batches of a run.
struct DomainBatch {
  Tensor features;
  Index n_source = 0;
  Index n_target = 0;
  std::vector<int> source_labels;

  BatchLayout layout() const { return {n_source, n_target}; }
};

/// Synthetic benchmark: Gaussian class blobs, with the target domain drawn
/// from the same mixture and pushed through an invertible affine map
/// (paired-axis rotation, uniform scaling, translation).
struct ShiftSpec {
  Index class_count = 3;
  Index dim = 10;
  double separation = 3.0;        // scale of the class-mean spread
  double covariance_scale = 1.0;  // within-class standard deviation
  double rotation_angle = 0.0;    // radians, applied to axis pairs (0,1),(2,3),...
  Eigen::VectorXd translation;    // length dim; empty means zero
  double scale_factor = 1.0;
  Index n_source = 600;
  Index n_target = 600;
  std::uint64_t seed = 0;
};

struct DomainPair {
  LabeledSet source;
  LabeledSet target;  // labels are for evaluation only
};

DomainPair generate_shifted_gaussians(const ShiftSpec& spec);

/// Splits a total batch size proportionally to the dataset sizes; both
/// counts stay at least 1.
std::pair<Index, Index> proportional_counts(Index total, Index source_size,
                                            Index target_size);

/// Deterministic stream of fixed-layout batches. Each epoch is one pass
/// over the source set (reshuffled per epoch); the target set is consumed
/// round-robin and reshuffled whenever it runs out.
class BatchStream {
 public:
  BatchStream(LabeledSet source, UnlabeledSet target, Index n_source,
              Index n_target, std::uint64_t seed);

  Index batches_per_epoch() const { return batches_per_epoch_; }
  void start_epoch(Index epoch);
  std::optional<DomainBatch> next();

 private:
  void refill_target();

  LabeledSet source_;
  UnlabeledSet target_;
  Index n_source_;
  Index n_target_;
  std::uint64_t seed_;
  Index batches_per_epoch_;
  std::vector<Index> source_order_;
  std::vector<Index> target_order_;
  std::mt19937_64 target_rng_;
  Index source_pos_ = 0;
  Index target_pos_ = 0;
  Index batches_emitted_ = 0;
};

/// Delimited numeric text (comma or whitespace, '.' decimal separator,
/// UTF-8), one sample per line, optional auto-detected header row. The
/// labeled variant takes the final column as a non-negative integer class
/// index.
LabeledSet load_labeled_tabular(const std::string& path);
UnlabeledSet load_unlabeled_tabular(const std::string& path);

}  // namespace dalkit

#endif  // DALKIT_DATA_HPP_
