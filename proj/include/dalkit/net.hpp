#ifndef DALKIT_NET_HPP_
#define DALKIT_NET_HPP_

#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dalkit/dal.hpp"
#include "dalkit/losses.hpp"
#include "dalkit/tensor.hpp"

namespace dalkit {

enum class RunMode { train, eval };

/// Batch layout: source rows [0, n_source) followed by target rows.
struct BatchLayout {
  Index n_source = 0;
  Index n_target = 0;
};

/// Mutable view of one parameter block and its last computed gradient.
struct ParamView {
  std::string name;
  std::span<double> value;
  std::span<const double> grad;
  bool weight_decay = true;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, const BatchLayout& layout,
                         RunMode mode) = 0;
  /// Consumes the cache of the matching forward; fills parameter gradients.
  virtual Tensor backward(const Tensor& grad) = 0;
  virtual void collect_params(std::vector<ParamView>&) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual Index out_features(Index in_features) const = 0;
  virtual std::string_view kind() const = 0;
};

/// Fully connected layer, y = x W^T + b. The forward path multiplies row by
/// row so that a sample's output never depends on its batch neighbours.
class DenseLayer final : public Layer {
 public:
  DenseLayer(Index in_features, Index out_features);

  /// Symmetric uniform fan-in initialization, U(-1/sqrt(in), 1/sqrt(in)).
  void init_uniform(std::mt19937_64& rng);

  Tensor forward(const Tensor& x, const BatchLayout& layout,
                 RunMode mode) override;
  Tensor backward(const Tensor& grad) override;
  void collect_params(std::vector<ParamView>& out) override;
  std::unique_ptr<Layer> clone() const override;
  Index out_features(Index) const override { return out_; }
  std::string_view kind() const override { return "dense"; }

  Index in_features() const { return in_; }
  RowMatrixXd& weights() { return weights_; }
  const RowMatrixXd& weights() const { return weights_; }
  Eigen::VectorXd& bias() { return bias_; }
  const Eigen::VectorXd& bias() const { return bias_; }

 private:
  Index in_ = 0;
  Index out_ = 0;
  RowMatrixXd weights_;  // [out, in]
  Eigen::VectorXd bias_;
  RowMatrixXd weight_grad_;
  Eigen::VectorXd bias_grad_;
  Tensor input_cache_;
};

class ReluLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, const BatchLayout& layout,
                 RunMode mode) override;
  Tensor backward(const Tensor& grad) override;
  std::unique_ptr<Layer> clone() const override;
  Index out_features(Index in_features) const override { return in_features; }
  std::string_view kind() const override { return "relu"; }

 private:
  Eigen::ArrayXd mask_;
};

/// Network-embedded domain-alignment layer. Splits its input at the batch
/// layout boundary, normalizes both blocks along the mixed statistics, and
/// exposes the mixing factor as an optimizable parameter (never subject to
/// weight decay). alpha may be pinned by marking it non-trainable.
class AlignLayer final : public Layer {
 public:
  AlignLayer(Index channels, double alpha_init, bool alpha_trainable,
             double eps, double momentum_ma);

  Tensor forward(const Tensor& x, const BatchLayout& layout,
                 RunMode mode) override;
  Tensor backward(const Tensor& grad) override;
  void collect_params(std::vector<ParamView>& out) override;
  std::unique_ptr<Layer> clone() const override;
  Index out_features(Index in_features) const override { return in_features; }
  std::string_view kind() const override { return "align"; }

  DaLayerState& state() { return state_; }
  const DaLayerState& state() const { return state_; }
  double alpha() const { return state_.alpha; }
  bool alpha_trainable() const { return alpha_trainable_; }
  void set_alpha_trainable(bool trainable) { alpha_trainable_ = trainable; }

 private:
  DaLayerState state_;
  bool alpha_trainable_ = true;
  DaCache cache_;
  Index cached_n_source_ = 0;
  double alpha_grad_ = 0.0;
};

/// Row-wise softmax over logits. backward() maps a gradient w.r.t. the
/// probabilities through the softmax Jacobian; the training path instead
/// uses fused_softmax_loss and skips this layer entirely.
class SoftmaxLayer final : public Layer {
 public:
  Tensor forward(const Tensor& x, const BatchLayout& layout,
                 RunMode mode) override;
  Tensor backward(const Tensor& grad) override;
  std::unique_ptr<Layer> clone() const override;
  Index out_features(Index in_features) const override { return in_features; }
  std::string_view kind() const override { return "softmax"; }

 private:
  Tensor probs_cache_;
};

/// Ordered layer stack ending in exactly one softmax head. Copyable; copies
/// are deep and carry all parameters, moving averages and frozen statistics.
class Network {
 public:
  Network() = default;
  explicit Network(Index input_dim) : input_dim_(input_dim), width_(input_dim) {}
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add_dense(Index out_features);
  void add_relu();
  void add_align(double alpha_init, bool alpha_trainable = true,
                 double eps = 1e-5, double momentum_ma = 0.1);
  void add_softmax();

  /// Seeds every dense layer's weights; biases start at zero.
  void init_params(std::uint64_t seed);

  Index input_dim() const { return input_dim_; }
  Index class_count() const;
  Index layer_count() const { return static_cast<Index>(layers_.size()); }
  Layer& layer(Index i) { return *layers_[static_cast<std::size_t>(i)]; }
  const Layer& layer(Index i) const {
    return *layers_[static_cast<std::size_t>(i)];
  }

  /// Runs the stack and returns row-normalized class probabilities.
  Tensor forward(const Tensor& x, const BatchLayout& layout, RunMode mode);

  /// Backpropagates a gradient given w.r.t. the logits (the softmax head is
  /// folded into the loss); returns the gradient w.r.t. the network input.
  Tensor backward(const Tensor& logit_grad);

  std::vector<ParamView> params();
  Index param_count();
  Eigen::VectorXd parameter_vector();
  void set_parameters(const Eigen::VectorXd& values);

  void freeze_alignment();
  void clip_alphas();
  bool frozen() const;
  std::vector<double> alphas() const;
  std::vector<Index> align_positions() const;
  AlignLayer& align_layer(Index align_index);
  const AlignLayer& align_layer(Index align_index) const;

  /// Output of layers_[0..layer_pos] inclusive (histogram export).
  Tensor activations_after(const Tensor& x, const BatchLayout& layout,
                           RunMode mode, Index layer_pos);

 private:
  void require_open(const char* op) const;
  Index input_dim_ = 0;
  Index width_ = 0;
  bool has_softmax_ = false;
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct FusedLossResult {
  LossValue value;
  Tensor logit_grad;
};

/// Loss value plus its gradient directly at the logits: source rows get
/// (p - onehot) / n, target rows get the entropy gradient mapped through
/// the softmax, scaled by lambda. Numerically stabler than chaining the
/// probability-level gradients through the softmax Jacobian.
FusedLossResult fused_softmax_loss(const Tensor& probs, Index n_source,
                                   const std::vector<int>& source_labels,
                                   const LossConfig& cfg);

enum class ScheduleKind { step, inv };

/// Learning-rate schedule: STEP divides the base rate by drop_factor once
/// the epoch reaches drop_epoch; INV evaluates l0 / (1 + gamma p)^beta on
/// the linear training progress p in [0, 1].
struct Schedule {
  ScheduleKind kind = ScheduleKind::inv;
  Index drop_epoch = 0;
  double drop_factor = 10.0;
  double gamma = 10.0;
  double beta = 0.75;

  double rate(double base_rate, double progress, Index epoch) const;
};

struct OptimizerState {
  double base_learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Schedule schedule;
  std::vector<Eigen::ArrayXd> velocity;  // one buffer per parameter block
};

/// One SGD-with-momentum update: v <- momentum v - l (g + wd theta),
/// theta <- theta + v. Weight decay is skipped for parameter blocks flagged
/// weight_decay = false (the alignment factors). Returns the rate used.
double sgd_step(OptimizerState& opt, std::vector<ParamView>& params,
                double progress, Index epoch);

}  // namespace dalkit

#endif  // DALKIT_NET_HPP_
