#include "dalkit/net.hpp"

#include <cmath>
#include <string>

namespace dalkit {

// ---------------------------------------------------------------------------
// DenseLayer

DenseLayer::DenseLayer(Index in_features, Index out_features)
    : in_(in_features), out_(out_features) {
  if (in_ < 1 || out_ < 1)
    throw DimensionError("dense layer extents must be positive");
  weights_ = RowMatrixXd::Zero(out_, in_);
  bias_ = Eigen::VectorXd::Zero(out_);
  weight_grad_ = RowMatrixXd::Zero(out_, in_);
  bias_grad_ = Eigen::VectorXd::Zero(out_);
}

void DenseLayer::init_uniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index r = 0; r < out_; ++r)
    for (Index c = 0; c < in_; ++c) weights_(r, c) = dist(rng);
  bias_.setZero();
}

Tensor DenseLayer::forward(const Tensor& x, const BatchLayout&, RunMode mode) {
  if (x.rank() != 2 || x.extent(1) != in_)
    throw DimensionError("dense layer: input width mismatch");
  input_cache_ = mode == RunMode::train ? x : Tensor{};
  Tensor y({x.batch(), out_});
  auto ym = y.matrix();
  auto xm = x.matrix();
  // Row-by-row products keep each sample's output independent of the batch
  // around it, bit for bit.
  for (Index i = 0; i < x.batch(); ++i) {
    const Eigen::VectorXd xi = xm.row(i);
    ym.row(i) = (weights_ * xi + bias_).transpose();
  }
  return y;
}

Tensor DenseLayer::backward(const Tensor& grad) {
  if (input_cache_.rank() != 2)
    throw StateError("dense layer: backward without a training forward");
  if (grad.rank() != 2 || grad.extent(1) != out_ ||
      grad.batch() != input_cache_.batch())
    throw DimensionError("dense layer: gradient shape mismatch");
  auto gm = grad.matrix();
  auto xm = input_cache_.matrix();
  weight_grad_ = gm.transpose() * xm;
  bias_grad_ = gm.colwise().sum().transpose();
  Tensor dx({input_cache_.batch(), in_});
  dx.matrix() = gm * weights_;
  return dx;
}

void DenseLayer::collect_params(std::vector<ParamView>& out) {
  out.push_back({"dense.w",
                 {weights_.data(), static_cast<std::size_t>(weights_.size())},
                 {weight_grad_.data(), static_cast<std::size_t>(weight_grad_.size())},
                 true});
  out.push_back({"dense.b",
                 {bias_.data(), static_cast<std::size_t>(bias_.size())},
                 {bias_grad_.data(), static_cast<std::size_t>(bias_grad_.size())},
                 true});
}

std::unique_ptr<Layer> DenseLayer::clone() const {
  return std::make_unique<DenseLayer>(*this);
}

// ---------------------------------------------------------------------------
// ReluLayer

Tensor ReluLayer::forward(const Tensor& x, const BatchLayout&, RunMode mode) {
  mask_ = mode == RunMode::train ? (x.array() > 0.0).cast<double>()
                                 : Eigen::ArrayXd();
  return {x.shape(), x.array().max(0.0)};
}

Tensor ReluLayer::backward(const Tensor& grad) {
  if (grad.size() != mask_.size())
    throw DimensionError("relu: gradient shape mismatch");
  return {grad.shape(), grad.array() * mask_};
}

std::unique_ptr<Layer> ReluLayer::clone() const {
  return std::make_unique<ReluLayer>(*this);
}

// ---------------------------------------------------------------------------
// AlignLayer

AlignLayer::AlignLayer(Index channels, double alpha_init, bool alpha_trainable,
                       double eps, double momentum_ma)
    : state_(DaLayerState::make(channels, alpha_init, eps, momentum_ma)),
      alpha_trainable_(alpha_trainable) {}

Tensor AlignLayer::forward(const Tensor& x, const BatchLayout& layout,
                           RunMode mode) {
  if (layout.n_source + layout.n_target != x.batch())
    throw DimensionError("align layer: batch layout does not cover the batch");
  if (mode == RunMode::train && state_.mode != DaMode::train)
    throw StateError("align layer is frozen; training forward not allowed");
  if (mode == RunMode::eval && state_.mode != DaMode::frozen)
    throw StateError("align layer must be frozen for evaluation");

  const Tensor x_s = rows(x, 0, layout.n_source);
  const Tensor x_t = rows(x, layout.n_source, x.batch());
  DaForwardResult res = da_forward(x_s, x_t, state_);
  if (mode == RunMode::train) {
    cache_ = std::move(res.cache);
    cached_n_source_ = layout.n_source;
  } else {
    cache_ = DaCache{};  // a stale training cache must not feed backward
  }
  return concat_rows(res.y_s, res.y_t);
}

Tensor AlignLayer::backward(const Tensor& grad) {
  const Tensor g_s = rows(grad, 0, cached_n_source_);
  const Tensor g_t = rows(grad, cached_n_source_, grad.batch());
  DaBackwardResult res = da_backward(cache_, g_s, g_t);
  alpha_grad_ = res.d_alpha;
  return concat_rows(res.dx_s, res.dx_t);
}

void AlignLayer::collect_params(std::vector<ParamView>& out) {
  if (!alpha_trainable_) return;
  out.push_back({"align.alpha", {&state_.alpha, 1}, {&alpha_grad_, 1}, false});
}

std::unique_ptr<Layer> AlignLayer::clone() const {
  return std::make_unique<AlignLayer>(*this);
}

// ---------------------------------------------------------------------------
// SoftmaxLayer

Tensor SoftmaxLayer::forward(const Tensor& x, const BatchLayout&,
                             RunMode mode) {
  if (x.rank() != 2) throw DimensionError("softmax: input must be [n, K]");
  Tensor probs(x.shape());
  auto xm = x.matrix();
  auto pm = probs.matrix();
  for (Index i = 0; i < x.batch(); ++i) {
    const double row_max = xm.row(i).maxCoeff();
    Eigen::ArrayXd e = (xm.row(i).array() - row_max).exp();
    pm.row(i) = (e / e.sum()).matrix();
  }
  probs_cache_ = mode == RunMode::train ? probs : Tensor{};
  return probs;
}

Tensor SoftmaxLayer::backward(const Tensor& grad) {
  if (!grad.same_shape(probs_cache_))
    throw DimensionError("softmax: gradient shape mismatch");
  Tensor dz(grad.shape());
  auto gm = grad.matrix();
  auto pm = probs_cache_.matrix();
  auto dm = dz.matrix();
  for (Index i = 0; i < grad.batch(); ++i) {
    const double dot = gm.row(i).dot(pm.row(i));
    dm.row(i) = (pm.row(i).array() * (gm.row(i).array() - dot)).matrix();
  }
  return dz;
}

std::unique_ptr<Layer> SoftmaxLayer::clone() const {
  return std::make_unique<SoftmaxLayer>(*this);
}

// ---------------------------------------------------------------------------
// Network

Network::Network(const Network& other)
    : input_dim_(other.input_dim_),
      width_(other.width_),
      has_softmax_(other.has_softmax_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this == &other) return *this;
  Network copy(other);
  *this = std::move(copy);
  return *this;
}

void Network::require_open(const char* op) const {
  if (has_softmax_)
    throw ConfigError(std::string(op) + ": softmax head must stay last");
}

void Network::add_dense(Index out_features) {
  require_open("add_dense");
  layers_.push_back(std::make_unique<DenseLayer>(width_, out_features));
  width_ = out_features;
}

void Network::add_relu() {
  require_open("add_relu");
  layers_.push_back(std::make_unique<ReluLayer>());
}

void Network::add_align(double alpha_init, bool alpha_trainable, double eps,
                        double momentum_ma) {
  require_open("add_align");
  layers_.push_back(std::make_unique<AlignLayer>(width_, alpha_init,
                                                 alpha_trainable, eps,
                                                 momentum_ma));
}

void Network::add_softmax() {
  require_open("add_softmax");
  if (width_ < 2) throw ConfigError("softmax head needs at least two classes");
  layers_.push_back(std::make_unique<SoftmaxLayer>());
  has_softmax_ = true;
}

void Network::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : layers_)
    if (auto* dense = dynamic_cast<DenseLayer*>(l.get()))
      dense->init_uniform(rng);
}

Index Network::class_count() const {
  if (!has_softmax_) throw ConfigError("network has no softmax head");
  return width_;
}

Tensor Network::forward(const Tensor& x, const BatchLayout& layout,
                        RunMode mode) {
  if (!has_softmax_) throw ConfigError("network has no softmax head");
  if (layout.n_source < 0 || layout.n_target < 0 ||
      layout.n_source + layout.n_target != x.batch())
    throw DimensionError("batch layout does not match the batch extent");
  Tensor h = x;
  for (auto& l : layers_) h = l->forward(h, layout, mode);
  return h;
}

Tensor Network::backward(const Tensor& logit_grad) {
  if (!has_softmax_) throw ConfigError("network has no softmax head");
  Tensor g = logit_grad;
  // The gradient arrives at the logits, so the softmax head is skipped.
  for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

std::vector<ParamView> Network::params() {
  std::vector<ParamView> out;
  for (auto& l : layers_) l->collect_params(out);
  return out;
}

Index Network::param_count() {
  Index n = 0;
  for (const auto& p : params()) n += static_cast<Index>(p.value.size());
  return n;
}

Eigen::VectorXd Network::parameter_vector() {
  Eigen::VectorXd v(param_count());
  Index k = 0;
  for (const auto& p : params())
    for (double x : p.value) v[k++] = x;
  return v;
}

void Network::set_parameters(const Eigen::VectorXd& values) {
  if (values.size() != param_count())
    throw DimensionError("set_parameters: length mismatch");
  Index k = 0;
  for (auto& p : params())
    for (double& x : p.value) x = values[k++];
}

void Network::freeze_alignment() {
  for (auto& l : layers_)
    if (auto* a = dynamic_cast<AlignLayer*>(l.get())) freeze(a->state());
}

void Network::clip_alphas() {
  for (auto& l : layers_)
    if (auto* a = dynamic_cast<AlignLayer*>(l.get())) clip_alpha(a->state());
}

bool Network::frozen() const {
  for (const auto& l : layers_)
    if (auto* a = dynamic_cast<const AlignLayer*>(l.get()))
      if (a->state().mode != DaMode::frozen) return false;
  return true;
}

std::vector<double> Network::alphas() const {
  std::vector<double> out;
  for (const auto& l : layers_)
    if (auto* a = dynamic_cast<const AlignLayer*>(l.get()))
      out.push_back(a->alpha());
  return out;
}

std::vector<Index> Network::align_positions() const {
  std::vector<Index> out;
  for (Index i = 0; i < layer_count(); ++i)
    if (layer(i).kind() == "align") out.push_back(i);
  return out;
}

AlignLayer& Network::align_layer(Index align_index) {
  const auto positions = align_positions();
  if (align_index < 0 || align_index >= static_cast<Index>(positions.size()))
    throw IndexError("alignment layer index out of range");
  return static_cast<AlignLayer&>(
      layer(positions[static_cast<std::size_t>(align_index)]));
}

const AlignLayer& Network::align_layer(Index align_index) const {
  return const_cast<Network*>(this)->align_layer(align_index);
}

Tensor Network::activations_after(const Tensor& x, const BatchLayout& layout,
                                  RunMode mode, Index layer_pos) {
  if (layer_pos < 0 || layer_pos >= layer_count())
    throw IndexError("layer position out of range");
  Tensor h = x;
  for (Index i = 0; i <= layer_pos; ++i) h = layer(i).forward(h, layout, mode);
  return h;
}

// ---------------------------------------------------------------------------
// Fused loss

FusedLossResult fused_softmax_loss(const Tensor& probs, Index n_source,
                                   const std::vector<int>& source_labels,
                                   const LossConfig& cfg) {
  if (cfg.lambda < 0.0) throw ValueError("lambda must be non-negative");
  if (cfg.class_count > 0 && probs.extent(1) != cfg.class_count)
    throw DimensionError("fused_softmax_loss: probability width != class count");
  if (n_source < 0 || n_source > probs.batch())
    throw DimensionError("fused_softmax_loss: source row count out of range");

  const Tensor probs_s = rows(probs, 0, n_source);
  const Tensor probs_t = rows(probs, n_source, probs.batch());
  const LossGrad src = source_log_loss(probs_s, source_labels);
  const LossGrad tgt = target_entropy_loss(probs_t);
  const Index m = probs_t.batch();
  const Index k = probs.extent(1);

  FusedLossResult out;
  out.value.l_source = src.value;
  out.value.l_target = tgt.value;
  out.value.total = src.value + cfg.lambda * tgt.value;
  out.logit_grad = Tensor(probs.shape());

  for (Index i = 0; i < n_source; ++i) {
    const int y = source_labels[static_cast<std::size_t>(i)];
    for (Index c = 0; c < k; ++c) {
      out.logit_grad(i, c) =
          (probs_s(i, c) - (c == y ? 1.0 : 0.0)) / static_cast<double>(n_source);
    }
  }
  for (Index i = 0; i < m; ++i) {
    // Per-row entropy, with the same probability floor as the loss value.
    double entropy = 0.0;
    for (Index c = 0; c < k; ++c) {
      const double p = probs_t(i, c);
      entropy -= p * std::log(p < kProbFloor ? kProbFloor : p);
    }
    for (Index c = 0; c < k; ++c) {
      const double p = probs_t(i, c);
      const double log_p = std::log(p < kProbFloor ? kProbFloor : p);
      out.logit_grad(n_source + i, c) =
          cfg.lambda * (-p * (log_p + entropy)) / static_cast<double>(m);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

double Schedule::rate(double base_rate, double progress, Index epoch) const {
  if (kind == ScheduleKind::step)
    return epoch >= drop_epoch ? base_rate / drop_factor : base_rate;
  return base_rate / std::pow(1.0 + gamma * progress, beta);
}

double sgd_step(OptimizerState& opt, std::vector<ParamView>& params,
                double progress, Index epoch) {
  const double rate = opt.schedule.rate(opt.base_learning_rate, progress, epoch);
  if (opt.velocity.empty()) {
    opt.velocity.reserve(params.size());
    for (const auto& p : params)
      opt.velocity.emplace_back(
          Eigen::ArrayXd::Zero(static_cast<Index>(p.value.size())));
  }
  if (opt.velocity.size() != params.size())
    throw DimensionError("optimizer velocity buffers do not match parameters");

  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamView& p = params[i];
    Eigen::ArrayXd& v = opt.velocity[i];
    if (v.size() != static_cast<Index>(p.value.size()))
      throw DimensionError("optimizer velocity buffer size mismatch");
    const double wd = p.weight_decay ? opt.weight_decay : 0.0;
    for (Index j = 0; j < v.size(); ++j) {
      const std::size_t ju = static_cast<std::size_t>(j);
      v[j] = opt.momentum * v[j] - rate * (p.grad[ju] + wd * p.value[ju]);
      p.value[ju] += v[j];
    }
  }
  return rate;
}

}  // namespace dalkit
