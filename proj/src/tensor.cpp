#include "dalkit/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace dalkit {

namespace {

Index shape_product(const Tensor::Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e < 0) throw DimensionError("tensor extent must be non-negative");
    n *= e;
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": operand shapes differ");
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_ = Eigen::ArrayXd::Zero(shape_product(shape_));
}

Tensor::Tensor(Shape shape, Eigen::ArrayXd data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size())
    throw DimensionError("tensor data length does not match shape");
  if (!data_.allFinite())
    throw ValueError("tensor holds non-finite values");
}

Tensor Tensor::constant(Shape shape, double value) {
  Index n = shape_product(shape);
  return Tensor(std::move(shape), Eigen::ArrayXd::Constant(n, value));
}

Tensor Tensor::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  Index n = static_cast<Index>(rows.size());
  Index cols = n > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
  Eigen::ArrayXd data(n * cols);
  Index k = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != cols)
      throw DimensionError("from_rows: ragged rows");
    for (double v : row) data[k++] = v;
  }
  return Tensor({n, cols}, std::move(data));
}

Index Tensor::extent(Index axis) const {
  if (axis < 0 || axis >= rank())
    throw DimensionError("tensor axis out of range");
  return shape_[static_cast<std::size_t>(axis)];
}

Index Tensor::spatial() const {
  if (rank() == 2) return 1;
  if (rank() == 4) return shape_[2] * shape_[3];
  throw DimensionError("tensor is neither [N,C] nor [N,C,H,W]");
}

Index Tensor::row_size() const {
  if (rank() < 1) throw DimensionError("tensor has no batch axis");
  return batch() > 0 ? size() / batch() : channels() * spatial();
}

double Tensor::operator()(Index i, Index j) const {
  return data_[i * extent(1) + j];
}

double& Tensor::operator()(Index i, Index j) {
  return data_[i * extent(1) + j];
}

Eigen::Map<const RowMatrixXd> Tensor::matrix() const {
  if (rank() != 2) throw DimensionError("matrix view requires a 2-D tensor");
  return {data_.data(), shape_[0], shape_[1]};
}

Eigen::Map<RowMatrixXd> Tensor::matrix() {
  if (rank() != 2) throw DimensionError("matrix view requires a 2-D tensor");
  return {data_.data(), shape_[0], shape_[1]};
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return {a.shape(), a.array() + b.array()};
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return {a.shape(), a.array() - b.array()};
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return {a.shape(), a.array() * b.array()};
}

Tensor scale(const Tensor& a, double factor) {
  return {a.shape(), a.array() * factor};
}

Tensor sqrt(const Tensor& a) {
  if ((a.array() < 0.0).any())
    throw ValueError("sqrt: negative input");
  return {a.shape(), a.array().sqrt()};
}

Tensor ln(const Tensor& a) {
  if ((a.array() <= 0.0).any())
    throw ValueError("ln: input must be strictly positive");
  return {a.shape(), a.array().log()};
}

Tensor exp(const Tensor& a) {
  Eigen::ArrayXd out = a.array().exp();
  if (!out.allFinite()) throw ValueError("exp: result overflows");
  return {a.shape(), std::move(out)};
}

Eigen::ArrayXd channel_values(const Tensor& t, Index channel, Index row_begin,
                              Index row_end) {
  if (channel < 0 || channel >= t.channels())
    throw DimensionError("channel index out of range");
  if (row_begin < 0 || row_end > t.batch() || row_begin > row_end)
    throw DimensionError("batch row range out of bounds");
  const Index hw = t.spatial();
  const Index channels = t.channels();
  Eigen::ArrayXd out((row_end - row_begin) * hw);
  Index k = 0;
  for (Index n = row_begin; n < row_end; ++n) {
    out.segment(k, hw) = t.array().segment((n * channels + channel) * hw, hw);
    k += hw;
  }
  return out;
}

Eigen::ArrayXd channel_values(const Tensor& t, Index channel) {
  return channel_values(t, channel, 0, t.batch());
}

void set_channel_values(Tensor& t, Index channel, const Eigen::ArrayXd& values) {
  const Index hw = t.spatial();
  const Index channels = t.channels();
  if (values.size() != t.batch() * hw)
    throw DimensionError("set_channel_values: length mismatch");
  Index k = 0;
  for (Index n = 0; n < t.batch(); ++n) {
    t.array().segment((n * channels + channel) * hw, hw) = values.segment(k, hw);
    k += hw;
  }
}

Eigen::ArrayXd reduce_channel(const Tensor& t, Reduce stat, Index row_begin,
                              Index row_end) {
  if (row_begin >= row_end)
    throw DimensionError("reduce_channel: empty batch row subset");
  Eigen::ArrayXd out(t.channels());
  for (Index c = 0; c < t.channels(); ++c) {
    Eigen::ArrayXd v = channel_values(t, c, row_begin, row_end);
    if (stat == Reduce::mean) {
      out[c] = v.mean();
    } else {
      double m = v.mean();
      out[c] = (v - m).square().mean();
    }
  }
  return out;
}

Eigen::ArrayXd reduce_channel(const Tensor& t, Reduce stat) {
  return reduce_channel(t, stat, 0, t.batch());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul requires 2-D tensors");
  if (a.extent(1) != b.extent(0))
    throw DimensionError("matmul: inner extents disagree");
  Tensor out({a.extent(0), b.extent(1)});
  out.matrix() = a.matrix() * b.matrix();
  return out;
}

Tensor rows(const Tensor& t, Index begin, Index end) {
  if (begin < 0 || end > t.batch() || begin > end)
    throw DimensionError("rows: range out of bounds");
  Tensor::Shape shape = t.shape();
  shape[0] = end - begin;
  const Index rs = t.row_size();
  return {std::move(shape), t.array().segment(begin * rs, (end - begin) * rs)};
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.batch() == 0) return b;
  if (b.batch() == 0) return a;
  Tensor::Shape shape_a = a.shape();
  Tensor::Shape shape_b = b.shape();
  shape_a[0] = shape_b[0] = 0;
  if (shape_a != shape_b)
    throw DimensionError("concat_rows: per-row shapes differ");
  Tensor::Shape shape = a.shape();
  shape[0] = a.batch() + b.batch();
  Eigen::ArrayXd data(a.size() + b.size());
  data << a.array(), b.array();
  return {std::move(shape), std::move(data)};
}

}  // namespace dalkit
