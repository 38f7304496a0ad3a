#ifndef DALKIT_TENSOR_HPP_
#define DALKIT_TENSOR_HPP_

#include <Eigen/Dense>
#include <initializer_list>
#include <vector>

#include "dalkit/errors.hpp"

namespace dalkit {

using Index = Eigen::Index;
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense real array with row-major flat storage and explicit shape metadata.
///
/// Activations use [batch, channel] or [batch, channel, height, width] axis
/// semantics. All values are double precision and finite; construction
/// validates both. Tensors are plain values: copying copies the data.
class Tensor {
 public:
  using Shape = std::vector<Index>;

  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);

  /// Adopts a flat row-major data array; the element count must match the
  /// product of the extents and every value must be finite.
  Tensor(Shape shape, Eigen::ArrayXd data);

  static Tensor constant(Shape shape, double value);

  /// 2-D convenience constructor for small literals in tests and loaders.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index extent(Index axis) const;

  Index batch() const { return extent(0); }
  Index channels() const { return extent(1); }
  /// Number of spatial positions per (sample, channel): H*W, or 1 for 2-D.
  Index spatial() const;
  /// Flat element count of one batch row.
  Index row_size() const;

  double operator()(Index i, Index j) const;
  double& operator()(Index i, Index j);

  const Eigen::ArrayXd& array() const { return data_; }
  Eigen::ArrayXd& array() { return data_; }

  /// Matrix view of a 2-D tensor.
  Eigen::Map<const RowMatrixXd> matrix() const;
  Eigen::Map<RowMatrixXd> matrix();

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  Eigen::ArrayXd data_;
};

// Elementwise operations. Zip variants require matching shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sqrt(const Tensor& a);   // requires non-negative entries
Tensor ln(const Tensor& a);     // requires strictly positive entries
Tensor exp(const Tensor& a);    // result must stay finite

enum class Reduce { mean, var };

/// Per-channel reduction pooling the batch rows [row_begin, row_end) and all
/// spatial positions. `var` is the biased (divide-by-count) variance.
Eigen::ArrayXd reduce_channel(const Tensor& t, Reduce stat, Index row_begin,
                              Index row_end);
Eigen::ArrayXd reduce_channel(const Tensor& t, Reduce stat);

/// Standard 2-D matrix product.
Tensor matmul(const Tensor& a, const Tensor& b);

// Batch-axis helpers used to split and rejoin source/target blocks.
Tensor rows(const Tensor& t, Index begin, Index end);
Tensor concat_rows(const Tensor& a, const Tensor& b);

/// All values of one channel across batch rows [row_begin, row_end) and all
/// spatial positions, flattened in row-major order.
Eigen::ArrayXd channel_values(const Tensor& t, Index channel, Index row_begin,
                              Index row_end);
Eigen::ArrayXd channel_values(const Tensor& t, Index channel);

/// Inverse of channel_values over the full batch.
void set_channel_values(Tensor& t, Index channel, const Eigen::ArrayXd& values);

}  // namespace dalkit

#endif  // DALKIT_TENSOR_HPP_
