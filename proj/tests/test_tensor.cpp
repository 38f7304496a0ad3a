#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dalkit/tensor.hpp"

using namespace dalkit;

namespace {

Tensor random_tensor(Tensor::Shape shape, std::mt19937_64& rng) {
  Index n = 1;
  for (Index e : shape) n *= e;
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::ArrayXd data(n);
  for (Index i = 0; i < n; ++i) data[i] = dist(rng);
  return {std::move(shape), std::move(data)};
}

// Independent two-pass variance, biased (divide by count).
double direct_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("construction validates shape and finiteness") {
  CHECK_NOTHROW(Tensor({2, 3}));
  CHECK_THROWS_AS(Tensor({2, 3}, Eigen::ArrayXd::Zero(5)), DimensionError);
  Eigen::ArrayXd bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(Tensor({2, 1}, bad), ValueError);
  CHECK_NOTHROW(Tensor({0, 3}));  // empty batch extent is legal
}

TEST_CASE("elementwise ops") {
  const Tensor a = Tensor::from_rows({{1.0, 2.0}});
  const Tensor b = Tensor::from_rows({{3.0, 4.0}});

  CHECK(add(a, b).array()[0] == 4.0);
  CHECK(add(a, b).array()[1] == 6.0);
  CHECK(sub(b, a).array()[0] == 2.0);
  CHECK(mul(a, b).array()[1] == 8.0);

  const Tensor c = Tensor::from_rows({{2.0, 4.0}});
  CHECK(scale(c, 0.5).array()[0] == 1.0);
  CHECK(scale(c, 0.5).array()[1] == 2.0);

  CHECK(ln(Tensor::from_rows({{1.0}})).array()[0] == 0.0);
  CHECK(dalkit::exp(Tensor::from_rows({{0.0}})).array()[0] == 1.0);
  CHECK(dalkit::sqrt(Tensor::from_rows({{4.0}})).array()[0] == 2.0);

  CHECK_THROWS_AS(add(a, Tensor::from_rows({{1.0}})), DimensionError);
  CHECK_THROWS_AS(ln(Tensor::from_rows({{0.0}})), ValueError);
  CHECK_THROWS_AS(ln(Tensor::from_rows({{-1.0}})), ValueError);
  CHECK_THROWS_AS(dalkit::sqrt(Tensor::from_rows({{-1.0}})), ValueError);
  CHECK_THROWS_AS(dalkit::exp(Tensor::from_rows({{1000.0}})), ValueError);
}

TEST_CASE("reduce_channel anchors") {
  const Tensor t = Tensor::from_rows({{0.0}, {2.0}});
  CHECK(reduce_channel(t, Reduce::mean)[0] == doctest::Approx(1.0));
  // Oracle: ((0-1)^2 + (2-1)^2) / 2 = 1.
  CHECK(direct_variance({0.0, 2.0}) == doctest::Approx(1.0));
  CHECK(reduce_channel(t, Reduce::var)[0] == doctest::Approx(1.0));

  const Tensor single = Tensor::from_rows({{5.0}});
  CHECK(reduce_channel(single, Reduce::mean)[0] == doctest::Approx(5.0));

  CHECK_THROWS_AS(reduce_channel(t, Reduce::mean, 1, 1), DimensionError);
}

TEST_CASE("reduce_channel matches a direct loop on random data") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 20; ++it) {
    const Tensor t = random_tensor({4, 3, 2, 2}, rng);
    for (Index c = 0; c < 3; ++c) {
      std::vector<double> vals;
      for (Index n = 0; n < 4; ++n)
        for (Index p = 0; p < 4; ++p)
          vals.push_back(t.array()[(n * 3 + c) * 4 + p]);
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      CHECK(reduce_channel(t, Reduce::mean)[c] == doctest::Approx(mean).epsilon(1e-12));
      CHECK(reduce_channel(t, Reduce::var)[c] ==
            doctest::Approx(direct_variance(vals)).epsilon(1e-12));
    }
  }
}

TEST_CASE("reduce_channel properties: constant input and non-negative var") {
  std::mt19937_64 rng(11);
  const Tensor constant = Tensor::constant({5, 2, 3, 3}, 3.25);
  auto mean = reduce_channel(constant, Reduce::mean);
  auto var = reduce_channel(constant, Reduce::var);
  for (Index c = 0; c < 2; ++c) {
    CHECK(mean[c] == 3.25);
    CHECK(var[c] == 0.0);
  }
  for (int it = 0; it < 50; ++it) {
    const Tensor t = random_tensor({3, 4}, rng);
    auto v = reduce_channel(t, Reduce::var);
    for (Index c = 0; c < 4; ++c) CHECK(v[c] >= 0.0);
  }
}

TEST_CASE("matmul") {
  const Tensor eye = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const Tensor a = Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  const Tensor prod = matmul(eye, a);
  for (Index i = 0; i < 4; ++i) CHECK(prod.array()[i] == a.array()[i]);

  const Tensor row = Tensor::from_rows({{1.0, 2.0}});
  const Tensor col = Tensor::from_rows({{3.0}, {4.0}});
  CHECK(matmul(row, col).array()[0] == doctest::Approx(11.0));

  const Tensor zero = Tensor({2, 2});
  const Tensor annihilated = matmul(a, zero);
  for (Index i = 0; i < 4; ++i) CHECK(annihilated.array()[i] == 0.0);

  CHECK_THROWS_AS(matmul(row, row), DimensionError);
}

TEST_CASE("row splitting and concatenation") {
  std::mt19937_64 rng(3);
  const Tensor t = random_tensor({5, 3}, rng);
  const Tensor head = rows(t, 0, 2);
  const Tensor tail = rows(t, 2, 5);
  CHECK(head.batch() == 2);
  CHECK(tail.batch() == 3);
  const Tensor joined = concat_rows(head, tail);
  CHECK(joined.same_shape(t));
  for (Index i = 0; i < t.size(); ++i) CHECK(joined.array()[i] == t.array()[i]);

  const Tensor empty = rows(t, 2, 2);
  CHECK(empty.batch() == 0);
  CHECK(concat_rows(empty, tail).batch() == 3);
}

TEST_CASE("channel gather/scatter round trip") {
  std::mt19937_64 rng(5);
  const Tensor t = random_tensor({3, 2, 2, 2}, rng);
  Tensor rebuilt({3, 2, 2, 2});
  for (Index c = 0; c < 2; ++c)
    set_channel_values(rebuilt, c, channel_values(t, c));
  for (Index i = 0; i < t.size(); ++i) CHECK(rebuilt.array()[i] == t.array()[i]);
}
