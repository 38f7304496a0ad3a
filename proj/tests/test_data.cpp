#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "dalkit/data.hpp"

using namespace dalkit;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("dalkit_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

Eigen::VectorXd class_mean(const LabeledSet& set, int label) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(set.features.extent(1));
  Index count = 0;
  for (Index i = 0; i < set.size(); ++i)
    if (set.labels[static_cast<std::size_t>(i)] == label) {
      mean += set.features.matrix().row(i).transpose();
      ++count;
    }
  return mean / static_cast<double>(count);
}

}  // namespace

TEST_CASE("synthetic generation is deterministic") {
  ShiftSpec spec;
  spec.seed = 99;
  spec.n_source = 60;
  spec.n_target = 40;
  const DomainPair a = generate_shifted_gaussians(spec);
  const DomainPair b = generate_shifted_gaussians(spec);
  for (Index i = 0; i < a.source.features.size(); ++i)
    CHECK(a.source.features.array()[i] == b.source.features.array()[i]);
  for (Index i = 0; i < a.target.features.size(); ++i)
    CHECK(a.target.features.array()[i] == b.target.features.array()[i]);
  CHECK(a.source.labels == b.source.labels);
}

TEST_CASE("identity transform leaves the distributions aligned") {
  ShiftSpec spec;
  spec.seed = 7;
  spec.n_source = 4000;
  spec.n_target = 4000;
  spec.class_count = 2;
  spec.dim = 4;
  const DomainPair pair = generate_shifted_gaussians(spec);
  // Same mixture, so per-class means agree within sampling error.
  for (int k = 0; k < 2; ++k) {
    const Eigen::VectorXd ms = class_mean(pair.source, k);
    const Eigen::VectorXd mt = class_mean(pair.target, k);
    CHECK((ms - mt).norm() < 0.25);
  }
}

TEST_CASE("translation shifts the class means exactly") {
  ShiftSpec spec;
  spec.seed = 13;
  spec.n_source = 5000;
  spec.n_target = 5000;
  spec.class_count = 3;
  spec.dim = 4;
  spec.translation = Eigen::VectorXd::Constant(4, 2.5);
  const DomainPair pair = generate_shifted_gaussians(spec);
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXd ms = class_mean(pair.source, k);
    const Eigen::VectorXd mt = class_mean(pair.target, k);
    CHECK(((mt - ms) - spec.translation).norm() < 0.3);
  }
}

TEST_CASE("spec validation") {
  ShiftSpec spec;
  spec.class_count = 1;
  CHECK_THROWS_AS(generate_shifted_gaussians(spec), ConfigError);
  spec.class_count = 3;
  spec.covariance_scale = 0.0;
  CHECK_THROWS_AS(generate_shifted_gaussians(spec), ConfigError);
  spec.covariance_scale = 1.0;
  spec.scale_factor = 0.0;
  CHECK_THROWS_AS(generate_shifted_gaussians(spec), ConfigError);
  spec.scale_factor = 1.0;
  spec.translation = Eigen::VectorXd::Zero(3);  // wrong length for dim 10
  CHECK_THROWS_AS(generate_shifted_gaussians(spec), ConfigError);
}

TEST_CASE("proportional batch counts") {
  // |S| = 2 |T| at total 48 gives 32 / 16.
  CHECK(proportional_counts(48, 2000, 1000) == std::pair<Index, Index>{32, 16});
  CHECK(proportional_counts(10, 1, 1000).first == 1);
  CHECK(proportional_counts(10, 1000, 1).second == 1);
}

TEST_CASE("batch stream layout and coverage") {
  ShiftSpec spec;
  spec.seed = 21;
  spec.n_source = 24;
  spec.n_target = 10;
  const DomainPair pair = generate_shifted_gaussians(spec);
  BatchStream stream(pair.source, strip_labels(pair.target), 6, 4, 5);
  CHECK(stream.batches_per_epoch() == 4);

  // Every source sample appears exactly once per epoch (|S| divisible).
  for (Index epoch = 0; epoch < 3; ++epoch) {
    stream.start_epoch(epoch);
    std::multiset<double> seen;
    Index batches = 0;
    while (auto batch = stream.next()) {
      CHECK(batch->n_source == 6);
      CHECK(batch->n_target == 4);
      CHECK(batch->features.batch() == 10);
      CHECK(batch->source_labels.size() == 6);
      for (Index i = 0; i < 6; ++i)
        seen.insert(batch->features(i, 0));
      ++batches;
    }
    CHECK(batches == 4);
    std::multiset<double> expected;
    for (Index i = 0; i < 24; ++i) expected.insert(pair.source.features(i, 0));
    CHECK(seen == expected);
  }
}

TEST_CASE("batch rows keep their labels through shuffling and recycling") {
  // Encode each sample's label into its first feature so any
  // feature/label mispairing would be visible.
  const Index n = 30, d = 3, k = 5;
  LabeledSet source;
  source.class_count = k;
  source.features = Tensor({n, d});
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % k);
    source.labels.push_back(label);
    source.features(i, 0) = static_cast<double>(label);
    source.features(i, 1) = static_cast<double>(i);
  }
  UnlabeledSet target{Tensor::constant({7, d}, -1.0)};

  BatchStream stream(source, target, 5, 3, 99);
  for (Index epoch = 0; epoch < 4; ++epoch) {
    stream.start_epoch(epoch);
    while (auto batch = stream.next()) {
      for (Index i = 0; i < batch->n_source; ++i)
        CHECK(batch->features(i, 0) ==
              static_cast<double>(
                  batch->source_labels[static_cast<std::size_t>(i)]));
      for (Index i = 0; i < batch->n_target; ++i)
        CHECK(batch->features(batch->n_source + i, 0) == -1.0);
    }
  }
}

TEST_CASE("batch stream determinism and full-batch mode") {
  ShiftSpec spec;
  spec.seed = 31;
  spec.n_source = 12;
  spec.n_target = 8;
  const DomainPair pair = generate_shifted_gaussians(spec);

  auto collect = [&](std::uint64_t seed) {
    BatchStream stream(pair.source, strip_labels(pair.target), 4, 2, seed);
    std::vector<double> values;
    for (Index epoch = 0; epoch < 2; ++epoch) {
      stream.start_epoch(epoch);
      while (auto batch = stream.next())
        for (Index i = 0; i < batch->features.size(); ++i)
          values.push_back(batch->features.array()[i]);
    }
    return values;
  };
  CHECK(collect(9) == collect(9));

  BatchStream full(pair.source, strip_labels(pair.target), 12, 8, 3);
  CHECK(full.batches_per_epoch() == 1);
  auto batch = full.next();
  REQUIRE(batch.has_value());
  CHECK(batch->features.batch() == 20);
  CHECK(!full.next().has_value());
}

TEST_CASE("batch stream rejects impossible requests") {
  ShiftSpec spec;
  spec.seed = 37;
  spec.n_source = 5;
  spec.n_target = 5;
  const DomainPair pair = generate_shifted_gaussians(spec);
  CHECK_THROWS_AS(BatchStream(pair.source, strip_labels(pair.target), 6, 2, 0),
                  ConfigError);
  CHECK_THROWS_AS(BatchStream(pair.source, strip_labels(pair.target), 2, 0, 0),
                  ConfigError);
}

TEST_CASE("tabular loading") {
  SUBCASE("labeled comma file") {
    TempFile f("labeled.csv", "1.0,2.0,0\n3.0,4.0,1\n");
    const LabeledSet set = load_labeled_tabular(f.path);
    CHECK(set.size() == 2);
    CHECK(set.features.extent(1) == 2);
    CHECK(set.labels == std::vector<int>{0, 1});
    CHECK(set.class_count == 2);
    CHECK(set.features(1, 1) == 4.0);
  }
  SUBCASE("whitespace separated with header") {
    TempFile f("header.tsv", "x1 x2 label\n1.5 -2.5 1\n0.5 0.25 0\n");
    const LabeledSet set = load_labeled_tabular(f.path);
    CHECK(set.size() == 2);
    CHECK(set.features(0, 1) == -2.5);
  }
  SUBCASE("unlabeled keeps every column") {
    TempFile f("unlabeled.csv", "1.0,2.0,3.0\n4.0,5.0,6.0\n");
    const UnlabeledSet set = load_unlabeled_tabular(f.path);
    CHECK(set.features.extent(1) == 3);
  }
  SUBCASE("empty file is a data error") {
    TempFile f("empty.csv", "");
    CHECK_THROWS_AS(load_labeled_tabular(f.path), DataError);
  }
  SUBCASE("ragged rows are rejected with a line number") {
    TempFile f("ragged.csv", "1.0,2.0,0\n3.0,1\n");
    CHECK_THROWS_WITH_AS(load_labeled_tabular(f.path),
                         doctest::Contains(":2"), DataError);
  }
  SUBCASE("non-numeric field past the header is rejected") {
    TempFile f("badfield.csv", "1.0,2.0,0\nx,4.0,1\n");
    CHECK_THROWS_AS(load_labeled_tabular(f.path), DataError);
  }
  SUBCASE("fractional label is rejected") {
    TempFile f("fraclabel.csv", "1.0,2.0,0.5\n");
    CHECK_THROWS_AS(load_labeled_tabular(f.path), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_labeled_tabular("no_such_file.csv"), DataError);
  }
}
