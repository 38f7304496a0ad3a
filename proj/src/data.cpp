#include "dalkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dalkit {

namespace {

// Fixed increment mixer (splitmix-style) so that derived seeds decorrelate.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<Index> shuffled_indices(Index n, std::mt19937_64& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void copy_row(const Tensor& from, Index src_row, Tensor& to, Index dst_row) {
  const Index rs = from.row_size();
  to.array().segment(dst_row * rs, rs) = from.array().segment(src_row * rs, rs);
}

}  // namespace

UnlabeledSet strip_labels(const LabeledSet& set) { return {set.features}; }

DomainPair generate_shifted_gaussians(const ShiftSpec& spec) {
  if (spec.class_count < 2) throw ConfigError("need at least two classes");
  if (spec.dim < 1) throw ConfigError("feature dimension must be positive");
  if (spec.covariance_scale <= 0.0)
    throw ConfigError("covariance scale must be positive");
  if (spec.scale_factor == 0.0)
    throw ConfigError("scale factor of zero is not invertible");
  if (spec.n_source < 1 || spec.n_target < 1)
    throw ConfigError("sample counts must be positive");
  if (spec.translation.size() != 0 && spec.translation.size() != spec.dim)
    throw ConfigError("translation vector length must equal the dimension");

  std::mt19937_64 rng(mix_seed(spec.seed, 0));
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  Eigen::MatrixXd means(spec.class_count, spec.dim);
  for (Index k = 0; k < spec.class_count; ++k)
    for (Index j = 0; j < spec.dim; ++j)
      means(k, j) = spec.separation * unit_normal(rng);

  Eigen::VectorXd translation = spec.translation.size() == spec.dim
                                    ? spec.translation
                                    : Eigen::VectorXd::Zero(spec.dim);
  const double c = std::cos(spec.rotation_angle);
  const double s = std::sin(spec.rotation_angle);

  auto transform = [&](Eigen::VectorXd x) {
    // Rotation on consecutive axis pairs; an odd trailing axis stays put.
    for (Index j = 0; j + 1 < spec.dim; j += 2) {
      const double a = x[j], b = x[j + 1];
      x[j] = c * a - s * b;
      x[j + 1] = s * a + c * b;
    }
    return (spec.scale_factor * x + translation).eval();
  };

  auto draw_set = [&](Index count, bool shifted) {
    LabeledSet set;
    set.class_count = spec.class_count;
    set.features = Tensor({count, spec.dim});
    set.labels.resize(static_cast<std::size_t>(count));
    auto fm = set.features.matrix();
    for (Index i = 0; i < count; ++i) {
      const Index k = i % spec.class_count;
      Eigen::VectorXd x(spec.dim);
      for (Index j = 0; j < spec.dim; ++j)
        x[j] = means(k, j) + spec.covariance_scale * unit_normal(rng);
      if (shifted) x = transform(std::move(x));
      fm.row(i) = x.transpose();
      set.labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
    }
    return set;
  };

  DomainPair pair;
  pair.source = draw_set(spec.n_source, false);
  pair.target = draw_set(spec.n_target, true);
  return pair;
}

std::pair<Index, Index> proportional_counts(Index total, Index source_size,
                                            Index target_size) {
  if (total < 2) throw ConfigError("total batch size must be at least 2");
  if (source_size < 1 || target_size < 1)
    throw DataError("both datasets must be non-empty");
  const double share = static_cast<double>(source_size) /
                       static_cast<double>(source_size + target_size);
  Index n_source = static_cast<Index>(std::llround(share * static_cast<double>(total)));
  n_source = std::clamp<Index>(n_source, 1, total - 1);
  return {n_source, total - n_source};
}

BatchStream::BatchStream(LabeledSet source, UnlabeledSet target, Index n_source,
                         Index n_target, std::uint64_t seed)
    : source_(std::move(source)),
      target_(std::move(target)),
      n_source_(n_source),
      n_target_(n_target),
      seed_(seed),
      target_rng_(mix_seed(seed, 0x7a67)) {
  if (source_.size() == 0 || target_.size() == 0)
    throw DataError("cannot stream batches from an empty dataset");
  if (n_source_ < 1 || n_target_ < 1)
    throw ConfigError("batch must hold at least one sample of each domain");
  if (n_source_ > source_.size())
    throw ConfigError("per-batch source count exceeds the source set");
  if (n_target_ > target_.size())
    throw ConfigError("per-batch target count exceeds the target set");
  batches_per_epoch_ = source_.size() / n_source_;
  refill_target();
  start_epoch(0);
}

void BatchStream::refill_target() {
  target_order_ = shuffled_indices(target_.size(), target_rng_);
  target_pos_ = 0;
}

void BatchStream::start_epoch(Index epoch) {
  std::mt19937_64 rng(mix_seed(seed_, 0x50c0 + static_cast<std::uint64_t>(epoch)));
  source_order_ = shuffled_indices(source_.size(), rng);
  source_pos_ = 0;
  batches_emitted_ = 0;
}

std::optional<DomainBatch> BatchStream::next() {
  if (batches_emitted_ >= batches_per_epoch_) return std::nullopt;

  DomainBatch batch;
  batch.n_source = n_source_;
  batch.n_target = n_target_;
  Tensor::Shape shape = source_.features.shape();
  shape[0] = n_source_ + n_target_;
  batch.features = Tensor(shape);
  batch.source_labels.resize(static_cast<std::size_t>(n_source_));

  for (Index i = 0; i < n_source_; ++i) {
    const Index row = source_order_[static_cast<std::size_t>(source_pos_++)];
    copy_row(source_.features, row, batch.features, i);
    batch.source_labels[static_cast<std::size_t>(i)] =
        source_.labels[static_cast<std::size_t>(row)];
  }
  for (Index i = 0; i < n_target_; ++i) {
    if (target_pos_ >= target_.size()) refill_target();
    const Index row = target_order_[static_cast<std::size_t>(target_pos_++)];
    copy_row(target_.features, row, batch.features, n_source_ + i);
  }
  ++batches_emitted_;
  return batch;
}

namespace {

struct ParsedTable {
  std::vector<std::vector<double>> rows;
};

bool parse_double(const std::string& token, double& out) {
  std::size_t consumed = 0;
  try {
    out = std::stod(token, &consumed);
  } catch (const std::exception&) {
    return false;
  }
  return consumed == token.size();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::string normalized = line;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream ss(normalized);
  std::vector<std::string> fields;
  std::string tok;
  while (ss >> tok) fields.push_back(tok);
  return fields;
}

ParsedTable parse_tabular(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  ParsedTable table;
  std::string line;
  long line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;

    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j)
      if (!parse_double(fields[j], row[j])) {
        numeric = false;
        break;
      }

    if (!numeric) {
      if (first_content_line) {  // header row
        first_content_line = false;
        continue;
      }
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": non-numeric field");
    }
    for (double v : row)
      if (!std::isfinite(v))
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": non-finite value");
    first_content_line = false;
    if (!table.rows.empty() && row.size() != table.rows.front().size())
      throw DataError(path + ":" + std::to_string(line_no) + ": ragged row");
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw DataError(path + ": no data rows");
  return table;
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows,
                      std::size_t cols) {
  const Index n = static_cast<Index>(rows.size());
  Eigen::ArrayXd data(n * static_cast<Index>(cols));
  Index k = 0;
  for (const auto& row : rows)
    for (std::size_t j = 0; j < cols; ++j) data[k++] = row[j];
  return {{n, static_cast<Index>(cols)}, std::move(data)};
}

}  // namespace

LabeledSet load_labeled_tabular(const std::string& path) {
  const ParsedTable table = parse_tabular(path);
  const std::size_t cols = table.rows.front().size();
  if (cols < 2)
    throw DataError(path + ": labeled data needs features plus a label column");

  LabeledSet set;
  set.labels.reserve(table.rows.size());
  int max_label = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const double raw = table.rows[i].back();
    const double rounded = std::round(raw);
    if (std::abs(raw - rounded) > 1e-9 || rounded < 0.0)
      throw DataError(path + ": label in row " + std::to_string(i + 1) +
                      " is not a non-negative integer");
    const int label = static_cast<int>(rounded);
    max_label = std::max(max_label, label);
    set.labels.push_back(label);
  }
  std::vector<std::vector<double>> features = table.rows;
  for (auto& row : features) row.pop_back();
  set.features = rows_to_tensor(features, cols - 1);
  set.class_count = max_label + 1;
  return set;
}

UnlabeledSet load_unlabeled_tabular(const std::string& path) {
  const ParsedTable table = parse_tabular(path);
  return {rows_to_tensor(table.rows, table.rows.front().size())};
}

}  // namespace dalkit
