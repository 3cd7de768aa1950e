#include "safle/bucketing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safle/error.hpp"

namespace safle {

const char* bucket_kind_name(BucketKind kind) {
  switch (kind) {
    case BucketKind::Integer: return "integer";
    case BucketKind::OneHot: return "onehot";
    case BucketKind::BinaryOverlap: return "binary-overlap";
  }
  return "?";
}

std::uint32_t BucketStrategy::codes_per_feature() const {
  switch (kind) {
    case BucketKind::Integer: return 1;
    case BucketKind::OneHot: return bucket_count;
    case BucketKind::BinaryOverlap: return bucket_count - 1;  // one bit per threshold
  }
  return 0;
}

std::uint32_t BucketStrategy::alphabet() const {
  return kind == BucketKind::Integer ? bucket_count : 2;
}

BucketingModel::BucketingModel(BucketStrategy strategy, std::uint32_t feature_dim,
                               std::vector<std::vector<double>> boundaries)
    : strategy_(strategy), feature_dim_(feature_dim), boundaries_(std::move(boundaries)) {
  if (strategy_.bucket_count < 2) {
    throw Error(ErrorCode::InvalidConfig, "bucket_count must be >= 2");
  }
  if (boundaries_.size() != feature_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "boundaries size != feature_dim");
  }
  for (std::uint32_t i = 0; i < feature_dim_; ++i) {
    const auto& b = boundaries_[i];
    if (b.size() > strategy_.bucket_count - 1) {
      throw Error(ErrorCode::InvalidConfig, "too many thresholds for bucket_count");
    }
    for (std::size_t j = 1; j < b.size(); ++j) {
      if (!(b[j - 1] < b[j])) {
        throw Error(ErrorCode::InvalidConfig, "thresholds must be strictly increasing");
      }
    }
    if (b.empty()) constant_features_.push_back(i);
  }
}

std::uint32_t BucketingModel::bin_index(std::uint32_t feature, double x) const {
  const auto& b = boundaries_[feature];
  // Closed on the left of the upper bin: bin = #{t : x >= t}.
  return static_cast<std::uint32_t>(
      std::upper_bound(b.begin(), b.end(), x,
                       [](double value, double t) { return value < t; }) -
      b.begin());
}

void BucketingModel::encode_into(std::span<const double> x, std::uint8_t* out) const {
  if (x.size() != feature_dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "encode: expected " + std::to_string(feature_dim_) + " features, got " +
                    std::to_string(x.size()));
  }
  const std::uint32_t per = strategy_.codes_per_feature();
  for (std::uint32_t i = 0; i < feature_dim_; ++i) {
    std::uint8_t* block = out + static_cast<std::size_t>(i) * per;
    switch (strategy_.kind) {
      case BucketKind::Integer:
        block[0] = static_cast<std::uint8_t>(bin_index(i, x[i]));
        break;
      case BucketKind::OneHot: {
        const std::uint32_t bin = bin_index(i, x[i]);
        for (std::uint32_t l = 0; l < per; ++l) block[l] = (l == bin) ? 1 : 0;
        break;
      }
      case BucketKind::BinaryOverlap: {
        // Thermometer bits: bit l = [x >= t_l]; collapsed thresholds read as +inf.
        const auto& b = boundaries_[i];
        for (std::uint32_t l = 0; l < per; ++l) {
          block[l] = (l < b.size() && x[i] >= b[l]) ? 1 : 0;
        }
        break;
      }
    }
  }
}

std::vector<std::uint8_t> BucketingModel::encode(std::span<const double> x) const {
  std::vector<std::uint8_t> out(code_dim());
  encode_into(x, out.data());
  return out;
}

std::uint32_t BucketingModel::hamming(double x1, double x2, std::uint32_t feature) const {
  if (strategy_.kind == BucketKind::Integer) {
    throw Error(ErrorCode::InvalidConfig, "hamming requires a bit-valued strategy");
  }
  if (feature >= feature_dim_) {
    throw Error(ErrorCode::IndexOutOfRange, "hamming: feature index out of range");
  }
  const std::uint32_t per = strategy_.codes_per_feature();
  std::vector<std::uint8_t> a(per), b(per);
  const auto encode_one = [&](double x, std::uint8_t* block) {
    if (strategy_.kind == BucketKind::OneHot) {
      const std::uint32_t bin = bin_index(feature, x);
      for (std::uint32_t l = 0; l < per; ++l) block[l] = (l == bin) ? 1 : 0;
    } else {
      const auto& t = boundaries_[feature];
      for (std::uint32_t l = 0; l < per; ++l) block[l] = (l < t.size() && x >= t[l]) ? 1 : 0;
    }
  };
  encode_one(x1, a.data());
  encode_one(x2, b.data());
  std::uint32_t dist = 0;
  for (std::uint32_t l = 0; l < per; ++l) dist += (a[l] != b[l]) ? 1 : 0;
  return dist;
}

void BucketingModel::serialize(ByteWriter& w) const {
  w.put_u8(static_cast<std::uint8_t>(strategy_.kind));
  w.put_u32(strategy_.bucket_count);
  w.put_u32(feature_dim_);
  // Fixed d_b x (B_n - 1) layout; collapsed slots are padded with +inf.
  const std::uint32_t slots = strategy_.bucket_count - 1;
  for (std::uint32_t i = 0; i < feature_dim_; ++i) {
    const auto& b = boundaries_[i];
    for (std::uint32_t j = 0; j < slots; ++j) {
      w.put_f64(j < b.size() ? b[j] : std::numeric_limits<double>::infinity());
    }
  }
}

BucketingModel BucketingModel::deserialize(ByteReader& r) {
  const std::uint8_t tag = r.get_u8();
  if (tag > 2) throw Error(ErrorCode::BadMagic, "unknown bucketing strategy tag");
  BucketStrategy strategy;
  strategy.kind = static_cast<BucketKind>(tag);
  strategy.bucket_count = r.get_u32();
  if (strategy.bucket_count < 2) {
    throw Error(ErrorCode::ShapeOverflow, "bucket_count < 2 in stream");
  }
  const std::uint32_t d_b = r.get_u32();
  std::vector<std::vector<double>> boundaries(d_b);
  const std::uint32_t slots = strategy.bucket_count - 1;
  for (std::uint32_t i = 0; i < d_b; ++i) {
    boundaries[i].reserve(slots);
    for (std::uint32_t j = 0; j < slots; ++j) {
      const double t = r.get_f64();
      if (std::isinf(t) && t > 0) continue;  // padding
      boundaries[i].push_back(t);
    }
  }
  return BucketingModel(strategy, d_b, std::move(boundaries));
}

bool BucketingModel::operator==(const BucketingModel& other) const {
  return strategy_.kind == other.strategy_.kind &&
         strategy_.bucket_count == other.strategy_.bucket_count &&
         feature_dim_ == other.feature_dim_ && boundaries_ == other.boundaries_;
}

BucketingModel fit_boundaries(std::span<const double> features_row_major,
                              std::size_t n_rows, std::uint32_t n_cols,
                              BucketStrategy strategy) {
  if (strategy.bucket_count < 2) {
    throw Error(ErrorCode::InvalidConfig, "bucket_count must be >= 2");
  }
  if (n_rows < strategy.bucket_count) {
    throw Error(ErrorCode::TooFewSamples, "need at least bucket_count rows to fit boundaries");
  }
  if (features_row_major.size() != n_rows * n_cols) {
    throw Error(ErrorCode::DimensionMismatch, "feature buffer size mismatch");
  }
  for (double v : features_row_major) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteValue, "fit_boundaries: non-finite feature value");
    }
  }

  const std::uint32_t b_n = strategy.bucket_count;
  std::vector<std::vector<double>> boundaries(n_cols);
  std::vector<double> column(n_rows);
  for (std::uint32_t c = 0; c < n_cols; ++c) {
    for (std::size_t r = 0; r < n_rows; ++r) column[r] = features_row_major[r * n_cols + c];
    std::sort(column.begin(), column.end());

    if (column.front() == column.back()) continue;  // constant feature: no thresholds

    auto& out = boundaries[c];
    out.reserve(b_n - 1);
    for (std::uint32_t j = 1; j < b_n; ++j) {
      // Lower-interpolation quantile: sorted[ceil(q*N) - 1], q = j/B_n.
      const std::size_t idx =
          static_cast<std::size_t>((static_cast<std::uint64_t>(j) * n_rows + b_n - 1) / b_n) - 1;
      const double t = column[idx];
      if (out.empty() || t > out.back()) out.push_back(t);  // collapse ties
    }
  }
  return BucketingModel(strategy, n_cols, std::move(boundaries));
}

}  // namespace safle
