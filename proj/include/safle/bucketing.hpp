#ifndef SAFLE_BUCKETING_HPP
#define SAFLE_BUCKETING_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "safle/serial.hpp"

namespace safle {

enum class BucketKind : std::uint8_t {
  Integer = 0,
  OneHot = 1,
  BinaryOverlap = 2,
};

const char* bucket_kind_name(BucketKind kind);

struct BucketStrategy {
  BucketKind kind = BucketKind::BinaryOverlap;
  std::uint32_t bucket_count = 8;  // B_n >= 2

  // Codes emitted per scalar feature.
  std::uint32_t codes_per_feature() const;
  // Alphabet size of each emitted code.
  std::uint32_t alphabet() const;
};

// Per-feature quantile thresholds plus the strategy that interprets them.
// Immutable once fitted; encode() is pure.
class BucketingModel {
 public:
  BucketingModel(BucketStrategy strategy, std::uint32_t feature_dim,
                 std::vector<std::vector<double>> boundaries);

  const BucketStrategy& strategy() const { return strategy_; }
  std::uint32_t feature_dim() const { return feature_dim_; }
  std::uint32_t code_dim() const { return feature_dim_ * strategy_.codes_per_feature(); }
  const std::vector<double>& boundaries(std::uint32_t feature) const { return boundaries_[feature]; }

  // Features whose thresholds all collapsed (zero variance in the fit data).
  const std::vector<std::uint32_t>& constant_features() const { return constant_features_; }

  // Bin index of one scalar value: the number of thresholds t with x >= t.
  std::uint32_t bin_index(std::uint32_t feature, double x) const;

  std::vector<std::uint8_t> encode(std::span<const double> x) const;
  void encode_into(std::span<const double> x, std::uint8_t* out) const;

  // Hamming distance between the code blocks of two values of one feature.
  // Defined for the bit-valued strategies (OneHot, BinaryOverlap).
  std::uint32_t hamming(double x1, double x2, std::uint32_t feature) const;

  void serialize(ByteWriter& w) const;
  static BucketingModel deserialize(ByteReader& r);

  bool operator==(const BucketingModel& other) const;

 private:
  BucketStrategy strategy_;
  std::uint32_t feature_dim_;
  std::vector<std::vector<double>> boundaries_;  // strictly increasing, possibly collapsed
  std::vector<std::uint32_t> constant_features_;
};

// Fits per-feature thresholds at the empirical quantiles q = j/B_n,
// j = 1..B_n-1, using the lower-interpolation convention
// (sorted[ceil(q*N) - 1]). Duplicate thresholds are collapsed.
BucketingModel fit_boundaries(std::span<const double> features_row_major,
                              std::size_t n_rows, std::uint32_t n_cols,
                              BucketStrategy strategy);

}  // namespace safle

#endif  // SAFLE_BUCKETING_HPP
