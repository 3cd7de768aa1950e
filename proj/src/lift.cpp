#include "safle/lift.hpp"

#include <numeric>

#include "safle/error.hpp"
#include "safle/rng.hpp"

namespace safle {

std::vector<std::uint32_t> make_permutation(std::uint64_t seed, std::uint32_t d_q) {
  if (d_q == 0) throw Error(ErrorCode::InvalidConfig, "permutation over empty domain");
  std::vector<std::uint32_t> p(d_q);
  std::iota(p.begin(), p.end(), 0u);
  Rng rng(seed);
  rng.shuffle(p);
  return p;
}

std::uint32_t composite_index(std::span<const std::uint8_t> group_codes, std::uint32_t base) {
  std::uint64_t idx = 0;
  std::uint64_t scale = 1;
  for (std::uint8_t g : group_codes) {
    if (g >= base) {
      throw Error(ErrorCode::CodeOutOfRange,
                  "code " + std::to_string(g) + " >= base " + std::to_string(base));
    }
    if (scale > LiftConfig::kMaxVocabulary) {
      throw Error(ErrorCode::InvalidConfig, "k^G exceeds the vocabulary guardrail");
    }
    idx += static_cast<std::uint64_t>(g) * scale;
    scale *= base;
  }
  return static_cast<std::uint32_t>(idx);
}

LiftConfig::LiftConfig(std::uint64_t seed, std::uint32_t code_dim, std::uint32_t base,
                       std::uint32_t group_size, std::uint32_t expert_count)
    : seed_(seed),
      code_dim_(code_dim),
      base_(base),
      group_size_(group_size),
      expert_count_(expert_count) {
  if (code_dim == 0 || group_size == 0 || expert_count == 0) {
    throw Error(ErrorCode::InvalidConfig, "lift config dimensions must be positive");
  }
  if (base < 2) throw Error(ErrorCode::InvalidConfig, "base must be >= 2");

  std::uint64_t v = 1;
  for (std::uint32_t i = 0; i < group_size; ++i) {
    v *= base;
    if (v > kMaxVocabulary) {
      throw Error(ErrorCode::InvalidConfig,
                  "vocabulary k^G exceeds the 2^20 guardrail (k=" + std::to_string(base) +
                      ", G=" + std::to_string(group_size) + ")");
    }
  }
  vocabulary_ = static_cast<std::uint32_t>(v);

  const std::uint64_t padded = static_cast<std::uint64_t>(expert_count) * group_size;
  if (padded < code_dim || padded - code_dim >= group_size) {
    throw Error(ErrorCode::InvalidConfig, "expert_count * group_size must cover code_dim "
                                          "with less than one group of padding");
  }
  if (static_cast<std::uint64_t>(expert_count) * vocabulary_ > (1ull << 24)) {
    throw Error(ErrorCode::InvalidConfig, "lifted dimension E*V too large");
  }
  permutation_ = make_permutation(seed, code_dim);
}

LiftConfig LiftConfig::from_group_size(std::uint64_t seed, std::uint32_t code_dim,
                                       std::uint32_t base, std::uint32_t group_size) {
  if (group_size == 0) throw Error(ErrorCode::InvalidConfig, "group_size must be positive");
  const std::uint32_t experts = (code_dim + group_size - 1) / group_size;
  return LiftConfig(seed, code_dim, base, group_size, experts);
}

LiftConfig LiftConfig::from_expert_count(std::uint64_t seed, std::uint32_t code_dim,
                                         std::uint32_t base, std::uint32_t expert_count) {
  if (expert_count == 0) throw Error(ErrorCode::InvalidConfig, "expert_count must be positive");
  const std::uint32_t group = (code_dim + expert_count - 1) / expert_count;
  const std::uint32_t experts = (code_dim + group - 1) / group;
  return LiftConfig(seed, code_dim, base, group, experts);
}

SparseLiftedRow LiftConfig::lift(std::span<const std::uint8_t> codes) const {
  if (codes.size() != code_dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "lift: expected " + std::to_string(code_dim_) + " codes, got " +
                    std::to_string(codes.size()));
  }
  SparseLiftedRow row;
  row.active.resize(expert_count_);
  std::uint32_t offset = 0;
  for (std::uint32_t j = 0; j < expert_count_; ++j) {
    std::uint64_t idx = 0;
    std::uint64_t scale = 1;
    for (std::uint32_t i = 0; i < group_size_; ++i) {
      const std::uint32_t pos = j * group_size_ + i;
      // Positions beyond d_q are the shared 0-code padding.
      const std::uint8_t g = pos < code_dim_ ? codes[permutation_[pos]] : 0;
      if (g >= base_) {
        throw Error(ErrorCode::CodeOutOfRange,
                    "lift: code " + std::to_string(g) + " >= base " + std::to_string(base_));
      }
      idx += static_cast<std::uint64_t>(g) * scale;
      scale *= base_;
    }
    row.active[j] = offset + static_cast<std::uint32_t>(idx);
    offset += vocabulary_;
  }
  return row;
}

std::vector<SparseLiftedRow> LiftConfig::lift_batch(std::span<const std::uint8_t> codes_row_major,
                                                    std::size_t n_rows) const {
  if (codes_row_major.size() != n_rows * code_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "lift_batch: buffer size mismatch");
  }
  std::vector<SparseLiftedRow> rows(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) {
    rows[r] = lift(codes_row_major.subspan(r * code_dim_, code_dim_));
  }
  return rows;
}

void LiftConfig::serialize(ByteWriter& w) const {
  w.put_u64(seed_);
  w.put_u32(expert_count_);
  w.put_u32(group_size_);
  w.put_u32(base_);
  w.put_u32(code_dim_);
}

LiftConfig LiftConfig::deserialize(ByteReader& r) {
  const std::uint64_t seed = r.get_u64();
  const std::uint32_t experts = r.get_u32();
  const std::uint32_t group = r.get_u32();
  const std::uint32_t base = r.get_u32();
  const std::uint32_t d_q = r.get_u32();
  return LiftConfig(seed, d_q, base, group, experts);
}

bool LiftConfig::operator==(const LiftConfig& other) const {
  return seed_ == other.seed_ && code_dim_ == other.code_dim_ && base_ == other.base_ &&
         group_size_ == other.group_size_ && expert_count_ == other.expert_count_;
}

}  // namespace safle
