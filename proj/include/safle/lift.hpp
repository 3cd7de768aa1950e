#ifndef SAFLE_LIFT_HPP
#define SAFLE_LIFT_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "safle/serial.hpp"

namespace safle {

// One lifted sample: exactly one active index per expert block, all implicit
// values 1. Entry j lies in [j*V, (j+1)*V).
struct SparseLiftedRow {
  std::vector<std::uint32_t> active;
};

// Deterministic permutation of {0..d_q-1}: splitmix64-driven Fisher-Yates,
// identical for identical (seed, d_q) on every platform.
std::vector<std::uint32_t> make_permutation(std::uint64_t seed, std::uint32_t d_q);

// idx = sum_i g_i * k^(i-1), digits little-endian in group order.
std::uint32_t composite_index(std::span<const std::uint8_t> group_codes, std::uint32_t base);

// Shuffle -> group -> composite-index pipeline shared by all clients.
// expert_count * group_size >= code_dim; the permuted vector is padded with
// 0-codes up to the next multiple of group_size.
class LiftConfig {
 public:
  static constexpr std::uint32_t kMaxVocabulary = 1u << 20;

  // Derives the expert count as ceil(d_q / G).
  static LiftConfig from_group_size(std::uint64_t seed, std::uint32_t code_dim,
                                    std::uint32_t base, std::uint32_t group_size);
  // Derives G = ceil(d_q / E), then the minimal covering expert count.
  static LiftConfig from_expert_count(std::uint64_t seed, std::uint32_t code_dim,
                                      std::uint32_t base, std::uint32_t expert_count);

  std::uint64_t seed() const { return seed_; }
  std::uint32_t code_dim() const { return code_dim_; }
  std::uint32_t base() const { return base_; }
  std::uint32_t group_size() const { return group_size_; }
  std::uint32_t expert_count() const { return expert_count_; }
  std::uint32_t vocabulary() const { return vocabulary_; }  // V = k^G
  std::uint32_t lifted_dim() const { return expert_count_ * vocabulary_; }  // D_e
  const std::vector<std::uint32_t>& permutation() const { return permutation_; }

  SparseLiftedRow lift(std::span<const std::uint8_t> codes) const;
  std::vector<SparseLiftedRow> lift_batch(std::span<const std::uint8_t> codes_row_major,
                                          std::size_t n_rows) const;

  void serialize(ByteWriter& w) const;
  static LiftConfig deserialize(ByteReader& r);

  bool operator==(const LiftConfig& other) const;

 private:
  LiftConfig(std::uint64_t seed, std::uint32_t code_dim, std::uint32_t base,
             std::uint32_t group_size, std::uint32_t expert_count);

  std::uint64_t seed_;
  std::uint32_t code_dim_;
  std::uint32_t base_;
  std::uint32_t group_size_;
  std::uint32_t expert_count_;
  std::uint32_t vocabulary_;
  std::vector<std::uint32_t> permutation_;
};

}  // namespace safle

#endif  // SAFLE_LIFT_HPP
