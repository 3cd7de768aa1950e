#ifndef SAFLE_SWEEPS_HPP
#define SAFLE_SWEEPS_HPP

#include <cstdint>
#include <vector>

#include "safle/bucketing.hpp"

namespace safle {

// Bucketing-strategy ablation: strategies x bucket counts on the xor task.
// Group sizes are fixed per code alphabet: base-2 strategies use
// group_size_binary (V = 2^G), the integer strategy uses group_size_integer
// (V = B_n^G).
struct BucketSweepConfig {
  std::size_t n_train = 4000;
  std::size_t n_test = 3000;
  std::uint32_t feature_dim = 16;
  std::uint32_t class_count = 2;
  double noise_sigma = 0.1;
  std::uint64_t data_seed = 31;
  std::uint64_t lift_seed = 4;
  double gamma = 1.0;
  std::uint32_t group_size_binary = 5;
  std::uint32_t group_size_integer = 2;
  std::vector<std::uint32_t> bucket_grid = {2, 8, 14, 20};
};

struct BucketSweepRow {
  BucketKind kind;
  std::uint32_t buckets;
  std::uint32_t lifted_dim;
  double accuracy;
  double linear_accuracy;  // shared AFL-style baseline on the same split
};

std::vector<BucketSweepRow> run_bucket_sweep(const BucketSweepConfig& config);

// Embedding-shape ablation at fixed D_e: sweep (E, V) with E * V = lifted_dim
// and V = 2^G. Every grid point runs on a matched synthetic dataset with
// feature dimension E * G so the lift covers the codes exactly.
struct ShapeSweepConfig {
  std::uint32_t lifted_dim = 2048;
  std::vector<std::uint32_t> group_grid = {3, 4, 5, 6, 7};
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::uint32_t class_count = 10;
  double noise_sigma = 0.6;
  std::uint64_t data_seed = 31;
  std::uint64_t lift_seed = 4;
  double gamma = 1.0;
};

struct ShapeSweepRow {
  std::uint32_t experts;
  std::uint32_t vocabulary;
  double accuracy;
  double gram_sparsity;       // zero fraction of the transmitted C^r
  std::uint64_t payload_bytes;
};

std::vector<ShapeSweepRow> run_shape_sweep(const ShapeSweepConfig& config);

}  // namespace safle

#endif  // SAFLE_SWEEPS_HPP
