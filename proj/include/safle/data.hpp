#ifndef SAFLE_DATA_HPP
#define SAFLE_DATA_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace safle {

// Backbone embeddings with integer labels. Validated on construction:
// finite values, labels < class_count, at least one row.
struct FeatureMatrix {
  Eigen::MatrixXd x;  // N x d_b
  std::vector<std::uint32_t> y;
  std::uint32_t class_count = 0;

  FeatureMatrix(Eigen::MatrixXd x_in, std::vector<std::uint32_t> y_in, std::uint32_t classes);

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::uint32_t feature_dim() const { return static_cast<std::uint32_t>(x.cols()); }
};

// SFLF feature file:
//   magic "SFLF", version u32, N u64, d_b u32, C_cls u32,
//   X row-major f32 LE, labels u32 LE.
// Values are stored in f32 (backbone output precision) and promoted to f64.
FeatureMatrix load_features(const std::string& path);
void save_features(const std::string& path, const FeatureMatrix& data);

Eigen::MatrixXd one_hot(std::span<const std::uint32_t> labels, std::uint32_t class_count);

enum class SyntheticKind : std::uint8_t {
  XorInteractions = 0,
  GaussianMixtures = 1,
  LinearlySeparable = 2,
};

struct SyntheticSpec {
  SyntheticKind generator = SyntheticKind::GaussianMixtures;
  std::size_t n_samples = 1000;
  std::uint32_t feature_dim = 16;
  std::uint32_t class_count = 2;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;
};

// Deterministic per seed. XorInteractions draws labels uniformly and encodes
// the label bits in the sign parity of feature pairs (first half of the
// features, two per pair); the remaining features are pure Gaussian noise and
// noise_sigma jitters every coordinate afterwards. No single feature carries
// linear information about the label.
FeatureMatrix generate(const SyntheticSpec& spec);

SyntheticKind synthetic_kind_from_name(const std::string& name);

}  // namespace safle

#endif  // SAFLE_DATA_HPP
