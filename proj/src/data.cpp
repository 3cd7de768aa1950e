#include "safle/data.hpp"

#include <cmath>
#include <limits>

#include "safle/error.hpp"
#include "safle/rng.hpp"
#include "safle/serial.hpp"

namespace safle {

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd x_in, std::vector<std::uint32_t> y_in,
                             std::uint32_t classes)
    : x(std::move(x_in)), y(std::move(y_in)), class_count(classes) {
  if (x.rows() < 1) throw Error(ErrorCode::TooFewSamples, "feature matrix needs N >= 1");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature/label row count mismatch");
  }
  if (class_count == 0) throw Error(ErrorCode::InvalidConfig, "class_count must be positive");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteValue, "feature matrix has NaN/Inf");
  for (std::uint32_t label : y) {
    if (label >= class_count) {
      throw Error(ErrorCode::LabelOutOfRange,
                  "label " + std::to_string(label) + " >= " + std::to_string(class_count));
    }
  }
}

FeatureMatrix load_features(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic("SFLF", "feature file");
  const std::uint32_t version = r.get_u32();
  if (version != 1) throw Error(ErrorCode::BadMagic, "unsupported feature file version");
  const std::uint64_t n = r.get_u64();
  const std::uint32_t d_b = r.get_u32();
  const std::uint32_t classes = r.get_u32();
  if (n == 0 || d_b == 0) throw Error(ErrorCode::ShapeOverflow, "empty feature file");
  if (n > (1ull << 32) || d_b > (1u << 24)) {
    throw Error(ErrorCode::ShapeOverflow, "feature file dimensions implausibly large");
  }
  const std::uint64_t need = n * (static_cast<std::uint64_t>(d_b) * 4 + 4);
  if (r.remaining() != need) {
    throw Error(ErrorCode::ShapeOverflow, "feature file payload size mismatch");
  }

  Eigen::MatrixXd x(n, d_b);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d_b; ++j) {
      const float v = r.get_f32();
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite feature value");
      x(i, j) = static_cast<double>(v);
    }
  }
  std::vector<std::uint32_t> y(n);
  for (std::uint64_t i = 0; i < n; ++i) y[i] = r.get_u32();
  return FeatureMatrix(std::move(x), std::move(y), classes);
}

void save_features(const std::string& path, const FeatureMatrix& data) {
  ByteWriter w;
  w.put_magic("SFLF");
  w.put_u32(1);
  w.put_u64(data.rows());
  w.put_u32(data.feature_dim());
  w.put_u32(data.class_count);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
      w.put_f32(static_cast<float>(data.x(i, j)));
    }
  }
  for (std::uint32_t label : data.y) w.put_u32(label);
  write_file_bytes(path, w.bytes());
}

Eigen::MatrixXd one_hot(std::span<const std::uint32_t> labels, std::uint32_t class_count) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(labels.size(), class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count) {
      throw Error(ErrorCode::LabelOutOfRange, "one_hot: label " + std::to_string(labels[i]));
    }
    y(i, labels[i]) = 1.0;
  }
  return y;
}

namespace {

// Features are quantized to f32 so that SFLF save/load round-trips exactly.
inline double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

FeatureMatrix generate_xor(const SyntheticSpec& spec, Rng& rng) {
  const std::uint32_t d_b = spec.feature_dim;
  if (d_b < 2) throw Error(ErrorCode::InvalidConfig, "xor generator needs feature_dim >= 2");
  const std::uint32_t pair_count = std::max(1u, 3 * d_b / 8);
  std::uint32_t label_bits = 1;
  while ((1u << label_bits) < spec.class_count) ++label_bits;
  if (pair_count < label_bits) {
    throw Error(ErrorCode::InvalidConfig,
                "xor generator: not enough feature pairs for the class count");
  }

  Eigen::MatrixXd x(spec.n_samples, d_b);
  std::vector<std::uint32_t> y(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const std::uint32_t label = static_cast<std::uint32_t>(rng.next_below(spec.class_count));
    y[i] = label;
    for (std::uint32_t p = 0; p < pair_count; ++p) {
      const std::uint32_t bit = (label >> (p % label_bits)) & 1u;
      // The sign parity of the pair carries the bit exactly; the magnitude
      // scale leaks it marginally, which no linear head can exploit
      // (per-feature means stay zero for every class).
      const double scale = bit != 0 ? 1.5 : 1.0;
      const double u = std::fabs(rng.next_gaussian()) * scale;
      const double v = std::fabs(rng.next_gaussian()) * scale;
      const double s_u = rng.next_below(2) == 0 ? -1.0 : 1.0;
      const double s_v = bit != 0 ? -s_u : s_u;
      x(i, 2 * p) = s_u * u;
      x(i, 2 * p + 1) = s_v * v;
    }
    for (std::uint32_t j = 2 * pair_count; j < d_b; ++j) x(i, j) = rng.next_gaussian();
    for (std::uint32_t j = 0; j < d_b; ++j) {
      x(i, j) = as_f32(x(i, j) + spec.noise_sigma * rng.next_gaussian());
    }
  }
  return FeatureMatrix(std::move(x), std::move(y), spec.class_count);
}

FeatureMatrix generate_mixtures(const SyntheticSpec& spec, Rng& rng) {
  Eigen::MatrixXd means(spec.class_count, spec.feature_dim);
  for (std::uint32_t c = 0; c < spec.class_count; ++c) {
    for (std::uint32_t j = 0; j < spec.feature_dim; ++j) means(c, j) = rng.next_gaussian();
  }
  Eigen::MatrixXd x(spec.n_samples, spec.feature_dim);
  std::vector<std::uint32_t> y(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const std::uint32_t label = static_cast<std::uint32_t>(rng.next_below(spec.class_count));
    y[i] = label;
    for (std::uint32_t j = 0; j < spec.feature_dim; ++j) {
      x(i, j) = as_f32(means(label, j) + spec.noise_sigma * rng.next_gaussian());
    }
  }
  return FeatureMatrix(std::move(x), std::move(y), spec.class_count);
}

FeatureMatrix generate_separable(const SyntheticSpec& spec, Rng& rng) {
  Eigen::MatrixXd w(spec.feature_dim, spec.class_count);
  for (std::uint32_t j = 0; j < spec.feature_dim; ++j) {
    for (std::uint32_t c = 0; c < spec.class_count; ++c) w(j, c) = rng.next_gaussian();
  }
  const double margin = 0.5 * std::sqrt(static_cast<double>(spec.feature_dim));

  Eigen::MatrixXd x(spec.n_samples, spec.feature_dim);
  std::vector<std::uint32_t> y(spec.n_samples);
  Eigen::VectorXd sample(spec.feature_dim);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    Eigen::Index best = 0;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (std::uint32_t j = 0; j < spec.feature_dim; ++j) sample[j] = rng.next_gaussian();
      Eigen::VectorXd logits = w.transpose() * sample;
      logits.maxCoeff(&best);
      double runner_up = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < logits.size(); ++c) {
        if (c != best && logits[c] > runner_up) runner_up = logits[c];
      }
      if (spec.class_count == 1 || logits[best] - runner_up >= margin) break;
    }
    y[i] = static_cast<std::uint32_t>(best);
    for (std::uint32_t j = 0; j < spec.feature_dim; ++j) {
      x(i, j) = as_f32(sample[j] + spec.noise_sigma * rng.next_gaussian());
    }
  }
  return FeatureMatrix(std::move(x), std::move(y), spec.class_count);
}

}  // namespace

FeatureMatrix generate(const SyntheticSpec& spec) {
  if (spec.n_samples == 0) throw Error(ErrorCode::TooFewSamples, "generate: n_samples must be >= 1");
  if (spec.class_count == 0) throw Error(ErrorCode::InvalidConfig, "generate: class_count must be >= 1");
  Rng rng(spec.seed);
  switch (spec.generator) {
    case SyntheticKind::XorInteractions: return generate_xor(spec, rng);
    case SyntheticKind::GaussianMixtures: return generate_mixtures(spec, rng);
    case SyntheticKind::LinearlySeparable: return generate_separable(spec, rng);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown generator");
}

SyntheticKind synthetic_kind_from_name(const std::string& name) {
  if (name == "xor") return SyntheticKind::XorInteractions;
  if (name == "mixtures") return SyntheticKind::GaussianMixtures;
  if (name == "linsep") return SyntheticKind::LinearlySeparable;
  throw Error(ErrorCode::InvalidConfig, "unknown generator '" + name + "'");
}

}  // namespace safle
