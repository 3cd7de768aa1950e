#include "safle/solver.hpp"

#include <cmath>

#include "safle/data.hpp"
#include "safle/error.hpp"

namespace safle {

namespace {

void check_dense_dim(std::uint32_t dim) {
  if (dim > kMaxDenseDim) {
    throw Error(ErrorCode::InvalidConfig,
                "lifted dimension " + std::to_string(dim) + " exceeds dense solve cap " +
                    std::to_string(kMaxDenseDim));
  }
}

}  // namespace

Eigen::MatrixXd solve_regularized(const GramStats& stats) {
  if (!stats.regularized()) {
    throw Error(ErrorCode::NotRegularized, "solve_regularized requires regularized stats");
  }
  check_dense_dim(stats.lifted_dim());
  const Eigen::MatrixXd c = stats.to_dense();
  const Eigen::MatrixXd& m = stats.moment();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::FactorizationFailure, "LDLT factorization failed; gamma too small?");
  }
  Eigen::MatrixXd w = ldlt.solve(m);

  const double residual = (c * w - m).norm() / std::max(1.0, m.norm());
  if (!(residual <= 1e-8)) {
    throw Error(ErrorCode::FactorizationFailure,
                "solve residual " + std::to_string(residual) + " exceeds 1e-8");
  }
  return w;
}

Eigen::MatrixXd pseudo_solve_symmetric(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::FactorizationFailure, "symmetric eigendecomposition failed");
  }
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
  const double cutoff = kRankCutoff * std::max(lambda_max, 0.0);
  const double negative_tol = 1e-8 * std::max(lambda_max, 1.0);
  if (lambda.size() > 0 && lambda.minCoeff() < -negative_tol) {
    throw Error(ErrorCode::NegativeEigenBeyondTolerance,
                "matrix has eigenvalue " + std::to_string(lambda.minCoeff()) +
                    "; inconsistent payloads (expected PSD)");
  }

  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > cutoff) inv[i] = 1.0 / lambda[i];
  }
  const Eigen::MatrixXd& q = eig.eigenvectors();
  return q * (inv.asDiagonal() * (q.transpose() * b));
}

Eigen::MatrixXd recover_unregularized(const SparseUpper& c_agg_r, const Eigen::MatrixXd& m_agg,
                                      std::uint32_t client_count, double gamma) {
  if (client_count == 0) throw Error(ErrorCode::InvalidConfig, "client_count must be positive");
  if (c_agg_r.dim != m_agg.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "recover: C/M dimension mismatch");
  }
  check_dense_dim(c_agg_r.dim);
  Eigen::MatrixXd a = c_agg_r.to_dense();
  a.diagonal().array() -= static_cast<double>(client_count) * gamma;
  return pseudo_solve_symmetric(a, m_agg);
}

SafleModel::SafleModel(BucketingModel bucketing, LiftConfig lift, std::uint32_t class_count,
                       Eigen::MatrixXd weights)
    : bucketing_(std::move(bucketing)),
      lift_(std::move(lift)),
      class_count_(class_count),
      weights_(std::move(weights)) {
  if (lift_.code_dim() != bucketing_.code_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "lift code_dim does not match bucketing output");
  }
  if (weights_.rows() != lift_.lifted_dim() || weights_.cols() != class_count_) {
    throw Error(ErrorCode::ShapeMismatch, "weight matrix shape mismatch");
  }
}

Eigen::VectorXd SafleModel::predict(std::span<const double> x) const {
  const auto codes = bucketing_.encode(x);
  const SparseLiftedRow row = lift_.lift(codes);
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(class_count_);
  for (std::uint32_t idx : row.active) {
    logits += weights_.row(idx).transpose();
  }
  return logits;
}

std::vector<std::uint8_t> SafleModel::serialize() const {
  ByteWriter w;
  w.put_magic("SAFL");
  w.put_u32(1);  // version
  bucketing_.serialize(w);
  lift_.serialize(w);
  w.put_u32(class_count_);
  for (Eigen::Index r = 0; r < weights_.rows(); ++r) {
    for (Eigen::Index c = 0; c < weights_.cols(); ++c) w.put_f64(weights_(r, c));
  }
  return w.take();
}

SafleModel SafleModel::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes.data(), bytes.size());
  r.expect_magic("SAFL", "model file");
  const std::uint32_t version = r.get_u32();
  if (version != 1) throw Error(ErrorCode::BadMagic, "unsupported model version");
  BucketingModel bucketing = BucketingModel::deserialize(r);
  LiftConfig lift = LiftConfig::deserialize(r);
  const std::uint32_t classes = r.get_u32();
  const std::uint64_t dim = lift.lifted_dim();
  if (r.remaining() != dim * classes * 8) {
    throw Error(ErrorCode::ShapeOverflow, "model file: weight block size mismatch");
  }
  Eigen::MatrixXd weights(dim, classes);
  for (std::uint64_t row = 0; row < dim; ++row) {
    for (std::uint32_t c = 0; c < classes; ++c) weights(row, c) = r.get_f64();
  }
  return SafleModel(std::move(bucketing), std::move(lift), classes, std::move(weights));
}

void SafleModel::save(const std::string& path) const { write_file_bytes(path, serialize()); }

SafleModel SafleModel::load(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return deserialize(bytes);
}

Eigen::VectorXd LinearModel::predict(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != weights.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "linear predict: feature dimension mismatch");
  }
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), x.size());
  return weights.transpose() * xv;
}

namespace {

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> linear_normal_equations(
    const Eigen::MatrixXd& features, std::span<const std::uint32_t> labels,
    std::uint32_t class_count) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "features/labels row mismatch");
  }
  const Eigen::MatrixXd y = one_hot(labels, class_count);
  Eigen::MatrixXd gram = features.transpose() * features;
  Eigen::MatrixXd moment = features.transpose() * y;
  return {std::move(gram), std::move(moment)};
}

}  // namespace

LinearModel fit_linear_baseline(const Eigen::MatrixXd& features,
                                std::span<const std::uint32_t> labels,
                                std::uint32_t class_count, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::NonPositiveGamma, "gamma must be > 0");
  auto [gram, moment] = linear_normal_equations(features, labels, class_count);
  // Same RI route as the lifted head (K = 1): add gamma, subtract it back,
  // pseudo-solve the exact unregularized system.
  gram.diagonal().array() += gamma;
  gram.diagonal().array() -= gamma;
  return LinearModel{pseudo_solve_symmetric(gram, moment)};
}

LinearModel fit_linear_ridge(const Eigen::MatrixXd& features,
                             std::span<const std::uint32_t> labels, std::uint32_t class_count,
                             double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::NonPositiveGamma, "gamma must be > 0");
  auto [gram, moment] = linear_normal_equations(features, labels, class_count);
  gram.diagonal().array() += gamma;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCode::FactorizationFailure, "ridge factorization failed");
  }
  return LinearModel{ldlt.solve(moment)};
}

}  // namespace safle
