#ifndef SAFLE_SOLVER_HPP
#define SAFLE_SOLVER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "safle/bucketing.hpp"
#include "safle/gram.hpp"
#include "safle/lift.hpp"

namespace safle {

// Relative eigenvalue cutoff for numerical rank in pseudoinverse solves.
inline constexpr double kRankCutoff = 1e-10;

// Largest lifted dimension we densify for factorization.
inline constexpr std::uint32_t kMaxDenseDim = 16384;

// Solves (C) W = M for regularized (positive definite) stats via LDLT and
// verifies the residual ||C W - M||_F / max(1, ||M||_F) <= 1e-8.
Eigen::MatrixXd solve_regularized(const GramStats& stats);

// Regularization-intermediary recovery: forms A = C_agg_r - K*gamma*I (the
// exact pooled unregularized Gram) and applies the Moore-Penrose
// pseudoinverse through a symmetric eigendecomposition with relative cutoff
// kRankCutoff.
Eigen::MatrixXd recover_unregularized(const SparseUpper& c_agg_r, const Eigen::MatrixXd& m_agg,
                                      std::uint32_t client_count, double gamma);

// Minimum-norm pseudoinverse solve of a symmetric PSD system A W = B.
Eigen::MatrixXd pseudo_solve_symmetric(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Full trained head: solved weights plus everything needed to rebuild Phi.
class SafleModel {
 public:
  SafleModel(BucketingModel bucketing, LiftConfig lift, std::uint32_t class_count,
             Eigen::MatrixXd weights);

  const BucketingModel& bucketing() const { return bucketing_; }
  const LiftConfig& lift() const { return lift_; }
  std::uint32_t class_count() const { return class_count_; }
  const Eigen::MatrixXd& weights() const { return weights_; }

  // encode -> lift -> sum the E selected weight rows in ascending expert order.
  Eigen::VectorXd predict(std::span<const double> x) const;

  std::vector<std::uint8_t> serialize() const;
  static SafleModel deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static SafleModel load(const std::string& path);

 private:
  BucketingModel bucketing_;
  LiftConfig lift_;
  std::uint32_t class_count_;
  Eigen::MatrixXd weights_;  // D_e x C_cls
};

// AFL-style linear head on raw features, trained with the same
// regularize/recover machinery (dense Gram instead of sparse counts).
struct LinearModel {
  Eigen::MatrixXd weights;  // d_b x C_cls

  Eigen::VectorXd predict(std::span<const double> x) const;
};

// Minimum-norm least-squares head W = (X^T X)^+ X^T Y via the RI route.
LinearModel fit_linear_baseline(const Eigen::MatrixXd& features,
                                std::span<const std::uint32_t> labels,
                                std::uint32_t class_count, double gamma);

// Ridge solution (X^T X + gamma I)^{-1} X^T Y, exposed for comparison runs.
LinearModel fit_linear_ridge(const Eigen::MatrixXd& features,
                             std::span<const std::uint32_t> labels, std::uint32_t class_count,
                             double gamma);

}  // namespace safle

#endif  // SAFLE_SOLVER_HPP
