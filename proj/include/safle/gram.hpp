#ifndef SAFLE_GRAM_HPP
#define SAFLE_GRAM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "safle/lift.hpp"

namespace safle {

// Upper-triangle (row <= col) symmetric sparse matrix in CSR form, entries
// sorted by (row, col). This is the wire representation of C.
struct SparseUpper {
  std::uint32_t dim = 0;
  std::vector<std::uint64_t> row_ptr;  // dim + 1
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::uint64_t nnz() const { return col.size(); }
  // Nonzero count of the full symmetric matrix (mirrored off-diagonal).
  std::uint64_t nnz_full() const;
  double zero_fraction() const;
  Eigen::MatrixXd to_dense() const;
  void add(const SparseUpper& other);  // entrywise union sum

  bool operator==(const SparseUpper& other) const {
    return dim == other.dim && row_ptr == other.row_ptr && col == other.col && val == other.val;
  }
};

// Open-addressed (row, col) -> value map used during accumulation; ordering
// is imposed only when converting to CSR.
class PairValueMap {
 public:
  explicit PairValueMap(std::size_t expected = 64);

  void add(std::uint32_t row, std::uint32_t col, double delta);
  std::size_t entry_count() const { return count_; }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i] != kEmpty) {
        fn(static_cast<std::uint32_t>(keys_[i] >> 32),
           static_cast<std::uint32_t>(keys_[i] & 0xFFFFFFFFu), vals_[i]);
      }
    }
  }

 private:
  static constexpr std::uint64_t kEmpty = ~0ull;

  void grow();

  std::vector<std::uint64_t> keys_;
  std::vector<double> vals_;
  std::size_t count_ = 0;
};

// Sufficient statistics of the lifted least-squares problem:
//   C = Phi^T Phi (+ gamma I once regularized),  M = Phi^T Y.
// Before regularization every C entry is an exact co-occurrence count.
class GramStats {
 public:
  GramStats(std::uint32_t lifted_dim, std::uint32_t class_count);

  std::uint32_t lifted_dim() const { return dim_; }
  std::uint32_t class_count() const { return classes_; }
  std::uint64_t n_samples() const { return n_samples_; }
  double gamma() const { return gamma_; }
  bool regularized() const { return regularized_; }
  const Eigen::MatrixXd& moment() const { return moment_; }

  void accumulate(std::span<const SparseLiftedRow> rows, std::span<const std::uint32_t> labels);
  void regularize(double gamma);
  void merge(const GramStats& other);  // additive, both unregularized

  // Fraction of zero entries in the full symmetric D_e x D_e matrix.
  double gram_sparsity() const;
  double trace() const;

  SparseUpper to_sparse() const;  // sorted upper-triangle CSR
  Eigen::MatrixXd to_dense() const;

 private:
  std::uint32_t dim_;
  std::uint32_t classes_;
  PairValueMap counts_;
  Eigen::MatrixXd moment_;  // D_e x C_cls
  std::uint64_t n_samples_ = 0;
  double gamma_ = 0.0;
  bool regularized_ = false;
};

}  // namespace safle

#endif  // SAFLE_GRAM_HPP
