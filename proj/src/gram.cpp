#include "safle/gram.hpp"

#include <algorithm>
#include <cmath>

#include "safle/error.hpp"

namespace safle {

namespace {

inline std::uint64_t mix_key(std::uint64_t key) {
  // splitmix64 finalizer as the hash
  key = (key ^ (key >> 30)) * 0xBF58476D1CE4E5B9ULL;
  key = (key ^ (key >> 27)) * 0x94D049BB133111EBULL;
  return key ^ (key >> 31);
}

inline std::size_t round_up_pow2(std::size_t n) {
  std::size_t c = 16;
  while (c < n) c <<= 1;
  return c;
}

}  // namespace

std::uint64_t SparseUpper::nnz_full() const {
  std::uint64_t diag = 0, off = 0;
  for (std::uint32_t r = 0; r < dim; ++r) {
    for (std::uint64_t i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
      if (val[i] == 0.0) continue;
      if (col[i] == r) {
        ++diag;
      } else {
        ++off;
      }
    }
  }
  return diag + 2 * off;
}

double SparseUpper::zero_fraction() const {
  const double total = static_cast<double>(dim) * static_cast<double>(dim);
  if (total == 0.0) return 1.0;
  return 1.0 - static_cast<double>(nnz_full()) / total;
}

Eigen::MatrixXd SparseUpper::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(dim, dim);
  for (std::uint32_t r = 0; r < dim; ++r) {
    for (std::uint64_t i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
      dense(r, col[i]) = val[i];
      dense(col[i], r) = val[i];
    }
  }
  return dense;
}

void SparseUpper::add(const SparseUpper& other) {
  if (dim != other.dim) throw Error(ErrorCode::ShapeMismatch, "sparse add: dimension mismatch");
  std::vector<std::uint64_t> new_ptr(dim + 1, 0);
  std::vector<std::uint32_t> new_col;
  std::vector<double> new_val;
  new_col.reserve(col.size() + other.col.size());
  new_val.reserve(col.size() + other.col.size());
  for (std::uint32_t r = 0; r < dim; ++r) {
    std::uint64_t a = row_ptr[r], a_end = row_ptr[r + 1];
    std::uint64_t b = other.row_ptr[r], b_end = other.row_ptr[r + 1];
    while (a < a_end || b < b_end) {
      if (b >= b_end || (a < a_end && col[a] < other.col[b])) {
        new_col.push_back(col[a]);
        new_val.push_back(val[a]);
        ++a;
      } else if (a >= a_end || other.col[b] < col[a]) {
        new_col.push_back(other.col[b]);
        new_val.push_back(other.val[b]);
        ++b;
      } else {
        new_col.push_back(col[a]);
        new_val.push_back(val[a] + other.val[b]);
        ++a;
        ++b;
      }
    }
    new_ptr[r + 1] = new_col.size();
  }
  row_ptr = std::move(new_ptr);
  col = std::move(new_col);
  val = std::move(new_val);
}

PairValueMap::PairValueMap(std::size_t expected)
    : keys_(round_up_pow2(expected * 2), kEmpty), vals_(round_up_pow2(expected * 2), 0.0) {}

void PairValueMap::grow() {
  std::vector<std::uint64_t> old_keys = std::move(keys_);
  std::vector<double> old_vals = std::move(vals_);
  keys_.assign(old_keys.size() * 2, kEmpty);
  vals_.assign(old_vals.size() * 2, 0.0);
  const std::size_t mask = keys_.size() - 1;
  for (std::size_t i = 0; i < old_keys.size(); ++i) {
    if (old_keys[i] == kEmpty) continue;
    std::size_t slot = mix_key(old_keys[i]) & mask;
    while (keys_[slot] != kEmpty) slot = (slot + 1) & mask;
    keys_[slot] = old_keys[i];
    vals_[slot] = old_vals[i];
  }
}

void PairValueMap::add(std::uint32_t row, std::uint32_t col, double delta) {
  const std::uint64_t key = (static_cast<std::uint64_t>(row) << 32) | col;
  const std::size_t mask = keys_.size() - 1;
  std::size_t slot = mix_key(key) & mask;
  for (;;) {
    if (keys_[slot] == key) {
      vals_[slot] += delta;
      return;
    }
    if (keys_[slot] == kEmpty) {
      keys_[slot] = key;
      vals_[slot] = delta;
      if (++count_ * 10 > keys_.size() * 7) grow();
      return;
    }
    slot = (slot + 1) & mask;
  }
}

GramStats::GramStats(std::uint32_t lifted_dim, std::uint32_t class_count)
    : dim_(lifted_dim),
      classes_(class_count),
      moment_(Eigen::MatrixXd::Zero(lifted_dim, class_count)) {
  if (lifted_dim == 0 || class_count == 0) {
    throw Error(ErrorCode::InvalidConfig, "GramStats dimensions must be positive");
  }
}

void GramStats::accumulate(std::span<const SparseLiftedRow> rows,
                           std::span<const std::uint32_t> labels) {
  if (regularized_) {
    throw Error(ErrorCode::AlreadyRegularized, "cannot accumulate into regularized stats");
  }
  if (rows.size() != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "accumulate: rows/labels length mismatch");
  }
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const auto& active = rows[n].active;
    const std::uint32_t y = labels[n];
    if (y >= classes_) {
      throw Error(ErrorCode::LabelOutOfRange, "accumulate: label " + std::to_string(y));
    }
    for (std::uint32_t a : active) {
      if (a >= dim_) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "active index " + std::to_string(a) + " >= D_e " + std::to_string(dim_));
      }
    }
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::uint32_t a = active[i];
      moment_(a, y) += 1.0;
      for (std::size_t j = i; j < active.size(); ++j) {
        const std::uint32_t b = active[j];
        counts_.add(std::min(a, b), std::max(a, b), 1.0);
      }
    }
    ++n_samples_;
  }
}

void GramStats::regularize(double gamma) {
  if (regularized_) throw Error(ErrorCode::AlreadyRegularized, "stats already regularized");
  if (!(gamma > 0.0)) throw Error(ErrorCode::NonPositiveGamma, "gamma must be > 0");
  for (std::uint32_t d = 0; d < dim_; ++d) counts_.add(d, d, gamma);
  gamma_ = gamma;
  regularized_ = true;
}

void GramStats::merge(const GramStats& other) {
  if (regularized_ || other.regularized_) {
    throw Error(ErrorCode::AlreadyRegularized, "merge requires unregularized stats");
  }
  if (dim_ != other.dim_ || classes_ != other.classes_) {
    throw Error(ErrorCode::ShapeMismatch, "merge: shape mismatch");
  }
  other.counts_.for_each([&](std::uint32_t r, std::uint32_t c, double v) { counts_.add(r, c, v); });
  moment_ += other.moment_;
  n_samples_ += other.n_samples_;
}

double GramStats::gram_sparsity() const {
  std::uint64_t diag = 0, off = 0;
  counts_.for_each([&](std::uint32_t r, std::uint32_t c, double v) {
    if (v == 0.0) return;
    if (r == c) {
      ++diag;
    } else {
      ++off;
    }
  });
  const double total = static_cast<double>(dim_) * static_cast<double>(dim_);
  return 1.0 - static_cast<double>(diag + 2 * off) / total;
}

double GramStats::trace() const {
  double t = 0.0;
  counts_.for_each([&](std::uint32_t r, std::uint32_t c, double v) {
    if (r == c) t += v;
  });
  return t;
}

SparseUpper GramStats::to_sparse() const {
  struct Entry {
    std::uint32_t row, col;
    double val;
  };
  std::vector<Entry> entries;
  entries.reserve(counts_.entry_count());
  counts_.for_each([&](std::uint32_t r, std::uint32_t c, double v) {
    entries.push_back({r, c, v});
  });
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseUpper out;
  out.dim = dim_;
  out.row_ptr.assign(dim_ + 1, 0);
  out.col.reserve(entries.size());
  out.val.reserve(entries.size());
  std::size_t i = 0;
  for (std::uint32_t r = 0; r < dim_; ++r) {
    while (i < entries.size() && entries[i].row == r) {
      out.col.push_back(entries[i].col);
      out.val.push_back(entries[i].val);
      ++i;
    }
    out.row_ptr[r + 1] = out.col.size();
  }
  return out;
}

Eigen::MatrixXd GramStats::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(dim_, dim_);
  counts_.for_each([&](std::uint32_t r, std::uint32_t c, double v) {
    dense(r, c) = v;
    dense(c, r) = v;
  });
  return dense;
}

}  // namespace safle
