#ifndef SAFLE_FEDERATION_HPP
#define SAFLE_FEDERATION_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "safle/data.hpp"
#include "safle/gram.hpp"
#include "safle/solver.hpp"

namespace safle {

enum class PartitionScheme : std::uint8_t {
  Dirichlet = 0,
  Shard = 1,
};

struct PartitionPlan {
  PartitionScheme scheme = PartitionScheme::Dirichlet;
  double alpha = 0.0;           // Dirichlet concentration
  std::uint32_t shards_per_client = 0;  // Shard scheme
  std::uint32_t client_count = 1;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> assignment;  // per-sample client id

  std::vector<std::uint64_t> client_sizes() const;
  std::vector<std::size_t> samples_of(std::uint32_t client) const;

  void save(const std::string& path) const;
  static PartitionPlan load(const std::string& path);

  bool operator==(const PartitionPlan& other) const = default;
};

// Non-IID-1: per class, client proportions ~ Dirichlet(alpha * 1_K), samples
// assigned multinomially. Empty clients are repaired by moving one sample
// from the largest client (at most 100 repairs, then an error).
PartitionPlan partition_dirichlet(std::span<const std::uint32_t> labels, std::uint32_t clients,
                                  double alpha, std::uint64_t seed);

// Non-IID-2: sort by label, cut into K*s near-equal shards (remainder spread
// over the leading shards), shuffle shard order, deal s shards per client.
PartitionPlan partition_shard(std::span<const std::uint32_t> labels, std::uint32_t clients,
                              std::uint32_t shards_per_client, std::uint64_t seed);

// What one client transmits, exactly once: its regularized Gram and moment.
struct ClientPayload {
  std::uint32_t client_id = 0;
  std::uint64_t n_samples = 0;
  double gamma = 0.0;
  std::uint32_t class_count = 0;
  SparseUpper c_r;        // Phi^T Phi + gamma I, upper triangle
  Eigen::MatrixXd m;      // Phi^T Y, D_e x C_cls

  // Wire format: magic "SFLP", version u32, client_id u32, n_samples u64,
  // gamma f64, D_e u32, C_cls u32, nnz u64, nnz x (row u32, col u32, val f64)
  // sorted by (row, col), M row-major f64, then FNV-1a64 of all preceding
  // bytes. Identical bytes <=> identical payloads.
  std::vector<std::uint8_t> serialize() const;
  static ClientPayload deserialize(std::span<const std::uint8_t> bytes);

  bool operator==(const ClientPayload& other) const;
};

struct AggregateResult {
  SparseUpper c_agg_r;
  Eigen::MatrixXd m_agg;
  std::uint32_t client_count = 0;
};

struct CommReport {
  std::uint32_t rounds = 1;
  std::vector<std::uint64_t> client_bytes;
  std::vector<std::uint64_t> client_samples;
  std::vector<double> client_sparsity;
  std::uint64_t total_bytes = 0;
  double aggregate_sparsity = 0.0;
};

struct ProtocolConfig {
  BucketingModel bucketing;
  LiftConfig lift;
  double gamma = 1.0;
  // When set, every payload is written to and re-read from this directory,
  // so byte accounting reflects files that actually hit the disk.
  std::optional<std::string> spool_dir;
};

ClientPayload client_round(const FeatureMatrix& data, const PartitionPlan& plan,
                           std::uint32_t client_id, const BucketingModel& bucketing,
                           const LiftConfig& lift, double gamma);

// Entrywise sums in ascending client_id order; payloads must agree on
// shapes and gamma.
AggregateResult aggregate(std::span<const ClientPayload> payloads);

// The single communication round: every client produces one payload, the
// server aggregates and recovers the unregularized global solution.
std::pair<SafleModel, CommReport> run_protocol(const FeatureMatrix& data,
                                               const PartitionPlan& plan,
                                               const ProtocolConfig& config);

// Top-1 accuracy; logit ties resolve toward the lowest class index.
double evaluate(const SafleModel& model, const FeatureMatrix& data);
double evaluate_linear(const LinearModel& model, const FeatureMatrix& data);

// Per-class confusion counts, row = true class, col = predicted.
Eigen::MatrixXi confusion_matrix(const SafleModel& model, const FeatureMatrix& data);

// Thread cap for client rounds: SAFLE_THREADS when set, else hardware
// concurrency.
unsigned effective_thread_cap();

}  // namespace safle

#endif  // SAFLE_FEDERATION_HPP
