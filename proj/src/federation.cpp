#include "safle/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <thread>

#include "safle/error.hpp"
#include "safle/rng.hpp"
#include "safle/serial.hpp"

namespace safle {

std::vector<std::uint64_t> PartitionPlan::client_sizes() const {
  std::vector<std::uint64_t> sizes(client_count, 0);
  for (std::uint32_t c : assignment) ++sizes[c];
  return sizes;
}

std::vector<std::size_t> PartitionPlan::samples_of(std::uint32_t client) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == client) idx.push_back(i);
  }
  return idx;
}

void PartitionPlan::save(const std::string& path) const {
  ByteWriter w;
  w.put_magic("SFPL");
  w.put_u32(1);
  w.put_u8(static_cast<std::uint8_t>(scheme));
  w.put_f64(alpha);
  w.put_u32(shards_per_client);
  w.put_u32(client_count);
  w.put_u64(seed);
  w.put_u64(assignment.size());
  for (std::uint32_t c : assignment) w.put_u32(c);
  write_file_bytes(path, w.bytes());
}

PartitionPlan PartitionPlan::load(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  r.expect_magic("SFPL", "partition plan");
  if (r.get_u32() != 1) throw Error(ErrorCode::BadMagic, "unsupported plan version");
  PartitionPlan plan;
  const std::uint8_t scheme = r.get_u8();
  if (scheme > 1) throw Error(ErrorCode::BadMagic, "unknown partition scheme tag");
  plan.scheme = static_cast<PartitionScheme>(scheme);
  plan.alpha = r.get_f64();
  plan.shards_per_client = r.get_u32();
  plan.client_count = r.get_u32();
  plan.seed = r.get_u64();
  const std::uint64_t n = r.get_u64();
  if (r.remaining() != n * 4) throw Error(ErrorCode::ShapeOverflow, "plan assignment truncated");
  plan.assignment.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    plan.assignment[i] = r.get_u32();
    if (plan.assignment[i] >= plan.client_count) {
      throw Error(ErrorCode::IndexOutOfRange, "plan assignment out of range");
    }
  }
  return plan;
}

namespace {

void repair_empty_clients(std::vector<std::uint32_t>& assignment, std::uint32_t clients) {
  std::vector<std::uint64_t> sizes(clients, 0);
  for (std::uint32_t c : assignment) ++sizes[c];
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::uint32_t empty = clients;
    for (std::uint32_t c = 0; c < clients; ++c) {
      if (sizes[c] == 0) {
        empty = c;
        break;
      }
    }
    if (empty == clients) return;
    // move one sample (the first in dataset order) from the largest client
    const std::uint32_t donor = static_cast<std::uint32_t>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    if (sizes[donor] <= 1) {
      throw Error(ErrorCode::EmptyClient, "cannot repair empty client: too few samples");
    }
    for (auto& a : assignment) {
      if (a == donor) {
        a = empty;
        break;
      }
    }
    --sizes[donor];
    ++sizes[empty];
  }
  for (std::uint32_t c = 0; c < clients; ++c) {
    if (sizes[c] == 0) {
      throw Error(ErrorCode::EmptyClient, "client " + std::to_string(c) + " empty after repairs");
    }
  }
}

}  // namespace

PartitionPlan partition_dirichlet(std::span<const std::uint32_t> labels, std::uint32_t clients,
                                  double alpha, std::uint64_t seed) {
  if (clients == 0) throw Error(ErrorCode::InvalidConfig, "client count must be >= 1");
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be > 0");
  if (labels.size() < clients) {
    throw Error(ErrorCode::TooFewSamples, "fewer samples than clients");
  }
  std::uint32_t classes = 0;
  for (std::uint32_t y : labels) classes = std::max(classes, y + 1);

  PartitionPlan plan;
  plan.scheme = PartitionScheme::Dirichlet;
  plan.alpha = alpha;
  plan.client_count = clients;
  plan.seed = seed;
  plan.assignment.resize(labels.size());

  Rng rng(seed);
  std::vector<double> cdf(clients);
  for (std::uint32_t cls = 0; cls < classes; ++cls) {
    double total = 0.0;
    for (std::uint32_t k = 0; k < clients; ++k) {
      cdf[k] = rng.next_gamma(alpha);
      total += cdf[k];
    }
    if (total <= 0.0) {
      std::fill(cdf.begin(), cdf.end(), 1.0);  // all draws underflowed
      total = clients;
    }
    double running = 0.0;
    for (std::uint32_t k = 0; k < clients; ++k) {
      running += cdf[k] / total;
      cdf[k] = running;
    }
    cdf[clients - 1] = 1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != cls) continue;
      const double u = rng.next_double();
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      plan.assignment[i] = static_cast<std::uint32_t>(
          std::min<std::ptrdiff_t>(it - cdf.begin(), clients - 1));
    }
  }
  repair_empty_clients(plan.assignment, clients);
  return plan;
}

PartitionPlan partition_shard(std::span<const std::uint32_t> labels, std::uint32_t clients,
                              std::uint32_t shards_per_client, std::uint64_t seed) {
  if (clients == 0 || shards_per_client == 0) {
    throw Error(ErrorCode::InvalidConfig, "clients and shards_per_client must be >= 1");
  }
  const std::uint64_t shard_count = static_cast<std::uint64_t>(clients) * shards_per_client;
  if (labels.size() < shard_count) {
    throw Error(ErrorCode::TooFewSamples, "need at least K*s samples for sharding");
  }

  // label-sorted sample order, stable so ties keep dataset order
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

  const std::uint64_t base = labels.size() / shard_count;
  const std::uint64_t remainder = labels.size() % shard_count;

  std::vector<std::uint32_t> shard_ids(shard_count);
  std::iota(shard_ids.begin(), shard_ids.end(), 0u);
  Rng rng(seed);
  rng.shuffle(shard_ids);

  PartitionPlan plan;
  plan.scheme = PartitionScheme::Shard;
  plan.shards_per_client = shards_per_client;
  plan.client_count = clients;
  plan.seed = seed;
  plan.assignment.resize(labels.size());

  std::size_t cursor = 0;
  for (std::uint64_t s = 0; s < shard_count; ++s) {
    const std::uint64_t size = base + (s < remainder ? 1 : 0);
    const std::uint32_t client = shard_ids[s] / shards_per_client;
    for (std::uint64_t i = 0; i < size; ++i) plan.assignment[order[cursor++]] = client;
  }
  return plan;
}

std::vector<std::uint8_t> ClientPayload::serialize() const {
  ByteWriter w;
  w.put_magic("SFLP");
  w.put_u32(1);
  w.put_u32(client_id);
  w.put_u64(n_samples);
  w.put_f64(gamma);
  w.put_u32(c_r.dim);
  w.put_u32(class_count);
  w.put_u64(c_r.nnz());
  for (std::uint32_t r = 0; r < c_r.dim; ++r) {
    for (std::uint64_t i = c_r.row_ptr[r]; i < c_r.row_ptr[r + 1]; ++i) {
      w.put_u32(r);
      w.put_u32(c_r.col[i]);
      w.put_f64(c_r.val[i]);
    }
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.put_f64(m(r, c));
  }
  const std::uint64_t checksum = fnv1a64(w.bytes().data(), w.size());
  w.put_u64(checksum);
  return w.take();
}

ClientPayload ClientPayload::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::ShapeOverflow, "payload too short");
  const std::uint64_t body = bytes.size() - 8;
  ByteReader r(bytes.data(), bytes.size());
  r.expect_magic("SFLP", "client payload");
  if (r.get_u32() != 1) throw Error(ErrorCode::BadMagic, "unsupported payload version");

  ClientPayload p;
  p.client_id = r.get_u32();
  p.n_samples = r.get_u64();
  p.gamma = r.get_f64();
  const std::uint32_t dim = r.get_u32();
  p.class_count = r.get_u32();
  const std::uint64_t nnz = r.get_u64();
  if (r.remaining() != nnz * 16 + static_cast<std::uint64_t>(dim) * p.class_count * 8 + 8) {
    throw Error(ErrorCode::ShapeOverflow, "payload body size mismatch");
  }

  p.c_r.dim = dim;
  p.c_r.row_ptr.assign(dim + 1, 0);
  p.c_r.col.resize(nnz);
  p.c_r.val.resize(nnz);
  std::uint32_t prev_row = 0;
  std::uint32_t prev_col = 0;
  for (std::uint64_t i = 0; i < nnz; ++i) {
    const std::uint32_t row = r.get_u32();
    const std::uint32_t col = r.get_u32();
    const double val = r.get_f64();
    if (row >= dim || col >= dim || col < row) {
      throw Error(ErrorCode::ShapeOverflow, "payload entry outside upper triangle");
    }
    if (i > 0 && (row < prev_row || (row == prev_row && col <= prev_col))) {
      throw Error(ErrorCode::ShapeOverflow, "payload entries not sorted by (row, col)");
    }
    prev_row = row;
    prev_col = col;
    p.c_r.col[i] = col;
    p.c_r.val[i] = val;
    ++p.c_r.row_ptr[row + 1];
  }
  for (std::uint32_t row = 0; row < dim; ++row) p.c_r.row_ptr[row + 1] += p.c_r.row_ptr[row];

  p.m.resize(dim, p.class_count);
  for (std::uint32_t row = 0; row < dim; ++row) {
    for (std::uint32_t c = 0; c < p.class_count; ++c) p.m(row, c) = r.get_f64();
  }
  const std::uint64_t stored = r.get_u64();
  const std::uint64_t actual = fnv1a64(bytes.data(), body);
  if (stored != actual) {
    throw Error(ErrorCode::ChecksumMismatch, "payload checksum mismatch");
  }
  return p;
}

bool ClientPayload::operator==(const ClientPayload& other) const {
  return client_id == other.client_id && n_samples == other.n_samples && gamma == other.gamma &&
         class_count == other.class_count && c_r == other.c_r && m == other.m;
}

ClientPayload client_round(const FeatureMatrix& data, const PartitionPlan& plan,
                           std::uint32_t client_id, const BucketingModel& bucketing,
                           const LiftConfig& lift, double gamma) {
  if (plan.assignment.size() != data.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "plan does not match dataset");
  }
  const auto samples = plan.samples_of(client_id);
  if (samples.empty()) {
    throw Error(ErrorCode::EmptyClient, "client " + std::to_string(client_id) + " has no data");
  }

  GramStats stats(lift.lifted_dim(), data.class_count);
  std::vector<double> row(data.feature_dim());
  std::vector<SparseLiftedRow> lifted(1);
  std::vector<std::uint32_t> label(1);
  for (std::size_t i : samples) {
    for (std::uint32_t j = 0; j < data.feature_dim(); ++j) row[j] = data.x(i, j);
    lifted[0] = lift.lift(bucketing.encode(row));
    label[0] = data.y[i];
    stats.accumulate(lifted, label);
  }
  stats.regularize(gamma);

  ClientPayload payload;
  payload.client_id = client_id;
  payload.n_samples = samples.size();
  payload.gamma = gamma;
  payload.class_count = data.class_count;
  payload.c_r = stats.to_sparse();
  payload.m = stats.moment();
  return payload;
}

AggregateResult aggregate(std::span<const ClientPayload> payloads) {
  if (payloads.empty()) throw Error(ErrorCode::InvalidConfig, "aggregate: no payloads");

  std::vector<std::size_t> order(payloads.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return payloads[a].client_id < payloads[b].client_id;
  });

  const ClientPayload& first = payloads[order[0]];
  AggregateResult agg;
  agg.c_agg_r = first.c_r;
  agg.m_agg = first.m;
  agg.client_count = static_cast<std::uint32_t>(payloads.size());
  for (std::size_t i = 1; i < order.size(); ++i) {
    const ClientPayload& p = payloads[order[i]];
    if (p.c_r.dim != first.c_r.dim || p.class_count != first.class_count) {
      throw Error(ErrorCode::ShapeMismatch, "aggregate: payload shape mismatch");
    }
    if (p.gamma != first.gamma) {
      throw Error(ErrorCode::GammaMismatch, "aggregate: payload gamma mismatch");
    }
    agg.c_agg_r.add(p.c_r);
    agg.m_agg += p.m;
  }
  return agg;
}

unsigned effective_thread_cap() {
  if (const char* env = std::getenv("SAFLE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::pair<SafleModel, CommReport> run_protocol(const FeatureMatrix& data,
                                               const PartitionPlan& plan,
                                               const ProtocolConfig& config) {
  const std::uint32_t clients = plan.client_count;
  std::vector<std::vector<std::uint8_t>> wires(clients);

  // Client rounds are pure over disjoint slices; run them in parallel and
  // merge in ascending client id regardless of completion order.
  const unsigned threads = std::min<unsigned>(effective_thread_cap(), clients);
  std::atomic<std::uint32_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::uint32_t id = next.fetch_add(1);
      if (id >= clients) return;
      try {
        wires[id] =
            client_round(data, plan, id, config.bucketing, config.lift, config.gamma).serialize();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  CommReport report;
  report.rounds = 1;
  std::vector<ClientPayload> payloads;
  payloads.reserve(clients);
  for (std::uint32_t id = 0; id < clients; ++id) {
    std::vector<std::uint8_t> bytes = std::move(wires[id]);
    if (config.spool_dir) {
      const std::string path =
          *config.spool_dir + "/payload_" + std::to_string(id) + ".sflp";
      write_file_bytes(path, bytes);
      bytes = read_file_bytes(path);
    }
    report.client_bytes.push_back(bytes.size());
    report.total_bytes += bytes.size();
    ClientPayload payload = ClientPayload::deserialize(bytes);
    report.client_samples.push_back(payload.n_samples);
    report.client_sparsity.push_back(payload.c_r.zero_fraction());
    payloads.push_back(std::move(payload));
  }

  AggregateResult agg = aggregate(payloads);
  report.aggregate_sparsity = agg.c_agg_r.zero_fraction();
  Eigen::MatrixXd weights =
      recover_unregularized(agg.c_agg_r, agg.m_agg, agg.client_count, config.gamma);
  SafleModel model(config.bucketing, config.lift, data.class_count, std::move(weights));
  return {std::move(model), std::move(report)};
}

namespace {

std::uint32_t argmax_lowest(const Eigen::VectorXd& logits) {
  std::uint32_t best = 0;
  double best_value = logits[0];
  for (Eigen::Index c = 1; c < logits.size(); ++c) {
    if (logits[c] > best_value) {  // strict: ties keep the lowest index
      best_value = logits[c];
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

}  // namespace

double evaluate(const SafleModel& model, const FeatureMatrix& data) {
  std::vector<double> row(data.feature_dim());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::uint32_t j = 0; j < data.feature_dim(); ++j) row[j] = data.x(i, j);
    if (argmax_lowest(model.predict(row)) == data.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows());
}

double evaluate_linear(const LinearModel& model, const FeatureMatrix& data) {
  std::vector<double> row(data.feature_dim());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::uint32_t j = 0; j < data.feature_dim(); ++j) row[j] = data.x(i, j);
    if (argmax_lowest(model.predict(row)) == data.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows());
}

Eigen::MatrixXi confusion_matrix(const SafleModel& model, const FeatureMatrix& data) {
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(data.class_count, data.class_count);
  std::vector<double> row(data.feature_dim());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::uint32_t j = 0; j < data.feature_dim(); ++j) row[j] = data.x(i, j);
    counts(data.y[i], argmax_lowest(model.predict(row))) += 1;
  }
  return counts;
}

}  // namespace safle
