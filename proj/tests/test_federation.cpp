#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "safle/data.hpp"
#include "safle/error.hpp"
#include "safle/federation.hpp"
#include "safle/rng.hpp"
#include "safle/serial.hpp"

using namespace safle;

namespace {

std::vector<std::uint32_t> balanced_labels(std::size_t n, std::uint32_t classes) {
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % classes);
  return labels;
}

double client_label_entropy(const PartitionPlan& plan, std::span<const std::uint32_t> labels,
                            std::uint32_t client, std::uint32_t classes) {
  std::vector<double> hist(classes, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (plan.assignment[i] == client) {
      hist[labels[i]] += 1.0;
      total += 1.0;
    }
  }
  double h = 0.0;
  for (double c : hist) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

double mean_entropy(const PartitionPlan& plan, std::span<const std::uint32_t> labels,
                    std::uint32_t classes) {
  double sum = 0.0;
  for (std::uint32_t k = 0; k < plan.client_count; ++k) {
    sum += client_label_entropy(plan, labels, k, classes);
  }
  return sum / plan.client_count;
}

FeatureMatrix small_dataset(std::size_t n, std::uint32_t d_b, std::uint32_t classes,
                            std::uint64_t seed) {
  SyntheticSpec spec;
  spec.generator = SyntheticKind::GaussianMixtures;
  spec.n_samples = n;
  spec.feature_dim = d_b;
  spec.class_count = classes;
  spec.noise_sigma = 0.8;
  spec.seed = seed;
  return generate(spec);
}

ProtocolConfig make_config(const FeatureMatrix& data, std::uint32_t buckets,
                           std::uint32_t group, std::uint64_t seed, double gamma) {
  std::vector<double> flat(data.rows() * data.feature_dim());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::uint32_t j = 0; j < data.feature_dim(); ++j) {
      flat[i * data.feature_dim() + j] = data.x(i, j);
    }
  }
  auto bucketing =
      fit_boundaries(flat, data.rows(), data.feature_dim(), {BucketKind::BinaryOverlap, buckets});
  auto lift = LiftConfig::from_group_size(seed, bucketing.code_dim(), 2, group);
  return ProtocolConfig{std::move(bucketing), std::move(lift), gamma, std::nullopt};
}

PartitionPlan central_plan(std::size_t n) {
  PartitionPlan plan;
  plan.client_count = 1;
  plan.assignment.assign(n, 0);
  return plan;
}

}  // namespace

TEST_CASE("dirichlet partition basics") {
  const auto labels = balanced_labels(200, 4);
  const auto single = partition_dirichlet(labels, 1, 0.5, 3);
  CHECK(single.assignment == std::vector<std::uint32_t>(200, 0));

  CHECK(partition_dirichlet(labels, 5, 0.5, 3).assignment ==
        partition_dirichlet(labels, 5, 0.5, 3).assignment);

  CHECK_THROWS_AS(partition_dirichlet(labels, 5, 0.0, 3), Error);
  CHECK_THROWS_AS(partition_dirichlet(labels, 0, 0.5, 3), Error);
}

TEST_CASE("near-uniform dirichlet looks balanced per class") {
  const std::uint32_t classes = 10, clients = 5;
  const auto labels = balanced_labels(20000, classes);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto plan = partition_dirichlet(labels, clients, 1e6, seed);
    // every client's class histogram within 5% of uniform
    for (std::uint32_t k = 0; k < clients; ++k) {
      std::vector<double> hist(classes, 0.0);
      double total = 0.0;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (plan.assignment[i] == k) {
          hist[labels[i]] += 1.0;
          total += 1.0;
        }
      }
      for (double c : hist) CHECK(std::fabs(c / total - 0.1) < 0.05 * 0.1 + 0.01);
    }
  }
}

TEST_CASE("small alpha is strictly more heterogeneous than large alpha") {
  const std::uint32_t classes = 10;
  const auto labels = balanced_labels(5000, classes);
  const auto concentrated = partition_dirichlet(labels, 10, 0.05, 7);
  const auto uniform = partition_dirichlet(labels, 10, 1e6, 7);
  CHECK(mean_entropy(concentrated, labels, classes) < mean_entropy(uniform, labels, classes));
}

TEST_CASE("dirichlet repairs empty clients") {
  const auto labels = balanced_labels(12, 2);
  const auto plan = partition_dirichlet(labels, 10, 0.05, 1);
  const auto sizes = plan.client_sizes();
  for (std::uint64_t s : sizes) CHECK(s >= 1);
}

TEST_CASE("shard partition structure") {
  const auto labels = balanced_labels(10000, 10);

  const auto single = partition_shard(labels, 1, 1, 5);
  CHECK(single.assignment == std::vector<std::uint32_t>(10000, 0));

  CHECK(partition_shard(labels, 10, 2, 5).assignment ==
        partition_shard(labels, 10, 2, 5).assignment);

  const auto plan = partition_shard(labels, 10, 2, 5);
  const auto sizes = plan.client_sizes();
  for (std::uint64_t s : sizes) CHECK(s == 1000);  // 20 shards of 500, 2 each

  // balanced labels cut into 20 shards align with class boundaries, so every
  // client sees at most 2 distinct labels
  for (std::uint32_t k = 0; k < 10; ++k) {
    std::set<std::uint32_t> distinct;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (plan.assignment[i] == k) distinct.insert(labels[i]);
    }
    CHECK(distinct.size() <= 2);
  }

  CHECK_THROWS_AS(partition_shard(balanced_labels(5, 2), 3, 2, 1), Error);  // N < K*s
}

TEST_CASE("plan files round-trip") {
  const auto labels = balanced_labels(300, 3);
  const auto plan = partition_dirichlet(labels, 4, 0.2, 11);
  const std::string path =
      (std::filesystem::temp_directory_path() / "safle_plan.sfpl").string();
  plan.save(path);
  const auto loaded = PartitionPlan::load(path);
  CHECK(loaded == plan);
  std::remove(path.c_str());
}

TEST_CASE("single-sample client payload by hand") {
  const auto data = small_dataset(40, 4, 2, 9);
  auto config = make_config(data, 3, 2, 13, 0.5);
  const std::uint32_t experts = config.lift.expert_count();

  PartitionPlan plan;
  plan.client_count = 2;
  plan.assignment.assign(40, 1);
  plan.assignment[7] = 0;  // client 0 holds exactly one sample

  const auto payload = client_round(data, plan, 0, config.bucketing, config.lift, 0.5);
  CHECK(payload.n_samples == 1);
  CHECK(payload.gamma == 0.5);

  const Eigen::MatrixXd c = payload.c_r.to_dense();
  // gamma I plus E diagonal ones plus E(E-1)/2 symmetric pair entries
  const double expected_sum = 0.5 * config.lift.lifted_dim() + experts +
                              2.0 * (experts * (experts - 1) / 2.0);
  CHECK(c.sum() == doctest::Approx(expected_sum));
  CHECK(payload.m.sum() == static_cast<double>(experts));
}

TEST_CASE("two clients concatenated equal the payload sum minus one gamma I") {
  const auto data = small_dataset(60, 4, 3, 10);
  auto config = make_config(data, 4, 3, 17, 1.0);

  PartitionPlan plan;
  plan.client_count = 2;
  plan.assignment.assign(60, 0);
  for (std::size_t i = 30; i < 60; ++i) plan.assignment[i] = 1;

  const auto p0 = client_round(data, plan, 0, config.bucketing, config.lift, 1.0);
  const auto p1 = client_round(data, plan, 1, config.bucketing, config.lift, 1.0);

  const auto pooled = client_round(data, central_plan(60), 0, config.bucketing, config.lift, 1.0);

  const Eigen::MatrixXd sum = p0.c_r.to_dense() + p1.c_r.to_dense();
  const Eigen::MatrixXd pooled_dense = pooled.c_r.to_dense();
  const Eigen::MatrixXd extra_gamma =
      Eigen::MatrixXd::Identity(pooled.c_r.dim, pooled.c_r.dim);
  CHECK(sum == pooled_dense + extra_gamma);  // counts are exact
  CHECK(p0.m + p1.m == pooled.m);
}

TEST_CASE("aggregate sums payloads in ascending client order") {
  const auto data = small_dataset(50, 4, 2, 12);
  auto config = make_config(data, 3, 2, 19, 1.0);

  PartitionPlan plan = partition_shard(data.y, 5, 2, 3);
  std::vector<ClientPayload> payloads;
  for (std::uint32_t k = 0; k < 5; ++k) {
    payloads.push_back(client_round(data, plan, k, config.bucketing, config.lift, 1.0));
  }

  SUBCASE("single payload identity") {
    const auto agg = aggregate(std::span(payloads).first(1));
    CHECK(agg.c_agg_r == payloads[0].c_r);
    CHECK(agg.m_agg == payloads[0].m);
    CHECK(agg.client_count == 1);
  }

  SUBCASE("matches centralized accumulation plus K gamma I") {
    const auto agg = aggregate(payloads);
    const auto pooled = client_round(data, central_plan(50), 0, config.bucketing, config.lift, 1.0);
    const Eigen::MatrixXd expected =
        pooled.c_r.to_dense() +
        4.0 * Eigen::MatrixXd::Identity(pooled.c_r.dim, pooled.c_r.dim);
    CHECK(agg.c_agg_r.to_dense() == expected);
    CHECK(agg.m_agg == pooled.m);
  }

  SUBCASE("shuffled payload order yields the same aggregate") {
    std::vector<ClientPayload> shuffled = {payloads[3], payloads[0], payloads[4], payloads[2],
                                           payloads[1]};
    const auto a = aggregate(payloads);
    const auto b = aggregate(shuffled);
    CHECK(a.c_agg_r == b.c_agg_r);
    CHECK(a.m_agg == b.m_agg);
  }

  SUBCASE("mismatched gamma is rejected") {
    auto bad = payloads;
    bad[2].gamma = 2.0;
    CHECK_THROWS_AS(aggregate(bad), Error);
  }
}

TEST_CASE("payload wire format round-trips bit-exactly") {
  const auto data = small_dataset(80, 5, 3, 14);
  auto config = make_config(data, 4, 3, 23, 0.25);
  PartitionPlan plan = partition_dirichlet(data.y, 4, 0.3, 2);

  for (std::uint32_t k = 0; k < 4; ++k) {
    const auto payload = client_round(data, plan, k, config.bucketing, config.lift, 0.25);
    const auto bytes = payload.serialize();
    const auto parsed = ClientPayload::deserialize(bytes);
    CHECK(parsed == payload);
    CHECK(parsed.serialize() == bytes);
  }
}

TEST_CASE("payload corruption is detected") {
  const auto data = small_dataset(30, 4, 2, 15);
  auto config = make_config(data, 3, 2, 29, 1.0);
  const auto payload = client_round(data, central_plan(30), 0, config.bucketing, config.lift, 1.0);
  auto bytes = payload.serialize();

  SUBCASE("flipped byte breaks the checksum") {
    bytes[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(ClientPayload::deserialize(bytes), Error);
  }
  SUBCASE("truncation is caught") {
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(ClientPayload::deserialize(bytes), Error);
  }
  SUBCASE("bad magic is caught") {
    bytes[1] = 'x';
    CHECK_THROWS_AS(ClientPayload::deserialize(bytes), Error);
  }
}

TEST_CASE("protocol output is invariant to the partition") {
  const auto data = small_dataset(400, 6, 4, 16);
  auto config = make_config(data, 4, 3, 31, 1.0);

  auto [central_model, central_report] = run_protocol(data, central_plan(400), config);
  CHECK(central_report.rounds == 1);
  CHECK(central_report.client_bytes.size() == 1);

  const auto plan = partition_dirichlet(data.y, 10, 0.1, 21);
  auto [fed_model, fed_report] = run_protocol(data, plan, config);
  CHECK(fed_report.rounds == 1);
  CHECK(fed_report.client_bytes.size() == 10);  // exactly one payload per client

  const double rel = (fed_model.weights() - central_model.weights()).norm() /
                     central_model.weights().norm();
  CHECK(rel < 1e-8);
}

TEST_CASE("spooled protocol round-trips payload files") {
  const auto data = small_dataset(100, 4, 2, 18);
  auto config = make_config(data, 3, 2, 37, 1.0);
  const auto spool =
      (std::filesystem::temp_directory_path() / "safle_spool").string();
  std::filesystem::create_directories(spool);
  config.spool_dir = spool;

  const auto plan = partition_shard(data.y, 4, 1, 8);
  auto [model, report] = run_protocol(data, plan, config);
  CHECK(report.client_bytes.size() == 4);
  for (std::uint32_t k = 0; k < 4; ++k) {
    const auto path = spool + "/payload_" + std::to_string(k) + ".sflp";
    CHECK(std::filesystem::file_size(path) == report.client_bytes[k]);
  }

  config.spool_dir = std::nullopt;
  auto [direct_model, direct_report] = run_protocol(data, plan, config);
  CHECK(direct_model.weights() == model.weights());
  CHECK(direct_report.client_bytes == report.client_bytes);
  std::filesystem::remove_all(spool);
}

TEST_CASE("evaluation accuracy and tie-breaking") {
  const auto data = small_dataset(200, 5, 3, 20);

  SUBCASE("zero model predicts class 0 everywhere") {
    auto config = make_config(data, 3, 2, 41, 1.0);
    SafleModel zero(config.bucketing, config.lift, data.class_count,
                    Eigen::MatrixXd::Zero(config.lift.lifted_dim(), data.class_count));
    double class0 = 0.0;
    for (std::uint32_t y : data.y) class0 += (y == 0) ? 1.0 : 0.0;
    CHECK(evaluate(zero, data) == doctest::Approx(class0 / data.rows()));
  }

  SUBCASE("well-separated mixtures reach perfect train accuracy") {
    SyntheticSpec spec;
    spec.generator = SyntheticKind::GaussianMixtures;
    spec.n_samples = 300;
    spec.feature_dim = 6;
    spec.class_count = 2;
    spec.noise_sigma = 0.05;  // tight clusters
    spec.seed = 22;
    const auto tight = generate(spec);
    auto config = make_config(tight, 4, 2, 43, 1.0);
    auto [model, report] = run_protocol(tight, central_plan(300), config);
    CHECK(evaluate(model, tight) == 1.0);

    const auto confusion = confusion_matrix(model, tight);
    CHECK(confusion.diagonal().sum() == 300);
  }

  SUBCASE("linearly separable test accuracy via the lifted head") {
    SyntheticSpec spec;
    spec.generator = SyntheticKind::LinearlySeparable;
    spec.n_samples = 4000;
    spec.feature_dim = 2;  // low dimension keeps the staircase boundary sharp
    spec.class_count = 2;
    spec.noise_sigma = 0.0;
    spec.seed = 23;
    const auto all = generate(spec);
    const FeatureMatrix train(all.x.topRows(3000), {all.y.begin(), all.y.begin() + 3000}, 2);
    const FeatureMatrix test(all.x.bottomRows(1000), {all.y.end() - 1000, all.y.end()}, 2);
    auto config = make_config(train, 16, 5, 47, 1.0);
    auto [model, report] = run_protocol(train, central_plan(3000), config);
    CHECK(evaluate(model, test) >= 0.99);
  }
}

TEST_CASE("thread cap honors SAFLE_THREADS") {
  setenv("SAFLE_THREADS", "3", 1);
  CHECK(effective_thread_cap() == 3);
  unsetenv("SAFLE_THREADS");
  CHECK(effective_thread_cap() >= 1);
}

TEST_CASE("protocol results do not depend on the thread count") {
  const auto data = small_dataset(300, 5, 3, 24);
  auto config = make_config(data, 4, 3, 53, 1.0);
  const auto plan = partition_dirichlet(data.y, 8, 0.2, 6);

  setenv("SAFLE_THREADS", "1", 1);
  auto [serial_model, serial_report] = run_protocol(data, plan, config);
  setenv("SAFLE_THREADS", "4", 1);
  auto [parallel_model, parallel_report] = run_protocol(data, plan, config);
  unsetenv("SAFLE_THREADS");

  CHECK(serial_model.weights() == parallel_model.weights());  // bitwise
  CHECK(serial_report.client_bytes == parallel_report.client_bytes);
}
