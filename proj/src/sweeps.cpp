#include "safle/sweeps.hpp"

#include <vector>

#include "safle/data.hpp"
#include "safle/error.hpp"
#include "safle/federation.hpp"
#include "safle/solver.hpp"

namespace safle {

namespace {

struct Split {
  FeatureMatrix train;
  FeatureMatrix test;
};

Split generate_split(SyntheticKind kind, std::size_t n_train, std::size_t n_test,
                     std::uint32_t feature_dim, std::uint32_t classes, double noise,
                     std::uint64_t seed) {
  SyntheticSpec spec;
  spec.generator = kind;
  spec.n_samples = n_train + n_test;
  spec.feature_dim = feature_dim;
  spec.class_count = classes;
  spec.noise_sigma = noise;
  spec.seed = seed;
  const FeatureMatrix all = generate(spec);
  FeatureMatrix train(all.x.topRows(n_train),
                      {all.y.begin(), all.y.begin() + static_cast<long>(n_train)}, classes);
  FeatureMatrix test(all.x.bottomRows(n_test),
                     {all.y.end() - static_cast<long>(n_test), all.y.end()}, classes);
  return {std::move(train), std::move(test)};
}

std::vector<double> flatten(const FeatureMatrix& data) {
  std::vector<double> flat(data.rows() * data.feature_dim());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::uint32_t j = 0; j < data.feature_dim(); ++j) {
      flat[i * data.feature_dim() + j] = data.x(i, j);
    }
  }
  return flat;
}

PartitionPlan central_plan(std::size_t n) {
  PartitionPlan plan;
  plan.client_count = 1;
  plan.assignment.assign(n, 0);
  return plan;
}

}  // namespace

std::vector<BucketSweepRow> run_bucket_sweep(const BucketSweepConfig& config) {
  const Split split =
      generate_split(SyntheticKind::XorInteractions, config.n_train, config.n_test,
                     config.feature_dim, config.class_count, config.noise_sigma,
                     config.data_seed);
  const auto flat = flatten(split.train);

  const LinearModel linear =
      fit_linear_baseline(split.train.x, split.train.y, config.class_count, config.gamma);
  const double linear_accuracy = evaluate_linear(linear, split.test);

  std::vector<BucketSweepRow> rows;
  for (BucketKind kind : {BucketKind::Integer, BucketKind::OneHot, BucketKind::BinaryOverlap}) {
    for (std::uint32_t buckets : config.bucket_grid) {
      const BucketStrategy strategy{kind, buckets};
      const auto bucketing =
          fit_boundaries(flat, split.train.rows(), config.feature_dim, strategy);
      const std::uint32_t group = kind == BucketKind::Integer ? config.group_size_integer
                                                              : config.group_size_binary;
      const auto lift = LiftConfig::from_group_size(config.lift_seed, bucketing.code_dim(),
                                                    strategy.alphabet(), group);
      auto [model, report] = run_protocol(
          split.train, central_plan(split.train.rows()),
          ProtocolConfig{bucketing, lift, config.gamma, std::nullopt});
      rows.push_back({kind, buckets, lift.lifted_dim(), evaluate(model, split.test),
                      linear_accuracy});
    }
  }
  return rows;
}

std::vector<ShapeSweepRow> run_shape_sweep(const ShapeSweepConfig& config) {
  std::vector<ShapeSweepRow> rows;
  for (std::uint32_t group : config.group_grid) {
    const std::uint32_t vocabulary = 1u << group;
    if (config.lifted_dim % vocabulary != 0) {
      throw Error(ErrorCode::InvalidConfig, "lifted_dim must be divisible by every 2^G");
    }
    const std::uint32_t experts = config.lifted_dim / vocabulary;
    const std::uint32_t feature_dim = experts * group;  // exact cover, no padding

    const Split split =
        generate_split(SyntheticKind::GaussianMixtures, config.n_train, config.n_test,
                       feature_dim, config.class_count, config.noise_sigma, config.data_seed);
    const auto flat = flatten(split.train);
    const auto bucketing =
        fit_boundaries(flat, split.train.rows(), feature_dim, {BucketKind::BinaryOverlap, 2});
    const auto lift =
        LiftConfig::from_group_size(config.lift_seed, bucketing.code_dim(), 2, group);

    const auto payload = client_round(split.train, central_plan(split.train.rows()), 0,
                                      bucketing, lift, config.gamma);
    const std::uint64_t payload_bytes = payload.serialize().size();
    const double sparsity = payload.c_r.zero_fraction();

    std::vector<ClientPayload> payloads = {payload};
    const auto agg = aggregate(payloads);
    Eigen::MatrixXd weights =
        recover_unregularized(agg.c_agg_r, agg.m_agg, agg.client_count, config.gamma);
    SafleModel model(bucketing, lift, config.class_count, std::move(weights));

    rows.push_back({experts, vocabulary, evaluate(model, split.test), sparsity, payload_bytes});
  }
  return rows;
}

}  // namespace safle
