#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <vector>

#include "safle/data.hpp"
#include "safle/error.hpp"
#include "safle/federation.hpp"
#include "safle/serial.hpp"
#include "safle/solver.hpp"

using namespace safle;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

FeatureMatrix train_slice(const FeatureMatrix& data, std::size_t n) {
  return FeatureMatrix(data.x.topRows(n),
                       {data.y.begin(), data.y.begin() + static_cast<long>(n)},
                       data.class_count);
}

FeatureMatrix test_slice(const FeatureMatrix& data, std::size_t n) {
  return FeatureMatrix(data.x.bottomRows(n), {data.y.end() - static_cast<long>(n), data.y.end()},
                       data.class_count);
}

}  // namespace

TEST_CASE("feature files round-trip bit-exactly") {
  SyntheticSpec spec;
  spec.generator = SyntheticKind::GaussianMixtures;
  spec.n_samples = 64;
  spec.feature_dim = 5;
  spec.class_count = 3;
  spec.seed = 10;
  const FeatureMatrix data = generate(spec);

  const std::string path = temp_path("safle_roundtrip.sflf");
  save_features(path, data);
  const FeatureMatrix loaded = load_features(path);
  // generated values are f32-quantized, so the load is exact
  CHECK(loaded.x == data.x);
  CHECK(loaded.y == data.y);
  CHECK(loaded.class_count == data.class_count);

  const std::string again = temp_path("safle_roundtrip2.sflf");
  save_features(again, loaded);
  CHECK(read_file_bytes(path) == read_file_bytes(again));
  std::remove(path.c_str());
  std::remove(again.c_str());
}

TEST_CASE("feature file validation") {
  SyntheticSpec spec;
  spec.n_samples = 8;
  spec.feature_dim = 3;
  spec.class_count = 2;
  const FeatureMatrix data = generate(spec);
  const std::string path = temp_path("safle_bad.sflf");
  save_features(path, data);
  auto bytes = read_file_bytes(path);

  SUBCASE("truncated payload") {
    bytes.resize(bytes.size() - 5);
    write_file_bytes(path, bytes);
    CHECK_THROWS_WITH_AS(load_features(path), "feature file payload size mismatch", Error);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    write_file_bytes(path, bytes);
    CHECK_THROWS_AS(load_features(path), Error);
  }
  SUBCASE("label out of range") {
    // labels are the trailing N u32s; set the last one to class_count
    bytes[bytes.size() - 4] = 2;
    bytes[bytes.size() - 3] = 0;
    bytes[bytes.size() - 2] = 0;
    bytes[bytes.size() - 1] = 0;
    write_file_bytes(path, bytes);
    CHECK_THROWS_AS(load_features(path), Error);
  }
  SUBCASE("non-finite feature value") {
    // first f32 starts right after the 24-byte header; write a quiet NaN
    bytes[24] = 0x00;
    bytes[25] = 0x00;
    bytes[26] = 0xC0;
    bytes[27] = 0x7F;
    write_file_bytes(path, bytes);
    CHECK_THROWS_AS(load_features(path), Error);
  }
  std::remove(path.c_str());
}

TEST_CASE("one_hot structure") {
  std::vector<std::uint32_t> labels = {0, 2, 1, 2, 2};
  const Eigen::MatrixXd y = one_hot(labels, 3);
  CHECK(y.row(0) == Eigen::RowVector3d(1, 0, 0));
  for (Eigen::Index i = 0; i < y.rows(); ++i) CHECK(y.row(i).sum() == 1.0);
  // column sums are the class histogram
  CHECK(y.col(0).sum() == 1.0);
  CHECK(y.col(1).sum() == 1.0);
  CHECK(y.col(2).sum() == 3.0);

  std::vector<std::uint32_t> bad = {3};
  CHECK_THROWS_AS(one_hot(bad, 3), Error);
}

TEST_CASE("generators are pure functions of the spec") {
  for (SyntheticKind kind : {SyntheticKind::XorInteractions, SyntheticKind::GaussianMixtures,
                             SyntheticKind::LinearlySeparable}) {
    SyntheticSpec spec;
    spec.generator = kind;
    spec.n_samples = 100;
    spec.feature_dim = 8;
    spec.class_count = 2;
    spec.seed = 77;
    const FeatureMatrix a = generate(spec);
    const FeatureMatrix b = generate(spec);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    spec.seed = 78;
    const FeatureMatrix c = generate(spec);
    CHECK(a.x != c.x);
  }
}

TEST_CASE("linearly separable data is solved by the linear baseline") {
  SyntheticSpec spec;
  spec.generator = SyntheticKind::LinearlySeparable;
  spec.n_samples = 3000;
  spec.feature_dim = 10;
  spec.class_count = 3;
  spec.noise_sigma = 0.0;
  spec.seed = 5;
  const FeatureMatrix data = generate(spec);
  const FeatureMatrix train = train_slice(data, 2000);
  const FeatureMatrix test = test_slice(data, 1000);

  const LinearModel model = fit_linear_baseline(train.x, train.y, train.class_count, 1.0);
  CHECK(evaluate_linear(model, test) >= 0.99);
}

TEST_CASE("xor interactions defeat the linear head but not the lifted one") {
  SyntheticSpec spec;
  spec.generator = SyntheticKind::XorInteractions;
  spec.n_samples = 26000;
  spec.feature_dim = 8;
  spec.class_count = 2;
  spec.noise_sigma = 0.05;
  spec.seed = 31;
  const FeatureMatrix data = generate(spec);
  const FeatureMatrix train = train_slice(data, 20000);
  const FeatureMatrix test = test_slice(data, 6000);

  const LinearModel linear = fit_linear_baseline(train.x, train.y, train.class_count, 1.0);
  const double linear_acc = evaluate_linear(linear, test);
  CHECK(linear_acc <= 0.6);

  // SAFLe head with binary-overlap bucketing and V in [32, 64]
  std::vector<double> flat(train.rows() * train.feature_dim());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    for (std::uint32_t j = 0; j < train.feature_dim(); ++j) {
      flat[i * train.feature_dim() + j] = train.x(i, j);
    }
  }
  const auto bucketing = fit_boundaries(flat, train.rows(), train.feature_dim(),
                                        {BucketKind::BinaryOverlap, 8});
  const auto lift = LiftConfig::from_group_size(5, bucketing.code_dim(), 2, 6);  // V = 64

  PartitionPlan central;
  central.client_count = 1;
  central.assignment.assign(train.rows(), 0);
  auto [model, report] = run_protocol(train, central, {bucketing, lift, 1.0, std::nullopt});
  const double safle_acc = evaluate(model, test);
  CHECK(safle_acc >= 0.9);
  CHECK(safle_acc - linear_acc >= 0.25);
}

TEST_CASE("xor generator rejects impossible class counts") {
  SyntheticSpec spec;
  spec.generator = SyntheticKind::XorInteractions;
  spec.feature_dim = 4;  // one pair: one label bit
  spec.class_count = 4;
  CHECK_THROWS_AS(generate(spec), Error);
}
