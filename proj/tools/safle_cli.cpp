// Command-line driver for the analytic classification head and its
// single-round federation simulator.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "safle/data.hpp"
#include "safle/error.hpp"
#include "safle/federation.hpp"
#include "safle/solver.hpp"
#include "safle/sweeps.hpp"

namespace {

using namespace safle;

// Exit codes: 0 success, 2 config error, 3 I/O error, 4 numerical failure.
int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic:
    case ErrorCode::ShapeOverflow:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::IoFailure:
      return 3;
    case ErrorCode::FactorizationFailure:
    case ErrorCode::NegativeEigenBeyondTolerance:
      return 4;
    default:
      return 2;
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Newline-delimited records: one record per line, space-separated key=value
// pairs, the first pair naming the record type.
class ReportWriter {
 public:
  explicit ReportWriter(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error(ErrorCode::IoFailure, "cannot open report file '" + path + "'");
    }
  }

  void record(const std::vector<std::pair<std::string, std::string>>& fields) {
    std::ostringstream line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) line << ' ';
      line << fields[i].first << '=' << fields[i].second;
    }
    std::cout << line.str() << '\n';
    if (file_.is_open()) file_ << line.str() << '\n';
  }

 private:
  std::ofstream file_;
};

struct HeadOptions {
  std::string strategy = "binary-overlap";
  std::uint32_t buckets = 8;
  std::uint32_t experts = 0;
  std::uint32_t group_size = 0;
  std::uint32_t base = 0;  // 0: derived from the strategy alphabet
  double gamma = 1.0;
  std::uint64_t seed = 42;
};

void add_head_options(CLI::App* cmd, HeadOptions& opt) {
  cmd->add_option("--strategy", opt.strategy, "bucketing strategy")
      ->check(CLI::IsMember({"integer", "onehot", "binary-overlap"}));
  cmd->add_option("--buckets", opt.buckets, "buckets per feature (B_n)")
      ->check(CLI::Range(2u, 512u));
  cmd->add_option("--experts", opt.experts, "expert count E (exclusive with --group-size)");
  cmd->add_option("--group-size", opt.group_size, "codes per expert G (exclusive with --experts)");
  cmd->add_option("--base", opt.base, "composite index base k (default: strategy alphabet)");
  cmd->add_option("--gamma", opt.gamma, "regularization intermediary strength");
  cmd->add_option("--seed", opt.seed, "permutation seed");
}

BucketKind parse_strategy(const std::string& name) {
  if (name == "integer") return BucketKind::Integer;
  if (name == "onehot") return BucketKind::OneHot;
  if (name == "binary-overlap") return BucketKind::BinaryOverlap;
  throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + name + "'");
}

ProtocolConfig build_head(const FeatureMatrix& train, const HeadOptions& opt) {
  if ((opt.experts == 0) == (opt.group_size == 0)) {
    throw Error(ErrorCode::InvalidConfig, "give exactly one of --experts or --group-size");
  }
  const BucketStrategy strategy{parse_strategy(opt.strategy), opt.buckets};

  std::vector<double> flat(train.rows() * train.feature_dim());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    for (std::uint32_t j = 0; j < train.feature_dim(); ++j) {
      flat[i * train.feature_dim() + j] = train.x(i, j);
    }
  }
  auto bucketing = fit_boundaries(flat, train.rows(), train.feature_dim(), strategy);

  std::uint32_t base = opt.base == 0 ? strategy.alphabet() : opt.base;
  if (base < strategy.alphabet()) {
    throw Error(ErrorCode::InvalidConfig, "--base must be >= the strategy alphabet");
  }
  auto lift = opt.group_size != 0
                  ? LiftConfig::from_group_size(opt.seed, bucketing.code_dim(), base, opt.group_size)
                  : LiftConfig::from_expert_count(opt.seed, bucketing.code_dim(), base, opt.experts);
  return ProtocolConfig{std::move(bucketing), std::move(lift), opt.gamma, std::nullopt};
}

PartitionPlan parse_partition(const std::string& text, std::span<const std::uint32_t> labels,
                              std::uint32_t clients, std::uint64_t seed) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "--partition expects dirichlet:<alpha> or shard:<s>");
  }
  const std::string scheme = text.substr(0, colon);
  const std::string value = text.substr(colon + 1);
  if (scheme == "dirichlet") {
    return partition_dirichlet(labels, clients, std::stod(value), seed);
  }
  if (scheme == "shard") {
    return partition_shard(labels, clients, static_cast<std::uint32_t>(std::stoul(value)), seed);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown partition scheme '" + scheme + "'");
}

double shannon_entropy(const std::vector<std::uint64_t>& hist) {
  double total = 0.0;
  for (std::uint64_t c : hist) total += static_cast<double>(c);
  double h = 0.0;
  for (std::uint64_t c : hist) {
    if (c > 0) {
      const double p = static_cast<double>(c) / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

int cmd_generate(const std::string& generator, std::size_t samples, std::uint32_t dim,
                 std::uint32_t classes, double noise, std::uint64_t seed,
                 const std::string& out) {
  SyntheticSpec spec;
  spec.generator = synthetic_kind_from_name(generator);
  spec.n_samples = samples;
  spec.feature_dim = dim;
  spec.class_count = classes;
  spec.noise_sigma = noise;
  spec.seed = seed;
  save_features(out, generate(spec));
  std::cout << "record=generated path=" << out << " samples=" << samples << " dim=" << dim
            << " classes=" << classes << '\n';
  return 0;
}

int cmd_fit(bool federated, const std::string& features_path, const std::string& test_path,
            const HeadOptions& head, std::uint32_t clients, const std::string& partition,
            const std::string& spool_dir, const std::string& out, const std::string& report_path) {
  const auto start = std::chrono::steady_clock::now();
  const FeatureMatrix train = load_features(features_path);
  std::optional<FeatureMatrix> test;
  if (!test_path.empty()) test = load_features(test_path);

  ProtocolConfig config = build_head(train, head);
  if (!spool_dir.empty()) config.spool_dir = spool_dir;

  PartitionPlan plan;
  if (federated) {
    plan = parse_partition(partition, train.y, clients, head.seed);
  } else {
    plan.client_count = 1;
    plan.assignment.assign(train.rows(), 0);
  }

  auto [model, comm] = run_protocol(train, plan, config);
  if (!out.empty()) model.save(out);

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ReportWriter report(report_path);
  std::vector<std::pair<std::string, std::string>> metrics = {
      {"record", "metrics"},
      {"command", federated ? "fit-federated" : "fit-central"},
      {"train_accuracy", fmt(evaluate(model, train))},
  };
  if (test) metrics.emplace_back("accuracy", fmt(evaluate(model, *test)));
  metrics.emplace_back("d_e", std::to_string(config.lift.lifted_dim()));
  metrics.emplace_back("experts", std::to_string(config.lift.expert_count()));
  metrics.emplace_back("vocabulary", std::to_string(config.lift.vocabulary()));
  metrics.emplace_back("gram_sparsity", fmt(comm.aggregate_sparsity));
  metrics.emplace_back("wall_time_s", fmt(wall));
  report.record(metrics);

  if (federated) {
    for (std::size_t k = 0; k < comm.client_bytes.size(); ++k) {
      report.record({{"record", "client"},
                     {"client_id", std::to_string(k)},
                     {"samples", std::to_string(comm.client_samples[k])},
                     {"payload_bytes", std::to_string(comm.client_bytes[k])},
                     {"gram_sparsity", fmt(comm.client_sparsity[k])}});
    }
    report.record({{"record", "summary"},
                   {"rounds", std::to_string(comm.rounds)},
                   {"clients", std::to_string(comm.client_bytes.size())},
                   {"total_bytes", std::to_string(comm.total_bytes)}});
  }
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& features_path,
                 const std::string& report_path) {
  const SafleModel model = SafleModel::load(model_path);
  const FeatureMatrix data = load_features(features_path);
  if (model.bucketing().feature_dim() != data.feature_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects feature dim " +
                                                  std::to_string(model.bucketing().feature_dim()));
  }
  ReportWriter report(report_path);
  report.record({{"record", "evaluation"},
                 {"accuracy", fmt(evaluate(model, data))},
                 {"samples", std::to_string(data.rows())}});
  const Eigen::MatrixXi confusion = confusion_matrix(model, data);
  for (Eigen::Index c = 0; c < confusion.rows(); ++c) {
    std::ostringstream row;
    for (Eigen::Index p = 0; p < confusion.cols(); ++p) {
      if (p > 0) row << ',';
      row << confusion(c, p);
    }
    report.record({{"record", "confusion"},
                   {"true_class", std::to_string(c)},
                   {"predicted_counts", row.str()}});
  }
  return 0;
}

int cmd_partition_cli(const std::string& features_path, const std::string& partition,
                      std::uint32_t clients, std::uint64_t seed, const std::string& out,
                      const std::string& report_path) {
  const FeatureMatrix data = load_features(features_path);
  const PartitionPlan plan = parse_partition(partition, data.y, clients, seed);
  if (!out.empty()) plan.save(out);

  ReportWriter report(report_path);
  double entropy_sum = 0.0;
  for (std::uint32_t k = 0; k < clients; ++k) {
    std::vector<std::uint64_t> hist(data.class_count, 0);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (plan.assignment[i] == k) ++hist[data.y[i]];
    }
    const double entropy = shannon_entropy(hist);
    entropy_sum += entropy;
    std::ostringstream hist_text;
    for (std::size_t c = 0; c < hist.size(); ++c) {
      if (c > 0) hist_text << ',';
      hist_text << hist[c];
    }
    report.record({{"record", "client"},
                   {"client_id", std::to_string(k)},
                   {"label_histogram", hist_text.str()},
                   {"entropy", fmt(entropy)}});
  }
  report.record({{"record", "summary"},
                 {"clients", std::to_string(clients)},
                 {"mean_entropy", fmt(entropy_sum / clients)}});
  return 0;
}

int cmd_ablate(const std::string& sweep, std::size_t samples, std::uint32_t dim,
               std::uint32_t classes, double noise, std::uint64_t seed, double gamma,
               const std::string& report_path) {
  ReportWriter report(report_path);
  if (sweep == "buckets") {
    BucketSweepConfig config;
    config.n_train = samples;
    config.n_test = std::max<std::size_t>(samples / 2, 100);
    config.feature_dim = dim;
    config.class_count = classes;
    config.noise_sigma = noise;
    config.data_seed = seed;
    config.lift_seed = seed;
    config.gamma = gamma;
    for (const auto& row : run_bucket_sweep(config)) {
      report.record({{"record", "ablate"},
                     {"sweep", "buckets"},
                     {"strategy", bucket_kind_name(row.kind)},
                     {"buckets", std::to_string(row.buckets)},
                     {"d_e", std::to_string(row.lifted_dim)},
                     {"accuracy", fmt(row.accuracy)},
                     {"linear_accuracy", fmt(row.linear_accuracy)}});
    }
    return 0;
  }
  if (sweep == "embedding-shape") {
    ShapeSweepConfig config;
    config.n_train = samples;
    config.n_test = std::max<std::size_t>(samples / 2, 100);
    config.class_count = classes;
    config.noise_sigma = noise;
    config.data_seed = seed;
    config.lift_seed = seed;
    config.gamma = gamma;
    for (const auto& row : run_shape_sweep(config)) {
      report.record({{"record", "ablate"},
                     {"sweep", "embedding-shape"},
                     {"experts", std::to_string(row.experts)},
                     {"vocabulary", std::to_string(row.vocabulary)},
                     {"accuracy", fmt(row.accuracy)},
                     {"gram_sparsity", fmt(row.gram_sparsity)},
                     {"payload_bytes", std::to_string(row.payload_bytes)}});
    }
    return 0;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown sweep '" + sweep + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAFLe: single-round analytic federated classification head"};
  app.require_subcommand(1);

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "write a synthetic SFLF feature file");
  std::string gen_kind = "mixtures", gen_out;
  std::size_t gen_samples = 10000;
  std::uint32_t gen_dim = 16, gen_classes = 10;
  double gen_noise = 0.1;
  std::uint64_t gen_seed = 1;
  generate_cmd->add_option("--generator", gen_kind, "xor | mixtures | linsep");
  generate_cmd->add_option("--samples", gen_samples, "sample count");
  generate_cmd->add_option("--features-dim", gen_dim, "feature dimension d_b");
  generate_cmd->add_option("--classes", gen_classes, "class count");
  generate_cmd->add_option("--noise", gen_noise, "noise sigma");
  generate_cmd->add_option("--seed", gen_seed, "generator seed");
  generate_cmd->add_option("--out", gen_out, "output SFLF path")->required();

  // shared fit options
  HeadOptions central_head, federated_head;
  std::string central_features, central_test, central_out, central_report;
  auto* central_cmd = app.add_subcommand("fit-central", "closed-form fit on pooled data");
  central_cmd->add_option("--features", central_features, "training SFLF file")->required();
  central_cmd->add_option("--test-features", central_test, "held-out SFLF file");
  add_head_options(central_cmd, central_head);
  central_cmd->add_option("--out", central_out, "model output path");
  central_cmd->add_option("--report", central_report, "metrics record file");

  std::string fed_features, fed_test, fed_out, fed_report, fed_partition = "dirichlet:0.1";
  std::string fed_spool;
  std::uint32_t fed_clients = 10;
  auto* fed_cmd = app.add_subcommand("fit-federated", "single-round federated fit");
  fed_cmd->add_option("--features", fed_features, "training SFLF file")->required();
  fed_cmd->add_option("--test-features", fed_test, "held-out SFLF file");
  add_head_options(fed_cmd, federated_head);
  fed_cmd->add_option("--clients", fed_clients, "client count K");
  fed_cmd->add_option("--partition", fed_partition, "dirichlet:<alpha> | shard:<s>");
  fed_cmd->add_option("--spool-dir", fed_spool, "write payload files here and read them back");
  fed_cmd->add_option("--out", fed_out, "model output path");
  fed_cmd->add_option("--report", fed_report, "metrics record file");

  std::string eval_model, eval_features, eval_report;
  auto* eval_cmd = app.add_subcommand("evaluate", "top-1 accuracy of a saved model");
  eval_cmd->add_option("--model", eval_model, "model file")->required();
  eval_cmd->add_option("--features", eval_features, "SFLF file")->required();
  eval_cmd->add_option("--report", eval_report, "record file");

  std::string part_features, part_partition, part_out, part_report;
  std::uint32_t part_clients = 10;
  std::uint64_t part_seed = 1;
  auto* part_cmd = app.add_subcommand("partition", "build and inspect a partition plan");
  part_cmd->add_option("--features", part_features, "SFLF file (labels source)")->required();
  part_cmd->add_option("--partition", part_partition, "dirichlet:<alpha> | shard:<s>")->required();
  part_cmd->add_option("--clients", part_clients, "client count K");
  part_cmd->add_option("--seed", part_seed, "partition seed");
  part_cmd->add_option("--out", part_out, "plan output path");
  part_cmd->add_option("--report", part_report, "heterogeneity record file");

  std::string ablate_sweep = "buckets", ablate_report;
  std::size_t ablate_samples = 4000;
  std::uint32_t ablate_dim = 16, ablate_classes = 2;
  double ablate_noise = 0.1, ablate_gamma = 1.0;
  std::uint64_t ablate_seed = 31;
  auto* ablate_cmd = app.add_subcommand("ablate", "bucketing / embedding-shape sweeps");
  ablate_cmd->add_option("--sweep", ablate_sweep, "buckets | embedding-shape");
  ablate_cmd->add_option("--samples", ablate_samples, "training samples per cell");
  ablate_cmd->add_option("--features-dim", ablate_dim, "feature dimension (buckets sweep)");
  ablate_cmd->add_option("--classes", ablate_classes, "class count");
  ablate_cmd->add_option("--noise", ablate_noise, "noise sigma");
  ablate_cmd->add_option("--seed", ablate_seed, "data + lift seed");
  ablate_cmd->add_option("--gamma", ablate_gamma, "regularization strength");
  ablate_cmd->add_option("--report", ablate_report, "record file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate_cmd->parsed()) {
      return cmd_generate(gen_kind, gen_samples, gen_dim, gen_classes, gen_noise, gen_seed,
                          gen_out);
    }
    if (central_cmd->parsed()) {
      return cmd_fit(false, central_features, central_test, central_head, 1, "", "", central_out,
                     central_report);
    }
    if (fed_cmd->parsed()) {
      return cmd_fit(true, fed_features, fed_test, federated_head, fed_clients, fed_partition,
                     fed_spool, fed_out, fed_report);
    }
    if (eval_cmd->parsed()) return cmd_evaluate(eval_model, eval_features, eval_report);
    if (part_cmd->parsed()) {
      return cmd_partition_cli(part_features, part_partition, part_clients, part_seed, part_out,
                               part_report);
    }
    if (ablate_cmd->parsed()) {
      return cmd_ablate(ablate_sweep, ablate_samples, ablate_dim, ablate_classes, ablate_noise,
                        ablate_seed, ablate_gamma, ablate_report);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
