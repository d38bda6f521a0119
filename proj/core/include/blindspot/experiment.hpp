#pragma once

// Experiment specs (JSON, "schema": 1) and the runners behind the CLI.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blindspot/path_entropy.hpp"
#include "blindspot/sim_engine.hpp"
#include "blindspot/social_graph.hpp"

namespace blindspot::experiment {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "BLINDSPOT_OUTPUT_DIR";

struct BaSpec {
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 1;
};

// Exactly one of `ba` or `edges_path` is set. Uploads come from
// `uploads_path` (mapped onto BA nodes, or loaded with the edges), or are
// synthesized.
struct NetworkSpec {
  std::optional<BaSpec> ba;
  std::optional<std::filesystem::path> edges_path;
  std::optional<std::filesystem::path> uploads_path;
  std::optional<std::uint64_t> upload_permutation_seed;
  bool allow_missing_uploads = false;
  std::uint64_t synthetic_seed = 2;
  graph::SyntheticUploadParams synthetic;
};

enum class ExperimentKind { kSingle, kCongestion, kRemoval, kEntropy };

std::string to_string(ExperimentKind kind);

struct ExperimentSpec {
  std::string name = "experiment";
  NetworkSpec network;
  sim::SimConfig sim;
  ExperimentKind kind = ExperimentKind::kSingle;
  // Pairs are sampled unless sim.pairs is given explicitly.
  std::size_t pair_count = 100;
  std::uint64_t pair_seed = 7;
  std::vector<std::size_t> pair_counts;  // congestion
  std::vector<double> fractions;         // removal
  std::vector<sim::RemovalStrategy> strategies{sim::RemovalStrategy::kRandom,
                                               sim::RemovalStrategy::kHighDegree};
  bool removal_baseline = true;
  std::size_t bins = 10;  // entropy
  std::filesystem::path output_dir;
  bool write_traces = false;
};

// Relative paths resolve against `base_dir`. An absent output dir falls back
// to $BLINDSPOT_OUTPUT_DIR, then to the working directory. Throws
// ConfigError naming the offending field.
ExperimentSpec parse_experiment_spec(std::string_view json_text,
                                     const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct Network {
  graph::SocialGraph graph;
  std::vector<graph::UploadBehaviour> behaviours;
};

// Behaviours cover at least `months` months.
Network build_network(const NetworkSpec& spec, std::size_t months);

struct ExperimentResult {
  std::vector<std::filesystem::path> files;
  std::string summary_json;
};

ExperimentResult run_experiment(const ExperimentSpec& spec);

// Per-message trace lines: pair, ids, days and the first-delivery path.
std::string traces_jsonl(const sim::SimMetrics& metrics);

struct TraceSet {
  std::vector<analysis::DeliveredPath> paths;
  std::vector<std::size_t> pair_indices;
};

TraceSet parse_traces_jsonl(std::string_view text);

// Entropy report as CSV, one row per analyzed pair.
std::string entropy_csv(const analysis::EntropyReport& report);

}  // namespace blindspot::experiment
