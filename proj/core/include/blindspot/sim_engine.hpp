#pragma once

// Day-granularity simulation of pull-broadcast routing over a social graph
// whose nodes upload on their own schedule.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blindspot/messaging.hpp"
#include "blindspot/routing.hpp"
#include "blindspot/social_graph.hpp"

namespace blindspot::sim {

using graph::NodeId;
using msg::Day;

enum class RemovalStrategy { kRandom, kHighDegree };

std::string to_string(RemovalStrategy s);
RemovalStrategy removal_strategy_from_string(const std::string& s);

struct RemovalConfig {
  RemovalStrategy strategy = RemovalStrategy::kRandom;
  double fraction = 0.0;
  // Defaults to the middle of the run.
  std::optional<Day> at_day;
  // Removed nodes lose their edges, so neighbours see lower degrees and
  // smaller two-hop views. Otherwise they stay in the graph, silent.
  bool detach = true;
};

struct Pair {
  NodeId sender = 0;
  NodeId receiver = 0;

  friend bool operator==(const Pair&, const Pair&) = default;
};

struct SimConfig {
  int months = 64;
  int days_per_month = graph::kDefaultDaysPerMonth;
  std::vector<Pair> pairs;
  int messages_per_pair_per_month = 1;
  routing::RoutingParams routing;
  std::uint64_t seed = 1;
  bool crypto_enabled = false;
  std::size_t crypto_bits = 256;
  std::size_t payload_bytes = 32;
  std::optional<RemovalConfig> removal;
  // A node carries each message at most once (see routing::HeldMessages).
  bool holder_dedup = true;
  // Messages are created on day 0 of each month unless jittered to a seeded
  // day within the month.
  bool message_day_jitter = false;
  // Keep the full per-node upload schedule in the metrics, not just digests.
  bool record_upload_log = false;
  // Remaps simulation ids through a seeded permutation. Routing must not
  // care; used to check that.
  std::optional<std::uint64_t> sim_id_permutation_seed;

  int total_days() const noexcept { return months * days_per_month; }
};

struct MessageRecord {
  msg::MessageId sim_id = 0;
  std::size_t pair_index = 0;
  NodeId sender = 0;
  NodeId receiver = 0;
  int month = 0;
  Day created_day = 0;
  std::optional<Day> first_delivered_day;
  std::uint32_t copies_received = 0;
  // Nodes and days of the copy that arrived first, sender to receiver.
  std::vector<NodeId> first_delivery_path;
  std::vector<Day> first_delivery_days;
  // Encryption runs only: the receiver decrypted the expected payload.
  std::optional<bool> payload_ok;
};

struct SimMetrics {
  std::size_t messages = 0;
  std::size_t delivered = 0;
  double delivery_rate = 0.0;
  double mean_delay_days = 0.0;
  // Mean copies that reached the receiver per delivered message.
  double duplicates_per_delivered = 0.0;
  std::uint64_t copies_sprayed = 0;
  std::size_t max_upload_load = 0;
  std::vector<MessageRecord> records;
  std::vector<std::uint64_t> live_copies_per_day;
  // Per node: FNV-1a over its (day, upload count) sequence.
  std::vector<std::uint64_t> upload_digest;
  std::vector<std::uint64_t> upload_totals;
  std::vector<std::vector<graph::ScheduledUpload>> upload_log;
  std::vector<NodeId> removed;
};

// Test seams. The defaults leave the engine untouched.
struct EngineHooks {
  // Replaces the scheduled upload count for a session.
  std::function<std::uint32_t(NodeId node, Day day, std::uint32_t scheduled, std::size_t queued)>
      upload_count;
  std::function<void(const msg::Upload&)> on_publish;
};

// Throws InvalidInput for bad pairs or config values, Infeasible when the
// removal cannot be satisfied.
SimMetrics run(const SimConfig& config, const graph::SocialGraph& graph,
               std::span<const graph::UploadBehaviour> behaviours, const EngineHooks& hooks = {});

// floor(fraction * |V|) nodes outside `protect`. High-degree picks the top by
// degree, lower id first among ties.
std::vector<NodeId> apply_removal(const graph::SocialGraph& graph, RemovalStrategy strategy,
                                  double fraction, std::span<const NodeId> protect,
                                  std::uint64_t seed);

// Distinct ordered pairs of distinct nodes in the same component.
std::vector<Pair> sample_pairs(const graph::SocialGraph& graph, std::size_t count,
                               std::uint64_t seed);

struct SweepRow {
  std::size_t pair_count = 0;
  SimMetrics metrics;
};

// One run per count; pairs drawn from pair_seed for each count.
std::vector<SweepRow> congestion_sweep(const SimConfig& base, const graph::SocialGraph& graph,
                                       std::span<const graph::UploadBehaviour> behaviours,
                                       std::span<const std::size_t> pair_counts,
                                       std::uint64_t pair_seed);

// Runs without traffic and with the configured pairs under the same seed and
// compares every node's upload schedule.
bool indistinguishability_check(const SimConfig& config, const graph::SocialGraph& graph,
                                std::span<const graph::UploadBehaviour> behaviours,
                                const EngineHooks& hooks = {});

}  // namespace blindspot::sim
