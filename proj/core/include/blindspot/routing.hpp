#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "blindspot/delay_model.hpp"
#include "blindspot/messaging.hpp"
#include "blindspot/random.hpp"
#include "blindspot/social_graph.hpp"

namespace blindspot::routing {

using graph::LocalView;
using graph::NodeId;
using msg::Day;

enum class SimilarityMode {
  // 100 * |N(c) ∩ N(p)| / |N(c) ∪ N(p)|, each set excluding the other endpoint.
  kJaccard,
  // 100 * |N(c) ∩ N(p)| / |N(p)|, same exclusions.
  kSharedOverPrevious,
};

struct RoutingParams {
  std::size_t uploads_window = 5;
  int ttl_days = msg::kDefaultTtlDays;
  std::size_t capacity = msg::kDefaultCapacity;
  std::size_t estimate_window = 20;
  SimilarityMode similarity = SimilarityMode::kJaccard;
  msg::QueuePolicy queue_policy = msg::QueuePolicy::kRepost;
};

// Raw exit score when no exit route can be scored.
inline constexpr double kNoExitScore = std::numeric_limits<double>::infinity();

double neighbour_similarity(std::span<const NodeId> center_neighbours, NodeId center,
                            std::span<const NodeId> prev_neighbours, NodeId prev,
                            SimilarityMode mode = SimilarityMode::kJaccard);
double neighbour_similarity(const LocalView& view, NodeId prev,
                            SimilarityMode mode = SimilarityMode::kJaccard);

struct ExitScores {
  double raw = kNoExitScore;
  std::map<NodeId, double> per_exit;
};

// Scores prev -> center -> e for every neighbour e != prev by explicit
// convolution. Exits without a known distribution are skipped.
ExitScores min_exit_cdf_score(const LocalView& view, NodeId prev,
                              const delay::DelayDistribution& self_pdf);

// Same minimum from moments; the fast path used inside pull rounds.
double min_exit_moment_score(const delay::DelayMoments& prev, const delay::DelayMoments& self,
                             std::span<const delay::DelayMoments> exits);

// Min-max normalization to [0, 100] over one pull event. A lone candidate or
// a constant set maps to 0; kNoExitScore maps to 100.
std::vector<double> normalize_exit_scores(std::span<const double> raw);

// Lower is better.
inline double message_score(double similarity, double min_cdf_norm) {
  return similarity + min_cdf_norm;
}

inline double acceptance_probability(std::size_t from_degree) {
  return from_degree == 0 ? 1.0 : 1.0 / static_cast<double>(from_degree);
}

struct TraceEntry {
  msg::MessageId sim_id = 0;
  NodeId node = 0;
  Day day = 0;
  msg::TraceId parent = msg::kNoTrace;
};

// Per-copy hop traces stored as a parent-linked forest: copies that share a
// prefix share its entries.
class HopTracer {
 public:
  msg::TraceId record_hop(msg::MessageId sim_id, msg::TraceId parent, NodeId node, Day day);
  // Sender first, newest hop last.
  std::vector<TraceEntry> trace(msg::TraceId id) const;
  std::vector<NodeId> path(msg::TraceId id) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const TraceEntry& entry(msg::TraceId id) const { return entries_.at(id); }

  // Drops entries no live trace reaches and rewrites the live ids in place.
  // Entry order is kept, so parents still precede children.
  void compact(std::span<msg::TraceId* const> live);

 private:
  std::vector<TraceEntry> entries_;
};

// Messages a node has already taken into its output queue, keyed by
// simulation id. A simulator-side stand-in: the unencrypted simulation lets a
// node tell copies of one message apart.
class HeldMessages {
 public:
  bool contains(msg::MessageId id) const noexcept {
    const std::size_t w = id / 64;
    return w < bits_.size() && (bits_[w] >> (id % 64) & 1U) != 0;
  }
  void insert(msg::MessageId id) {
    const std::size_t w = id / 64;
    if (w >= bits_.size()) bits_.resize(w + 1, 0);
    bits_[w] |= std::uint64_t{1} << (id % 64);
  }

 private:
  std::vector<std::uint64_t> bits_;
};

struct NeighbourUploads {
  NodeId neighbour = 0;
  // Oldest first; only the last uploads_window are considered.
  std::span<const msg::Upload> uploads;
};

// Inputs a node reads during its pull round. `estimates` is indexed by node id
// but only the node's own entry and its neighbours' entries are read.
struct PullContext {
  NodeId self = 0;
  const graph::SocialGraph* graph = nullptr;
  std::span<const std::optional<delay::DelayMoments>> estimates;
  const msg::NodeKeys* keys = nullptr;
  msg::CryptoContext crypto;
  HopTracer* tracer = nullptr;
  // When set, messages already held are skipped and accepted ones recorded.
  HeldMessages* held = nullptr;
};

struct Arrival {
  msg::BlindspotMessage message;
  NodeId from = 0;
  bool duplicate = false;
};

struct PullOutcome {
  std::vector<Arrival> for_me;
  std::size_t for_neighbour = 0;
  std::size_t neighbour_duplicates = 0;
  std::size_t candidates = 0;  // unrecognized messages tossed for
  std::size_t accepted = 0;
};

// One upload session's pull: gather unexpired messages from unseen recent
// uploads, divert recognized ones, toss a 1/deg(from) coin for each of the
// rest and queue the winners for output in ascending score order.
PullOutcome pull_round(const PullContext& ctx, msg::MessageQueues& queues,
                       std::span<const NeighbourUploads> recent, const RoutingParams& params,
                       Day day, Rng& rng);

}  // namespace blindspot::routing
