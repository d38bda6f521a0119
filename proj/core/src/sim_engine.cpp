#include "blindspot/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "blindspot/error.hpp"
#include "blindspot/random.hpp"

namespace blindspot::sim {
namespace {

// Stream ids for derive_seed; each consumer gets an independent generator.
enum Stream : std::uint64_t {
  kDayOrder = 1,
  kCoinToss = 2,
  kNonces = 3,
  kCrypto = 4,
  kRemoval = 5,
  kJitter = 6,
  kSimIds = 7,
};

// Hop entries kept before the tracer is first compacted.
constexpr std::size_t kTracerFloor = std::size_t{1} << 22;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct NodeState {
  msg::MessageQueues queues;
  std::vector<msg::Upload> recent;  // oldest first, at most uploads_window
  std::uint64_t next_seq = 1;
  std::vector<delay::Hours> gaps;
  std::optional<delay::Hours> last_upload_hour;
  std::vector<std::uint32_t> month_days;  // upload count per day of the current month
  bool removed = false;
  msg::NodeKeys keys;
  routing::HeldMessages held;
};

struct PlannedMessage {
  Day day;
  std::size_t pair_index;
  int month;
  int ordinal;
};

void validate(const SimConfig& c, const graph::SocialGraph& g,
              std::span<const graph::UploadBehaviour> behaviours) {
  if (c.months <= 0 || c.days_per_month <= 0) throw InvalidInput("months and days_per_month must be positive");
  if (c.messages_per_pair_per_month < 0) throw InvalidInput("messages_per_pair_per_month must be >= 0");
  if (c.routing.capacity == 0 || c.routing.uploads_window == 0 || c.routing.estimate_window == 0 ||
      c.routing.ttl_days <= 0) {
    throw InvalidInput("routing parameters must be positive");
  }
  if (behaviours.size() != g.node_count()) throw InvalidInput("need one upload behaviour per node");
  for (const auto& b : behaviours) {
    if (b.monthly_counts.size() < static_cast<std::size_t>(c.months)) {
      throw InvalidInput("upload behaviour shorter than the configured run");
    }
  }
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const auto& p : c.pairs) {
    if (!g.contains(p.sender) || !g.contains(p.receiver)) throw InvalidInput("pair references an unknown node");
    if (p.sender == p.receiver) throw InvalidInput("pair members must be distinct");
    if (!seen.emplace(p.sender, p.receiver).second) throw InvalidInput("duplicate pair");
  }
  if (c.removal && (c.removal->fraction < 0.0 || c.removal->fraction >= 1.0)) {
    throw InvalidInput("removal fraction must lie in [0, 1)");
  }
}

ure::Bytes expected_payload(const MessageRecord& r, int ordinal, std::size_t size) {
  const std::string tag = "pair " + std::to_string(r.pair_index) + " month " + std::to_string(r.month) +
                          " #" + std::to_string(ordinal);
  ure::Bytes out(size);
  for (std::size_t i = 0; i < size; ++i) out[i] = static_cast<std::uint8_t>(tag[i % tag.size()]);
  return out;
}

}  // namespace

std::string to_string(RemovalStrategy s) {
  return s == RemovalStrategy::kRandom ? "random" : "high_degree";
}

RemovalStrategy removal_strategy_from_string(const std::string& s) {
  if (s == "random") return RemovalStrategy::kRandom;
  if (s == "high_degree") return RemovalStrategy::kHighDegree;
  throw InvalidInput("unknown removal strategy '" + s + "'");
}

std::vector<NodeId> apply_removal(const graph::SocialGraph& g, RemovalStrategy strategy,
                                  double fraction, std::span<const NodeId> protect,
                                  std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw InvalidInput("removal fraction must lie in [0, 1)");
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(g.node_count())));
  std::vector<bool> is_protected(g.node_count(), false);
  for (NodeId v : protect) {
    if (!g.contains(v)) throw InvalidInput("protected node out of range");
    is_protected[v] = true;
  }
  std::vector<NodeId> eligible;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (!is_protected[v]) eligible.push_back(v);
  }
  if (k > eligible.size()) {
    throw Infeasible("cannot remove " + std::to_string(k) + " nodes; only " +
                     std::to_string(eligible.size()) + " are unprotected");
  }
  if (strategy == RemovalStrategy::kRandom) {
    Rng rng(seed);
    rng.shuffle(eligible.begin(), eligible.end());
  } else {
    std::stable_sort(eligible.begin(), eligible.end(),
                     [&](NodeId a, NodeId b) { return g.degree(a) > g.degree(b); });
  }
  eligible.resize(k);
  std::sort(eligible.begin(), eligible.end());
  return eligible;
}

std::vector<Pair> sample_pairs(const graph::SocialGraph& g, std::size_t count, std::uint64_t seed) {
  const auto labels = g.component_labels();
  std::vector<std::size_t> component_size(g.node_count(), 0);
  for (auto l : labels) ++component_size[l];
  std::uint64_t feasible = 0;
  for (auto s : component_size) feasible += static_cast<std::uint64_t>(s) * (s > 0 ? s - 1 : 0);
  if (count > feasible) {
    throw Infeasible("only " + std::to_string(feasible) + " connected ordered pairs exist");
  }
  Rng rng(seed);
  std::set<std::pair<NodeId, NodeId>> chosen;
  std::vector<Pair> out;
  out.reserve(count);
  while (out.size() < count) {
    const auto a = static_cast<NodeId>(rng.below(g.node_count()));
    const auto b = static_cast<NodeId>(rng.below(g.node_count()));
    if (a == b || labels[a] != labels[b]) continue;
    if (chosen.emplace(a, b).second) out.push_back({a, b});
  }
  return out;
}

SimMetrics run(const SimConfig& config, const graph::SocialGraph& g,
               std::span<const graph::UploadBehaviour> behaviours, const EngineHooks& hooks) {
  validate(config, g, behaviours);
  const std::size_t n = g.node_count();
  const int dpm = config.days_per_month;
  const Day total_days = config.total_days();
  const auto& rp = config.routing;

  Rng coin(derive_seed(config.seed, kCoinToss));
  ure::Randomness nonce_rnd(derive_seed(config.seed, kNonces));

  std::optional<ure::GroupParams> params;
  std::optional<ure::Randomness> crypto_rnd;
  std::vector<ure::KeyPair> message_keys, neighbourhood_keys;
  msg::CryptoContext crypto;
  if (config.crypto_enabled) {
    params = ure::group_for_bits(config.crypto_bits, config.seed);
    if (params->block_capacity() < ure::kNonceBytes + msg::encode_address(0).size()) {
      throw InvalidInput("crypto_bits too small: the envelope must fit one group element");
    }
    crypto_rnd.emplace(derive_seed(config.seed, kCrypto));
    crypto = {&*params, &*crypto_rnd};
    for (std::size_t v = 0; v < n; ++v) {
      message_keys.push_back(ure::keygen(*params, *crypto_rnd));
      neighbourhood_keys.push_back(ure::keygen(*params, *crypto_rnd));
    }
  }

  std::vector<NodeState> nodes(n);
  std::vector<std::optional<delay::DelayMoments>> estimates(n);
  for (NodeId v = 0; v < n; ++v) {
    auto& keys = nodes[v].keys;
    keys.self = v;
    const auto nbrs = g.neighbours(v);
    keys.neighbours.assign(nbrs.begin(), nbrs.end());
    if (config.crypto_enabled) {
      keys.message_key = message_keys[v].priv;
      keys.neighbourhood_keys.push_back({v, neighbourhood_keys[v].priv});
      for (NodeId u : nbrs) keys.neighbourhood_keys.push_back({u, neighbourhood_keys[u].priv});
    }
    // Friends know each other's upload habits from the start: seed the
    // estimate with the first active month's inter-upload time.
    for (int m = 0; m < config.months; ++m) {
      if (auto h = graph::inter_upload_hours(behaviours[v].monthly_counts[m])) {
        nodes[v].gaps.push_back(std::max<delay::Hours>(1, std::llround(*h)));
        estimates[v] = delay::DelayMoments::of_gaps(nodes[v].gaps, rp.estimate_window);
        break;
      }
    }
  }

  // Message plan, in creation order.
  std::vector<PlannedMessage> plan;
  {
    Rng jitter(derive_seed(config.seed, kJitter));
    const int per_month = config.messages_per_pair_per_month;
    for (int m = 0; m < config.months; ++m) {
      for (std::size_t p = 0; p < config.pairs.size(); ++p) {
        for (int k = 0; k < per_month; ++k) {
          int offset = (k * dpm) / std::max(per_month, 1);
          if (config.message_day_jitter) offset = static_cast<int>(jitter.below(static_cast<std::uint64_t>(dpm)));
          plan.push_back({m * dpm + offset, p, m, k});
        }
      }
    }
    std::stable_sort(plan.begin(), plan.end(),
                     [](const PlannedMessage& a, const PlannedMessage& b) { return a.day < b.day; });
  }

  SimMetrics metrics;
  metrics.messages = plan.size();
  metrics.records.resize(plan.size());
  std::vector<msg::MessageId> id_of(plan.size());
  std::iota(id_of.begin(), id_of.end(), msg::MessageId{0});
  if (config.sim_id_permutation_seed) {
    Rng rng(derive_seed(*config.sim_id_permutation_seed, kSimIds));
    rng.shuffle(id_of.begin(), id_of.end());
  }
  std::vector<std::size_t> record_of(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    auto& r = metrics.records[i];
    r.sim_id = id_of[i];
    r.pair_index = plan[i].pair_index;
    r.sender = config.pairs[plan[i].pair_index].sender;
    r.receiver = config.pairs[plan[i].pair_index].receiver;
    r.month = plan[i].month;
    r.created_day = plan[i].day;
    record_of[id_of[i]] = i;
  }

  metrics.upload_digest.assign(n, kFnvOffset);
  metrics.upload_totals.assign(n, 0);
  if (config.record_upload_log) metrics.upload_log.resize(n);
  metrics.live_copies_per_day.reserve(static_cast<std::size_t>(total_days));

  Day removal_day = -1;
  if (config.removal && config.removal->fraction > 0.0) {
    removal_day = config.removal->at_day.value_or(total_days / 2);
  }

  routing::HopTracer tracer;
  std::size_t traced_after_compact = 0;

  const auto deliver = [&](NodeId dest, const msg::BlindspotMessage& m, Day day) {
    auto& rec = metrics.records[record_of.at(m.sim_id)];
    ++rec.copies_received;
    if (rec.first_delivered_day) return;
    rec.first_delivered_day = day;
    for (const auto& hop : tracer.trace(m.trace)) {
      rec.first_delivery_path.push_back(hop.node);
      rec.first_delivery_days.push_back(hop.day);
    }
    if (m.sealed()) {
      const auto plain = ure::open_payload(*params, m.sealed_message().payload_blocks,
                                           *nodes[dest].keys.message_key);
      const auto i = record_of.at(m.sim_id);
      rec.payload_ok = plain && *plain == expected_payload(rec, plan[i].ordinal, config.payload_bytes);
    }
  };

  std::size_t next_planned = 0;
  std::vector<NodeId> order;
  order.reserve(n);
  std::vector<routing::NeighbourUploads> recent;

  const graph::SocialGraph* topology = &g;
  graph::SocialGraph detached;
  for (Day day = 0; day < total_days; ++day) {
    const int month = day / dpm;
    const int day_of_month = day % dpm;
    if (day_of_month == 0) {
      for (NodeId v = 0; v < n; ++v) {
        nodes[v].month_days = graph::month_day_counts(behaviours[v].monthly_counts[month], dpm);
      }
    }

    if (day == removal_day) {
      std::vector<NodeId> protect;
      for (const auto& p : config.pairs) {
        protect.push_back(p.sender);
        protect.push_back(p.receiver);
      }
      metrics.removed = apply_removal(g, config.removal->strategy, config.removal->fraction, protect,
                                      derive_seed(config.seed, kRemoval));
      for (NodeId v : metrics.removed) {
        nodes[v].removed = true;
        nodes[v].queues = {};
      }
      if (config.removal->detach) {
        std::vector<graph::Edge> kept;
        for (const auto& [a, b] : g.edges()) {
          if (!nodes[a].removed && !nodes[b].removed) kept.emplace_back(a, b);
        }
        detached = graph::SocialGraph::from_edges(n, kept);
        topology = &detached;
      }
    }

    // New messages enter their sender's output queue.
    for (; next_planned < plan.size() && plan[next_planned].day == day; ++next_planned) {
      auto& rec = metrics.records[next_planned];
      auto& sender = nodes[rec.sender];
      if (sender.removed) continue;
      msg::DestinationKeys dest{rec.receiver, msg::encode_address(rec.receiver), {}, {}};
      if (config.crypto_enabled) {
        dest.message_key = message_keys[rec.receiver].pub;
        dest.neighbourhood_key = neighbourhood_keys[rec.receiver].pub;
      }
      const auto payload = config.crypto_enabled
                               ? expected_payload(rec, plan[next_planned].ordinal, config.payload_bytes)
                               : ure::Bytes{};
      msg::construct_message(sender.queues, dest, payload, day, rec.sim_id, nonce_rnd, crypto);
      auto& queued = sender.queues.output;
      // The new message sits behind older own messages; tag its trace root.
      const auto it = std::find_if(queued.begin(), queued.end(), [&](const msg::QueuedMessage& q) {
        return q.message.sim_id == rec.sim_id && q.message.trace == msg::kNoTrace;
      });
      it->message.trace = tracer.record_hop(rec.sim_id, msg::kNoTrace, rec.sender, day);
      sender.held.insert(rec.sim_id);
      ++metrics.copies_sprayed;
    }

    order.clear();
    for (NodeId v = 0; v < n; ++v) {
      if (!nodes[v].removed && nodes[v].month_days[static_cast<std::size_t>(day_of_month)] > 0) {
        order.push_back(v);
      }
    }
    Rng day_rng(derive_seed(derive_seed(config.seed, kDayOrder), static_cast<std::uint64_t>(day)));
    day_rng.shuffle(order.begin(), order.end());

    for (NodeId v : order) {
      auto& node = nodes[v];
      const std::uint32_t scheduled = node.month_days[static_cast<std::size_t>(day_of_month)];
      const std::uint32_t uploads =
          hooks.upload_count ? hooks.upload_count(v, day, scheduled, node.queues.output.size()) : scheduled;
      if (uploads == 0) continue;

      // Pull: neighbours' recent uploads, then messages neighbours are
      // holding for this node.
      recent.clear();
      for (NodeId u : topology->neighbours(v)) {
        if (!nodes[u].recent.empty()) recent.push_back({u, nodes[u].recent});
      }
      routing::PullContext ctx{v, topology, estimates, &node.keys, crypto, &tracer,
                               config.holder_dedup ? &node.held : nullptr};
      auto outcome = routing::pull_round(ctx, node.queues, recent, rp, day, coin);
      metrics.copies_sprayed += outcome.accepted + outcome.for_neighbour;
      for (const auto& arrival : outcome.for_me) deliver(v, arrival.message, day);

      for (NodeId u : topology->neighbours(v)) {
        if (nodes[u].removed) continue;
        auto& direct = nodes[u].queues.direct;
        const auto it = direct.find(v);
        if (it == direct.end()) continue;
        for (auto& m : it->second) {
          if (msg::expired(m, day, rp.ttl_days)) continue;
          m.trace = tracer.record_hop(m.sim_id, m.trace, v, day);
          msg::check_delivery(m, node.keys, node.queues, crypto);
          deliver(v, m, day);
        }
        direct.erase(it);
      }

      // Upload session: `uploads` images, each carrying up to capacity.
      for (std::uint32_t k = 0; k < uploads; ++k) {
        auto up = msg::pack_upload(node.queues, rp.capacity, day, {v, node.next_seq++}, crypto,
                                   rp.queue_policy);
        metrics.max_upload_load = std::max(metrics.max_upload_load, up.carried.size());
        if (hooks.on_publish) hooks.on_publish(up);
        node.recent.push_back(std::move(up));
        if (node.recent.size() > rp.uploads_window) node.recent.erase(node.recent.begin());

        const delay::Hours hour = static_cast<delay::Hours>(day) * graph::kHoursPerDay +
                                  (graph::kHoursPerDay * static_cast<delay::Hours>(k)) / uploads;
        if (node.last_upload_hour) {
          node.gaps.push_back(std::max<delay::Hours>(1, hour - *node.last_upload_hour));
          if (node.gaps.size() > rp.estimate_window) node.gaps.erase(node.gaps.begin());
        }
        node.last_upload_hour = hour;
      }
      if (!node.gaps.empty()) estimates[v] = delay::DelayMoments::of_gaps(node.gaps, rp.estimate_window);

      metrics.upload_digest[v] = fnv_mix(fnv_mix(metrics.upload_digest[v], static_cast<std::uint64_t>(day)), uploads);
      metrics.upload_totals[v] += uploads;
      if (config.record_upload_log) metrics.upload_log[v].push_back({day, uploads});
    }

    std::uint64_t live = 0;
    for (auto& node : nodes) {
      msg::expire(node.queues, day, rp.ttl_days);
      live += node.queues.live_messages();
    }
    metrics.live_copies_per_day.push_back(live);

    if (tracer.size() > std::max<std::size_t>(kTracerFloor, 2 * traced_after_compact)) {
      std::vector<msg::TraceId*> roots;
      for (auto& node : nodes) {
        for (auto& q : node.queues.output) roots.push_back(&q.message.trace);
        for (auto& [dest, held] : node.queues.direct) {
          for (auto& m : held) roots.push_back(&m.trace);
        }
        for (auto& up : node.recent) {
          for (auto& m : up.carried) roots.push_back(&m.trace);
        }
      }
      tracer.compact(roots);
      traced_after_compact = tracer.size();
    }
  }

  double delay_sum = 0.0;
  std::uint64_t copies = 0;
  for (const auto& r : metrics.records) {
    if (!r.first_delivered_day) continue;
    ++metrics.delivered;
    delay_sum += *r.first_delivered_day - r.created_day;
    copies += r.copies_received;
  }
  if (metrics.messages > 0) {
    metrics.delivery_rate = static_cast<double>(metrics.delivered) / static_cast<double>(metrics.messages);
  }
  if (metrics.delivered > 0) {
    metrics.mean_delay_days = delay_sum / static_cast<double>(metrics.delivered);
    metrics.duplicates_per_delivered = static_cast<double>(copies) / static_cast<double>(metrics.delivered);
  }
  return metrics;
}

std::vector<SweepRow> congestion_sweep(const SimConfig& base, const graph::SocialGraph& g,
                                       std::span<const graph::UploadBehaviour> behaviours,
                                       std::span<const std::size_t> pair_counts,
                                       std::uint64_t pair_seed) {
  std::vector<SweepRow> rows;
  for (std::size_t count : pair_counts) {
    SimConfig cfg = base;
    cfg.pairs = sample_pairs(g, count, pair_seed);
    rows.push_back({count, run(cfg, g, behaviours)});
  }
  return rows;
}

bool indistinguishability_check(const SimConfig& config, const graph::SocialGraph& g,
                                std::span<const graph::UploadBehaviour> behaviours,
                                const EngineHooks& hooks) {
  SimConfig quiet = config;
  quiet.pairs.clear();
  const auto a = run(quiet, g, behaviours, hooks);
  const auto b = run(config, g, behaviours, hooks);
  return a.upload_digest == b.upload_digest && a.upload_totals == b.upload_totals &&
         a.upload_log == b.upload_log;
}

}  // namespace blindspot::sim
