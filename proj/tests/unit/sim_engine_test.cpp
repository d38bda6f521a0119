#include <gtest/gtest.h>

#include <algorithm>

#include "blindspot/error.hpp"
#include "blindspot/sim_engine.hpp"

using namespace blindspot;
using namespace blindspot::sim;
using graph::Edge;
using graph::SocialGraph;
using graph::UploadBehaviour;

namespace {

std::vector<UploadBehaviour> flat(std::size_t n, int months, std::uint32_t per_month) {
  std::vector<UploadBehaviour> out(n);
  for (std::size_t v = 0; v < n; ++v) out[v] = {static_cast<NodeId>(v), std::vector<std::uint32_t>(months, per_month)};
  return out;
}

struct SmallWorld {
  SocialGraph g = graph::generate_ba(300, 3, 5);
  std::vector<UploadBehaviour> behaviours = graph::synthetic_behaviours(300, 4, 6);
  SimConfig config;

  SmallWorld() {
    config.months = 4;
    config.pairs = sample_pairs(g, 20, 3);
    config.seed = 11;
  }
};

bool same_outcome(const SimMetrics& a, const SimMetrics& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.first_delivered_day != y.first_delivered_day || x.copies_received != y.copies_received ||
        x.first_delivery_path != y.first_delivery_path) {
      return false;
    }
  }
  return a.copies_sprayed == b.copies_sprayed && a.live_copies_per_day == b.live_copies_per_day;
}

}  // namespace

TEST(Engine, SingleHopNextDay) {
  const auto g = SocialGraph::from_edges(2, std::vector<Edge>{{0, 1}});
  SimConfig c;
  c.months = 1;
  c.pairs = {{0, 1}};
  const auto m = run(c, g, flat(2, 1, 30));
  ASSERT_EQ(m.messages, 1U);
  EXPECT_EQ(m.delivered, 1U);
  EXPECT_LE(m.mean_delay_days, 1.0);
  EXPECT_EQ(m.records[0].first_delivery_path, (std::vector<NodeId>{0, 1}));
}

TEST(Engine, SilentSenderNeverDelivers) {
  const auto g = SocialGraph::from_edges(3, std::vector<Edge>{{0, 1}, {1, 2}});
  auto b = flat(3, 2, 30);
  b[0].monthly_counts.assign(2, 0);
  SimConfig c;
  c.months = 2;
  c.pairs = {{0, 2}, {2, 0}};
  const auto m = run(c, g, b);
  for (const auto& r : m.records) {
    if (r.pair_index == 0) EXPECT_FALSE(r.first_delivered_day.has_value());
  }
  EXPECT_LE(m.delivery_rate, 0.5);
  EXPECT_EQ(m.upload_totals[0], 0U);
}

TEST(Engine, DirectDeliveryThroughSharedNeighbourhood) {
  // 0 - 1 - 2: node 1 recognizes the message for 2 and holds it for 2's pull.
  const auto g = SocialGraph::from_edges(3, std::vector<Edge>{{0, 1}, {1, 2}});
  SimConfig c;
  c.months = 1;
  c.pairs = {{0, 2}};
  const auto m = run(c, g, flat(3, 1, 30));
  ASSERT_EQ(m.delivered, 1U);
  EXPECT_EQ(m.records[0].first_delivery_path, (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(m.records[0].copies_received, 1U);
}

TEST(Engine, RejectsBadConfig) {
  const auto g = SocialGraph::from_edges(3, std::vector<Edge>{{0, 1}, {1, 2}});
  const auto b = flat(3, 2, 30);
  SimConfig c;
  c.months = 2;
  c.pairs = {{0, 3}};
  EXPECT_THROW(run(c, g, b), InvalidInput);
  c.pairs = {{1, 1}};
  EXPECT_THROW(run(c, g, b), InvalidInput);
  c.pairs = {{0, 2}, {0, 2}};
  EXPECT_THROW(run(c, g, b), InvalidInput);
  c.pairs = {{0, 2}};
  c.months = 3;
  EXPECT_THROW(run(c, g, b), InvalidInput);
  c.months = 2;
  c.routing.capacity = 0;
  EXPECT_THROW(run(c, g, b), InvalidInput);
}

TEST(Engine, PathsAreWalksWithinTtl) {
  SmallWorld w;
  const auto m = run(w.config, w.g, w.behaviours);
  EXPECT_GT(m.delivered, 0U);
  EXPECT_GE(m.delivery_rate, 0.0);
  EXPECT_LE(m.delivery_rate, 1.0);
  for (const auto& r : m.records) {
    if (!r.first_delivered_day) continue;
    EXPECT_GE(r.copies_received, 1U);
    ASSERT_GE(r.first_delivery_path.size(), 2U);
    EXPECT_EQ(r.first_delivery_path.front(), r.sender);
    EXPECT_EQ(r.first_delivery_path.back(), r.receiver);
    EXPECT_EQ(r.first_delivery_days.front(), r.created_day);
    EXPECT_EQ(r.first_delivery_days.back(), *r.first_delivered_day);
    EXPECT_LE(*r.first_delivered_day - r.created_day, w.config.routing.ttl_days);
    for (std::size_t i = 1; i < r.first_delivery_path.size(); ++i) {
      EXPECT_TRUE(w.g.adjacent(r.first_delivery_path[i - 1], r.first_delivery_path[i]));
      EXPECT_LE(r.first_delivery_days[i - 1], r.first_delivery_days[i]);
    }
    // A node carries a message once, so the path never revisits it.
    auto nodes = r.first_delivery_path;
    std::sort(nodes.begin(), nodes.end());
    EXPECT_EQ(std::adjacent_find(nodes.begin(), nodes.end()), nodes.end());
  }
  EXPECT_LE(m.max_upload_load, w.config.routing.capacity);
}

TEST(Engine, SameSeedSameRun) {
  SmallWorld w;
  const auto a = run(w.config, w.g, w.behaviours);
  const auto b = run(w.config, w.g, w.behaviours);
  EXPECT_TRUE(same_outcome(a, b));
  w.config.seed = 12;
  EXPECT_FALSE(same_outcome(a, run(w.config, w.g, w.behaviours)));
}

TEST(Engine, SimIdsDoNotSteerRouting) {
  SmallWorld w;
  const auto a = run(w.config, w.g, w.behaviours);
  w.config.sim_id_permutation_seed = 99;
  const auto b = run(w.config, w.g, w.behaviours);
  EXPECT_NE(a.records[1].sim_id, b.records[1].sim_id);
  EXPECT_TRUE(same_outcome(a, b));
}

TEST(Engine, EncryptionDoesNotChangeRouting) {
  SmallWorld w;
  w.config.months = 1;
  w.config.pairs.resize(5);
  const auto clear = run(w.config, w.g, w.behaviours);
  w.config.crypto_enabled = true;
  w.config.crypto_bits = 64;
  EXPECT_THROW(run(w.config, w.g, w.behaviours), InvalidInput);
  w.config.crypto_bits = 256;
  const auto sealed = run(w.config, w.g, w.behaviours);
  EXPECT_TRUE(same_outcome(clear, sealed));
  std::size_t checked = 0;
  for (const auto& r : sealed.records) {
    if (!r.first_delivered_day) continue;
    ASSERT_TRUE(r.payload_ok.has_value());
    EXPECT_TRUE(*r.payload_ok);
    ++checked;
  }
  EXPECT_GT(checked, 0U);
}

TEST(Engine, UploadScheduleIgnoresTraffic) {
  SmallWorld w;
  w.config.record_upload_log = true;
  EXPECT_TRUE(indistinguishability_check(w.config, w.g, w.behaviours));
  // A node that uploads more when its queue is busy leaks its traffic.
  EngineHooks leaky;
  leaky.upload_count = [](NodeId, Day, std::uint32_t scheduled, std::size_t queued) {
    return scheduled + (queued > 0 ? 1U : 0U);
  };
  EXPECT_FALSE(indistinguishability_check(w.config, w.g, w.behaviours, leaky));
}

TEST(Engine, RemovalStopsNodes) {
  SmallWorld w;
  w.config.removal = RemovalConfig{RemovalStrategy::kHighDegree, 0.2, 30};
  const auto m = run(w.config, w.g, w.behaviours);
  EXPECT_EQ(m.removed.size(), 60U);
  std::vector<bool> gone(w.g.node_count(), false);
  for (NodeId v : m.removed) gone[v] = true;
  for (const auto& p : w.config.pairs) {
    EXPECT_FALSE(gone[p.sender]);
    EXPECT_FALSE(gone[p.receiver]);
  }
  for (const auto& r : m.records) {
    for (std::size_t i = 0; i < r.first_delivery_path.size(); ++i) {
      if (r.first_delivery_days[i] >= 30) EXPECT_FALSE(gone[r.first_delivery_path[i]]);
    }
  }
}

// Detached nodes stop counting towards their neighbours' degrees, so the
// remaining hops accept more readily than with silent members.
TEST(Engine, DetachedRemovalRaisesAcceptance) {
  SmallWorld w;
  w.config.removal = RemovalConfig{RemovalStrategy::kRandom, 0.5, 30};
  const auto detached = run(w.config, w.g, w.behaviours);
  w.config.removal->detach = false;
  const auto silent = run(w.config, w.g, w.behaviours);
  EXPECT_EQ(detached.removed, silent.removed);
  EXPECT_GT(detached.copies_sprayed, silent.copies_sprayed);
}

TEST(Removal, Strategies) {
  std::vector<Edge> edges;
  for (NodeId v = 1; v < 10; ++v) edges.emplace_back(0, v);
  edges.emplace_back(1, 2);
  const auto g = SocialGraph::from_edges(10, edges);
  EXPECT_TRUE(apply_removal(g, RemovalStrategy::kRandom, 0.0, {}, 1).empty());
  EXPECT_EQ(apply_removal(g, RemovalStrategy::kHighDegree, 0.1, {}, 1), (std::vector<NodeId>{0}));
  EXPECT_EQ(apply_removal(g, RemovalStrategy::kHighDegree, 0.3, {}, 1), (std::vector<NodeId>{0, 1, 2}));
  const std::vector<NodeId> keep{0};
  EXPECT_EQ(apply_removal(g, RemovalStrategy::kHighDegree, 0.2, keep, 1), (std::vector<NodeId>{1, 2}));
  const auto random = apply_removal(g, RemovalStrategy::kRandom, 0.5, keep, 4);
  EXPECT_EQ(random.size(), 5U);
  EXPECT_EQ(std::count(random.begin(), random.end(), 0U), 0);
  EXPECT_EQ(random, apply_removal(g, RemovalStrategy::kRandom, 0.5, keep, 4));
  const std::vector<NodeId> most{0, 1, 2, 3, 4, 5};
  EXPECT_THROW(apply_removal(g, RemovalStrategy::kRandom, 0.5, most, 1), Infeasible);
  EXPECT_THROW(apply_removal(g, RemovalStrategy::kRandom, 1.0, {}, 1), InvalidInput);
  EXPECT_EQ(removal_strategy_from_string(to_string(RemovalStrategy::kHighDegree)), RemovalStrategy::kHighDegree);
  EXPECT_THROW(removal_strategy_from_string("sideways"), InvalidInput);
}

TEST(Pairs, SameComponentAndDistinct) {
  const auto g = SocialGraph::from_edges(6, std::vector<Edge>{{0, 1}, {1, 2}, {3, 4}});
  const auto pairs = sample_pairs(g, 8, 2);
  ASSERT_EQ(pairs.size(), 8U);
  const auto labels = g.component_labels();
  for (const auto& p : pairs) {
    EXPECT_NE(p.sender, p.receiver);
    EXPECT_EQ(labels[p.sender], labels[p.receiver]);
  }
  EXPECT_EQ(pairs, sample_pairs(g, 8, 2));
  EXPECT_THROW(sample_pairs(g, 9, 2), Infeasible);
}

TEST(Sweep, OneRowPerCount) {
  SmallWorld w;
  w.config.months = 1;
  const std::vector<std::size_t> counts{2, 5};
  const auto rows = congestion_sweep(w.config, w.g, w.behaviours, counts, 4);
  ASSERT_EQ(rows.size(), 2U);
  EXPECT_EQ(rows[1].pair_count, 5U);
  EXPECT_EQ(rows[1].metrics.messages, 5U);
}
