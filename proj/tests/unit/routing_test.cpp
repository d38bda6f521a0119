#include <gtest/gtest.h>

#include <cmath>

#include "blindspot/error.hpp"
#include "blindspot/routing.hpp"

using namespace blindspot;
using namespace blindspot::routing;
using blindspot::delay::DelayDistribution;
using blindspot::delay::DelayMoments;
using msg::BlindspotMessage;
using msg::ClearEnvelope;

namespace {

BlindspotMessage clear_message(msg::MessageId id, NodeId dest, msg::Day day = 0) {
  BlindspotMessage m;
  m.content = ClearEnvelope{{{static_cast<std::uint8_t>(id), static_cast<std::uint8_t>(id >> 8), 1}}, dest};
  m.sim_id = id;
  m.created_day = day;
  return m;
}

msg::Upload upload(NodeId from, std::uint64_t seq, std::vector<BlindspotMessage> carried, msg::Day day = 0) {
  return {{from, seq}, day, std::move(carried)};
}

// Everything pull_round reads, for one pulling node.
struct PullBench {
  graph::SocialGraph g;
  std::vector<std::optional<DelayMoments>> estimates;
  msg::NodeKeys keys;
  msg::MessageQueues queues;
  HopTracer tracer;

  PullBench(std::size_t n, std::vector<graph::Edge> edges, NodeId self)
      : g(graph::SocialGraph::from_edges(n, edges)), estimates(n) {
    for (NodeId v = 0; v < n; ++v) estimates[v] = DelayMoments::of(DelayDistribution::point_mass(24));
    keys.self = self;
    const auto nbrs = g.neighbours(self);
    keys.neighbours.assign(nbrs.begin(), nbrs.end());
  }
  PullContext ctx(HeldMessages* held = nullptr) {
    return {keys.self, &g, estimates, &keys, {}, &tracer, held};
  }
};

}  // namespace

TEST(Similarity, Fixtures) {
  // N(c) = {a=1, b=2, prev=3}, N(prev) = {a=1, c=0}.
  const std::vector<NodeId> center{1, 2, 3};
  const std::vector<NodeId> prev{0, 1};
  EXPECT_DOUBLE_EQ(neighbour_similarity(center, 0, prev, 3), 50.0);
  EXPECT_DOUBLE_EQ(neighbour_similarity(center, 0, prev, 3, SimilarityMode::kSharedOverPrevious), 100.0);
  const std::vector<NodeId> same_c{1, 2, 9}, same_p{0, 1, 2};
  EXPECT_DOUBLE_EQ(neighbour_similarity(same_c, 0, same_p, 9), 100.0);
  const std::vector<NodeId> dis_c{1, 9}, dis_p{0, 5};
  EXPECT_DOUBLE_EQ(neighbour_similarity(dis_c, 0, dis_p, 9), 0.0);
  const std::vector<NodeId> only_c{9}, only_p{0};
  EXPECT_DOUBLE_EQ(neighbour_similarity(only_c, 0, only_p, 9), 0.0);
}

TEST(Similarity, FromLocalView) {
  const auto g = graph::SocialGraph::from_edges(4, std::vector<graph::Edge>{{0, 1}, {0, 2}, {0, 3}, {1, 3}});
  const auto view = graph::local_view(g, 0, {});
  EXPECT_DOUBLE_EQ(neighbour_similarity(view, 3), 50.0);
  EXPECT_THROW(neighbour_similarity(view, 0), InvalidInput);
}

TEST(ExitScore, ConvolutionFixtures) {
  // Path 0 - 1 - 2 with 1 h deltas everywhere.
  const auto g = graph::SocialGraph::from_edges(3, std::vector<graph::Edge>{{0, 1}, {1, 2}});
  graph::EstimateMap est;
  for (NodeId v = 0; v < 3; ++v) est.emplace(v, DelayDistribution::point_mass(1));
  const auto view = graph::local_view(g, 1, est);
  const auto s = min_exit_cdf_score(view, 0, DelayDistribution::point_mass(1));
  EXPECT_DOUBLE_EQ(s.raw, 0.0);
  ASSERT_EQ(s.per_exit.size(), 1U);
  EXPECT_DOUBLE_EQ(s.per_exit.at(2), 0.0);

  const auto leaf = graph::local_view(g, 2, est);
  EXPECT_EQ(min_exit_cdf_score(leaf, 1, DelayDistribution::point_mass(1)).raw, kNoExitScore);
}

TEST(ExitScore, MomentsAgreeWithConvolution) {
  const auto g = graph::SocialGraph::from_edges(4, std::vector<graph::Edge>{{0, 1}, {1, 2}, {1, 3}});
  graph::EstimateMap est;
  est.emplace(0, DelayDistribution::from_dense(2, {0.5, 0.0, 0.5}));
  est.emplace(2, DelayDistribution::uniform(1, 6));
  est.emplace(3, DelayDistribution::from_dense(10, {0.1, 0.9}));
  const auto self = DelayDistribution::uniform(3, 5);
  const auto view = graph::local_view(g, 1, est);
  const auto exact = min_exit_cdf_score(view, 0, self);
  const std::vector<DelayMoments> exits{DelayMoments::of(est.at(2)), DelayMoments::of(est.at(3))};
  EXPECT_NEAR(min_exit_moment_score(DelayMoments::of(est.at(0)), DelayMoments::of(self), exits), exact.raw, 1e-9);
}

TEST(ExitScore, Normalization) {
  EXPECT_EQ(normalize_exit_scores(std::vector<double>{7.0}), std::vector<double>{0.0});
  EXPECT_EQ(normalize_exit_scores(std::vector<double>{3.0, 3.0}), (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(normalize_exit_scores(std::vector<double>{2.0, 4.0, 3.0, kNoExitScore}),
            (std::vector<double>{0.0, 100.0, 50.0, 100.0}));
}

TEST(MessageScore, Addition) {
  EXPECT_EQ(message_score(0, 0), 0);
  EXPECT_EQ(message_score(100, 100), 200);
  EXPECT_EQ(message_score(50, 25), 75);
  EXPECT_EQ(acceptance_probability(1), 1.0);
  EXPECT_EQ(acceptance_probability(4), 0.25);
}

TEST(Pull, DegreeOneSourceAlwaysForwarded) {
  // Path 0 - 1 - 2 - 3 - 4: node 1 pulls from leaf 0, messages head for 4.
  PullBench far(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 1);
  std::vector<BlindspotMessage> carried;
  for (msg::MessageId i = 0; i < 50; ++i) carried.push_back(clear_message(i, 4));
  const std::vector<msg::Upload> far_ups{upload(0, 1, carried)};
  const std::vector<NeighbourUploads> recent{{0, far_ups}};
  Rng rng(1);
  const auto out = pull_round(far.ctx(), far.queues, recent, {}, 0, rng);
  EXPECT_EQ(out.candidates, 50U);
  EXPECT_EQ(out.accepted, 50U);
  EXPECT_EQ(far.queues.output.size(), 50U);
}

TEST(Pull, AcceptanceRateFromDegreeFour) {
  // Node 0 has degree four; the puller 1 hangs off it.
  PullBench b(7, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 5}, {5, 6}}, 1);
  std::size_t accepted = 0, candidates = 0;
  Rng rng(7);
  for (std::uint64_t seq = 1; seq <= 100; ++seq) {
    std::vector<BlindspotMessage> carried;
    for (msg::MessageId i = 0; i < 100; ++i) carried.push_back(clear_message(static_cast<msg::MessageId>(seq * 100 + i), 6));
    const std::vector<msg::Upload> ups{upload(0, seq, carried)};
    const std::vector<NeighbourUploads> recent{{0, ups}};
    const auto out = pull_round(b.ctx(), b.queues, recent, {}, 0, rng);
    accepted += out.accepted;
    candidates += out.candidates;
  }
  ASSERT_EQ(candidates, 10000U);
  EXPECT_NEAR(static_cast<double>(accepted) / 10000.0, 0.25, 0.02);
}

TEST(Pull, ExpiredCandidatesLeaveQueueAlone) {
  PullBench b(4, {{0, 1}, {1, 2}, {2, 3}}, 1);
  const std::vector<msg::Upload> ups{upload(0, 1, {clear_message(1, 3, 0), clear_message(2, 3, 1)}, 10)};
  const std::vector<NeighbourUploads> recent{{0, ups}};
  Rng rng(1);
  const auto out = pull_round(b.ctx(), b.queues, recent, {}, 20, rng);
  EXPECT_EQ(out.candidates, 0U);
  EXPECT_TRUE(b.queues.output.empty());
  EXPECT_TRUE(b.queues.seen_uploads.contains({0, 1}));
}

TEST(Pull, DivertsRecognizedMessages) {
  PullBench b(4, {{0, 1}, {1, 2}, {2, 3}}, 1);
  const std::vector<msg::Upload> ups{upload(0, 1, {clear_message(1, 1), clear_message(2, 2), clear_message(1, 1)})};
  const std::vector<NeighbourUploads> recent{{0, ups}};
  Rng rng(1);
  const auto out = pull_round(b.ctx(), b.queues, recent, {}, 0, rng);
  ASSERT_EQ(out.for_me.size(), 2U);
  EXPECT_FALSE(out.for_me[0].duplicate);
  EXPECT_TRUE(out.for_me[1].duplicate);
  EXPECT_EQ(out.for_neighbour, 1U);
  ASSERT_EQ(b.queues.direct.at(2).size(), 1U);
  EXPECT_EQ(b.queues.direct.at(2)[0].sim_id, 2U);
  EXPECT_EQ(out.candidates, 0U);
}

TEST(Pull, WindowAndSeenUploads) {
  PullBench b(4, {{0, 1}, {1, 2}, {2, 3}}, 1);
  std::vector<msg::Upload> ups;
  for (std::uint64_t seq = 1; seq <= 8; ++seq) {
    ups.push_back(upload(0, seq, {clear_message(static_cast<msg::MessageId>(seq), 3)}));
  }
  Rng rng(1);
  RoutingParams params;
  const std::vector<NeighbourUploads> recent{{0, ups}};
  const auto first = pull_round(b.ctx(), b.queues, recent, params, 0, rng);
  EXPECT_EQ(first.candidates, params.uploads_window);
  const auto again = pull_round(b.ctx(), b.queues, recent, params, 0, rng);
  EXPECT_EQ(again.candidates, 0U);

  ups.push_back(upload(0, 9, {clear_message(9, 3)}));
  const std::vector<NeighbourUploads> more{{0, ups}};
  EXPECT_EQ(pull_round(b.ctx(), b.queues, more, params, 0, rng).candidates, 1U);
}

TEST(Pull, QueueOrderFollowsScore) {
  // Node 2 pulls from 1 (shares neighbour 3) and from 4 (shares nothing).
  PullBench b(6, {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {4, 5}}, 2);
  const std::vector<msg::Upload> from1{upload(1, 1, {clear_message(1, 5)})};
  const std::vector<msg::Upload> from4{upload(4, 1, {clear_message(2, 0)})};
  const std::vector<NeighbourUploads> recent{{1, from1}, {4, from4}};
  // Both sources have degree 2; try seeds until both are accepted.
  for (std::uint64_t seed = 1; seed < 100; ++seed) {
    PullBench fresh(6, {{1, 2}, {1, 3}, {2, 3}, {2, 4}, {4, 5}}, 2);
    Rng rng(seed);
    if (pull_round(fresh.ctx(), fresh.queues, recent, {}, 0, rng).accepted < 2) continue;
    ASSERT_EQ(fresh.queues.output.size(), 2U);
    EXPECT_EQ(fresh.queues.output[0].message.sim_id, 2U);
    EXPECT_LT(fresh.queues.output[0].score, fresh.queues.output[1].score);
    return;
  }
  FAIL() << "no seed accepted both candidates";
}

TEST(Pull, HeldMessagesAreSkipped) {
  PullBench b(4, {{0, 1}, {1, 2}, {2, 3}}, 1);
  HeldMessages held;
  held.insert(1);
  const std::vector<msg::Upload> ups{upload(0, 1, {clear_message(1, 3), clear_message(2, 3), clear_message(2, 3)})};
  const std::vector<NeighbourUploads> recent{{0, ups}};
  Rng rng(1);
  const auto out = pull_round(b.ctx(&held), b.queues, recent, {}, 0, rng);
  EXPECT_EQ(out.candidates, 2U);
  EXPECT_EQ(out.accepted, 1U);
  EXPECT_TRUE(held.contains(2));
  ASSERT_EQ(b.queues.output.size(), 1U);
  EXPECT_EQ(b.queues.output[0].message.sim_id, 2U);
}

TEST(Tracer, DistinctCopiesShareAPrefix) {
  HopTracer t;
  const auto root = t.record_hop(7, msg::kNoTrace, 0, 0);
  const auto via1 = t.record_hop(7, root, 1, 1);
  const auto via2 = t.record_hop(7, root, 2, 1);
  const auto end1 = t.record_hop(7, via1, 3, 2);
  EXPECT_EQ(t.path(end1), (std::vector<NodeId>{0, 1, 3}));
  EXPECT_EQ(t.path(via2), (std::vector<NodeId>{0, 2}));
  EXPECT_EQ(t.trace(end1).back().day, 2);

  msg::TraceId live[] = {end1, via2};
  msg::TraceId* roots[] = {&live[0], &live[1]};
  t.compact(roots);
  EXPECT_EQ(t.size(), 4U);
  msg::TraceId only = live[1];
  msg::TraceId* one[] = {&only};
  t.compact(one);
  EXPECT_EQ(t.size(), 2U);
  EXPECT_EQ(t.path(only), (std::vector<NodeId>{0, 2}));
}
