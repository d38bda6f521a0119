#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "blindspot/error.hpp"
#include "blindspot/social_graph.hpp"

using namespace blindspot;
using namespace blindspot::graph;

namespace {

SocialGraph star(std::size_t leaves) {
  std::vector<Edge> edges;
  for (NodeId v = 1; v <= leaves; ++v) edges.emplace_back(0, v);
  return SocialGraph::from_edges(leaves + 1, edges);
}

bool connected(const SocialGraph& g) {
  const auto labels = g.component_labels();
  return std::all_of(labels.begin(), labels.end(), [](NodeId l) { return l == 0; });
}

}  // namespace

TEST(Graph, CollapsesDuplicatesAndRejectsLoops) {
  const std::vector<Edge> edges{{0, 1}, {1, 0}, {0, 1}, {1, 2}};
  const auto g = SocialGraph::from_edges(3, edges);
  EXPECT_EQ(g.edge_count(), 2U);
  EXPECT_TRUE(g.adjacent(1, 0));
  EXPECT_FALSE(g.adjacent(0, 2));
  EXPECT_EQ(g.neighbour_slot(1, 2), std::optional<std::size_t>(1));
  EXPECT_FALSE(g.neighbour_slot(0, 2).has_value());
  EXPECT_THROW(SocialGraph::from_edges(3, std::vector<Edge>{{1, 1}}), InvalidInput);
  EXPECT_THROW(SocialGraph::from_edges(3, std::vector<Edge>{{0, 3}}), InvalidInput);
  EXPECT_THROW(g.neighbours(3), InvalidInput);
}

TEST(Graph, ComponentLabels) {
  const auto g = SocialGraph::from_edges(5, std::vector<Edge>{{0, 1}, {3, 4}});
  EXPECT_EQ(g.component_labels(), (std::vector<NodeId>{0, 0, 2, 3, 3}));
}

TEST(Loader, TwoNodeFile) {
  std::istringstream edges("0,1\n");
  std::istringstream uploads("0,3,0\n1,1,2\n");
  const auto ds = load_dataset(edges, uploads);
  EXPECT_EQ(ds.graph.node_count(), 2U);
  EXPECT_EQ(ds.graph.edge_count(), 1U);
  EXPECT_EQ(ds.behaviours[1].monthly_counts, (std::vector<std::uint32_t>{1, 2}));
  EXPECT_EQ(ds.report.months, 2U);
}

TEST(Loader, HeadersSparseIdsAndDuplicates) {
  std::istringstream edges("a,b\n100,7\n7,100\n100,7\n");
  std::istringstream uploads("node,m1\n100,5\n7,2\n");
  const auto ds = load_dataset(edges, uploads);
  EXPECT_EQ(ds.graph.edge_count(), 1U);
  EXPECT_EQ(ds.report.duplicate_edge_rows, 2U);
  EXPECT_EQ(ds.original_ids, (std::vector<std::int64_t>{7, 100}));
  EXPECT_EQ(ds.behaviours[0].monthly_counts[0], 2U);
}

TEST(Loader, ErrorsCarryLineNumbers) {
  std::istringstream edges("0,1\n0,x\n");
  std::istringstream uploads("0,1\n1,1\n");
  try {
    load_dataset(edges, uploads);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2U);
  }
  std::istringstream ragged_edges("0,1\n");
  std::istringstream ragged("0,1,2\n1,1\n");
  EXPECT_THROW(load_dataset(ragged_edges, ragged), ParseError);
}

TEST(Loader, DanglingEndpoint) {
  std::istringstream edges("0,1\n1,9\n");
  std::istringstream uploads("0,1\n1,1\n");
  EXPECT_THROW(load_dataset(edges, uploads), ParseError);

  std::istringstream edges2("0,1\n1,9\n");
  std::istringstream uploads2("0,1\n1,1\n");
  const auto ds = load_dataset(edges2, uploads2, {.allow_missing_uploads = true});
  EXPECT_EQ(ds.graph.node_count(), 3U);
  EXPECT_EQ(ds.report.nodes_without_uploads, (std::vector<std::int64_t>{9}));
  EXPECT_EQ(ds.behaviours[2].monthly_counts, (std::vector<std::uint32_t>{0}));
}

TEST(Loader, RoundTrip) {
  const auto g = generate_ba(200, 3, 4);
  auto ds = make_dataset(g, synthetic_behaviours(200, 6, 9));
  std::ostringstream e, u;
  save_dataset(ds, e, u);
  std::istringstream ein(e.str()), uin(u.str());
  const auto back = load_dataset(ein, uin);
  EXPECT_EQ(back.graph.edges(), g.edges());
  EXPECT_EQ(back.behaviours, ds.behaviours);
}

TEST(Ba, TreeForMOne) {
  const auto g = generate_ba(10, 1, 3);
  EXPECT_EQ(g.node_count(), 10U);
  EXPECT_EQ(g.edge_count(), 9U);
  EXPECT_TRUE(connected(g));
}

TEST(Ba, SizeDeterminismAndErrors) {
  const auto g = generate_ba(7200, 5, 1);
  EXPECT_EQ(g.node_count(), 7200U);
  EXPECT_EQ(g.edge_count(), 10U + 5U * 7195U);
  EXPECT_TRUE(connected(g));
  EXPECT_EQ(generate_ba(500, 5, 9).edges(), generate_ba(500, 5, 9).edges());
  EXPECT_NE(generate_ba(500, 5, 9).edges(), generate_ba(500, 5, 10).edges());
  EXPECT_THROW(generate_ba(5, 5, 1), InvalidInput);
  EXPECT_THROW(generate_ba(5, 0, 1), InvalidInput);
}

// Discrete power-law exponent by maximum likelihood with k_min = m; BA
// predicts a tail exponent near 3.
TEST(Ba, DegreeTailIsPowerLaw) {
  const std::size_t m = 5;
  double sum_alpha = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = generate_ba(7200, m, seed);
    double log_sum = 0.0;
    std::size_t count = 0;
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const auto k = static_cast<double>(g.degree(v));
      if (k < static_cast<double>(m)) continue;
      log_sum += std::log(k / (static_cast<double>(m) - 0.5));
      ++count;
    }
    sum_alpha += 1.0 + static_cast<double>(count) / log_sum;
  }
  const double alpha = sum_alpha / 10.0;
  EXPECT_GT(alpha, 2.5);
  EXPECT_LT(alpha, 3.5);
}

TEST(Uploads, InterUploadHours) {
  EXPECT_DOUBLE_EQ(*inter_upload_hours(720), 1.0);
  EXPECT_DOUBLE_EQ(*inter_upload_hours(30), 24.0);
  EXPECT_DOUBLE_EQ(*inter_upload_hours(1), 720.0);
  EXPECT_FALSE(inter_upload_hours(0).has_value());
}

TEST(Uploads, EvenSpacing) {
  const auto thirty = month_day_counts(30);
  EXPECT_TRUE(std::all_of(thirty.begin(), thirty.end(), [](auto c) { return c == 1; }));
  const auto fifteen = month_day_counts(15);
  for (std::size_t d = 0; d < 30; ++d) EXPECT_EQ(fifteen[d], d % 2 == 0 ? 1U : 0U) << d;
  const auto none = month_day_counts(0);
  EXPECT_TRUE(std::all_of(none.begin(), none.end(), [](auto c) { return c == 0; }));
  const auto busy = month_day_counts(75);
  EXPECT_EQ(std::accumulate(busy.begin(), busy.end(), 0U), 75U);
  EXPECT_EQ(*std::min_element(busy.begin(), busy.end()), 2U);
  EXPECT_EQ(*std::max_element(busy.begin(), busy.end()), 3U);
}

TEST(Uploads, Schedule) {
  const UploadBehaviour b{0, {2, 0, 1}};
  const auto s = upload_schedule(b);
  EXPECT_EQ(s, (std::vector<ScheduledUpload>{{0, 1}, {15, 1}, {60, 1}}));
}

TEST(Uploads, MappingAndCorrelation) {
  const auto g = generate_ba(100, 2, 1);
  const auto records = synthetic_behaviours(120, 4, 3);
  const auto same = map_uploads(g, records);
  ASSERT_EQ(same.size(), 100U);
  for (NodeId v = 0; v < 100; ++v) EXPECT_EQ(same[v].monthly_counts, records[v].monthly_counts);
  const auto shuffled = map_uploads(g, records, 5);
  EXPECT_EQ(shuffled, map_uploads(g, records, 5));
  EXPECT_EQ(shuffled[7].node, 7U);
  EXPECT_THROW(map_uploads(g, std::span(records).first(50)), InvalidInput);
  const double r = degree_upload_correlation(g, same);
  EXPECT_GE(r, -1.0);
  EXPECT_LE(r, 1.0);
}

TEST(Uploads, GroundTruthDistribution) {
  const auto d = ground_truth_distribution({0, {30, 0, 720, 30}});
  EXPECT_DOUBLE_EQ(d.probability(24), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(d.probability(1), 1.0 / 3.0);
  EXPECT_THROW(ground_truth_distribution({0, {0, 0}}), NoData);
}

TEST(LocalView, IsolatedAndStar) {
  const auto lonely = SocialGraph::from_edges(2, std::vector<Edge>{});
  EXPECT_TRUE(local_view(lonely, 0, {}).neighbours.empty());

  const auto g = star(4);
  EstimateMap est;
  for (NodeId v = 0; v <= 4; ++v) est.emplace(v, delay::DelayDistribution::point_mass(v + 1));
  const auto view = local_view(g, 0, est);
  EXPECT_EQ(view.neighbours, (std::vector<NodeId>{1, 2, 3, 4}));
  for (NodeId v = 1; v <= 4; ++v) {
    EXPECT_EQ(view.neighbours_of_neighbours.at(v), (std::vector<NodeId>{0}));
    ASSERT_NE(view.distribution(v), nullptr);
  }
  EXPECT_THROW(local_view(g, 9, est), InvalidInput);
}

TEST(LocalView, NeverBeyondTwoHops) {
  // Path 0-1-2-3: from 0 the view holds 1 and 1's friends, never 3.
  const auto g = SocialGraph::from_edges(4, std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}});
  EstimateMap est;
  for (NodeId v = 0; v < 4; ++v) est.emplace(v, delay::DelayDistribution::point_mass(1));
  const auto view = local_view(g, 0, est);
  EXPECT_EQ(view.neighbours, (std::vector<NodeId>{1}));
  EXPECT_EQ(view.neighbours_of_neighbours.size(), 1U);
  EXPECT_EQ(view.neighbours_of_neighbours.at(1), (std::vector<NodeId>{0, 2}));
  EXPECT_EQ(view.distribution(2), nullptr);
  EXPECT_EQ(view.distribution(3), nullptr);
  EXPECT_FALSE(view.is_neighbour(2));
}
