#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "blindspot/delay_model.hpp"

namespace blindspot::graph {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

inline constexpr std::size_t kDefaultMonths = 64;
inline constexpr int kDefaultDaysPerMonth = 30;
inline constexpr double kHoursPerMonth = 720.0;
inline constexpr int kHoursPerDay = 24;

// Undirected simple graph over dense ids [0, node_count()), stored as sorted
// adjacency lists. Immutable after construction.
class SocialGraph {
 public:
  SocialGraph() = default;

  // Duplicate edges (in either orientation) collapse to one. Self-loops and
  // out-of-range endpoints are rejected.
  static SocialGraph from_edges(std::size_t node_count, std::span<const Edge> edges);

  std::size_t node_count() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return adjacency_.size() / 2; }
  bool contains(NodeId v) const noexcept { return v < node_count(); }

  std::span<const NodeId> neighbours(NodeId v) const;
  std::size_t degree(NodeId v) const { return neighbours(v).size(); }
  bool adjacent(NodeId a, NodeId b) const;

  // Position of `neighbour` within neighbours(v), if adjacent.
  std::optional<std::size_t> neighbour_slot(NodeId v, NodeId neighbour) const;

  // Each edge once as (low, high), sorted.
  std::vector<Edge> edges() const;

  // Connected-component label per node; labels are the smallest node id in
  // each component.
  std::vector<NodeId> component_labels() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> adjacency_;
};

struct UploadBehaviour {
  NodeId node = 0;
  std::vector<std::uint32_t> monthly_counts;

  std::uint64_t total_uploads() const noexcept;
  friend bool operator==(const UploadBehaviour&, const UploadBehaviour&) = default;
};

struct LoadOptions {
  // Edges may name nodes that have no uploads row; such nodes get all-zero
  // counts and are listed in the report. Otherwise they are an error.
  bool allow_missing_uploads = false;
};

struct LoadReport {
  std::size_t edge_rows = 0;
  std::size_t duplicate_edge_rows = 0;
  std::size_t months = 0;
  std::vector<std::int64_t> nodes_without_uploads;  // original ids
};

struct Dataset {
  SocialGraph graph;
  std::vector<UploadBehaviour> behaviours;  // indexed by dense node id
  std::vector<std::int64_t> original_ids;   // dense id -> id used in the files
  LoadReport report;
};

// Edge CSV: `node_a,node_b`; uploads CSV: `node_id,m1,...,mK`. A first line
// that does not parse as numbers is treated as a header. Dense ids follow the
// ascending order of the original ids.
Dataset load_dataset(std::istream& edges, std::istream& uploads, const LoadOptions& options = {});

// Writes the CSV pair using original ids, rows sorted, no header.
void save_dataset(const Dataset& dataset, std::ostream& edges, std::ostream& uploads);

// Wraps a generated graph and behaviours as a dataset with identity ids.
Dataset make_dataset(SocialGraph graph, std::vector<UploadBehaviour> behaviours);

// Preferential attachment seeded from a complete graph on m nodes. Each later
// node attaches to m distinct existing nodes with probability proportional to
// degree, so edge_count() == m*(m-1)/2 + m*(n-m).
SocialGraph generate_ba(std::size_t n, std::size_t m, std::uint64_t seed);

struct SyntheticUploadParams {
  // Per-node mean monthly count is log-normal around this median (30 per
  // month, i.e. one upload a day).
  double median_monthly_uploads = 30.0;
  double node_sigma = 1.0;
  // Month-to-month log-normal jitter of each node's rate before Poisson
  // sampling.
  double month_sigma = 0.5;
};

// Clearly synthetic stand-in for a real upload-count dataset.
std::vector<UploadBehaviour> synthetic_behaviours(std::size_t node_count, std::size_t months,
                                                  std::uint64_t seed,
                                                  const SyntheticUploadParams& params = {});

// Node i receives record i, or record perm[i] of a seeded permutation. Node
// ids in the result are rewritten to match.
std::vector<UploadBehaviour> map_uploads(const SocialGraph& graph,
                                         std::span<const UploadBehaviour> behaviours,
                                         std::optional<std::uint64_t> permutation_seed = {});

// Pearson correlation between node degree and total uploads.
double degree_upload_correlation(const SocialGraph& graph,
                                 std::span<const UploadBehaviour> behaviours);

// 720 / count hours between uploads; nullopt for an inactive month.
std::optional<double> inter_upload_hours(std::uint32_t monthly_count);

struct ScheduledUpload {
  int day = 0;  // absolute simulation day
  std::uint32_t count = 0;

  friend bool operator==(const ScheduledUpload&, const ScheduledUpload&) = default;
};

// Per-day upload counts for one month with `count` uploads spread evenly.
std::vector<std::uint32_t> month_day_counts(std::uint32_t count, int days_per_month = kDefaultDaysPerMonth);

// Days with at least one upload, over all months.
std::vector<ScheduledUpload> upload_schedule(const UploadBehaviour& behaviour,
                                             int days_per_month = kDefaultDaysPerMonth);

// One sample of round(720 / count) hours per active month. Throws NoData when
// the node never uploads.
delay::DelayDistribution ground_truth_distribution(const UploadBehaviour& behaviour);

using EstimateMap = std::unordered_map<NodeId, delay::DelayDistribution>;

// What a node can see: its friends, their friend lists and their upload
// behaviour estimates. Nothing beyond two hops.
struct LocalView {
  NodeId center = 0;
  std::vector<NodeId> neighbours;  // sorted
  EstimateMap neighbour_distributions;
  std::unordered_map<NodeId, std::vector<NodeId>> neighbours_of_neighbours;

  bool is_neighbour(NodeId v) const;
  const delay::DelayDistribution* distribution(NodeId v) const;
};

LocalView local_view(const SocialGraph& graph, NodeId center, const EstimateMap& estimates);

}  // namespace blindspot::graph
