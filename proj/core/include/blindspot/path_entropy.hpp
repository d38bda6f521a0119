#pragma once

// How consistent are the routes a pair's messages take? Each delivered
// message's route is scored against the true upload behaviour of the nodes on
// it; a pair whose scores cluster has low entropy.

#include <cstddef>
#include <span>
#include <vector>

#include "blindspot/sim_engine.hpp"
#include "blindspot/social_graph.hpp"

namespace blindspot::analysis {

using graph::NodeId;

struct DeliveredPath {
  std::size_t pair_index = 0;
  msg::MessageId sim_id = 0;
  std::vector<NodeId> path;  // sender first
};

std::vector<DeliveredPath> delivered_paths(const sim::SimMetrics& metrics);

// Min-max normalizes to [0, 1], histograms into `bins` equal-width bins and
// returns the Shannon entropy in bits. Fewer than two distinct values give 0.
double shannon_entropy_of_scores(std::span<const double> scores, std::size_t bins = 10);

struct PairEntropy {
  std::size_t pair_index = 0;
  std::size_t deliveries = 0;
  double entropy = 0.0;
  std::vector<double> scores;  // in delivery order
};

struct EntropyReport {
  std::size_t bins = 10;
  std::vector<PairEntropy> pairs;
  std::vector<std::size_t> excluded_pairs;  // no delivered message
  double median_entropy = 0.0;
  double max_entropy = 0.0;  // log2(bins)
  // Pairs per entropy bin; `bins` equal-width bins over [0, max_entropy].
  std::vector<std::size_t> entropy_histogram;
};

// `pair_indices` lists every pair to analyze; pairs without a delivered path
// are excluded and reported.
EntropyReport path_entropy_analysis(std::span<const DeliveredPath> paths,
                                    std::span<const std::size_t> pair_indices,
                                    std::span<const graph::UploadBehaviour> behaviours,
                                    std::size_t bins = 10);

// Every pair that had at least one message in the run.
EntropyReport path_entropy_analysis(const sim::SimMetrics& metrics,
                                    std::span<const graph::UploadBehaviour> behaviours,
                                    std::size_t bins = 10);

}  // namespace blindspot::analysis
