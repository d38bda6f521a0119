#include "blindspot/path_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include "blindspot/delay_model.hpp"
#include "blindspot/error.hpp"

namespace blindspot::analysis {

std::vector<DeliveredPath> delivered_paths(const sim::SimMetrics& metrics) {
  std::vector<DeliveredPath> out;
  for (const auto& r : metrics.records) {
    if (!r.first_delivered_day) continue;
    out.push_back({r.pair_index, r.sim_id, r.first_delivery_path});
  }
  return out;
}

double shannon_entropy_of_scores(std::span<const double> scores, std::size_t bins) {
  if (bins == 0) throw InvalidInput("bin count must be positive");
  if (scores.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (!(*hi > *lo)) return 0.0;
  std::vector<std::size_t> counts(bins, 0);
  for (double s : scores) {
    const double unit = (s - *lo) / (*hi - *lo);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(unit * static_cast<double>(bins)));
    ++counts[b];
  }
  double h = 0.0;
  const double total = static_cast<double>(scores.size());
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

EntropyReport path_entropy_analysis(std::span<const DeliveredPath> paths,
                                    std::span<const std::size_t> pair_indices,
                                    std::span<const graph::UploadBehaviour> behaviours,
                                    std::size_t bins) {
  if (bins == 0) throw InvalidInput("bin count must be positive");
  EntropyReport report;
  report.bins = bins;
  report.max_entropy = std::log2(static_cast<double>(bins));

  // Ground-truth distributions, built lazily.
  std::vector<std::optional<delay::DelayDistribution>> truth(behaviours.size());
  const auto truth_of = [&](NodeId v) -> const delay::DelayDistribution& {
    if (v >= behaviours.size()) throw InvalidInput("path node has no upload behaviour");
    if (!truth[v]) truth[v] = graph::ground_truth_distribution(behaviours[v]);
    return *truth[v];
  };

  // Routes repeat a lot; convolve each distinct one once.
  std::map<std::vector<NodeId>, delay::DelayCdf> cdfs;
  for (const auto& p : paths) {
    if (p.path.empty()) throw InvalidInput("delivered message without a trace");
    if (cdfs.contains(p.path)) continue;
    std::vector<delay::DelayDistribution> pdfs;
    pdfs.reserve(p.path.size());
    for (NodeId v : p.path) pdfs.push_back(truth_of(v));
    delay::DelayDistribution acc = pdfs.front();
    for (std::size_t i = 1; i < pdfs.size(); ++i) acc = delay::convolve(acc, pdfs[i]);
    cdfs.emplace(p.path, delay::to_cdf(acc));
  }

  // Pad every CDF with ones out to the longest delay seen.
  delay::Hours last = 0;
  for (const auto& [_, c] : cdfs) last = std::max(last, c.last_delay());
  std::map<std::vector<NodeId>, double> score_of;
  for (const auto& [path, c] : cdfs) {
    const auto len = static_cast<std::size_t>(last - c.first_delay() + 1);
    score_of.emplace(path, delay::cdf_score(delay::extend_cdf(c, len)));
  }

  std::map<std::size_t, PairEntropy> by_pair;
  for (std::size_t idx : pair_indices) by_pair[idx].pair_index = idx;
  for (const auto& p : paths) {
    const auto it = by_pair.find(p.pair_index);
    if (it == by_pair.end()) continue;
    it->second.scores.push_back(score_of.at(p.path));
    ++it->second.deliveries;
  }

  report.entropy_histogram.assign(bins, 0);
  std::vector<double> entropies;
  for (auto& [idx, pe] : by_pair) {
    if (pe.deliveries == 0) {
      report.excluded_pairs.push_back(idx);
      continue;
    }
    pe.entropy = shannon_entropy_of_scores(pe.scores, bins);
    entropies.push_back(pe.entropy);
    const double unit = report.max_entropy > 0.0 ? pe.entropy / report.max_entropy : 0.0;
    ++report.entropy_histogram[std::min(bins - 1, static_cast<std::size_t>(unit * static_cast<double>(bins)))];
    report.pairs.push_back(std::move(pe));
  }
  if (!entropies.empty()) {
    std::sort(entropies.begin(), entropies.end());
    const std::size_t mid = entropies.size() / 2;
    report.median_entropy = entropies.size() % 2 == 1 ? entropies[mid]
                                                      : 0.5 * (entropies[mid - 1] + entropies[mid]);
  }
  return report;
}

EntropyReport path_entropy_analysis(const sim::SimMetrics& metrics,
                                    std::span<const graph::UploadBehaviour> behaviours,
                                    std::size_t bins) {
  std::set<std::size_t> pairs;
  for (const auto& r : metrics.records) pairs.insert(r.pair_index);
  const std::vector<std::size_t> indices(pairs.begin(), pairs.end());
  const auto paths = delivered_paths(metrics);
  return path_entropy_analysis(paths, indices, behaviours, bins);
}

}  // namespace blindspot::analysis
