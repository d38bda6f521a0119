#include "blindspot/routing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <variant>

#include "blindspot/error.hpp"

namespace blindspot::routing {
namespace {

// |A ∩ B|, |A|, |B| for sorted lists with one element excluded from each.
struct Overlap {
  std::size_t shared = 0;
  std::size_t a = 0;
  std::size_t b = 0;
};

Overlap overlap(std::span<const NodeId> a, NodeId skip_a, std::span<const NodeId> b, NodeId skip_b) {
  Overlap o;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() || j != b.end()) {
    if (i != a.end() && *i == skip_a) { ++i; continue; }
    if (j != b.end() && *j == skip_b) { ++j; continue; }
    if (j == b.end() || (i != a.end() && *i < *j)) {
      ++o.a;
      ++i;
    } else if (i == a.end() || *j < *i) {
      ++o.b;
      ++j;
    } else {
      ++o.shared;
      ++o.a;
      ++o.b;
      ++i;
      ++j;
    }
  }
  return o;
}

}  // namespace

double neighbour_similarity(std::span<const NodeId> center_neighbours, NodeId center,
                            std::span<const NodeId> prev_neighbours, NodeId prev,
                            SimilarityMode mode) {
  const Overlap o = overlap(center_neighbours, prev, prev_neighbours, center);
  const std::size_t denom =
      mode == SimilarityMode::kJaccard ? o.a + o.b - o.shared : o.b;
  if (denom == 0) return 0.0;
  return 100.0 * static_cast<double>(o.shared) / static_cast<double>(denom);
}

double neighbour_similarity(const LocalView& view, NodeId prev, SimilarityMode mode) {
  if (!view.is_neighbour(prev)) throw InvalidInput("previous hop is not a neighbour");
  const auto& prev_friends = view.neighbours_of_neighbours.at(prev);
  return neighbour_similarity(view.neighbours, view.center, prev_friends, prev, mode);
}

ExitScores min_exit_cdf_score(const LocalView& view, NodeId prev,
                              const delay::DelayDistribution& self_pdf) {
  if (!view.is_neighbour(prev)) throw InvalidInput("previous hop is not a neighbour");
  ExitScores out;
  const auto* prev_pdf = view.distribution(prev);
  if (!prev_pdf) return out;
  const auto head = delay::convolve(*prev_pdf, self_pdf);
  for (NodeId e : view.neighbours) {
    if (e == prev) continue;
    const auto* exit_pdf = view.distribution(e);
    if (!exit_pdf) continue;
    const double s = delay::cdf_score(delay::to_cdf(delay::convolve(head, *exit_pdf)));
    out.per_exit.emplace(e, s);
    out.raw = std::min(out.raw, s);
  }
  return out;
}

double min_exit_moment_score(const delay::DelayMoments& prev, const delay::DelayMoments& self,
                             std::span<const delay::DelayMoments> exits) {
  const delay::DelayMoments head = prev + self;
  double best = kNoExitScore;
  for (const auto& e : exits) best = std::min(best, delay::moment_route_score(head + e));
  return best;
}

std::vector<double> normalize_exit_scores(std::span<const double> raw) {
  double lo = kNoExitScore;
  double hi = -kNoExitScore;
  for (double r : raw) {
    if (std::isinf(r)) continue;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  std::vector<double> out(raw.size(), 0.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::isinf(raw[i])) {
      out[i] = 100.0;
    } else if (hi > lo) {
      out[i] = 100.0 * (raw[i] - lo) / (hi - lo);
    }
  }
  return out;
}

msg::TraceId HopTracer::record_hop(msg::MessageId sim_id, msg::TraceId parent, NodeId node, Day day) {
  entries_.push_back({sim_id, node, day, parent});
  return static_cast<msg::TraceId>(entries_.size() - 1);
}

std::vector<TraceEntry> HopTracer::trace(msg::TraceId id) const {
  std::vector<TraceEntry> out;
  for (auto cur = id; cur != msg::kNoTrace; cur = entries_.at(cur).parent) out.push_back(entries_[cur]);
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<NodeId> HopTracer::path(msg::TraceId id) const {
  std::vector<NodeId> out;
  for (const auto& e : trace(id)) out.push_back(e.node);
  return out;
}

void HopTracer::compact(std::span<msg::TraceId* const> live) {
  std::vector<bool> keep(entries_.size(), false);
  for (const msg::TraceId* id : live) {
    for (auto cur = *id; cur != msg::kNoTrace && !keep[cur]; cur = entries_[cur].parent) keep[cur] = true;
  }
  std::vector<msg::TraceId> remap(entries_.size(), msg::kNoTrace);
  std::size_t next = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!keep[i]) continue;
    auto e = entries_[i];
    if (e.parent != msg::kNoTrace) e.parent = remap[e.parent];
    remap[i] = static_cast<msg::TraceId>(next);
    entries_[next++] = e;
  }
  entries_.resize(next);
  entries_.shrink_to_fit();
  for (msg::TraceId* id : live) {
    if (*id != msg::kNoTrace) *id = remap[*id];
  }
}

namespace {

// Failures before the next success of a p-coin.
std::uint64_t coin_gap(double p, Rng& rng) {
  if (p >= 1.0) return 0;
  const double g = std::floor(std::log1p(-rng.uniform01()) / std::log1p(-p));
  return g >= 1e18 ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(g);
}

}  // namespace

PullOutcome pull_round(const PullContext& ctx, msg::MessageQueues& queues,
                       std::span<const NeighbourUploads> recent, const RoutingParams& params,
                       Day day, Rng& rng) {
  const auto& g = *ctx.graph;
  PullOutcome out;
  const auto hop = [&](msg::BlindspotMessage& m) {
    if (ctx.tracer) m.trace = ctx.tracer->record_hop(m.sim_id, m.trace, ctx.self, day);
  };

  // Gather from unseen uploads within each neighbour's recent window. The
  // coin for each unrecognized message is tossed on arrival: tosses are
  // independent, so walking the score-sorted list and tossing there picks
  // the same set. Only winners need a score. A run of independent p-coins is
  // the same process as geometric gaps between successes.
  queues.input.clear();
  // Clear envelopes can only be recognized for the closed neighbourhood.
  std::vector<bool> nearby(g.node_count(), false);
  nearby[ctx.self] = true;
  for (NodeId u : g.neighbours(ctx.self)) nearby[u] = true;
  std::vector<NodeId> sources;  // neighbours that supplied candidates
  for (const auto& nu : recent) {
    const auto window = nu.uploads.size() > params.uploads_window
                            ? nu.uploads.subspan(nu.uploads.size() - params.uploads_window)
                            : nu.uploads;
    const double accept = acceptance_probability(g.degree(nu.neighbour));
    std::uint64_t gap = coin_gap(accept, rng);
    bool supplied = false;
    // Newest first: an already seen upload means every older one was seen too.
    for (auto up = window.rbegin(); up != window.rend(); ++up) {
      if (queues.seen_uploads.contains(up->id)) break;
      for (const auto& m : up->carried) {
        if (msg::expired(m, day, params.ttl_days)) continue;
        // A held message was never addressed to this neighbourhood.
        if (ctx.held && ctx.held->contains(m.sim_id)) continue;
        const auto* clear = std::get_if<msg::ClearEnvelope>(&m.content);
        const auto check = clear && (clear->destination >= nearby.size() || !nearby[clear->destination])
                               ? msg::DeliveryCheck{}
                               : msg::check_delivery(m, *ctx.keys, queues, ctx.crypto);
        if (check.for_me) {
          auto copy = m;
          if (!check.duplicate) hop(copy);
          out.for_me.push_back({std::move(copy), nu.neighbour, check.duplicate});
        } else if (check.for_neighbour) {
          if (check.duplicate) {
            ++out.neighbour_duplicates;
            continue;
          }
          auto copy = m;
          hop(copy);
          queues.direct[*check.for_neighbour].push_back(std::move(copy));
          ++out.for_neighbour;
        } else {
          ++out.candidates;
          supplied = true;
          if (gap > 0) {
            --gap;
            continue;
          }
          queues.input.push_back({m, nu.neighbour, up->day});
          gap = coin_gap(accept, rng);
        }
      }
    }
    if (!window.empty()) queues.seen_uploads.mark(window.back().id);
    if (supplied) sources.push_back(nu.neighbour);
  }
  if (queues.input.empty()) return out;

  // Score: both addends depend only on the previous hop; the exit score is
  // normalized over every source of this pull, winners or not.
  const auto own_neighbours = g.neighbours(ctx.self);
  const auto& self_est = ctx.estimates[ctx.self];
  std::vector<double> raw(sources.size(), kNoExitScore);
  std::vector<delay::DelayMoments> exits;
  exits.reserve(own_neighbours.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& prev_est = ctx.estimates[sources[i]];
    if (!self_est || !prev_est) continue;
    exits.clear();
    for (NodeId e : own_neighbours) {
      if (e != sources[i] && ctx.estimates[e]) exits.push_back(*ctx.estimates[e]);
    }
    raw[i] = min_exit_moment_score(*prev_est, *self_est, exits);
  }
  const auto norm = normalize_exit_scores(raw);
  std::unordered_map<NodeId, double> score_of;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const double sim = neighbour_similarity(own_neighbours, ctx.self, g.neighbours(sources[i]), sources[i],
                                            params.similarity);
    score_of.emplace(sources[i], message_score(sim, norm[i]));
  }

  std::vector<msg::QueuedMessage> accepted;
  accepted.reserve(queues.input.size());
  for (auto& entry : queues.input) accepted.push_back({std::move(entry.message), score_of.at(entry.from)});
  queues.input.clear();
  // Ascending score, arrival order among ties.
  std::stable_sort(accepted.begin(), accepted.end(),
                   [](const msg::QueuedMessage& a, const msg::QueuedMessage& b) { return a.score < b.score; });
  if (ctx.held) {
    // Two winning copies of one message: keep the better-scored one.
    std::erase_if(accepted, [&](const msg::QueuedMessage& q) {
      if (ctx.held->contains(q.message.sim_id)) return true;
      ctx.held->insert(q.message.sim_id);
      return false;
    });
  }
  for (auto& q : accepted) hop(q.message);
  out.accepted = accepted.size();
  queues.enqueue_sorted(std::move(accepted));
  return out;
}

}  // namespace blindspot::routing
