#include "blindspot/social_graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>

#include "blindspot/error.hpp"
#include "blindspot/random.hpp"

namespace blindspot::graph {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

// Reads data rows, skipping blank lines and a leading non-numeric header.
// Yields (line_number, fields).
template <typename Fn>
void for_each_row(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    view = trim(view);
    if (view.empty()) continue;
    auto fields = split_fields(view);
    if (first_content) {
      first_content = false;
      if (!parse_number<std::int64_t>(fields.front())) continue;  // header
    }
    fn(line_no, fields);
  }
}

}  // namespace

SocialGraph SocialGraph::from_edges(std::size_t node_count, std::span<const Edge> edges) {
  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    if (a >= node_count || b >= node_count) throw InvalidInput("edge endpoint out of range");
    if (a == b) throw InvalidInput("self-loop on node " + std::to_string(a));
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  SocialGraph g;
  g.offsets_.assign(node_count + 1, 0);
  for (const auto& e : directed) ++g.offsets_[e.first + 1];
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  g.adjacency_.reserve(directed.size());
  for (const auto& e : directed) g.adjacency_.push_back(e.second);
  return g;
}

std::span<const NodeId> SocialGraph::neighbours(NodeId v) const {
  if (!contains(v)) throw InvalidInput("unknown node " + std::to_string(v));
  return std::span<const NodeId>(adjacency_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
}

bool SocialGraph::adjacent(NodeId a, NodeId b) const {
  const auto n = neighbours(a);
  return std::binary_search(n.begin(), n.end(), b);
}

std::optional<std::size_t> SocialGraph::neighbour_slot(NodeId v, NodeId neighbour) const {
  const auto n = neighbours(v);
  const auto it = std::lower_bound(n.begin(), n.end(), neighbour);
  if (it == n.end() || *it != neighbour) return std::nullopt;
  return static_cast<std::size_t>(it - n.begin());
}

std::vector<Edge> SocialGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count());
  for (NodeId v = 0; v < node_count(); ++v) {
    for (NodeId u : neighbours(v)) {
      if (v < u) out.emplace_back(v, u);
    }
  }
  return out;
}

std::vector<NodeId> SocialGraph::component_labels() const {
  constexpr NodeId kUnset = ~NodeId{0};
  std::vector<NodeId> label(node_count(), kUnset);
  std::vector<NodeId> stack;
  for (NodeId root = 0; root < node_count(); ++root) {
    if (label[root] != kUnset) continue;
    label[root] = root;
    stack.push_back(root);
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      for (NodeId u : neighbours(v)) {
        if (label[u] == kUnset) {
          label[u] = root;
          stack.push_back(u);
        }
      }
    }
  }
  return label;
}

std::uint64_t UploadBehaviour::total_uploads() const noexcept {
  return std::accumulate(monthly_counts.begin(), monthly_counts.end(), std::uint64_t{0});
}

Dataset load_dataset(std::istream& edges_in, std::istream& uploads_in, const LoadOptions& options) {
  Dataset ds;
  std::map<std::int64_t, std::vector<std::uint32_t>> counts_by_id;
  std::optional<std::size_t> months;

  for_each_row(uploads_in, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() < 2) throw ParseError(line, "uploads row needs a node id and monthly counts");
    const auto id = parse_number<std::int64_t>(f[0]);
    if (!id) throw ParseError(line, "bad node id '" + std::string(f[0]) + "'");
    if (months && *months != f.size() - 1) {
      throw ParseError(line, "expected " + std::to_string(*months) + " monthly counts, got " +
                                 std::to_string(f.size() - 1));
    }
    months = f.size() - 1;
    std::vector<std::uint32_t> counts;
    counts.reserve(f.size() - 1);
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto c = parse_number<std::uint32_t>(f[i]);
      if (!c) throw ParseError(line, "bad upload count '" + std::string(f[i]) + "'");
      counts.push_back(*c);
    }
    if (!counts_by_id.emplace(*id, std::move(counts)).second) {
      throw ParseError(line, "duplicate uploads row for node " + std::to_string(*id));
    }
  });

  std::vector<std::pair<std::int64_t, std::int64_t>> raw_edges;
  std::map<std::int64_t, bool> edge_ids;
  for_each_row(edges_in, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 2) throw ParseError(line, "edge row needs exactly two node ids");
    const auto a = parse_number<std::int64_t>(f[0]);
    const auto b = parse_number<std::int64_t>(f[1]);
    if (!a || !b) throw ParseError(line, "bad node id in edge row");
    if (*a == *b) throw ParseError(line, "self-loop on node " + std::to_string(*a));
    for (auto id : {*a, *b}) {
      if (!counts_by_id.contains(id)) {
        if (!options.allow_missing_uploads) {
          throw ParseError(line, "edge endpoint " + std::to_string(id) + " has no uploads row");
        }
        edge_ids[id] = true;
      }
    }
    raw_edges.emplace_back(*a, *b);
  });

  ds.report.edge_rows = raw_edges.size();
  ds.report.months = months.value_or(0);

  std::map<std::int64_t, NodeId> dense;
  for (const auto& [id, _] : counts_by_id) dense.emplace(id, 0);
  for (const auto& [id, _] : edge_ids) dense.emplace(id, 0);
  NodeId next = 0;
  for (auto& [id, d] : dense) {
    d = next++;
    ds.original_ids.push_back(id);
  }

  std::vector<Edge> edges;
  edges.reserve(raw_edges.size());
  for (const auto& [a, b] : raw_edges) {
    NodeId u = dense.at(a), v = dense.at(b);
    if (u > v) std::swap(u, v);
    edges.emplace_back(u, v);
  }
  ds.graph = SocialGraph::from_edges(dense.size(), edges);
  ds.report.duplicate_edge_rows = raw_edges.size() - ds.graph.edge_count();

  ds.behaviours.resize(dense.size());
  for (const auto& [id, d] : dense) {
    auto& b = ds.behaviours[d];
    b.node = d;
    if (auto it = counts_by_id.find(id); it != counts_by_id.end()) {
      b.monthly_counts = it->second;
    } else {
      b.monthly_counts.assign(ds.report.months, 0);
      ds.report.nodes_without_uploads.push_back(id);
    }
  }
  return ds;
}

void save_dataset(const Dataset& ds, std::ostream& edges_out, std::ostream& uploads_out) {
  const auto original = [&](NodeId v) {
    return ds.original_ids.empty() ? static_cast<std::int64_t>(v) : ds.original_ids.at(v);
  };
  std::vector<std::pair<std::int64_t, std::int64_t>> rows;
  for (const auto& [a, b] : ds.graph.edges()) {
    auto x = original(a), y = original(b);
    if (x > y) std::swap(x, y);
    rows.emplace_back(x, y);
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& [a, b] : rows) edges_out << a << ',' << b << '\n';

  std::vector<std::pair<std::int64_t, const UploadBehaviour*>> upload_rows;
  for (const auto& b : ds.behaviours) upload_rows.emplace_back(original(b.node), &b);
  std::sort(upload_rows.begin(), upload_rows.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  for (const auto& [id, b] : upload_rows) {
    uploads_out << id;
    for (auto c : b->monthly_counts) uploads_out << ',' << c;
    uploads_out << '\n';
  }
}

Dataset make_dataset(SocialGraph graph, std::vector<UploadBehaviour> behaviours) {
  if (behaviours.size() != graph.node_count()) {
    throw InvalidInput("need exactly one upload behaviour per node");
  }
  Dataset ds;
  ds.report.edge_rows = graph.edge_count();
  ds.report.months = behaviours.empty() ? 0 : behaviours.front().monthly_counts.size();
  ds.original_ids.resize(graph.node_count());
  std::iota(ds.original_ids.begin(), ds.original_ids.end(), std::int64_t{0});
  ds.graph = std::move(graph);
  ds.behaviours = std::move(behaviours);
  return ds;
}

SocialGraph generate_ba(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m < 1 || n <= m) throw InvalidInput("Barabasi-Albert needs n > m >= 1");
  Rng rng(seed);
  std::vector<Edge> edges;
  edges.reserve(m * (m - 1) / 2 + m * (n - m));
  // Every edge endpoint appears once here, so a uniform draw is a
  // degree-proportional draw.
  std::vector<NodeId> endpoints;
  endpoints.reserve(2 * edges.capacity());

  for (NodeId a = 0; a < m; ++a) {
    for (NodeId b = a + 1; b < m; ++b) {
      edges.emplace_back(a, b);
      endpoints.push_back(a);
      endpoints.push_back(b);
    }
  }

  std::vector<NodeId> targets;
  for (auto v = static_cast<NodeId>(m); v < n; ++v) {
    targets.clear();
    while (targets.size() < m) {
      // m == 1 starts from a lone node with degree 0.
      const NodeId t = endpoints.empty() ? static_cast<NodeId>(rng.below(v))
                                         : endpoints[rng.below(endpoints.size())];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (NodeId t : targets) {
      edges.emplace_back(t, v);
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return SocialGraph::from_edges(n, edges);
}

std::vector<UploadBehaviour> synthetic_behaviours(std::size_t node_count, std::size_t months,
                                                  std::uint64_t seed,
                                                  const SyntheticUploadParams& params) {
  if (!(params.median_monthly_uploads > 0.0)) throw InvalidInput("median upload rate must be positive");
  Rng rng(seed);
  std::normal_distribution<double> node_z(0.0, params.node_sigma);
  std::normal_distribution<double> month_z(0.0, params.month_sigma);
  const double log_median = std::log(params.median_monthly_uploads);

  std::vector<UploadBehaviour> out(node_count);
  for (std::size_t i = 0; i < node_count; ++i) {
    out[i].node = static_cast<NodeId>(i);
    out[i].monthly_counts.resize(months);
    const double node_rate = std::exp(log_median + node_z(rng.engine()));
    for (auto& c : out[i].monthly_counts) {
      const double rate = node_rate * std::exp(month_z(rng.engine()));
      std::poisson_distribution<std::uint32_t> count(rate);
      c = count(rng.engine());
    }
  }
  return out;
}

std::vector<UploadBehaviour> map_uploads(const SocialGraph& graph,
                                         std::span<const UploadBehaviour> behaviours,
                                         std::optional<std::uint64_t> permutation_seed) {
  const std::size_t n = graph.node_count();
  if (behaviours.size() < n) {
    throw InvalidInput("need at least " + std::to_string(n) + " behaviour records, got " +
                       std::to_string(behaviours.size()));
  }
  std::vector<std::size_t> order(behaviours.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (permutation_seed) {
    Rng rng(*permutation_seed);
    rng.shuffle(order.begin(), order.end());
  }
  std::vector<UploadBehaviour> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(behaviours[order[i]]);
    out.back().node = static_cast<NodeId>(i);
  }
  return out;
}

double degree_upload_correlation(const SocialGraph& graph,
                                 std::span<const UploadBehaviour> behaviours) {
  const std::size_t n = graph.node_count();
  if (behaviours.size() != n || n < 2) throw InvalidInput("need one behaviour per node and n >= 2");
  double mx = 0, my = 0;
  for (NodeId v = 0; v < n; ++v) {
    mx += static_cast<double>(graph.degree(v));
    my += static_cast<double>(behaviours[v].total_uploads());
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (NodeId v = 0; v < n; ++v) {
    const double dx = static_cast<double>(graph.degree(v)) - mx;
    const double dy = static_cast<double>(behaviours[v].total_uploads()) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> inter_upload_hours(std::uint32_t monthly_count) {
  if (monthly_count == 0) return std::nullopt;
  return kHoursPerMonth / static_cast<double>(monthly_count);
}

std::vector<std::uint32_t> month_day_counts(std::uint32_t count, int days_per_month) {
  if (days_per_month <= 0) throw InvalidInput("days_per_month must be positive");
  const auto days = static_cast<std::uint32_t>(days_per_month);
  std::vector<std::uint32_t> per_day(days, 0);
  // Up to one per day: spaced floor(D / c) apart from day 0. Above that, the
  // quotient lands on every day and the remainder is spread the same way.
  const auto spread = [&](std::uint32_t c) {
    if (c == 0) return;
    const std::uint32_t spacing = days / c;
    for (std::uint32_t k = 0; k < c; ++k) ++per_day[k * spacing];
  };
  if (count <= days) {
    spread(count);
  } else {
    for (auto& d : per_day) d = count / days;
    spread(count % days);
  }
  return per_day;
}

std::vector<ScheduledUpload> upload_schedule(const UploadBehaviour& behaviour, int days_per_month) {
  std::vector<ScheduledUpload> out;
  for (std::size_t month = 0; month < behaviour.monthly_counts.size(); ++month) {
    const auto per_day = month_day_counts(behaviour.monthly_counts[month], days_per_month);
    for (std::size_t d = 0; d < per_day.size(); ++d) {
      if (per_day[d] > 0) {
        out.push_back({static_cast<int>(month * static_cast<std::size_t>(days_per_month) + d),
                       per_day[d]});
      }
    }
  }
  return out;
}

delay::DelayDistribution ground_truth_distribution(const UploadBehaviour& behaviour) {
  std::vector<delay::Hours> samples;
  for (auto c : behaviour.monthly_counts) {
    if (auto h = inter_upload_hours(c)) {
      samples.push_back(std::max<delay::Hours>(1, std::llround(*h)));
    }
  }
  return delay::estimate_distribution(samples, std::max<std::size_t>(samples.size(), 1));
}

bool LocalView::is_neighbour(NodeId v) const {
  return std::binary_search(neighbours.begin(), neighbours.end(), v);
}

const delay::DelayDistribution* LocalView::distribution(NodeId v) const {
  const auto it = neighbour_distributions.find(v);
  return it == neighbour_distributions.end() ? nullptr : &it->second;
}

LocalView local_view(const SocialGraph& graph, NodeId center, const EstimateMap& estimates) {
  if (!graph.contains(center)) throw InvalidInput("unknown node " + std::to_string(center));
  LocalView view;
  view.center = center;
  const auto nbrs = graph.neighbours(center);
  view.neighbours.assign(nbrs.begin(), nbrs.end());
  for (NodeId u : nbrs) {
    const auto friends = graph.neighbours(u);
    view.neighbours_of_neighbours.emplace(u, std::vector<NodeId>(friends.begin(), friends.end()));
    if (auto it = estimates.find(u); it != estimates.end()) {
      view.neighbour_distributions.emplace(u, it->second);
    }
  }
  return view;
}

}  // namespace blindspot::graph
