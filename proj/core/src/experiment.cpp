#include "blindspot/experiment.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "blindspot/error.hpp"

namespace blindspot::experiment {
namespace {

using graph::NodeId;
using nlohmann::json;
namespace fs = std::filesystem;

// Walks a JSON object, remembering the path for error messages and which
// keys were consumed so unknown ones can be rejected.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    if (!has(key)) throw ConfigError(at(key), "required field missing");
    return convert<T>(j_.at(key), at(key));
  }
  template <typename T>
  void get_to(const std::string& key, T& out) {
    if (has(key)) out = convert<T>(j_.at(key), at(key));
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(at(it.key()), "unknown field");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(where, "expected a non-negative integer");
      }
      return v.get<T>();
    } else {
      if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
      return v.get<T>();
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

NetworkSpec parse_network(const json& j, const fs::path& base) {
  Fields f(j, "/network");
  NetworkSpec net;
  if (f.has("ba")) {
    Fields ba(f.raw("ba"), "/network/ba");
    net.ba = BaSpec{ba.get<std::size_t>("n"), ba.get<std::size_t>("m"), 1};
    ba.get_to("seed", net.ba->seed);
    ba.reject_unknown();
    if (net.ba->m == 0 || net.ba->n <= net.ba->m) {
      throw ConfigError("/network/ba", "need 0 < m < n");
    }
  }
  if (f.has("edges")) net.edges_path = resolve(base, f.get<std::string>("edges"));
  if (net.ba.has_value() == net.edges_path.has_value()) {
    throw ConfigError("/network", "exactly one of 'ba' or 'edges' is required");
  }
  if (f.has("uploads")) {
    const auto& u = f.raw("uploads");
    if (u.is_string()) {
      net.uploads_path = resolve(base, u.get<std::string>());
    } else {
      Fields uf(u, "/network/uploads");
      if (uf.has("path")) net.uploads_path = resolve(base, uf.get<std::string>("path"));
      if (uf.has("permutation_seed")) net.upload_permutation_seed = uf.get<std::uint64_t>("permutation_seed");
      if (uf.has("synthetic")) {
        Fields s(uf.raw("synthetic"), "/network/uploads/synthetic");
        s.get_to("seed", net.synthetic_seed);
        s.get_to("median_monthly_uploads", net.synthetic.median_monthly_uploads);
        s.get_to("node_sigma", net.synthetic.node_sigma);
        s.get_to("month_sigma", net.synthetic.month_sigma);
        s.reject_unknown();
        if (net.synthetic.median_monthly_uploads <= 0.0 || net.synthetic.node_sigma < 0.0 ||
            net.synthetic.month_sigma < 0.0) {
          throw ConfigError("/network/uploads/synthetic", "rates must be positive and sigmas non-negative");
        }
      }
      uf.reject_unknown();
    }
  }
  if (net.edges_path && !net.uploads_path) {
    throw ConfigError("/network/uploads", "a dataset needs an uploads file");
  }
  f.get_to("allow_missing_uploads", net.allow_missing_uploads);
  f.reject_unknown();
  return net;
}

routing::SimilarityMode parse_similarity(const std::string& s, const std::string& where) {
  if (s == "jaccard") return routing::SimilarityMode::kJaccard;
  if (s == "shared_over_previous") return routing::SimilarityMode::kSharedOverPrevious;
  throw ConfigError(where, "expected 'jaccard' or 'shared_over_previous'");
}

sim::RemovalStrategy parse_strategy(const json& v, const std::string& where) {
  const auto s = Fields::convert<std::string>(v, where);
  if (s == "random") return sim::RemovalStrategy::kRandom;
  if (s == "high_degree") return sim::RemovalStrategy::kHighDegree;
  throw ConfigError(where, "expected 'random' or 'high_degree'");
}

sim::SimConfig parse_sim(const json& j) {
  Fields f(j, "/sim");
  sim::SimConfig c;
  f.get_to("months", c.months);
  f.get_to("days_per_month", c.days_per_month);
  f.get_to("messages_per_pair_per_month", c.messages_per_pair_per_month);
  f.get_to("capacity", c.routing.capacity);
  f.get_to("ttl_days", c.routing.ttl_days);
  f.get_to("uploads_window", c.routing.uploads_window);
  f.get_to("estimate_window", c.routing.estimate_window);
  if (f.has("similarity")) c.routing.similarity = parse_similarity(f.get<std::string>("similarity"), f.at("similarity"));
  f.get_to("seed", c.seed);
  f.get_to("crypto_enabled", c.crypto_enabled);
  f.get_to("crypto_bits", c.crypto_bits);
  f.get_to("payload_bytes", c.payload_bytes);
  f.get_to("message_day_jitter", c.message_day_jitter);
  f.get_to("holder_dedup", c.holder_dedup);
  if (f.has("queue_policy")) {
    const auto policy = f.get<std::string>("queue_policy");
    if (policy == "repost") {
      c.routing.queue_policy = msg::QueuePolicy::kRepost;
    } else if (policy == "drain") {
      c.routing.queue_policy = msg::QueuePolicy::kDrain;
    } else {
      throw ConfigError(f.at("queue_policy"), "expected 'repost' or 'drain'");
    }
  }

  if (c.months <= 0) throw ConfigError(f.at("months"), "must be positive");
  if (c.days_per_month <= 0) throw ConfigError(f.at("days_per_month"), "must be positive");
  if (c.messages_per_pair_per_month < 0) throw ConfigError(f.at("messages_per_pair_per_month"), "must be >= 0");
  if (c.routing.capacity == 0) throw ConfigError(f.at("capacity"), "must be positive");
  if (c.routing.ttl_days <= 0) throw ConfigError(f.at("ttl_days"), "must be positive");
  if (c.routing.uploads_window == 0) throw ConfigError(f.at("uploads_window"), "must be positive");
  if (c.routing.estimate_window == 0) throw ConfigError(f.at("estimate_window"), "must be positive");
  if (c.payload_bytes > ure::kMaxPayloadBytes) throw ConfigError(f.at("payload_bytes"), "at most 240 bytes");
  if (c.crypto_bits < 32) throw ConfigError(f.at("crypto_bits"), "must be at least 32");

  if (f.has("pairs")) {
    const auto& pairs = f.raw("pairs");
    if (!pairs.is_array()) throw ConfigError(f.at("pairs"), "expected an array of [sender, receiver]");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::string where = f.at("pairs") + "/" + std::to_string(i);
      if (!pairs[i].is_array() || pairs[i].size() != 2) throw ConfigError(where, "expected [sender, receiver]");
      const auto s = Fields::convert<NodeId>(pairs[i][0], where + "/0");
      const auto r = Fields::convert<NodeId>(pairs[i][1], where + "/1");
      if (s == r) throw ConfigError(where, "sender and receiver must differ");
      c.pairs.push_back({s, r});
    }
  }
  if (f.has("removal")) {
    Fields r(f.raw("removal"), "/sim/removal");
    sim::RemovalConfig rc;
    rc.strategy = parse_strategy(r.raw("strategy"), r.at("strategy"));
    rc.fraction = r.get<double>("fraction");
    if (r.has("at_day")) rc.at_day = r.get<int>("at_day");
    r.get_to("detach", rc.detach);
    r.reject_unknown();
    if (rc.fraction < 0.0 || rc.fraction >= 1.0) throw ConfigError("/sim/removal/fraction", "must lie in [0, 1)");
    c.removal = rc;
  }
  f.reject_unknown();
  return c;
}

ExperimentKind parse_kind(const std::string& s) {
  if (s == "single") return ExperimentKind::kSingle;
  if (s == "congestion") return ExperimentKind::kCongestion;
  if (s == "removal") return ExperimentKind::kRemoval;
  if (s == "entropy") return ExperimentKind::kEntropy;
  throw ConfigError("/experiment/kind", "expected single, congestion, removal or entropy");
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json metrics_json(const sim::SimMetrics& m) {
  return {{"messages", m.messages},
          {"delivered", m.delivered},
          {"delivery_rate", fixed(m.delivery_rate)},
          {"mean_delay_days", fixed(m.mean_delay_days)},
          {"dup_mean", fixed(m.duplicates_per_delivered)},
          {"copies_sprayed", m.copies_sprayed},
          {"max_upload_load", m.max_upload_load},
          {"removed", m.removed.size()}};
}

std::string metrics_columns(const sim::SimMetrics& m) {
  return std::to_string(m.messages) + "," + std::to_string(m.delivered) + "," + fixed(m.delivery_rate) + "," +
         fixed(m.mean_delay_days) + "," + fixed(m.duplicates_per_delivered) + "," +
         std::to_string(m.copies_sprayed) + "," + std::to_string(m.max_upload_load);
}

constexpr const char* kMetricsHeader =
    "messages,delivered,delivery_rate,mean_delay_days,dup_mean,copies_sprayed,max_upload_load";

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSingle: return "single";
    case ExperimentKind::kCongestion: return "congestion";
    case ExperimentKind::kRemoval: return "removal";
    case ExperimentKind::kEntropy: return "entropy";
  }
  return "single";
}

ExperimentSpec parse_experiment_spec(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
  Fields top(j, "");
  if (top.get<int>("schema") != kSchemaVersion) {
    throw ConfigError("/schema", "unsupported schema version (expected 1)");
  }
  ExperimentSpec spec;
  top.get_to("name", spec.name);
  if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos) {
    throw ConfigError("/name", "must be a non-empty file-name-safe string");
  }
  if (!top.has("network")) throw ConfigError("/network", "required field missing");
  spec.network = parse_network(top.raw("network"), base_dir);
  if (top.has("sim")) spec.sim = parse_sim(top.raw("sim"));

  if (top.has("experiment")) {
    Fields e(top.raw("experiment"), "/experiment");
    if (e.has("kind")) spec.kind = parse_kind(e.get<std::string>("kind"));
    e.get_to("pair_count", spec.pair_count);
    e.get_to("pair_seed", spec.pair_seed);
    e.get_to("baseline", spec.removal_baseline);
    e.get_to("bins", spec.bins);
    if (e.has("pair_counts")) {
      const auto& v = e.raw("pair_counts");
      if (!v.is_array() || v.empty()) throw ConfigError(e.at("pair_counts"), "expected a non-empty array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        spec.pair_counts.push_back(Fields::convert<std::size_t>(v[i], e.at("pair_counts") + "/" + std::to_string(i)));
      }
    }
    if (e.has("fractions")) {
      const auto& v = e.raw("fractions");
      if (!v.is_array() || v.empty()) throw ConfigError(e.at("fractions"), "expected a non-empty array");
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string where = e.at("fractions") + "/" + std::to_string(i);
        const double f = Fields::convert<double>(v[i], where);
        if (f < 0.0 || f >= 1.0) throw ConfigError(where, "must lie in [0, 1)");
        spec.fractions.push_back(f);
      }
    }
    if (e.has("strategies")) {
      const auto& v = e.raw("strategies");
      if (!v.is_array() || v.empty()) throw ConfigError(e.at("strategies"), "expected a non-empty array");
      spec.strategies.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        spec.strategies.push_back(parse_strategy(v[i], e.at("strategies") + "/" + std::to_string(i)));
      }
    }
    if (e.has("at_day")) {
      const int d = e.get<int>("at_day");
      if (d < 0) throw ConfigError(e.at("at_day"), "must be >= 0");
      if (!spec.sim.removal) spec.sim.removal = sim::RemovalConfig{};
      spec.sim.removal->at_day = d;
    }
    if (e.has("detach")) {
      if (!spec.sim.removal) spec.sim.removal = sim::RemovalConfig{};
      e.get_to("detach", spec.sim.removal->detach);
    }
    e.reject_unknown();
  }
  if (spec.bins == 0) throw ConfigError("/experiment/bins", "must be positive");
  if (spec.kind == ExperimentKind::kCongestion && spec.pair_counts.empty()) {
    throw ConfigError("/experiment/pair_counts", "required for a congestion experiment");
  }
  if (spec.kind == ExperimentKind::kRemoval && spec.fractions.empty()) {
    throw ConfigError("/experiment/fractions", "required for a removal experiment");
  }

  if (top.has("outputs")) {
    Fields o(top.raw("outputs"), "/outputs");
    if (o.has("dir")) spec.output_dir = resolve(base_dir, o.get<std::string>("dir"));
    o.get_to("traces", spec.write_traces);
    o.reject_unknown();
  }
  if (spec.output_dir.empty()) {
    const char* env = std::getenv(kOutputDirEnv);
    spec.output_dir = env && *env ? fs::path(env) : fs::path(".");
  }
  top.reject_unknown();
  return spec;
}

ExperimentSpec load_experiment_spec(const fs::path& path) {
  return parse_experiment_spec(read_file(path), path.parent_path());
}

Network build_network(const NetworkSpec& spec, std::size_t months) {
  Network net;
  if (spec.edges_path) {
    std::ifstream edges(*spec.edges_path);
    if (!edges) throw ConfigError("/network/edges", "cannot open " + spec.edges_path->string());
    std::ifstream uploads(*spec.uploads_path);
    if (!uploads) throw ConfigError("/network/uploads", "cannot open " + spec.uploads_path->string());
    auto ds = graph::load_dataset(edges, uploads, {spec.allow_missing_uploads});
    net.graph = std::move(ds.graph);
    net.behaviours = std::move(ds.behaviours);
  } else {
    net.graph = graph::generate_ba(spec.ba->n, spec.ba->m, spec.ba->seed);
    if (spec.uploads_path) {
      std::ifstream uploads(*spec.uploads_path);
      if (!uploads) throw ConfigError("/network/uploads", "cannot open " + spec.uploads_path->string());
      // Reuse the dataset loader for the uploads file alone.
      std::istringstream no_edges;
      const auto ds = graph::load_dataset(no_edges, uploads);
      if (ds.behaviours.size() < net.graph.node_count()) {
        throw Infeasible("uploads file has " + std::to_string(ds.behaviours.size()) + " rows for " +
                         std::to_string(net.graph.node_count()) + " nodes");
      }
      net.behaviours = graph::map_uploads(net.graph, ds.behaviours, spec.upload_permutation_seed);
    } else {
      net.behaviours = graph::synthetic_behaviours(net.graph.node_count(), months, spec.synthetic_seed, spec.synthetic);
    }
  }
  for (const auto& b : net.behaviours) {
    if (b.monthly_counts.size() < months) {
      throw Infeasible("upload data covers " + std::to_string(b.monthly_counts.size()) + " months, run needs " +
                       std::to_string(months));
    }
  }
  return net;
}

std::string traces_jsonl(const sim::SimMetrics& metrics) {
  std::string out;
  for (const auto& r : metrics.records) {
    json line = {{"sim_id", r.sim_id},     {"pair", r.pair_index},         {"sender", r.sender},
                 {"receiver", r.receiver}, {"created_day", r.created_day}, {"copies", r.copies_received}};
    line["delivered_day"] = r.first_delivered_day ? json(*r.first_delivered_day) : json(nullptr);
    line["path"] = r.first_delivery_path;
    line["days"] = r.first_delivery_days;
    out += line.dump();
    out += '\n';
  }
  return out;
}

TraceSet parse_traces_jsonl(std::string_view text) {
  TraceSet set;
  std::set<std::size_t> pairs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = json::parse(line);
      const auto pair = j.at("pair").get<std::size_t>();
      pairs.insert(pair);
      if (j.at("delivered_day").is_null()) continue;
      set.paths.push_back({pair, j.at("sim_id").get<msg::MessageId>(), j.at("path").get<std::vector<NodeId>>()});
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  set.pair_indices.assign(pairs.begin(), pairs.end());
  return set;
}

std::string entropy_csv(const analysis::EntropyReport& report) {
  std::string out = "pair_index,deliveries,entropy\n";
  for (const auto& p : report.pairs) {
    out += std::to_string(p.pair_index) + "," + std::to_string(p.deliveries) + "," + fixed(p.entropy) + "\n";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const auto net = build_network(spec.network, static_cast<std::size_t>(spec.sim.months));
  sim::SimConfig base = spec.sim;
  for (const auto& p : base.pairs) {
    if (!net.graph.contains(p.sender) || !net.graph.contains(p.receiver)) {
      throw ConfigError("/sim/pairs", "pair references a node outside the network");
    }
  }

  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  if (ec) throw Error("cannot create output directory " + spec.output_dir.string() + ": " + ec.message());

  ExperimentResult result;
  json summary = {{"schema", kSchemaVersion},
                  {"name", spec.name},
                  {"kind", to_string(spec.kind)},
                  {"nodes", net.graph.node_count()},
                  {"edges", net.graph.edge_count()},
                  {"seed", base.seed}};
  const auto emit = [&](const std::string& suffix, const std::string& text) {
    const auto path = spec.output_dir / (spec.name + suffix);
    write_file(path, text);
    result.files.push_back(path);
  };
  const auto with_pairs = [&](std::size_t count) {
    sim::SimConfig c = base;
    if (c.pairs.empty()) c.pairs = sim::sample_pairs(net.graph, count, spec.pair_seed);
    return c;
  };

  switch (spec.kind) {
    case ExperimentKind::kSingle:
    case ExperimentKind::kEntropy: {
      const auto cfg = with_pairs(spec.pair_count);
      const auto m = sim::run(cfg, net.graph, net.behaviours);
      summary["pairs"] = cfg.pairs.size();
      summary["metrics"] = metrics_json(m);
      emit("_single.csv", std::string("pair_count,") + kMetricsHeader + "\n" + std::to_string(cfg.pairs.size()) +
                              "," + metrics_columns(m) + "\n");
      if (spec.write_traces) emit("_traces.jsonl", traces_jsonl(m));
      if (spec.kind == ExperimentKind::kEntropy) {
        const auto report = analysis::path_entropy_analysis(m, net.behaviours, spec.bins);
        emit("_entropy.csv", entropy_csv(report));
        summary["entropy"] = {{"bins", report.bins},
                              {"pairs", report.pairs.size()},
                              {"excluded_pairs", report.excluded_pairs},
                              {"median_entropy", fixed(report.median_entropy)},
                              {"max_entropy", fixed(report.max_entropy)},
                              {"histogram", report.entropy_histogram}};
      }
      break;
    }
    case ExperimentKind::kCongestion: {
      std::string csv = std::string("pair_count,") + kMetricsHeader + "\n";
      json rows = json::array();
      for (std::size_t count : spec.pair_counts) {
        sim::SimConfig cfg = base;
        cfg.pairs = sim::sample_pairs(net.graph, count, spec.pair_seed);
        const auto m = sim::run(cfg, net.graph, net.behaviours);
        csv += std::to_string(count) + "," + metrics_columns(m) + "\n";
        json row = metrics_json(m);
        row["pair_count"] = count;
        rows.push_back(row);
      }
      summary["rows"] = rows;
      emit("_congestion.csv", csv);
      break;
    }
    case ExperimentKind::kRemoval: {
      const auto cfg = with_pairs(spec.pair_count);
      const sim::RemovalConfig removal = base.removal.value_or(sim::RemovalConfig{});
      std::string csv = std::string("strategy,fraction,pair_count,removed,") + kMetricsHeader + "\n";
      if (spec.removal_baseline) {
        auto b = cfg;
        b.removal.reset();
        const auto m = sim::run(b, net.graph, net.behaviours);
        summary["baseline"] = metrics_json(m);
      }
      json rows = json::array();
      for (auto strategy : spec.strategies) {
        for (double fraction : spec.fractions) {
          auto c = cfg;
          c.removal = removal;
          c.removal->strategy = strategy;
          c.removal->fraction = fraction;
          const auto m = sim::run(c, net.graph, net.behaviours);
          csv += sim::to_string(strategy) + "," + fixed(fraction, 3) + "," + std::to_string(c.pairs.size()) + "," +
                 std::to_string(m.removed.size()) + "," + metrics_columns(m) + "\n";
          json row = metrics_json(m);
          row["strategy"] = sim::to_string(strategy);
          row["fraction"] = fixed(fraction, 3);
          rows.push_back(row);
        }
      }
      summary["rows"] = rows;
      emit("_removal.csv", csv);
      break;
    }
  }
  result.summary_json = summary.dump(2) + "\n";
  emit("_summary.json", result.summary_json);
  return result;
}

}  // namespace blindspot::experiment
