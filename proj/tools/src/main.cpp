// blindspot: dataset generation, experiment runs, entropy analysis and the
// crypto self-test.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "blindspot/crypto_selftest.hpp"
#include "blindspot/error.hpp"
#include "blindspot/experiment.hpp"
#include "blindspot/path_entropy.hpp"
#include "blindspot/social_graph.hpp"

namespace fs = std::filesystem;
using namespace blindspot;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kInfeasible = 3 };

struct GenerateArgs {
  std::vector<std::size_t> ba;
  std::uint64_t seed = 1;
  std::size_t months = graph::kDefaultMonths;
  std::optional<std::uint64_t> uploads_seed;
  std::string map_uploads;
  std::optional<std::uint64_t> permutation_seed;
  std::string out_dir = ".";
  std::string prefix = "ba";
};

int cmd_generate(const GenerateArgs& a) {
  if (a.ba.size() != 2) throw ConfigError("--ba", "expects N M");
  const std::size_t n = a.ba[0];
  const std::size_t m = a.ba[1];
  if (m == 0 || n <= m) throw ConfigError("--ba", "need 0 < M < N");
  auto g = graph::generate_ba(n, m, a.seed);
  std::vector<graph::UploadBehaviour> behaviours;
  if (!a.map_uploads.empty()) {
    std::ifstream in(a.map_uploads);
    if (!in) throw Error("cannot open " + a.map_uploads);
    std::istringstream no_edges;
    const auto ds = graph::load_dataset(no_edges, in);
    if (ds.behaviours.size() < n) throw Infeasible("uploads file has fewer rows than nodes");
    behaviours = graph::map_uploads(g, ds.behaviours, a.permutation_seed);
  } else {
    behaviours = graph::synthetic_behaviours(n, a.months, a.uploads_seed.value_or(a.seed + 1));
  }
  const auto ds = graph::make_dataset(std::move(g), std::move(behaviours));

  fs::create_directories(a.out_dir);
  const auto edges_path = fs::path(a.out_dir) / (a.prefix + "_edges.csv");
  const auto uploads_path = fs::path(a.out_dir) / (a.prefix + "_uploads.csv");
  std::ofstream edges(edges_path, std::ios::binary);
  std::ofstream uploads(uploads_path, std::ios::binary);
  if (!edges || !uploads) throw Error("cannot write to " + a.out_dir);
  graph::save_dataset(ds, edges, uploads);
  edges.close();
  uploads.close();
  if (!edges || !uploads) throw Error("write failed in " + a.out_dir);
  std::cout << edges_path.string() << "\n" << uploads_path.string() << "\n";
  return kOk;
}

int cmd_run(const std::string& spec_path, std::optional<std::uint64_t> seed, const std::string& output_dir) {
  auto spec = experiment::load_experiment_spec(spec_path);
  if (seed) spec.sim.seed = *seed;
  if (!output_dir.empty()) spec.output_dir = output_dir;
  const auto result = experiment::run_experiment(spec);
  for (const auto& f : result.files) std::cout << f.string() << "\n";
  return kOk;
}

int cmd_analyze(const std::string& spec_path, const std::string& traces_path, std::size_t bins,
                const std::string& out) {
  const auto spec = experiment::load_experiment_spec(spec_path);
  const auto net = experiment::build_network(spec.network, static_cast<std::size_t>(spec.sim.months));
  std::ifstream in(traces_path, std::ios::binary);
  if (!in) throw Error("cannot open " + traces_path);
  std::ostringstream text;
  text << in.rdbuf();
  const auto traces = experiment::parse_traces_jsonl(text.str());
  const auto report = analysis::path_entropy_analysis(traces.paths, traces.pair_indices, net.behaviours, bins);
  const auto csv = experiment::entropy_csv(report);
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out, std::ios::binary);
    f << csv;
    if (!f) throw Error("write failed for " + out);
  }
  std::fprintf(stderr, "pairs %zu, excluded %zu, median entropy %.4f of max %.4f\n", report.pairs.size(),
               report.excluded_pairs.size(), report.median_entropy, report.max_entropy);
  return kOk;
}

int cmd_selftest(std::size_t bits, std::uint64_t seed, const std::string& mutant) {
  ure::SelftestOptions o;
  o.bits = bits;
  o.seed = seed;
  if (mutant == "tag-preserving") {
    o.mutant = ure::SelftestMutant::kTagPreserving;
  } else if (mutant != "none") {
    throw ConfigError("--mutant", "expected none or tag-preserving");
  }
  const auto report = ure::run_crypto_selftest(o);
  for (const auto& c : report.checks) {
    std::printf("%-22s %s  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.detail.c_str());
  }
  std::printf("group %zu bits, block %zu bytes; encrypt %.3f ms, re-encrypt %.3f ms, decrypt %.3f ms\n",
              report.bits, report.block_bytes, report.encrypt_ms, report.reencrypt_ms, report.decrypt_ms);
  return report.passed() ? kOk : kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blindspot routing simulator"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a BA graph and upload counts as CSV");
  generate->add_option("--ba", gen.ba, "Node count and edges per new node")->expected(2)->required();
  generate->add_option("--seed", gen.seed, "Graph seed");
  generate->add_option("--months", gen.months, "Months of synthetic uploads");
  generate->add_option("--uploads-seed", gen.uploads_seed, "Synthetic uploads seed (default seed + 1)");
  generate->add_option("--map-uploads", gen.map_uploads, "Upload counts CSV to map onto the nodes");
  generate->add_option("--permutation-seed", gen.permutation_seed, "Shuffle upload rows before mapping");
  generate->add_option("--out-dir", gen.out_dir, "Output directory");
  generate->add_option("--prefix", gen.prefix, "Output file prefix");

  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON spec");
  run->add_option("spec", spec_path, "Experiment spec")->required();
  run->add_option("--seed", seed, "Override the spec's simulation seed");
  run->add_option("--output-dir", output_dir, "Override the spec's output directory");

  std::string analyze_spec, traces_path, analyze_out;
  std::size_t bins = 10;
  auto* analyze = app.add_subcommand("analyze", "Path entropy from saved traces");
  analyze->add_option("--spec", analyze_spec, "Spec the traces were produced with")->required();
  analyze->add_option("--traces", traces_path, "Traces JSONL")->required();
  analyze->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);
  analyze->add_option("--out", analyze_out, "CSV output (default stdout)");

  std::size_t bits = 64;
  std::uint64_t selftest_seed = 1;
  std::string mutant = "none";
  auto* selftest = app.add_subcommand("crypto-selftest", "Re-encryption property suite");
  selftest->add_option("--bits", bits, "Group size in bits");
  selftest->add_option("--seed", selftest_seed, "Randomness seed");
  selftest->add_option("--mutant", mutant, "Inject a broken re-encryption (tag-preserving)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(gen);
    if (*run) return cmd_run(spec_path, seed, output_dir);
    if (*analyze) return cmd_analyze(analyze_spec, traces_path, bins, analyze_out);
    if (*selftest) return cmd_selftest(bits, selftest_seed, mutant);
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kConfig;
  } catch (const Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
