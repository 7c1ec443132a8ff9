// hgp: run active-learning experiments, rebuild tables from traces, brute-force p_f.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hgp/experiment.hpp"

namespace {

constexpr const char* kOutputDirEnv = "HGP_OUTPUT_DIR";

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3, kAllRepeatsFailed = 4 };

int report_error(const std::string& type, const std::string& message, int code,
                 const std::filesystem::path* path = nullptr) {
  nlohmann::json err{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
  if (path) err["error"]["path"] = path->string();
  std::cerr << err.dump() << '\n';
  return code;
}

struct RunOptions {
  std::string benchmark = "toy";
  std::string method = "hgp";
  std::optional<double> alpha;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  std::string mode = "terminating";
  std::string out;
  std::size_t max_iter = 150;
  double eta = 0.02;
  double cov_threshold = 0.1;
  std::size_t n_mc = 5000;
  std::size_t test_size = 100000;
  std::size_t workers = 0;
  bool noisy_predictive = false;
  bool quiet = false;
};

std::filesystem::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "results";
}

int do_run(const RunOptions& o) {
  hgp::ExperimentConfig c;
  c.benchmark = o.benchmark;
  c.method = hgp::parse_method(o.method);
  c.alpha = o.alpha;
  c.repeats = o.repeats;
  c.mode = hgp::parse_mode(o.mode);
  c.loop.seed = o.seed;
  c.loop.max_iterations = o.max_iter;
  c.loop.eta = o.eta;
  c.loop.cov_threshold = o.cov_threshold;
  c.loop.n_mc = o.n_mc;
  c.test_size = o.test_size;
  c.workers = o.workers;
  c.surrogate.predictive_includes_noise = o.noisy_predictive;
  c.output_dir = output_dir(o.out);

  const hgp::ExperimentResult result = hgp::run_experiment(c);
  for (const auto& w : result.row.warnings) std::cerr << "warning: " << w << '\n';
  if (!o.quiet) std::cout << hgp::format_table({result.row}) << "written to " << result.directory.string() << '\n';
  if (result.row.succeeded == 0) return report_error("all_repeats_failed", "every repeat failed", kAllRepeatsFailed);
  return kOk;
}

int do_table(const std::vector<std::string>& dirs, bool json) {
  std::vector<std::filesystem::path> runs;
  for (const auto& d : dirs) {
    const std::filesystem::path p(d);
    if (std::filesystem::exists(p / "summary.json") || std::filesystem::exists(p / "repeat_0.json")) {
      runs.push_back(p);
      continue;
    }
    std::error_code ec;
    std::vector<std::filesystem::path> children;
    for (const auto& e : std::filesystem::directory_iterator(p, ec))
      if (e.is_directory() && std::filesystem::exists(e.path() / "repeat_0.json")) children.push_back(e.path());
    if (ec) throw hgp::IoError("cannot list directory (" + ec.message() + ")", p);
    std::sort(children.begin(), children.end());
    runs.insert(runs.end(), children.begin(), children.end());
  }
  if (runs.empty()) throw hgp::IoError("no run directories found", dirs.empty() ? "" : dirs.front());

  std::vector<hgp::ResultsRow> rows;
  for (const auto& r : runs) rows.push_back(hgp::table_from_traces(r));
  if (json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(hgp::to_json(r));
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << hgp::format_table(rows);
  }
  return kOk;
}

int do_oracle(const std::string& benchmark, double samples, std::uint64_t seed) {
  if (!(samples >= 1.0)) throw hgp::InvalidArgument("--samples must be at least 1");
  const hgp::Benchmark bench = hgp::benchmark_by_name(benchmark);
  const hgp::MonteCarloEstimate est = hgp::bruteforce_pf(bench, static_cast<std::uint64_t>(samples), seed);
  nlohmann::json j{{"benchmark", benchmark},
                   {"pf", est.pf},
                   {"std_error", est.std_error},
                   {"samples", est.samples},
                   {"seed", seed}};
  if (benchmark == "toy") j["analytic"] = hgp::toy_pf_analytic();
  else j["semi_analytic"] = hgp::tjunction_pf_semi_analytic();
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical GP active learning for failure probabilities with undefined outputs"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "run a multi-repeat experiment and write traces, table and curves");
  run->add_option("--benchmark", ro.benchmark, "toy | tjunction")->capture_default_str();
  run->add_option("--method", ro.method, "hgp | masked | gpc")->capture_default_str();
  run->add_option("--alpha", ro.alpha, "mask value for undefined outputs (masked only)");
  run->add_option("--repeats", ro.repeats, "independent seeded repeats")->capture_default_str()->check(CLI::PositiveNumber);
  run->add_option("--seed", ro.seed, "master seed")->capture_default_str();
  run->add_option("--mode", ro.mode, "terminating | fixed (eta = 0, no CoV exit)")->capture_default_str();
  run->add_option("--out", ro.out, std::string("output directory (default $") + kOutputDirEnv + " or ./results)");
  run->add_option("--max-iter", ro.max_iter, "cap on acquisitions")->capture_default_str();
  run->add_option("--eta", ro.eta, "misclassification threshold")->capture_default_str();
  run->add_option("--cov-threshold", ro.cov_threshold, "CoV threshold for the outer loop")->capture_default_str();
  run->add_option("--n-mc", ro.n_mc, "proposal set size and enrichment size")->capture_default_str();
  run->add_option("--test-size", ro.test_size, "test set size for F1 / AP")->capture_default_str();
  run->add_option("--workers", ro.workers, "parallel repeats (0: hardware threads)")->capture_default_str();
  run->add_flag("--noisy-predictive", ro.noisy_predictive, "score with the noisy-observation predictive std");
  run->add_flag("--quiet", ro.quiet, "do not print the table");

  std::vector<std::string> table_dirs;
  bool table_json = false;
  auto* table = app.add_subcommand("table", "recompute the results table from persisted traces");
  table->add_option("dirs", table_dirs, "run directories, or parents of run directories")->required();
  table->add_flag("--json", table_json, "print JSON instead of text");

  std::string oracle_bench = "toy";
  double oracle_samples = 1e7;
  std::uint64_t oracle_seed = 0;
  auto* oracle = app.add_subcommand("oracle", "brute-force Monte Carlo p_f of a benchmark");
  oracle->add_option("--benchmark", oracle_bench, "toy | tjunction")->capture_default_str();
  oracle->add_option("--samples", oracle_samples, "number of draws")->capture_default_str();
  oracle->add_option("--seed", oracle_seed, "seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kUsage);
  }

  try {
    if (run->parsed()) return do_run(ro);
    if (table->parsed()) return do_table(table_dirs, table_json);
    if (oracle->parsed()) return do_oracle(oracle_bench, oracle_samples, oracle_seed);
  } catch (const hgp::InvalidArgument& e) {
    return report_error("invalid_argument", e.what(), kUsage);
  } catch (const hgp::IoError& e) {
    return report_error("io_error", e.what(), kIo, &e.path());
  } catch (const std::exception& e) {
    return report_error("error", e.what(), kFailure);
  }
  return kFailure;
}
