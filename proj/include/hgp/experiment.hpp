#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgp/active_learning.hpp"
#include "hgp/baselines.hpp"
#include "hgp/benchmarks.hpp"
#include "hgp/hierarchical_model.hpp"
#include "hgp/metrics.hpp"

namespace hgp {

enum class Method { Hgp, Masked, Gpc };
enum class Mode { Terminating, FixedIterations };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Hgp: return "hgp";
    case Method::Masked: return "masked";
    case Method::Gpc: return "gpc";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "hgp") return Method::Hgp;
  if (s == "masked") return Method::Masked;
  if (s == "gpc") return Method::Gpc;
  throw InvalidArgument("unknown method '" + s + "' (expected hgp, masked or gpc)");
}

inline std::string to_string(Mode m) { return m == Mode::Terminating ? "terminating" : "fixed"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "terminating") return Mode::Terminating;
  if (s == "fixed") return Mode::FixedIterations;
  throw InvalidArgument("unknown mode '" + s + "' (expected terminating or fixed)");
}

inline std::string to_string(Termination t) { return t == Termination::Converged ? "converged" : "iteration_cap"; }

inline Termination parse_termination(const std::string& s) {
  if (s == "converged") return Termination::Converged;
  if (s == "iteration_cap") return Termination::IterationCap;
  throw InvalidArgument("unknown termination '" + s + "'");
}

struct ExperimentConfig {
  std::string benchmark = "toy";
  Method method = Method::Hgp;
  std::optional<double> alpha;  // mask value, masked GP only
  std::size_t repeats = 5;
  Mode mode = Mode::Terminating;
  LoopConfig loop{};  // loop.seed is the master seed
  SurrogateConfig surrogate{};
  std::filesystem::path output_dir = "results";
  std::size_t test_size = 100000;
  bool track_metrics = true;  // F1 / AP on the test set at every snapshot
  std::size_t workers = 0;    // 0: one per hardware thread

  void validate() const {
    (void)benchmark_by_name(benchmark);
    if (method == Method::Masked && !alpha) throw InvalidArgument("masked GP needs a mask value alpha");
    if (method != Method::Masked && alpha) throw InvalidArgument("alpha only applies to the masked GP");
    if (alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) throw InvalidArgument("alpha must be positive");
    if (repeats < 1) throw InvalidArgument("repeats must be at least 1");
    if (test_size < 1) throw InvalidArgument("test set must be nonempty");
    effective_loop(0).validate();
  }

  /// Loop settings for one repeat; fixed-iteration mode never stops early.
  [[nodiscard]] LoopConfig effective_loop(std::uint64_t repeat_seed) const {
    LoopConfig c = loop;
    c.seed = repeat_seed;
    if (mode == Mode::FixedIterations) {
      c.eta = 0.0;
      c.cov_exit = false;
    }
    return c;
  }

  [[nodiscard]] std::uint64_t repeat_seed(std::size_t repeat) const { return split_seed(loop.seed, repeat); }
  [[nodiscard]] std::uint64_t test_seed() const { return split_seed(loop.seed, 0xFFFF'FFFFu); }

  /// Directory name for this (benchmark, method) pair, e.g. "toy_masked-0.5".
  [[nodiscard]] std::string label() const {
    std::string s = benchmark + "_" + to_string(method);
    if (alpha) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "-%g", *alpha);
      s += buf;
    }
    return s;
  }
};

using SurrogateBuilder = std::function<std::unique_ptr<Surrogate>(std::span<const LabeledSample>)>;

inline SurrogateBuilder make_surrogate_builder(Method method, std::optional<double> alpha, const SurrogateConfig& config) {
  switch (method) {
    case Method::Hgp:
      return [config](std::span<const LabeledSample> s) -> std::unique_ptr<Surrogate> {
        return std::make_unique<HierarchicalSurrogate>(HierarchicalSurrogate::build(s, config));
      };
    case Method::Masked: {
      if (!alpha) throw InvalidArgument("masked GP needs a mask value alpha");
      const double a = *alpha;
      return [config, a](std::span<const LabeledSample> s) -> std::unique_ptr<Surrogate> {
        return std::make_unique<MaskedSurrogate>(MaskedSurrogate::build(s, a, config));
      };
    }
    case Method::Gpc:
      return [config](std::span<const LabeledSample> s) -> std::unique_ptr<Surrogate> {
        return std::make_unique<GpcSurrogate>(GpcSurrogate::build(s, config));
      };
  }
  throw InvalidArgument("unknown method");
}

struct RepeatError {
  std::string type;
  std::string message;
};

struct RepeatResult {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::optional<RunRecord> record;  // empty when the run failed
  std::optional<double> f1;         // at termination
  std::optional<double> average_precision;
  std::optional<RepeatError> error;

  [[nodiscard]] bool ok() const noexcept { return record.has_value(); }
};

struct Summary {
  std::optional<double> mean;
  std::optional<double> std_dev;  // n - 1 denominator; empty for a single value
};

/// Mean and sample standard deviation; empty when `values` is.
inline Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  s.mean = mean;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    s.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

struct ResultsRow {
  std::string benchmark;
  std::string method;
  std::optional<double> alpha;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  Summary pf, cov, f1, average_precision, evaluations;
  bool dnt = false;  // some repeat hit the iteration cap
  std::vector<std::string> warnings;
};

/// Aggregates the successful repeats; failed ones are excluded with a warning.
/// CoV is averaged over the repeats where it is defined (p_f > 0).
inline ResultsRow aggregate(const std::string& benchmark, Method method, std::optional<double> alpha,
                            const std::vector<RepeatResult>& repeats) {
  ResultsRow row{benchmark, to_string(method), alpha};
  std::vector<double> pf, cov, f1, ap, evals;
  for (const auto& r : repeats) {
    if (!r.ok()) {
      ++row.failed;
      row.warnings.push_back("repeat " + std::to_string(r.repeat) + " failed and is excluded" +
                             (r.error ? ": " + r.error->type + ": " + r.error->message : std::string{}));
      continue;
    }
    ++row.succeeded;
    const RunRecord& rec = *r.record;
    pf.push_back(rec.pf);
    if (rec.cov) cov.push_back(*rec.cov);
    if (r.f1) f1.push_back(*r.f1);
    if (r.average_precision) ap.push_back(*r.average_precision);
    evals.push_back(static_cast<double>(rec.total_evaluations));
    if (rec.termination == Termination::IterationCap) row.dnt = true;
  }
  if (cov.size() < pf.size()) row.warnings.push_back("CoV undefined (p_f = 0) for some repeats");
  row.pf = summarize(pf);
  row.cov = summarize(cov);
  row.f1 = summarize(f1);
  row.average_precision = summarize(ap);
  row.evaluations = summarize(evals);
  return row;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::optional<double> opt_double(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"benchmark", c.benchmark},
          {"method", to_string(c.method)},
          {"alpha", detail::opt(c.alpha)},
          {"repeats", c.repeats},
          {"mode", to_string(c.mode)},
          {"seed", c.loop.seed},
          {"eta", c.loop.eta},
          {"cov_threshold", c.loop.cov_threshold},
          {"cov_exit", c.loop.cov_exit},
          {"n_mc", c.loop.n_mc},
          {"n_initial", c.loop.n_initial},
          {"max_iterations", c.loop.max_iterations},
          {"max_enrichments", c.loop.max_enrichments},
          {"test_size", c.test_size},
          {"test_seed", c.test_seed()},
          {"predictive_includes_noise", c.surrogate.predictive_includes_noise}};
}

inline nlohmann::json to_json(const IterationRecord& it) {
  nlohmann::json j{{"iteration", it.iteration},
                   {"evaluations", it.evaluations},
                   {"proposal_size", it.proposal_size},
                   {"max_misclassification", it.max_misclassification},
                   {"pf", it.pf},
                   {"cov", detail::opt(it.cov)},
                   {"f1", detail::opt(it.f1)},
                   {"average_precision", detail::opt(it.average_precision)}};
  if (it.chosen_index) {
    j["chosen_index"] = *it.chosen_index;
    j["observed"] = it.observed->is_defined() ? nlohmann::json(it.observed->value()) : nlohmann::json("undefined");
  }
  return j;
}

inline IterationRecord iteration_from_json(const nlohmann::json& j) {
  IterationRecord it;
  it.iteration = j.at("iteration").get<std::size_t>();
  it.evaluations = j.at("evaluations").get<std::size_t>();
  it.proposal_size = j.at("proposal_size").get<std::size_t>();
  it.max_misclassification = j.at("max_misclassification").get<double>();
  it.pf = j.at("pf").get<double>();
  it.cov = detail::opt_double(j, "cov");
  it.f1 = detail::opt_double(j, "f1");
  it.average_precision = detail::opt_double(j, "average_precision");
  if (j.contains("chosen_index")) {
    it.chosen_index = j.at("chosen_index").get<std::size_t>();
    const auto& o = j.at("observed");
    it.observed = o.is_string() ? PerformanceValue::undefined() : PerformanceValue::of(o.get<double>());
  }
  return it;
}

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json its = nlohmann::json::array();
  for (const auto& it : r.iterations) its.push_back(to_json(it));
  return {{"initial_evaluations", r.initial_evaluations},
          {"total_evaluations", r.total_evaluations},
          {"acquisitions", r.acquisitions},
          {"termination", to_string(r.termination)},
          {"pf", r.pf},
          {"cov", detail::opt(r.cov)},
          {"max_misclassification", r.max_misclassification},
          {"proposal_size", r.proposal_size},
          {"iterations", std::move(its)}};
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.initial_evaluations = j.at("initial_evaluations").get<std::size_t>();
  r.total_evaluations = j.at("total_evaluations").get<std::size_t>();
  r.acquisitions = j.at("acquisitions").get<std::size_t>();
  r.termination = parse_termination(j.at("termination").get<std::string>());
  r.pf = j.at("pf").get<double>();
  r.cov = detail::opt_double(j, "cov");
  r.max_misclassification = j.at("max_misclassification").get<double>();
  r.proposal_size = j.at("proposal_size").get<std::size_t>();
  for (const auto& it : j.at("iterations")) r.iterations.push_back(iteration_from_json(it));
  return r;
}

/// One repeat's trace, with enough of the configuration to aggregate it alone.
inline nlohmann::json trace_json(const ExperimentConfig& c, const RepeatResult& r) {
  nlohmann::json j{{"benchmark", c.benchmark},
                   {"method", to_string(c.method)},
                   {"alpha", detail::opt(c.alpha)},
                   {"mode", to_string(c.mode)},
                   {"repeat", r.repeat},
                   {"seed", r.seed},
                   {"status", r.ok() ? "ok" : "failed"},
                   {"f1", detail::opt(r.f1)},
                   {"average_precision", detail::opt(r.average_precision)}};
  if (r.record) j["record"] = to_json(*r.record);
  if (r.error) j["error"] = {{"type", r.error->type}, {"message", r.error->message}};
  return j;
}

inline RepeatResult repeat_from_json(const nlohmann::json& j) {
  RepeatResult r;
  r.repeat = j.at("repeat").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.f1 = detail::opt_double(j, "f1");
  r.average_precision = detail::opt_double(j, "average_precision");
  if (j.contains("record")) r.record = run_record_from_json(j.at("record"));
  if (j.contains("error"))
    r.error = RepeatError{j.at("error").at("type").get<std::string>(), j.at("error").at("message").get<std::string>()};
  return r;
}

inline nlohmann::json to_json(const Summary& s) { return {{"mean", detail::opt(s.mean)}, {"std", detail::opt(s.std_dev)}}; }

inline nlohmann::json to_json(const ResultsRow& row) {
  return {{"benchmark", row.benchmark},
          {"method", row.method},
          {"alpha", detail::opt(row.alpha)},
          {"succeeded", row.succeeded},
          {"failed", row.failed},
          {"pf", to_json(row.pf)},
          {"cov", to_json(row.cov)},
          {"f1", to_json(row.f1)},
          {"average_precision", to_json(row.average_precision)},
          {"evaluations", to_json(row.evaluations)},
          {"dnt", row.dnt},
          {"warnings", row.warnings}};
}

// ---------------------------------------------------------------------------
// Convergence curves

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Last snapshot at each acquisition count; runs that stopped early carry their
// final snapshot forward.
inline const IterationRecord& snapshot_at(const RunRecord& r, std::size_t iteration) {
  const IterationRecord* best = &r.iterations.front();
  for (const auto& it : r.iterations) {
    if (it.iteration > iteration) break;
    best = &it;
  }
  return *best;
}

}  // namespace detail

/// Plot-ready CSV: one row per acquisition count 1..max over the successful
/// repeats, with mean/min/max bands. Missing values (undefined CoV, untracked
/// metrics) are left out of the band; a band with no values is left empty.
inline std::string convergence_csv(const std::vector<RepeatResult>& repeats) {
  std::vector<const RunRecord*> runs;
  for (const auto& r : repeats)
    if (r.ok() && !r.record->iterations.empty()) runs.push_back(&*r.record);
  std::ostringstream out;
  out << "iteration,evaluations_mean";
  const char* names[] = {"pf", "cov", "max_misclassification", "f1", "average_precision"};
  for (const char* n : names) out << ',' << n << "_mean," << n << "_min," << n << "_max";
  out << '\n';
  if (runs.empty()) return out.str();

  std::size_t last = 0;
  for (const RunRecord* r : runs) last = std::max(last, r->iterations.back().iteration);
  for (std::size_t k = 1; k <= last; ++k) {
    std::vector<const IterationRecord*> snaps;
    for (const RunRecord* r : runs) snaps.push_back(&detail::snapshot_at(*r, k));
    double evals = 0.0;
    for (const auto* s : snaps) evals += static_cast<double>(s->evaluations);
    out << k << ',' << detail::fmt(evals / static_cast<double>(snaps.size()));
    const std::function<std::optional<double>(const IterationRecord&)> fields[] = {
        [](const IterationRecord& s) -> std::optional<double> { return s.pf; },
        [](const IterationRecord& s) { return s.cov; },
        [](const IterationRecord& s) -> std::optional<double> { return s.max_misclassification; },
        [](const IterationRecord& s) { return s.f1; },
        [](const IterationRecord& s) { return s.average_precision; }};
    for (const auto& field : fields) {
      double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
      std::size_t n = 0;
      for (const auto* s : snaps) {
        if (auto v = field(*s)) {
          sum += *v;
          lo = std::min(lo, *v);
          hi = std::max(hi, *v);
          ++n;
        }
      }
      if (n == 0) out << ",,,";
      else out << ',' << detail::fmt(sum / static_cast<double>(n)) << ',' << detail::fmt(lo) << ',' << detail::fmt(hi);
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Execution

inline RepeatResult run_repeat(const ExperimentConfig& config, std::size_t repeat, const TestSet* test) {
  RepeatResult result;
  result.repeat = repeat;
  result.seed = config.repeat_seed(repeat);
  try {
    const Benchmark bench = benchmark_by_name(config.benchmark);
    const SurrogateBuilder builder = make_surrogate_builder(config.method, config.alpha, config.surrogate);
    IterationObserver observer;
    if (test && config.track_metrics) {
      observer = [test](const Surrogate& s, IterationRecord& it) {
        const Eigen::VectorXd p = s.failure_probs(test->points);
        std::vector<bool> predicted(test->size());
        for (std::size_t i = 0; i < predicted.size(); ++i) predicted[i] = p(static_cast<Eigen::Index>(i)) > 0.5;
        it.f1 = f1_from_predictions(test->labels, predicted);
        try {
          it.average_precision = average_precision_from_scores(test->labels, p);
        } catch (const UndefinedMetric&) {
        }
      };
    }
    RunResult run_result = run(
        builder, [&bench](const Eigen::VectorXd& x) { return bench.evaluate(x); },
        [&bench](Rng& rng) { return bench.sample(rng); }, config.effective_loop(result.seed), observer);
    if (test) {
      result.f1 = f1_score(*run_result.surrogate, *test);
      try {
        result.average_precision = average_precision(*run_result.surrogate, *test);
      } catch (const UndefinedMetric&) {
      }
    }
    result.record = std::move(run_result.record);
  } catch (const InvalidArgument&) {
    throw;  // configuration problems are not per-repeat failures
  } catch (const NumericalFailure& e) {
    result.error = RepeatError{"numerical_failure", e.what()};
  } catch (const ConvergenceError& e) {
    result.error = RepeatError{"convergence_error", e.what()};
  } catch (const UnbuildableSurrogate& e) {
    result.error = RepeatError{"unbuildable_surrogate", e.what()};
  } catch (const std::exception& e) {
    result.error = RepeatError{"error", e.what()};
  }
  return result;
}

struct ExperimentResult {
  ResultsRow row;
  std::vector<RepeatResult> repeats;
  std::filesystem::path directory;  // empty when nothing was written
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing", path);
  f << content;
  f.close();
  if (!f) throw IoError("write failed", path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading", path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string repeat_file_name(std::size_t repeat) { return "repeat_" + std::to_string(repeat) + ".json"; }

}  // namespace detail

/// Runs all repeats in memory (repeats in parallel, each run sequential).
inline ExperimentResult execute_experiment(const ExperimentConfig& config) {
  config.validate();
  const TestSet test = make_test_set(benchmark_by_name(config.benchmark), config.test_size, config.test_seed());

  std::vector<RepeatResult> results(config.repeats);
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(config.repeats, config.workers ? config.workers : hw);
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t r; !failed && (r = next++) < config.repeats;) {
      try {
        results[r] = run_repeat(config, r, &test);
      } catch (...) {
        if (!failed.exchange(true)) fatal = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (fatal) std::rethrow_exception(fatal);

  ExperimentResult out;
  out.row = aggregate(config.benchmark, config.method, config.alpha, results);
  out.repeats = std::move(results);
  return out;
}

/// Writes repeat_<r>.json, summary.json and convergence.csv under
/// `config.output_dir / config.label()`.
inline std::filesystem::path write_experiment(const ExperimentConfig& config, const ExperimentResult& result) {
  const std::filesystem::path dir = config.output_dir / config.label();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory (" + ec.message() + ")", dir);
  for (const auto& r : result.repeats)
    detail::write_file(dir / detail::repeat_file_name(r.repeat), trace_json(config, r).dump(2) + "\n");
  nlohmann::json summary{{"config", to_json(config)}, {"table", to_json(result.row)}};
  detail::write_file(dir / "summary.json", summary.dump(2) + "\n");
  detail::write_file(dir / "convergence.csv", convergence_csv(result.repeats));
  return dir;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result = execute_experiment(config);
  result.directory = write_experiment(config, result);
  return result;
}

/// Recomputes the table row of one run directory from its repeat traces.
inline ResultsRow table_from_traces(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a run directory", dir);
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("repeat_", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
  }
  if (ec) throw IoError("cannot list directory (" + ec.message() + ")", dir);
  if (files.empty()) throw IoError("no repeat traces found", dir);

  std::vector<RepeatResult> repeats;
  std::string benchmark, method;
  std::optional<double> alpha;
  for (const auto& f : files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_file(f));
      repeats.push_back(repeat_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed trace (") + e.what() + ")", f);
    }
    benchmark = j.at("benchmark").get<std::string>();
    method = j.at("method").get<std::string>();
    alpha = detail::opt_double(j, "alpha");
  }
  std::sort(repeats.begin(), repeats.end(), [](const auto& a, const auto& b) { return a.repeat < b.repeat; });
  return aggregate(benchmark, parse_method(method), alpha, repeats);
}

/// Text table: mean (std) per column, DNT in place of the evaluation count.
inline std::string format_table(const std::vector<ResultsRow>& rows) {
  auto cell = [](const Summary& s) {
    if (!s.mean) return std::string("n/a");
    char buf[64];
    if (s.std_dev) std::snprintf(buf, sizeof buf, "%.3g (%.2g)", *s.mean, *s.std_dev);
    else std::snprintf(buf, sizeof buf, "%.3g", *s.mean);
    return std::string(buf);
  };
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-14s %-18s %-18s %-18s %-18s %-14s\n", "benchmark", "method", "p_f", "CoV",
                "F1", "AP", "N. Eval.");
  out << line;
  for (const auto& r : rows) {
    std::string method = r.method;
    if (r.alpha) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " a=%g", *r.alpha);
      method += buf;
    }
    std::snprintf(line, sizeof line, "%-12s %-14s %-18s %-18s %-18s %-18s %-14s\n", r.benchmark.c_str(), method.c_str(),
                  cell(r.pf).c_str(), cell(r.cov).c_str(), cell(r.f1).c_str(), cell(r.average_precision).c_str(),
                  r.dnt ? "DNT" : cell(r.evaluations).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace hgp
