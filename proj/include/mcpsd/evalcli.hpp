#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcpsd/core.hpp"
#include "mcpsd/estimator.hpp"
#include "mcpsd/patterns.hpp"
#include "mcpsd/reference.hpp"
#include "mcpsd/sampler.hpp"
#include "mcpsd/synth.hpp"

namespace mcpsd {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PatternSource { Random, Ruler, Explicit };

struct PatternConfig {
  PatternSource source = PatternSource::Random;
  std::uint64_t seed = 1;      // random source
  int order = 0;               // ruler source
  std::vector<int> offsets;    // explicit source
};

enum class ReferenceKind { Welch, Truth };

struct ExperimentConfig {
  ProcessSpec process;
  PatternConfig pattern;
  int L = 0;
  int q = 0;
  int N = 0;
  SolverMethod solver = SolverMethod::LS;
  int trials = 100;
  std::uint64_t rngSeed = 1;
  int guardK = 64;
  ReferenceKind reference = ReferenceKind::Welch;
  std::vector<int> Nlist;  // consistency sweep; defaults to {50,500,5000,50000}
  std::string outPath;
};

inline void validateConfig(const ExperimentConfig& cfg) {
  try {
    validateProcess(cfg.process);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.L < 2 || cfg.L % 2 != 0)
    throw ConfigError("L: must be an even integer >= 2");
  if (cfg.q < 2 || cfg.q > cfg.L) throw ConfigError("q: must satisfy 2 <= q <= L");
  if (cfg.N < 1) throw ConfigError("N: must be >= 1");
  if (cfg.guardK < 1) throw ConfigError("guardK: must be >= 1");
  if (cfg.N <= 2 * cfg.guardK)
    throw ConfigError("N: must exceed 2*guardK (" + std::to_string(2 * cfg.guardK) +
                      ") to leave interior samples");
  if (cfg.trials < 1) throw ConfigError("trials: must be >= 1");
  if (cfg.pattern.source == PatternSource::Explicit &&
      static_cast<int>(cfg.pattern.offsets.size()) != cfg.q)
    throw ConfigError("pattern.offsets: explicit list must have exactly q entries");
}

inline SamplingPattern resolvePattern(const ExperimentConfig& cfg) {
  switch (cfg.pattern.source) {
    case PatternSource::Random:
      return randomPattern(cfg.L, cfg.q, cfg.pattern.seed);
    case PatternSource::Ruler: {
      const GolombRuler& r = golombRuler(cfg.pattern.order);
      if (r.order != cfg.q)
        throw ConfigError("pattern.order: ruler order (" + std::to_string(r.order) +
                          ") must equal q (" + std::to_string(cfg.q) + ")");
      try {
        return rulerPattern(cfg.pattern.order, cfg.L);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("pattern.order: ") + e.what());
      }
    }
    case PatternSource::Explicit:
      try {
        return makePattern(cfg.L, cfg.pattern.offsets);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("pattern.offsets: ") + e.what());
      }
  }
  throw ConfigError("pattern.source: unknown source");
}

// --- JSON configuration -----------------------------------------------------

namespace detail {

inline const nlohmann::json& requireField(const nlohmann::json& j,
                                          const std::string& key,
                                          const std::string& context) {
  if (!j.contains(key))
    throw ConfigError(context + key + ": required field is missing");
  return j.at(key);
}

template <typename T>
inline T fieldAs(const nlohmann::json& j, const std::string& key,
                 const std::string& context) {
  try {
    return requireField(j, key, context).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(context + key + ": has the wrong type");
  }
}

template <typename T>
inline T fieldOr(const nlohmann::json& j, const std::string& key, T fallback,
                 const std::string& context) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(context + key + ": has the wrong type");
  }
}

}  // namespace detail

inline ProcessSpec processFromJson(const nlohmann::json& j) {
  const std::string ctx = "process.";
  const auto kind = detail::fieldAs<std::string>(j, "kind", ctx);
  try {
    if (kind == "white") {
      return whiteProcess(detail::fieldOr<double>(j, "variance", 1.0, ctx),
                          detail::fieldOr<double>(j, "rateHz", 1.0, ctx));
    }
    if (kind == "ma-lines") {
      std::vector<SpectralLine> lines;
      if (j.contains("lines")) {
        for (const auto& lj : j.at("lines")) {
          SpectralLine ln;
          ln.amplitude = detail::fieldAs<double>(lj, "amplitude", ctx + "lines.");
          if (lj.contains("omegaOverPi"))
            ln.omega = std::numbers::pi *
                       detail::fieldAs<double>(lj, "omegaOverPi", ctx + "lines.");
          else
            ln.omega = detail::fieldAs<double>(lj, "omega", ctx + "lines.");
          lines.push_back(ln);
        }
      }
      return maProcessWithLines(
          detail::fieldAs<std::vector<double>>(j, "maCoeffs", ctx), std::move(lines),
          detail::fieldOr<double>(j, "variance", 1.0, ctx),
          detail::fieldOr<double>(j, "rateHz", 1.0, ctx));
    }
    if (kind == "sparse-multiband" || kind == "notched") {
      std::vector<BandHz> bands;
      for (const auto& bj : detail::requireField(j, "bands", ctx)) {
        bands.push_back(BandHz{detail::fieldAs<double>(bj, "centerHz", ctx + "bands."),
                               detail::fieldAs<double>(bj, "widthHz", ctx + "bands.")});
      }
      const double rate = detail::fieldAs<double>(j, "rateHz", ctx);
      if (kind == "sparse-multiband")
        return sparseMultibandProcess(rate, std::move(bands),
                                      detail::fieldOr<int>(j, "synthesisTaps", 513, ctx));
      ProcessSpec s = notchedProcess(rate, std::move(bands),
                                     detail::fieldOr<int>(j, "synthesisTaps", 2049, ctx));
      s.variance = detail::fieldOr<double>(j, "variance", 1.0, ctx);
      validateProcess(s);
      return s;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ctx + std::string(e.what()));
  }
  throw ConfigError("process.kind: expected one of white, ma-lines, sparse-multiband, notched");
}

inline ExperimentConfig configFromJson(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.process = processFromJson(detail::requireField(j, "process", ""));

  if (j.contains("pattern")) {
    const auto& pj = j.at("pattern");
    const auto src = detail::fieldAs<std::string>(pj, "source", "pattern.");
    if (src == "random") {
      cfg.pattern.source = PatternSource::Random;
      cfg.pattern.seed = detail::fieldOr<std::uint64_t>(pj, "seed", 1, "pattern.");
    } else if (src == "ruler") {
      cfg.pattern.source = PatternSource::Ruler;
      cfg.pattern.order = detail::fieldAs<int>(pj, "order", "pattern.");
    } else if (src == "explicit") {
      cfg.pattern.source = PatternSource::Explicit;
      cfg.pattern.offsets =
          detail::fieldAs<std::vector<int>>(pj, "offsets", "pattern.");
    } else {
      throw ConfigError("pattern.source: expected one of random, ruler, explicit");
    }
  }

  cfg.L = detail::fieldAs<int>(j, "L", "");
  cfg.q = detail::fieldAs<int>(j, "q", "");
  cfg.N = detail::fieldAs<int>(j, "N", "");

  const auto solver = detail::fieldOr<std::string>(j, "solver", "ls", "");
  if (solver == "ls")
    cfg.solver = SolverMethod::LS;
  else if (solver == "nnls")
    cfg.solver = SolverMethod::NNLS;
  else
    throw ConfigError("solver: expected ls or nnls");

  cfg.trials = detail::fieldOr<int>(j, "trials", 100, "");
  cfg.rngSeed = detail::fieldOr<std::uint64_t>(j, "rngSeed", 1, "");
  cfg.guardK = detail::fieldOr<int>(j, "guardK", 64, "");

  const auto ref = detail::fieldOr<std::string>(j, "reference", "welch", "");
  if (ref == "welch")
    cfg.reference = ReferenceKind::Welch;
  else if (ref == "truth")
    cfg.reference = ReferenceKind::Truth;
  else
    throw ConfigError("reference: expected welch or truth");

  cfg.Nlist = detail::fieldOr<std::vector<int>>(j, "Nlist", {}, "");
  cfg.outPath = detail::fieldOr<std::string>(j, "out", "", "");

  validateConfig(cfg);
  return cfg;
}

// Scenario presets; trial counts default to 100 where the scenario itself
// does not fix one.
inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "ma-lines") {
    cfg.process = maProcessWithLines(
        {1.0, 2.0, 0.0, -2.0, -1.0},
        {{2.0, 8.0 * std::numbers::pi / 17.0}, {2.0, 11.0 * std::numbers::pi / 20.0}});
    cfg.pattern = {PatternSource::Random, 1, 0, {}};
    cfg.L = 64;
    cfg.q = 50;
    cfg.N = 10000;
    cfg.solver = SolverMethod::LS;
    cfg.reference = ReferenceKind::Truth;
    cfg.trials = 100;
  } else if (name == "ma-lines-consistency") {
    cfg.process = maProcessWithLines(
        {1.0, 2.0, 0.0, -2.0, -1.0},
        {{2.0, 8.0 * std::numbers::pi / 17.0}, {2.0, 11.0 * std::numbers::pi / 20.0}});
    cfg.pattern = {PatternSource::Random, 1, 0, {}};
    cfg.L = 64;
    cfg.q = 50;
    cfg.N = 50000;
    cfg.solver = SolverMethod::LS;
    cfg.reference = ReferenceKind::Truth;
    cfg.trials = 10;
    cfg.guardK = 20;  // keeps the shortest sweep point N=50 feasible
    cfg.Nlist = {50, 500, 5000, 50000};
  } else if (name == "sparse-multiband-noncompressive") {
    cfg.process = sparseMultibandProcess(
        2e9, {{304.6875e6, 30e6}, {695.3125e6, 30e6}}, 513);
    // seed chosen so the random pattern covers all folded offset
    // differences (full-rank stacked matrix; q=20 sits near the threshold)
    cfg.pattern = {PatternSource::Random, 4, 0, {}};
    cfg.L = 128;
    cfg.q = 20;
    cfg.N = 1000;
    cfg.solver = SolverMethod::LS;
    cfg.reference = ReferenceKind::Welch;
    cfg.trials = 100;
  } else if (name == "sparse-multiband-compressive") {
    cfg.process = sparseMultibandProcess(
        2e9, {{304.6875e6, 30e6}, {695.3125e6, 30e6}}, 513);
    cfg.pattern = {PatternSource::Ruler, 1, 7, {}};
    cfg.L = 128;
    cfg.q = 7;
    cfg.N = 1000;
    cfg.solver = SolverMethod::NNLS;
    cfg.reference = ReferenceKind::Welch;
    cfg.trials = 100;
  } else if (name == "cognitive-radio") {
    cfg.process = notchedProcess(
        2e9, {{336.875e6, 80e6}, {649.375e6, 80e6}}, 2049);
    cfg.pattern = {PatternSource::Random, 1, 0, {}};
    cfg.L = 64;
    cfg.q = 25;
    cfg.N = 4096;
    cfg.solver = SolverMethod::LS;
    cfg.reference = ReferenceKind::Welch;
    cfg.trials = 100;
  } else {
    throw ConfigError("preset: unknown preset '" + name + "'");
  }
  validateConfig(cfg);
  return cfg;
}

// --- Monte Carlo orchestration ----------------------------------------------

struct TrialOutcome {
  int trial = 0;
  ErrorMetrics errorMetrics;
  double meanSquaredError = 0.0;  // ||estimate - reference||^2 / L
  std::vector<double> estimate;
};

struct ExperimentResult {
  SamplingPattern pattern;
  PatternDiagnostics diagnostics;
  TradeoffReport tradeoffReport;
  std::vector<TrialOutcome> trials;
  std::vector<double> meanEstimate;
  std::vector<double> reference;  // trial-averaged reference vector
  double meanNse = 0.0;
  double stddevNse = 0.0;
  double meanMse = 0.0;
  double wallSeconds = 0.0;
  int L = 0;
  double rateHz = 1.0;
};

namespace detail {

inline void parallelFor(int jobs, int count, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int t = 0; t < count; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    while (true) {
      const int t = next.fetch_add(1);
      if (t >= count) break;
      try {
        fn(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (int t = 0; t < count; ++t)
    if (errors[t]) std::rethrow_exception(errors[t]);
}

}  // namespace detail

// Full pipeline per trial (generate -> cosetSample -> fractionalDelay ->
// assembleU -> solve -> metrics against the configured reference), with
// per-trial RNG substreams keyed by trial index so results are deterministic
// for a fixed seed regardless of scheduling, and earlier trials are
// unaffected by the trial count.
inline ExperimentResult runExperiment(const ExperimentConfig& cfg, int jobs = 1) {
  validateConfig(cfg);
  const auto start = std::chrono::steady_clock::now();

  ExperimentResult result;
  result.L = cfg.L;
  result.rateHz = cfg.process.rateHz;
  result.pattern = resolvePattern(cfg);
  const MeasurementSystem system = buildMeasurementSystem(result.pattern);
  result.diagnostics = diagnose(system);
  result.tradeoffReport = tradeoff(cfg.L, cfg.process.rateHz, std::nullopt, cfg.q);

  PsdEstimate truth;
  if (cfg.reference == ReferenceKind::Truth)
    truth = truePsd(cfg.process, cfg.L, cfg.process.rateHz);

  const std::size_t signalLength =
      static_cast<std::size_t>(cfg.N) * cfg.L + cfg.L;
  result.trials.resize(cfg.trials);
  std::vector<std::vector<double>> references(cfg.trials);

  detail::parallelFor(jobs, cfg.trials, [&](int t) {
    const NyquistSignal signal =
        generate(cfg.process, signalLength, substreamSeed(cfg.rngSeed, t));
    const CosetSampleSet cosets = cosetSample(signal, result.pattern, cfg.N);
    const DelayedSampleSet delayed = fractionalDelay(cosets, cfg.guardK);
    const CorrelationVector corr = assembleU(delayed, system.ordering);
    const SolverReport rep = cfg.solver == SolverMethod::LS
                                 ? solveLS(system, corr, cfg.process.rateHz)
                                 : solveNNLS(system, corr, cfg.process.rateHz);

    PsdEstimate ref;
    if (cfg.reference == ReferenceKind::Welch) {
      NyquistSignal window{
          std::vector<double>(signal.samples.begin(),
                              signal.samples.begin() +
                                  static_cast<std::size_t>(cfg.N) * cfg.L),
          signal.rateHz};
      ref = welchSubbands(window, cfg.L);
    } else {
      ref = truth;
    }

    TrialOutcome out;
    out.trial = t;
    out.errorMetrics = metrics(rep.estimate, ref);
    double sq = 0.0;
    for (int l = 0; l < cfg.L; ++l) {
      const double d = rep.estimate.values[l] - ref.values[l];
      sq += d * d;
    }
    out.meanSquaredError = sq / cfg.L;
    out.estimate = rep.estimate.values;
    result.trials[t] = std::move(out);
    references[t] = std::move(ref.values);
  });

  result.meanEstimate.assign(cfg.L, 0.0);
  result.reference.assign(cfg.L, 0.0);
  for (int t = 0; t < cfg.trials; ++t) {
    for (int l = 0; l < cfg.L; ++l) {
      result.meanEstimate[l] += result.trials[t].estimate[l] / cfg.trials;
      result.reference[l] += references[t][l] / cfg.trials;
    }
  }
  double sum = 0.0, sum2 = 0.0, mse = 0.0;
  for (const auto& t : result.trials) {
    sum += t.errorMetrics.normalizedSquaredError;
    sum2 += t.errorMetrics.normalizedSquaredError *
            t.errorMetrics.normalizedSquaredError;
    mse += t.meanSquaredError;
  }
  result.meanNse = sum / cfg.trials;
  result.meanMse = mse / cfg.trials;
  result.stddevNse =
      cfg.trials > 1
          ? std::sqrt(std::max(0.0, (sum2 - sum * sum / cfg.trials) / (cfg.trials - 1)))
          : 0.0;
  result.wallSeconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// One runExperiment per N, shared process/pattern/seed configuration.
inline std::vector<std::pair<int, double>> consistencyCurve(
    const ExperimentConfig& base, const std::vector<int>& Nlist, int jobs = 1) {
  if (Nlist.empty()) throw ConfigError("Nlist: must not be empty");
  for (std::size_t i = 1; i < Nlist.size(); ++i)
    if (Nlist[i] <= Nlist[i - 1])
      throw ConfigError("Nlist: values must be strictly increasing");
  std::vector<std::pair<int, double>> curve;
  curve.reserve(Nlist.size());
  for (int n : Nlist) {
    ExperimentConfig cfg = base;
    cfg.N = n;
    curve.emplace_back(n, runExperiment(cfg, jobs).meanMse);
  }
  return curve;
}

// --- CSV emission -------------------------------------------------------------

namespace detail {

inline std::string formatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void writeEstimatesCsv(std::ostream& os, const ExperimentResult& result) {
  os << "bandIndex,m,fLowHz,fHighHz,estimate,reference\n";
  for (int l = 0; l < result.L; ++l) {
    const int m = subbandIndex(l, result.L);
    os << l << ',' << m << ','
       << detail::formatDouble(subbandLowHz(m, result.L, result.rateHz)) << ','
       << detail::formatDouble(subbandHighHz(m, result.L, result.rateHz)) << ','
       << detail::formatDouble(result.meanEstimate[l]) << ','
       << detail::formatDouble(result.reference[l]) << '\n';
  }
}

inline void writeMetricsCsv(std::ostream& os, const ExperimentResult& result) {
  os << "trial,nse,maxAbsError\n";
  for (const auto& t : result.trials)
    os << t.trial << ',' << detail::formatDouble(t.errorMetrics.normalizedSquaredError)
       << ',' << detail::formatDouble(t.errorMetrics.maxAbsError) << '\n';
}

inline void writeConsistencyCsv(std::ostream& os,
                                const std::vector<std::pair<int, double>>& curve) {
  os << "N,meanSquaredError\n";
  for (const auto& [n, mse] : curve)
    os << n << ',' << detail::formatDouble(mse) << '\n';
}

// Channel-count tradeoff rows over a range of resolutions: the minimum q
// admitting unique unconstrained recovery, and (when a sparsity target is
// given) the minimum q for the sparse regime.
inline void emitTradeoffTable(std::ostream& os, const std::vector<int>& Ls, double W,
                              std::optional<int> sparsity = std::nullopt) {
  os << "L,minQNoncompressive,minQCompressive,resolutionHz,"
        "noncompressiveRateHz,compressiveRateHz\n";
  for (int L : Ls) {
    const TradeoffReport r = tradeoff(L, W, sparsity);
    os << L << ',' << r.minQNoncompressive << ',';
    if (r.minQCompressive) os << *r.minQCompressive;
    os << ',' << detail::formatDouble(r.resolutionHz) << ','
       << detail::formatDouble(r.noncompressiveRateHz) << ',';
    if (r.compressiveRateHz) os << detail::formatDouble(*r.compressiveRateHz);
    os << '\n';
  }
}

}  // namespace mcpsd
