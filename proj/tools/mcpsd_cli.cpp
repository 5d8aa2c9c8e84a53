#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <mcpsd/evalcli.hpp>

namespace {

struct CommonOpts {
  std::string configPath;
  std::string presetName;
  std::string outPath;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void addCommonOptions(CLI::App* cmd, CommonOpts& opts, bool withJobs = true) {
  auto* c = cmd->add_option("--config", opts.configPath, "JSON experiment config");
  auto* p = cmd->add_option("--preset", opts.presetName,
                            "named scenario preset (ma-lines, ma-lines-consistency, "
                            "sparse-multiband-noncompressive, sparse-multiband-compressive, "
                            "cognitive-radio)");
  c->excludes(p);
  cmd->add_option("--seed", opts.seed, "override the master RNG seed");
  cmd->add_option("--out", opts.outPath, "output CSV path (default: stdout)");
  if (withJobs) cmd->add_option("--jobs", opts.jobs, "worker threads for trials");
}

nlohmann::json loadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mcpsd::ConfigError("config: cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw mcpsd::ConfigError("config: " + std::string(e.what()));
  }
}

mcpsd::ExperimentConfig loadExperimentConfig(const CommonOpts& opts) {
  mcpsd::ExperimentConfig cfg;
  if (!opts.presetName.empty())
    cfg = mcpsd::preset(opts.presetName);
  else if (!opts.configPath.empty())
    cfg = mcpsd::configFromJson(loadJsonFile(opts.configPath));
  else
    throw mcpsd::ConfigError("config: provide --preset or --config");
  if (opts.seed) cfg.rngSeed = *opts.seed;
  if (!opts.outPath.empty()) cfg.outPath = opts.outPath;
  return cfg;
}

// Writes through to a file when a path is set, stdout otherwise.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw mcpsd::ConfigError("out: cannot open '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

void printSummary(const mcpsd::ExperimentResult& result) {
  std::ostringstream os;
  os << "pattern offsets:";
  for (int c : result.pattern.offsets) os << ' ' << c;
  os << "\nstacked rows: " << result.diagnostics.stackedRows
     << "  rank: " << result.diagnostics.rank
     << "  fullRank: " << (result.diagnostics.fullRank ? "yes" : "no");
  if (result.diagnostics.fullRank)
    os << "  cond: " << result.diagnostics.conditionNumber;
  os << "\ntrials: " << result.trials.size() << "  mean NSE: " << result.meanNse
     << "  stddev NSE: " << result.stddevNse << "  mean MSE: " << result.meanMse
     << "\nwall seconds: " << result.wallSeconds << '\n';
  std::cerr << os.str();
}

int runEstimate(const CommonOpts& opts) {
  mcpsd::ExperimentConfig cfg = loadExperimentConfig(opts);
  cfg.trials = 1;
  const auto result = mcpsd::runExperiment(cfg, 1);
  OutputTarget out(cfg.outPath);
  mcpsd::writeEstimatesCsv(out.stream(), result);
  printSummary(result);
  return 0;
}

int runExperimentCmd(const CommonOpts& opts) {
  mcpsd::ExperimentConfig cfg = loadExperimentConfig(opts);
  const auto result = mcpsd::runExperiment(cfg, opts.jobs);
  OutputTarget out(cfg.outPath);
  mcpsd::writeMetricsCsv(out.stream(), result);
  printSummary(result);
  return 0;
}

int runConsistency(const CommonOpts& opts) {
  mcpsd::ExperimentConfig cfg = loadExperimentConfig(opts);
  std::vector<int> Nlist = cfg.Nlist;
  if (Nlist.empty()) Nlist = {50, 500, 5000, 50000};
  const auto curve = mcpsd::consistencyCurve(cfg, Nlist, opts.jobs);
  OutputTarget out(cfg.outPath);
  mcpsd::writeConsistencyCsv(out.stream(), curve);
  return 0;
}

int runTradeoff(const CommonOpts& opts) {
  std::vector<int> Ls;
  double rateHz = 1.0;
  std::optional<int> sparsity;
  if (!opts.configPath.empty()) {
    const nlohmann::json j = loadJsonFile(opts.configPath);
    if (j.contains("Ls")) {
      Ls = j.at("Ls").get<std::vector<int>>();
    } else if (j.contains("Lmin") && j.contains("Lmax")) {
      const int lmin = j.at("Lmin").get<int>();
      const int lmax = j.at("Lmax").get<int>();
      const int lstep = j.value("Lstep", 2);
      for (int L = lmin; L <= lmax; L += lstep) Ls.push_back(L);
    }
    rateHz = j.value("rateHz", 1.0);
    if (j.contains("sparsity")) sparsity = j.at("sparsity").get<int>();
  }
  if (Ls.empty()) Ls = {2, 4, 8, 16, 32, 64, 128, 256, 400, 512};
  OutputTarget out(opts.outPath);
  mcpsd::emitTradeoffTable(out.stream(), Ls, rateHz, sparsity);
  return 0;
}

int runPattern(const CommonOpts& opts) {
  if (opts.configPath.empty())
    throw mcpsd::ConfigError("config: the pattern subcommand needs --config");
  const nlohmann::json j = loadJsonFile(opts.configPath);
  const std::string action = j.value("action", "random");
  OutputTarget out(opts.outPath);
  std::ostream& os = out.stream();

  if (action == "ruler") {
    const auto& ruler = mcpsd::golombRuler(j.at("order").get<int>());
    os << "order," << ruler.order << "\nlength," << ruler.length() << "\nmarks";
    for (int m : ruler.marks) os << ',' << m;
    os << '\n';
    return 0;
  }

  mcpsd::SamplingPattern pattern;
  if (action == "random") {
    std::uint64_t seed = j.value("seed", std::uint64_t{1});
    if (opts.seed) seed = *opts.seed;
    pattern = mcpsd::randomPattern(j.at("L").get<int>(), j.at("q").get<int>(), seed);
  } else if (action == "diagnose") {
    pattern = mcpsd::makePattern(j.at("L").get<int>(),
                                 j.at("offsets").get<std::vector<int>>());
  } else {
    throw mcpsd::ConfigError("action: expected one of random, ruler, diagnose");
  }

  const auto diag = mcpsd::diagnose(mcpsd::buildMeasurementSystem(pattern));
  os << "L," << pattern.L << "\nq," << pattern.q() << "\noffsets";
  for (int c : pattern.offsets) os << ',' << c;
  os << "\nstackedRows," << diag.stackedRows << "\nrank," << diag.rank
     << "\nfullRank," << (diag.fullRank ? 1 : 0) << "\nconditionNumber,"
     << diag.conditionNumber << "\nrowRatio," << diag.rowRatio << '\n';
  return 0;
}

int runSynth(const CommonOpts& opts) {
  mcpsd::ExperimentConfig cfg = loadExperimentConfig(opts);
  const std::size_t length = static_cast<std::size_t>(cfg.N) * cfg.L + cfg.L;
  const auto signal = mcpsd::generate(cfg.process, length, cfg.rngSeed);
  OutputTarget out(cfg.outPath);
  std::ostream& os = out.stream();
  os << "sample\n";
  for (double v : signal.samples) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    os << buf;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power-spectrum estimation from sub-Nyquist multi-coset samples"};
  app.require_subcommand(1);

  CommonOpts estimateOpts, experimentOpts, consistencyOpts, tradeoffOpts,
      patternOpts, synthOpts;
  auto* estimateCmd =
      app.add_subcommand("estimate", "single-trial estimate, estimates CSV out");
  addCommonOptions(estimateCmd, estimateOpts, false);
  auto* experimentCmd =
      app.add_subcommand("experiment", "Monte Carlo run, per-trial metrics CSV out");
  addCommonOptions(experimentCmd, experimentOpts);
  auto* consistencyCmd = app.add_subcommand(
      "consistency", "mean squared error across sample counts, CSV out");
  addCommonOptions(consistencyCmd, consistencyOpts);
  auto* tradeoffCmd =
      app.add_subcommand("tradeoff", "channel-count/resolution tradeoff table");
  addCommonOptions(tradeoffCmd, tradeoffOpts, false);
  auto* patternCmd =
      app.add_subcommand("pattern", "generate, diagnose, or tabulate patterns");
  addCommonOptions(patternCmd, patternOpts, false);
  auto* synthCmd = app.add_subcommand("synth", "dump one process realization");
  addCommonOptions(synthCmd, synthOpts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (estimateCmd->parsed()) return runEstimate(estimateOpts);
    if (experimentCmd->parsed()) return runExperimentCmd(experimentOpts);
    if (consistencyCmd->parsed()) return runConsistency(consistencyOpts);
    if (tradeoffCmd->parsed()) return runTradeoff(tradeoffOpts);
    if (patternCmd->parsed()) return runPattern(patternOpts);
    if (synthCmd->parsed()) return runSynth(synthOpts);
  } catch (const mcpsd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
