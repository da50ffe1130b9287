// Command-line front end: simulate, fit, forecast, backtest, experiment.

#include "tdcc/baselines.hpp"
#include "tdcc/engine.hpp"
#include "tdcc/error.hpp"
#include "tdcc/io.hpp"
#include "tdcc/portfolio.hpp"
#include "tdcc/simulate.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace {

using namespace tdcc;

constexpr const char* kModule = "cli";

const std::set<std::string> kFlags = {"constrained", "verbose"};

// Splices `key = value` lines of --config into the arguments after the
// subcommand, skipping keys that are also given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw Error(ErrorCode::InvalidArgument, kModule, "--config needs a path");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;
  auto on_command_line = [&](const std::string& flag) {
    return std::any_of(rest.begin(), rest.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> injected;
  for (auto [key, value] : parse_key_values(read_text(*path), *path)) {
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    if (on_command_line(flag)) continue;
    if (kFlags.count(key)) {
      if (value == "true" || value == "1") injected.push_back(flag);
      continue;
    }
    injected.push_back(flag);
    injected.push_back(value);
  }
  auto sub = std::find_if(rest.begin(), rest.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
  if (sub != rest.end()) ++sub;
  rest.insert(sub, injected.begin(), injected.end());
  return rest;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_text(path, content);
  }
}

MethodSpec resolve_method(std::string method, const std::string& intercept) {
  if (method.find('-') == std::string::npos) {
    method += "-" + (intercept.empty() ? std::string("s") : intercept);
    return MethodSpec::parse(method);
  }
  MethodSpec spec = MethodSpec::parse(method);
  if (!intercept.empty()) spec.intercept = parse_intercept_method(intercept);
  return spec;
}

Dataset load_data(const std::string& path, const std::string& dims) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "--data is required");
  Dataset data = load_dataset(path);
  if (!dims.empty()) {
    const Dims d = Dims::parse(dims);
    if (d.total() != data.dims.total()) {
      throw Error(ErrorCode::ShapeMismatch, kModule,
                  fmt::format("--dims {} does not match the file's {} entries", dims, data.dims.total()));
    }
    for (Tensor& t : data.x) t = Tensor(d, t.data());
    data.dims = d;
  }
  return data;
}

std::vector<Matrix> intercepts_from_source(const std::string& source, const Dims& dims) {
  std::vector<Matrix> c;
  if (source.rfind("equicorr:", 0) == 0) {
    double rho = 0.0;
    try {
      rho = std::stod(source.substr(9));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Parse, kModule, fmt::format("malformed intercept source '{}'", source));
    }
    for (std::size_t k = 0; k < dims.order(); ++k) c.push_back(equicorrelation(dims[k], rho));
  } else {
    c = load_intercepts(source);
  }
  if (c.size() != dims.order()) {
    throw Error(ErrorCode::ShapeMismatch, kModule, fmt::format("intercept source has {} matrices for an order-{} tensor",
                                                               c.size(), dims.order()));
  }
  return c;
}

struct Common {
  std::string data;
  std::string dims;
  std::uint64_t seed = 1;
  std::string out;
  std::string method = "tdcc-s";
  std::string intercept;
  std::size_t threads = default_threads();
};

struct SimulateArgs {
  std::size_t T = 500;
  std::size_t burn_in = 200;
  std::string c_source = "equicorr:0.3";
  double omega = 0.4, garch_a = 0.05, garch_b = 0.9, alpha = 0.05, beta = 0.93;
};

struct BacktestArgs {
  std::string objective = "minvar";
  bool constrained = false;
  std::size_t train_window = 630;
  std::size_t stride = 1;
  double annualization = 252.0;
  std::string summary;
  std::string mu;
};

struct ExperimentArgs {
  std::vector<std::size_t> horizons{500};
  std::vector<std::string> methods;
  std::size_t replications = 100;
  std::size_t burn_in = 200;
  std::string c_source = "equicorr:0.3";
  std::string meta;
  bool verbose = false;
};

int cmd_simulate(const Common& c, const SimulateArgs& s) {
  if (c.dims.empty()) throw Error(ErrorCode::InvalidArgument, kModule, "--dims is required");
  const Dims dims = Dims::parse(c.dims);
  SimConfig cfg;
  cfg.model = make_truth(dims, intercepts_from_source(s.c_source, dims), {s.omega, s.garch_a, s.garch_b},
                         {s.alpha, s.beta});
  cfg.T = s.T;
  cfg.burn_in = s.burn_in;
  cfg.seed = c.seed;
  SimPath path = simulate_tdcc(cfg);
  Dataset data{dims, std::move(path.x), {}};
  emit(c.out, format_dataset(data));
  return 0;
}

int cmd_fit(const Common& c) {
  const Dataset data = load_data(c.data, c.dims);
  const MethodSpec spec = resolve_method(c.method, c.intercept);
  if (data.x.size() < 50) throw Error(ErrorCode::InvalidArgument, kModule, "fit needs at least 50 observations");
  FitOptions opts;
  opts.threads = c.threads;
  const MethodFit fit = fit_method(data.x, spec, std::nullopt, opts);
  emit(c.out, model_to_json(fit).dump(2) + "\n");
  return 0;
}

int cmd_forecast(const Common& c, const std::string& model_path) {
  const Dataset data = load_data(c.data, c.dims);
  Matrix sigma;
  if (!model_path.empty()) {
    const StoredModel stored = load_model(model_path);
    if (!(stored.source_dims == data.dims)) {
      throw Error(ErrorCode::ShapeMismatch, kModule,
                  fmt::format("model expects dims {}, data has {}", stored.source_dims.str(), data.dims.str()));
    }
    const Adapted a = adapt(data.x, stored.method);
    sigma = to_source_order(forecast_one_step(stored.model, a.x).sigma, a.perm);
  } else {
    const MethodSpec spec = resolve_method(c.method, c.intercept);
    if (data.x.size() < 50) throw Error(ErrorCode::InvalidArgument, kModule, "fit needs at least 50 observations");
    FitOptions opts;
    opts.threads = c.threads;
    const MethodFit fit = fit_method(data.x, spec, std::nullopt, opts);
    sigma = to_source_order(forecast_one_step(fit.fit).sigma, fit.perm);
  }
  emit(c.out, forecast_csv(sigma));
  return 0;
}

int cmd_backtest(const Common& c, const BacktestArgs& b) {
  const Dataset data = load_data(c.data, c.dims);
  BacktestConfig cfg;
  cfg.method = resolve_method(c.method, c.intercept);
  cfg.train_window = b.train_window;
  cfg.objective = parse_objective(b.objective);
  cfg.constrained = b.constrained;
  cfg.stride = b.stride;
  cfg.periods_per_year = b.annualization;
  cfg.threads = c.threads;
  if (!b.mu.empty()) {
    const Dataset mu = load_dataset(b.mu);
    if (mu.dims.total() != data.dims.total()) throw Error(ErrorCode::ShapeMismatch, kModule, "--mu has the wrong width");
    for (const Tensor& t : mu.x) cfg.mu.push_back(t.data());
  }
  const BacktestReport rep = rolling_backtest(data.x, cfg);
  emit(c.out, backtest_csv(rep, data.dims, data.dates));

  nlohmann::ordered_json j;
  j["schema"] = "tdcc_backtest_v1";
  j["AV"] = rep.av;
  j["SD"] = rep.sd;
  j["IR"] = rep.ir ? nlohmann::ordered_json(*rep.ir) : nlohmann::ordered_json(nullptr);
  j["IR_defined"] = rep.ir.has_value();
  j["T_test"] = rep.returns.size();
  j["fallbacks"] = rep.fallbacks;
  j["fallback_messages"] = rep.fallback_messages;
  j["refits"] = rep.refits;
  nlohmann::ordered_json cfg_echo;
  cfg_echo["data"] = c.data;
  cfg_echo["dims"] = data.dims.str();
  cfg_echo["method"] = cfg.method.name();
  cfg_echo["objective"] = to_string(cfg.objective);
  cfg_echo["constrained"] = cfg.constrained;
  cfg_echo["train_window"] = cfg.train_window;
  cfg_echo["stride"] = cfg.stride;
  cfg_echo["annualization"] = cfg.periods_per_year;
  cfg_echo["mean_forecast"] = b.mu.empty() ? std::string("training-window sample mean") : b.mu;
  j["config"] = std::move(cfg_echo);
  const std::string summary = !b.summary.empty() ? b.summary : (c.out.empty() || c.out == "-" ? "" : c.out + ".json");
  if (summary.empty()) {
    std::cerr << j.dump(2) << "\n";
  } else {
    write_text(summary, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_experiment(const Common& c, const ExperimentArgs& e) {
  ExperimentConfig cfg;
  cfg.dims = c.dims.empty() ? Dims{10, 11, 4} : Dims::parse(c.dims);
  cfg.horizons = e.horizons;
  if (e.methods.empty()) {
    cfg.methods = method_grid(cfg.dims.order(), true);
  } else {
    for (const std::string& m : e.methods) cfg.methods.push_back(MethodSpec::parse(m));
  }
  cfg.replications = e.replications;
  cfg.seed = c.seed;
  cfg.burn_in = e.burn_in;
  cfg.intercepts = intercepts_from_source(e.c_source, cfg.dims);
  cfg.threads = c.threads;
  ProgressFn progress;
  if (e.verbose) {
    progress = [](std::size_t r, std::size_t T) { std::cerr << fmt::format("replication {} T={} done\n", r, T); };
  }
  const ExperimentReport rep = run_experiment(cfg, progress);
  emit(c.out, experiment_csv(rep));

  nlohmann::ordered_json j;
  j["schema"] = "tdcc_experiment_v1";
  nlohmann::ordered_json conf;
  conf["dims"] = cfg.dims.str();
  conf["T"] = cfg.horizons;
  std::vector<std::string> names;
  for (const auto& m : cfg.methods) names.push_back(m.name());
  conf["methods"] = names;
  conf["replications"] = cfg.replications;
  conf["seed"] = cfg.seed;
  conf["burn_in"] = cfg.burn_in;
  conf["c_source"] = e.c_source;
  conf["truth"] = {{"omega", cfg.garch.omega}, {"a", cfg.garch.a}, {"b", cfg.garch.b},
                   {"alpha", cfg.corr.alpha}, {"beta", cfg.corr.beta}};
  conf["rng"] = "philox4x32-10, key = seed + replication";
  j["config"] = std::move(conf);
  j["substitutions"] = rep.substitutions;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const CellReport& cell : rep.cells) {
    nlohmann::ordered_json cj;
    cj["method"] = cell.requested.name();
    cj["fitted_as"] = cell.used.name();
    cj["T"] = cell.T;
    cj["mean_loss"] = cell.mean;
    cj["sd_loss"] = cell.sd;
    cj["n_completed"] = cell.completed;
    cj["failures"] = cell.failures;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  const std::string meta = !e.meta.empty() ? e.meta : (c.out.empty() || c.out == "-" ? "" : c.out + ".json");
  if (meta.empty()) {
    std::cerr << j.dump(2) << "\n";
  } else {
    write_text(meta, j.dump(2) + "\n");
  }
  return 0;
}

void add_common(CLI::App* sub, Common& c, bool data, bool method) {
  if (data) sub->add_option("--data", c.data, "DatasetFile with a '# dims=' header");
  sub->add_option("--dims", c.dims, "Tensor shape N1xN2x...xNK");
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--out", c.out, "Output path ('-' for stdout)");
  if (method) {
    sub->add_option("--method", c.method, "tdcc|mdcc<k>|vdcc with optional -s/-ls suffix");
    sub->add_option("--intercept", c.intercept, "Intercept estimator: sample|ls");
  }
  sub->add_option("--threads", c.threads, "Worker threads (results do not depend on this)");
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor DCC-GARCH: simulation, estimation, forecasting and portfolio backtests"};
  app.require_subcommand(1);
  Common common;
  SimulateArgs sim;
  BacktestArgs bt;
  ExperimentArgs ex;
  std::string model_path;

  auto* simulate = app.add_subcommand("simulate", "Simulate a series from a tensor DCC model");
  add_common(simulate, common, false, false);
  simulate->add_option("--T", sim.T, "Number of observations");
  simulate->add_option("--burn-in", sim.burn_in, "Discarded initial draws");
  simulate->add_option("--c-source", sim.c_source, "equicorr:<c> or a JSON file with an 'intercepts' array");
  simulate->add_option("--omega", sim.omega, "GARCH intercept (every entry)");
  simulate->add_option("--garch-a", sim.garch_a, "GARCH news weight (every entry)");
  simulate->add_option("--garch-b", sim.garch_b, "GARCH persistence (every entry)");
  simulate->add_option("--alpha", sim.alpha, "Correlation news weight (every mode)");
  simulate->add_option("--beta", sim.beta, "Correlation persistence (every mode)");

  auto* fit = app.add_subcommand("fit", "Two-step estimation; writes a tdcc_model_v1 JSON file");
  add_common(fit, common, true, true);

  auto* forecast = app.add_subcommand("forecast", "One-step covariance forecast (lower triangle CSV)");
  add_common(forecast, common, true, true);
  forecast->add_option("--model", model_path, "Fitted model JSON; fits --method on --data when absent");

  auto* backtest = app.add_subcommand("backtest", "Rolling-window portfolio backtest");
  add_common(backtest, common, true, true);
  backtest->add_option("--objective", bt.objective, "minvar|meanvar");
  backtest->add_flag("--constrained", bt.constrained, "Long-only weights");
  backtest->add_option("--train-window", bt.train_window, "Training window length");
  backtest->add_option("--stride", bt.stride, "Refit every this many test points");
  backtest->add_option("--annualization", bt.annualization, "Periods per year");
  backtest->add_option("--summary", bt.summary, "Summary JSON path (default: <out>.json)");
  backtest->add_option("--mu", bt.mu, "DatasetFile of mean forecasts, one row per test point");

  auto* experiment = app.add_subcommand("experiment", "Monte Carlo loss comparison across methods");
  add_common(experiment, common, false, false);
  experiment->add_option("--T", ex.horizons, "Sample sizes, comma separated")->delimiter(',');
  experiment->add_option("--methods", ex.methods, "Methods, comma separated (default: full grid)")->delimiter(',');
  experiment->add_option("--replications", ex.replications, "Replications per sample size");
  experiment->add_option("--burn-in", ex.burn_in, "Discarded initial draws per replication");
  experiment->add_option("--c-source", ex.c_source, "equicorr:<c> or a JSON file with an 'intercepts' array");
  experiment->add_option("--meta", ex.meta, "Metadata JSON path (default: <out>.json)");
  experiment->add_flag("--verbose", ex.verbose, "Progress on stderr");

  for (auto* sub : {simulate, fit, forecast, backtest, experiment}) {
    sub->add_option("--config", "key = value file; command-line flags take precedence");
  }

  try {
    std::vector<std::string> args = expand_config(std::vector<std::string>(argv + 1, argv + argc));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR PARSE cli: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "ERROR " << to_string(e.code()) << " " << e.module() << ": " << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (*simulate) return cmd_simulate(common, sim);
    if (*fit) return cmd_fit(common);
    if (*forecast) return cmd_forecast(common, model_path);
    if (*backtest) return cmd_backtest(common, bt);
    if (*experiment) return cmd_experiment(common, ex);
  } catch (const Error& e) {
    std::cerr << "ERROR " << to_string(e.code()) << " " << e.module() << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR INTERNAL cli: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 1;
}
