// coda: batch-experiment driver for the coda library.
//
// Exit codes: 0 success, 1 validation error, 2 runtime or capability error,
// 3 I/O error.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coda/algorithms.hpp"
#include "coda/errors.hpp"
#include "coda/format.hpp"
#include "coda/harness.hpp"
#include "coda/oracle.hpp"
#include "coda/problems.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kIo = 3 };

int exit_code_for(const coda::Error& e) {
  if (dynamic_cast<const coda::DataError*>(&e)) return kIo;
  if (dynamic_cast<const coda::ParameterError*>(&e) || dynamic_cast<const coda::ModeError*>(&e) ||
      dynamic_cast<const coda::ShapeError*>(&e)) {
    return kValidation;
  }
  return kRuntime;
}

// Shortest round-trip form, for display only; CSV output keeps format_real.
std::string display_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

coda::ProblemParams parse_params(const std::vector<std::string>& items) {
  coda::ProblemParams params;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw coda::ParameterError("--param expects key=value, got '" + item + "'");
    params[item.substr(0, eq)] = coda::parse_real(item.substr(eq + 1));
  }
  return params;
}

int cmd_run(const std::string& path, const std::string& out, int n_seeds, int threads, bool summary) {
  coda::ExperimentConfig config = coda::load_config(path);
  if (!out.empty()) config.out_path = out;
  if (n_seeds > 0) {
    const std::uint64_t first = config.seeds.front();
    config.seeds.clear();
    for (int i = 0; i < n_seeds; ++i) config.seeds.push_back(first + static_cast<std::uint64_t>(i));
  }
  const auto results = coda::run_experiment(config, threads);

  int code = kOk;
  for (const auto& r : results) {
    if (r.error_kind != 0) {
      std::cerr << "seed " << r.seed << ": " << r.error << '\n';
      code = std::max(code, r.error_kind);
    }
  }
  if (config.out_path.empty() || config.out_path == "-") {
    coda::write_csv(results, std::cout);
  } else {
    coda::emit_csv(results, config.out_path);
  }
  if (summary) std::cerr << coda::format_summary(coda::emit_summary(results));
  return code;
}

int cmd_check(const std::string& name, double tol, int points, std::uint64_t seed,
              const std::vector<std::string>& param_items) {
  std::vector<std::string> names;
  if (name == "all") {
    for (const auto& entry : coda::problem_registry()) names.push_back(entry.name);
  } else {
    names.push_back(name);
  }
  const auto params = parse_params(param_items);
  bool ok = true;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& n : names) {
    const auto problem = coda::build_problem(n, name == "all" ? coda::ProblemParams{} : params);
    const auto report = coda::check_gradients(*problem, points, tol, seed);
    std::cout << report.to_string();
    ok = ok && report.passed;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (ok ? "PASS" : "FAIL") << " (" << coda::format_real(secs) << " s)\n";
  return ok ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic compositional minimax experiments"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  int n_seeds = 0;
  int threads = 1;
  bool summary = false;
  auto* run = app.add_subcommand("run", "Run an experiment config and write per-iteration CSV");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out_path, "CSV output path ('-' for stdout); overrides the config");
  run->add_option("--seeds", n_seeds, "Run N consecutive seeds starting at the config's first seed")
      ->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "Worker threads for independent seeds")->check(CLI::PositiveNumber);
  run->add_flag("--summary", summary, "Print median and IQR of final-window metrics to stderr");

  std::string problem_name;
  double tol = 1e-4;
  int points = 20;
  std::uint64_t check_seed = 0;
  std::vector<std::string> params;
  auto* check = app.add_subcommand("check-gradients", "Compare analytic derivatives with finite differences");
  check->add_option("problem", problem_name, "Registered problem name, or 'all'")->required();
  check->add_option("--tol", tol, "Relative error tolerance")->check(CLI::PositiveNumber);
  check->add_option("--points", points, "Random points per problem")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "Seed of the random points");
  check->add_option("--param", params, "Problem parameter key=value (repeatable)");

  auto* list_problems = app.add_subcommand("list-problems", "List registered problems and their defaults");
  auto* list_algos = app.add_subcommand("list-algos", "List algorithms and their composition modes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(config_path, out_path, n_seeds, threads, summary);
    if (*check) return cmd_check(problem_name, tol, points, check_seed, params);
    if (*list_problems) {
      for (const auto& entry : coda::problem_registry()) {
        std::cout << entry.name << "  " << entry.description << "\n   ";
        for (const auto& [key, value] : entry.defaults) std::cout << ' ' << key << '=' << display_real(value);
        std::cout << '\n';
      }
      return kOk;
    }
    if (*list_algos) {
      for (const auto kind : coda::all_algos()) {
        std::cout << coda::to_string(kind) << "  " << coda::to_string(coda::required_mode(kind)) << '\n';
      }
      return kOk;
    }
  } catch (const coda::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
