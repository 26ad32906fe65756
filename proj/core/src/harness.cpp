#include "coda/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "coda/errors.hpp"
#include "coda/format.hpp"

namespace coda {

ConfigError::ConfigError(int line, const std::string& what)
    : ParameterError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"ncsc", "scnc", "cnc", "wcwc", "vr"};
  return names;
}

void apply_preset(const std::string& preset, const ProblemMeta& meta, double scale, double epsilon,
                  AlgoConfig& config) {
  if (preset.empty()) return;
  if (!(scale > 0.0)) throw ParameterError("preset step scale must be positive");
  const double L = meta.L;
  const double c = scale;
  if (preset == "ncsc") {
    if (!(meta.mu_sc_y > 0.0)) throw ParameterError("preset ncsc needs a strongly concave problem");
    const double kappa = L / meta.mu_sc_y;
    config.beta = 0.5;
    config.eta_y = c / L;
    config.eta_x = c / (kappa * kappa * L);
  } else if (preset == "scnc") {
    if (!(meta.mu_sc_x > 0.0)) throw ParameterError("preset scnc needs a strongly convex problem");
    const double kappa = L / meta.mu_sc_x;
    config.beta = 0.1;
    config.alpha_schedule.clear();
    config.eta_x = c * std::min(1.0 / (L * L), meta.mu_sc_x / (L * L));
    config.eta_y = config.eta_x / (kappa * kappa);
  } else if (preset == "cnc") {
    if (!std::isfinite(meta.D_X)) throw ParameterError("preset cnc needs a bounded X");
    if (!(epsilon > 0.0)) throw ParameterError("preset cnc needs epsilon > 0");
    config.beta = 0.1;
    config.eta_x = c / (L * L);
    config.eta_y = c * epsilon * epsilon / (std::pow(L, 4) * meta.D_X);
    config.alpha_schedule = {epsilon / (L * meta.D_X)};
  } else if (preset == "wcwc") {
    if (!(meta.rho_weak > 0.0)) throw ParameterError("preset wcwc needs a weak-convexity modulus");
    config.theta_exponent = 0.5;
    config.gamma = 1.0 / meta.rho_weak;
    config.eta_x = c / (L * L);
    config.eta_y = c / (L * L);
  } else if (preset == "vr") {
    config.mu_x = 2.0 * L;
    config.eta_x = c / L;
    config.eta_y = c / L;
  } else {
    throw ParameterError("unknown preset '" + preset + "'");
  }
}

// ---- config parsing -----------------------------------------------------------------

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "algo",           "problem",     "preset",         "step_scale",     "epsilon",
      "eta_x",          "eta_y",       "beta",           "batch_M",        "batch_B",
      "batch_Btau",     "tau",         "alpha",          "gamma",          "mu_x",
      "T",              "K",           "theta_exponent", "seed",           "seeds",
      "z0_init_samples", "reinit_tracker", "measure_every", "measures",     "moreau_lambda",
      "gap_eta_x",      "gap_eta_y",   "wcwc_eta",       "inner_max_iters", "inner_tol",
      "inner_restarts", "mc_samples",  "out",            "timing"};
  return keys;
}

class Reader {
 public:
  explicit Reader(std::map<std::string, Entry> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  int line(const std::string& key) const { return has(key) ? kv_.at(key).line : 0; }
  const std::string& text(const std::string& key) const { return kv_.at(key).value; }

  double real(const std::string& key) const {
    try {
      const double v = parse_real(text(key));
      if (!std::isfinite(v)) throw DataError("");
      return v;
    } catch (const DataError&) {
      throw ConfigError(line(key), key + ": expected a finite real number, got '" + text(key) + "'");
    }
  }

  std::int64_t integer(const std::string& key) const {
    try {
      return parse_int(text(key));
    } catch (const DataError&) {
      throw ConfigError(line(key), key + ": expected an integer, got '" + text(key) + "'");
    }
  }

  int bounded_int(const std::string& key, std::int64_t lo) const {
    const std::int64_t v = integer(key);
    if (v < lo || v > std::numeric_limits<int>::max()) {
      throw ConfigError(line(key), key + " must be an integer >= " + std::to_string(lo));
    }
    return static_cast<int>(v);
  }

  std::uint64_t seed_value(const std::string& key, const std::string& s) const {
    try {
      const std::int64_t v = parse_int(s);
      if (v < 0) throw DataError("");
      return static_cast<std::uint64_t>(v);
    } catch (const DataError&) {
      throw ConfigError(line(key), key + ": expected a nonnegative integer, got '" + s + "'");
    }
  }

  bool flag(const std::string& key) const {
    const std::string& v = text(key);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError(line(key), key + ": expected 0/1 or true/false, got '" + v + "'");
  }

  void range(const std::string& key, bool ok, const std::string& what) const {
    if (!ok) throw ConfigError(line(key), key + " " + what);
  }

 private:
  std::map<std::string, Entry> kv_;
};

MeasurePlan parse_measures(const Reader& r, MeasurePlan plan) {
  if (r.has("measures")) {
    for (const std::string& m : split_list(r.text("measures"))) {
      if (m.empty()) continue;
      if (m == "primal_grad") plan.primal_grad = true;
      else if (m == "moreau") plan.moreau = true;
      else if (m == "stationary_gap") plan.stationary_gap = true;
      else if (m == "wcwc_proxy") plan.wcwc_proxy = true;
      else if (m == "tracking_err") plan.tracking_err = true;
      else if (m == "objective") plan.objective = true;
      else throw ConfigError(r.line("measures"), "unknown measure '" + m + "'");
    }
    if (plan.stationary_gap && plan.wcwc_proxy) {
      throw ConfigError(r.line("measures"), "stationary_gap and wcwc_proxy share one column; request one");
    }
  }
  if (r.has("measure_every")) plan.every = r.bounded_int("measure_every", 1);
  auto positive = [&](const char* key, double& field) {
    if (!r.has(key)) return;
    field = r.real(key);
    r.range(key, field > 0.0, "must be positive");
  };
  positive("moreau_lambda", plan.moreau_lambda);
  positive("gap_eta_x", plan.gap_eta_x);
  positive("gap_eta_y", plan.gap_eta_y);
  positive("wcwc_eta", plan.wcwc_eta);
  positive("inner_tol", plan.inner.tol);
  if (r.has("inner_max_iters")) plan.inner.max_iters = r.bounded_int("inner_max_iters", 1);
  if (r.has("inner_restarts")) plan.inner.restarts = r.bounded_int("inner_restarts", 1);
  if (r.has("mc_samples")) plan.mc_samples = r.bounded_int("mc_samples", 0);
  return plan;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, Entry> kv;
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "empty key");
    if (value.empty()) throw ConfigError(line_no, "empty value for '" + key + "'");
    const bool problem_param = key.rfind("problem.", 0) == 0 && key.size() > 8;
    if (!problem_param && !known_keys().count(key)) throw ConfigError(line_no, "unknown key '" + key + "'");
    if (kv.count(key)) {
      throw ConfigError(line_no, "duplicate key '" + key + "' (first on line " +
                                     std::to_string(kv[key].line) + ")");
    }
    kv[key] = {value, line_no};
  }
  const Reader r(kv);
  for (const char* key : {"algo", "problem"}) {
    if (!r.has(key)) throw ConfigError(0, std::string("missing required key '") + key + "'");
  }

  ExperimentConfig cfg;
  try {
    cfg.algo = parse_algo(r.text("algo"));
  } catch (const ParameterError& e) {
    throw ConfigError(r.line("algo"), e.what());
  }
  cfg.problem = r.text("problem");
  for (const auto& [key, entry] : kv) {
    if (key.rfind("problem.", 0) == 0) cfg.problem_params[key.substr(8)] = r.real(key);
  }
  ProblemPtr problem;
  try {
    problem = build_problem(cfg.problem, cfg.problem_params);
  } catch (const Error& e) {
    throw ConfigError(r.line("problem"), e.what());
  }
  try {
    check_mode(cfg.algo, *problem);
  } catch (const ModeError& e) {
    throw ConfigError(r.line("algo"), e.what());
  }

  AlgoConfig& a = cfg.algo_config;
  if (r.has("preset")) {
    cfg.preset = r.text("preset");
    const double scale = r.has("step_scale") ? r.real("step_scale") : 0.5;
    const double eps = r.has("epsilon") ? r.real("epsilon") : 0.1;
    try {
      apply_preset(cfg.preset, problem->meta(), scale, eps, a);
    } catch (const ParameterError& e) {
      throw ConfigError(r.line("preset"), e.what());
    }
  } else {
    for (const char* key : {"step_scale", "epsilon"}) {
      if (r.has(key)) throw ConfigError(r.line(key), std::string(key) + " is only meaningful with a preset");
    }
  }

  auto stepsize = [&](const char* key, double& field) {
    if (!r.has(key)) return;
    field = r.real(key);
    r.range(key, field > 0.0, "must be positive");
  };
  stepsize("eta_x", a.eta_x);
  stepsize("eta_y", a.eta_y);
  if (r.has("beta")) {
    a.beta = r.real("beta");
    r.range("beta", a.beta > 0.0 && a.beta <= 1.0, "must lie in (0, 1]");
  }
  if (r.has("batch_M")) a.batch_M = r.bounded_int("batch_M", 1);
  if (r.has("batch_B")) a.batch_B = r.bounded_int("batch_B", 1);
  if (r.has("batch_Btau")) a.batch_Btau = r.bounded_int("batch_Btau", 1);
  if (r.has("tau")) a.tau = r.bounded_int("tau", 1);
  if (r.has("alpha")) {
    a.alpha_schedule.clear();
    for (const std::string& item : split_list(r.text("alpha"))) {
      try {
        a.alpha_schedule.push_back(parse_real(item));
      } catch (const DataError&) {
        throw ConfigError(r.line("alpha"), "alpha: expected a comma-separated list of reals");
      }
      r.range("alpha", std::isfinite(a.alpha_schedule.back()) && a.alpha_schedule.back() >= 0.0,
              "entries must be finite and >= 0");
    }
  }
  if (r.has("gamma")) {
    a.gamma = r.real("gamma");
    r.range("gamma", a.gamma > 0.0, "must be positive");
  }
  if (r.has("mu_x")) {
    a.mu_x = r.real("mu_x");
    r.range("mu_x", a.mu_x >= 0.0, "must be >= 0");
  }
  if (r.has("T")) a.T = r.bounded_int("T", 0);
  if (r.has("K")) a.K = r.bounded_int("K", 1);
  if (r.has("theta_exponent")) {
    a.theta_exponent = r.real("theta_exponent");
    r.range("theta_exponent", a.theta_exponent > 0.0 && a.theta_exponent < 1.0, "must lie in (0, 1)");
  }
  if (r.has("z0_init_samples")) a.z0_init_samples = r.bounded_int("z0_init_samples", 1);
  if (r.has("reinit_tracker")) a.reinit_tracker_each_round = r.flag("reinit_tracker");

  if (r.has("seed") && r.has("seeds")) throw ConfigError(r.line("seeds"), "give either seed or seeds");
  if (r.has("seed")) cfg.seeds = {r.seed_value("seed", r.text("seed"))};
  if (r.has("seeds")) {
    cfg.seeds.clear();
    std::set<std::uint64_t> seen;
    for (const std::string& s : split_list(r.text("seeds"))) {
      const std::uint64_t v = r.seed_value("seeds", s);
      if (!seen.insert(v).second) throw ConfigError(r.line("seeds"), "duplicate seed " + s);
      cfg.seeds.push_back(v);
    }
    if (cfg.seeds.empty()) throw ConfigError(r.line("seeds"), "seeds is empty");
  }
  a.seed = cfg.seeds.front();

  cfg.measures = parse_measures(r, cfg.measures);
  try {
    check_measure_plan(cfg.measures, problem->meta());
  } catch (const CapabilityError& e) {
    throw ConfigError(r.line("measures"), e.what());
  }
  if (r.has("out")) cfg.out_path = r.text("out");
  if (r.has("timing")) cfg.timing = r.flag("timing");
  try {
    a.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(0, e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---- execution ------------------------------------------------------------------------

std::vector<SeedResult> run_experiment(const ExperimentConfig& config, int threads) {
  if (threads < 1) throw ParameterError("run_experiment: threads must be >= 1");
  const ProblemPtr problem = build_problem(config.problem, config.problem_params);
  std::vector<SeedResult> results(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= results.size()) return;
      SeedResult& out = results[i];
      out.seed = config.seeds[i];
      AlgoConfig ac = config.algo_config;
      ac.seed = out.seed;
      RunOptions opts;
      opts.measures = config.measures;
      opts.timing = config.timing;
      try {
        out.result = run_algorithm(config.algo, *problem, ac, opts);
      } catch (const ParameterError& e) {
        out.error = e.what();
        out.error_kind = 1;
      } catch (const std::exception& e) {
        out.error = e.what();
        out.error_kind = 2;
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(threads), results.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

// ---- CSV ---------------------------------------------------------------------------------

namespace {

std::string opt_field(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::optional<double> opt_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_real(s);
}

}  // namespace

void write_csv(const std::vector<SeedResult>& results, std::ostream& os) {
  std::vector<const SeedResult*> order;
  for (const auto& r : results) {
    if (r.result) order.push_back(&r);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const SeedResult* a, const SeedResult* b) { return a->seed < b->seed; });
  os << kCsvHeader << '\n';
  for (const SeedResult* r : order) {
    std::vector<const IterationRecord*> recs;
    for (const auto& rec : r->result->records) recs.push_back(&rec);
    std::stable_sort(recs.begin(), recs.end(),
                     [](const IterationRecord* a, const IterationRecord* b) { return a->t < b->t; });
    for (const IterationRecord* rec : recs) {
      os << r->seed << ',' << rec->t << ',' << rec->samples_used << ',' << opt_field(rec->objective) << ','
         << opt_field(rec->grad_norm_sq) << ',' << opt_field(rec->stationary_gap_sq) << ','
         << opt_field(rec->moreau_grad_sq) << ',' << opt_field(rec->tracking_err_sq) << ','
         << (rec->wall_nanos ? std::to_string(*rec->wall_nanos) : std::string()) << '\n';
    }
  }
}

void emit_csv(const std::vector<SeedResult>& results, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_csv(results, out);
  out.flush();
  if (!out) throw DataError("write to '" + path + "' failed");
}

std::vector<CsvRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw DataError("read_csv: missing or unexpected header");
  std::vector<CsvRow> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string item;
    std::istringstream ls(line);
    while (std::getline(ls, item, ',')) f.push_back(item);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw DataError("read_csv: line " + std::to_string(line_no) + " has the wrong field count");
    CsvRow row;
    row.seed = static_cast<std::uint64_t>(parse_int(f[0]));
    row.record.t = parse_int(f[1]);
    row.record.samples_used = parse_int(f[2]);
    row.record.objective = opt_real(f[3]);
    row.record.grad_norm_sq = opt_real(f[4]);
    row.record.stationary_gap_sq = opt_real(f[5]);
    row.record.moreau_grad_sq = opt_real(f[6]);
    row.record.tracking_err_sq = opt_real(f[7]);
    if (!f[8].empty()) row.record.wall_nanos = parse_int(f[8]);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- summaries -------------------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ParameterError("quantile: no data");
  if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double window_mean(const std::vector<IterationRecord>& records, Metric metric, std::int64_t t_lo,
                   std::int64_t t_hi) {
  double sum = 0.0;
  int n = 0;
  for (const auto& rec : records) {
    const auto& v = rec.*metric;
    if (rec.t >= t_lo && rec.t <= t_hi && v) {
      sum += *v;
      ++n;
    }
  }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double final_window_mean(const std::vector<IterationRecord>& records, Metric metric) {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::int64_t t_last = records.back().t;
  const auto t_lo = static_cast<std::int64_t>(std::ceil(0.9 * static_cast<double>(t_last)));
  return window_mean(records, metric, std::min(t_lo, t_last), t_last);
}

std::vector<SummaryRow> emit_summary(const std::vector<SeedResult>& results) {
  static const std::vector<std::pair<const char*, Metric>> metrics = {
      {"objective", &IterationRecord::objective},
      {"grad_norm_sq", &IterationRecord::grad_norm_sq},
      {"stationary_gap_sq", &IterationRecord::stationary_gap_sq},
      {"moreau_grad_sq", &IterationRecord::moreau_grad_sq},
      {"tracking_err_sq", &IterationRecord::tracking_err_sq}};
  std::vector<SummaryRow> rows;
  for (const auto& [name, metric] : metrics) {
    std::vector<double> values;
    for (const auto& r : results) {
      if (!r.result) continue;
      const double v = final_window_mean(r.result->records, metric);
      if (!std::isnan(v)) values.push_back(v);
    }
    if (values.empty()) continue;
    SummaryRow row;
    row.metric = name;
    row.n_seeds = static_cast<int>(values.size());
    row.median = quantile(values, 0.5);
    row.iqr = quantile(values, 0.75) - quantile(values, 0.25);
    rows.push_back(row);
  }
  return rows;
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
  // Display only; the CSV keeps full precision.
  std::ostringstream os;
  os << std::left << std::setw(20) << "metric" << std::setw(8) << "seeds" << std::setw(16) << "median"
     << "iqr" << '\n';
  os << std::setprecision(6);
  for (const auto& r : rows) {
    os << std::left << std::setw(20) << r.metric << std::setw(8) << r.n_seeds << std::setw(16) << r.median
       << r.iqr << '\n';
  }
  return os.str();
}

}  // namespace coda
