// Command-line front end: convergence experiments, tail scans, rate plans,
// distances, bootstrap tables and model validation.
//
// Exit codes: 0 success / accept, 1 reject (validate only), 2 usage or
// invalid input, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wkm/io.hpp"
#include "wkm/wkm.hpp"

namespace {

using nlohmann::json;

constexpr int kExitReject = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// Accepts either inline JSON (starting with '{') or a path to a JSON file.
json load_json(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') {
    try {
      return json::parse(arg);
    } catch (const json::parse_error& e) {
      throw wkm::InvalidArgument(std::string("inline JSON: ") + e.what());
    }
  }
  return wkm::io::read_json_file(arg);
}

// Writes to `path`, or stdout for "" and "-".
template <class Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw wkm::InvalidArgument("cannot write " + path);
  fn(out);
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

json slope_summary(const std::vector<wkm::ConvergenceRow>& rows) {
  json out = json::object();
  for (const char* metric : {"weighted", "ks"}) {
    const auto kept = wkm::rows_above_floor(rows, metric, 2.0);
    json entry;
    std::vector<std::size_t> ns;
    for (const auto& r : kept) ns.push_back(r.n);
    entry["n_above_floor"] = ns;
    try {
      entry["fit"] = wkm::io::to_json(wkm::loglog_slope(kept));
    } catch (const wkm::InvalidArgument& e) {
      entry["fit"] = nullptr;
      entry["error"] = e.what();
    }
    out[metric] = entry;
  }
  return out;
}

std::string plan_table(const wkm::RatePlan& p) {
  auto row = [](const char* name, const std::string& value) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-22s %s\n", name, value.c_str());
    return std::string(buf);
  };
  auto yes = [](bool b) { return std::string(b ? "ok" : "VIOLATED"); };
  auto checks = [&](const char* label, double beta) {
    std::string out = row(label, wkm::format_double(beta));
    out += row("  beta*(1-delta) <= 1/2", wkm::format_double(beta * (1.0 - p.delta)) + "  " +
                                          yes(beta * (1.0 - p.delta) <= 0.5 + 1e-12));
    out += row("  beta*eta >= 1/2", wkm::format_double(beta * p.eta) + "  " + yes(beta * p.eta >= 0.5 - 1e-12));
    out += row("  beta*q >= 1/2", wkm::format_double(beta * p.q) + "  " + yes(beta * p.q >= 0.5 - 1e-12));
    return out;
  };
  std::string s;
  s += row("eta", wkm::format_double(p.eta));
  s += row("delta", wkm::format_double(p.delta));
  s += row("q", wkm::format_double(p.q));
  s += checks("balanced beta", p.balanced_beta);
  if (!p.feasible) s += checks("fallback beta", p.beta);
  s += row("feasible", p.feasible ? "yes" : "no");
  s += row("achieved exponent", wkm::format_double(p.achieved_exponent));
  return s;
}

std::string cache_key(const wkm::DistributionModel& model, std::size_t n, const wkm::WeightConfig& cfg,
                      std::size_t refinement, std::size_t B, std::uint64_t seed) {
  json k;
  k["model"] = wkm::io::to_json(model);
  k["n"] = n;
  k["weight"] = wkm::io::to_json(cfg);
  k["refinement"] = refinement;
  k["B"] = B;
  k["seed"] = seed;
  return k.dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted Kolmogorov metric toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);

  // convergence
  auto* conv = app.add_subcommand("convergence", "Monte Carlo convergence of Z_n towards N(0,1)");
  std::string conv_config, conv_out, conv_slopes;
  std::uint64_t conv_seed = 0;
  conv->add_option("--config", conv_config, "Scenario config (JSON file or inline JSON)")->required();
  conv->add_option("--out", conv_out, "CSV output path (default stdout)");
  conv->add_option("--seed", conv_seed, "Master seed")->required();
  conv->add_option("--slopes", conv_slopes, "Write log-log slope fits (rows above 2x floor) as JSON");

  // tailscan
  auto* scan = app.add_subcommand("tailscan", "Truncation analytics over a log grid of R");
  std::string scan_model, scan_exh = R"({"kind":"absolute"})", scan_out;
  double scan_delta = 0.5, scan_rmin = 1.0, scan_rmax = 1e4, scan_nref = 1000.0, scan_q = 1.0;
  std::size_t scan_points = 40;
  scan->add_option("--model", scan_model, "Model (JSON)")->required();
  scan->add_option("--exhaustion", scan_exh, "Exhaustion (JSON)");
  scan->add_option("--delta", scan_delta, "Moment excess delta");
  scan->add_option("--r-min", scan_rmin, "Smallest R");
  scan->add_option("--r-max", scan_rmax, "Largest R");
  scan->add_option("--points", scan_points, "Grid points");
  scan->add_option("--n-ref", scan_nref, "Reference n for the bound terms");
  scan->add_option("--q", scan_q, "Weight exponent for the bound terms");
  scan->add_option("--out", scan_out, "CSV output path (default stdout)");

  // params
  auto* params = app.add_subcommand("params", "Rate plan (beta, q) and feasibility");
  std::optional<double> par_eta, par_q;
  std::string par_model;
  double par_delta = 0.5;
  bool par_json = false;
  auto* eta_opt = params->add_option("--eta", par_eta, "Tail excess eta = alpha - (2 + delta)");
  params->add_option("--model", par_model, "Model (JSON); eta derived from its tail index")->excludes(eta_opt);
  params->add_option("--delta", par_delta, "Moment excess delta");
  params->add_option("--q", par_q, "User weight exponent");
  params->add_flag("--json", par_json, "Emit JSON");

  // metric
  auto* metric = app.add_subcommand("metric", "Weighted distance of a data sample to a model");
  std::string met_data, met_model, met_weight = R"({"kind":"absolute","q":1})";
  std::size_t met_refinement = 8;
  metric->add_option("--data", met_data, "CSV, first column")->required();
  metric->add_option("--model", met_model, "Model (JSON)")->required();
  metric->add_option("--weight", met_weight, "Weight config (JSON)");
  metric->add_option("--refinement", met_refinement, "Interior points per gap");

  // two-sample
  auto* two = app.add_subcommand("two-sample", "Weighted distance between two samples");
  std::string two_a, two_b, two_weight = R"({"kind":"absolute","q":1})";
  two->add_option("--a", two_a, "First CSV")->required();
  two->add_option("--b", two_b, "Second CSV")->required();
  two->add_option("--weight", two_weight, "Weight config (JSON)");

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "Parametric bootstrap null distribution");
  std::string boot_model, boot_weight = R"({"kind":"absolute","q":1})", boot_out, boot_cache;
  std::size_t boot_n = 0, boot_B = 500, boot_refinement = 8;
  std::uint64_t boot_seed = 0;
  std::optional<double> boot_observed;
  double boot_alpha = 0.05;
  boot->add_option("--model", boot_model, "Model (JSON)")->required();
  boot->add_option("--n", boot_n, "Sample size")->required()->check(CLI::PositiveNumber);
  boot->add_option("--weight", boot_weight, "Weight config (JSON)");
  boot->add_option("--B", boot_B, "Bootstrap replicates (>= 100)");
  boot->add_option("--seed", boot_seed, "Seed")->required();
  boot->add_option("--refinement", boot_refinement, "Interior points per gap");
  boot->add_option("--out", boot_out, "CSV of replicate statistics");
  boot->add_option("--observed", boot_observed, "Observed statistic for a p-value");
  boot->add_option("--alpha", boot_alpha, "Level for the critical value");
  boot->add_option("--cache-dir", boot_cache, "Reuse or store the table in this directory");

  // validate
  auto* val = app.add_subcommand("validate", "Hybrid validation: grid-robust core gate and Kupiec tail gate");
  std::string val_data, val_model, val_policy = "{}";
  std::uint64_t val_seed = 0;
  val->add_option("--data", val_data, "Returns CSV, first column")->required();
  val->add_option("--model", val_model, "Model (JSON)")->required();
  val->add_option("--policy", val_policy, "Validation policy (JSON)");
  val->add_option("--seed", val_seed, "Bootstrap seed")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "Grid-robust distance d_rob = max over q");
  std::string grid_data, grid_model, grid_exh = R"({"kind":"absolute"})";
  std::vector<double> grid_q{0.5, 1.0, 1.5, 2.0, 2.5};
  std::optional<double> grid_eps;
  std::size_t grid_refinement = 8;
  grid->add_option("--data", grid_data, "CSV, first column")->required();
  grid->add_option("--model", grid_model, "Model (JSON)")->required();
  grid->add_option("--exhaustion", grid_exh, "Exhaustion (JSON)");
  grid->add_option("--q-grid", grid_q, "Ascending q values")->delimiter(',');
  grid->add_option("--eps", grid_eps, "Report pass/fail against this threshold");
  grid->add_option("--refinement", grid_refinement, "Interior points per gap");

  // sample
  auto* samp = app.add_subcommand("sample", "Draw an i.i.d. sample from a model");
  std::string samp_model, samp_out;
  std::size_t samp_n = 0;
  std::uint64_t samp_seed = 0, samp_stream = 0;
  samp->add_option("--model", samp_model, "Model (JSON)")->required();
  samp->add_option("--n", samp_n, "Sample size")->required()->check(CLI::PositiveNumber);
  samp->add_option("--seed", samp_seed, "Seed")->required();
  samp->add_option("--stream", samp_stream, "Substream index");
  samp->add_option("--out", samp_out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*conv) {
      auto cfg = wkm::io::scenario_from_json(load_json(conv_config));
      cfg.seed = conv_seed;
      const auto rows = wkm::run_convergence(cfg, threads);
      with_output(conv_out, [&](std::ostream& out) { wkm::write_convergence_csv(out, rows); });
      if (!conv_slopes.empty())
        with_output(conv_slopes, [&](std::ostream& out) { out << slope_summary(rows).dump(2) << '\n'; });
    } else if (*scan) {
      const auto model = wkm::io::model_from_json(load_json(scan_model));
      const auto h = wkm::io::exhaustion_from_json(load_json(scan_exh), &model);
      const auto grid_r = wkm::log_grid(scan_rmin, scan_rmax, scan_points);
      const auto rows = wkm::run_tailscan(model, h, scan_delta, grid_r, scan_nref, scan_q);
      with_output(scan_out, [&](std::ostream& out) { wkm::write_tailscan_csv(out, rows); });
    } else if (*params) {
      double eta = 0.0;
      if (par_eta) {
        eta = *par_eta;
      } else if (!par_model.empty()) {
        eta = wkm::tail_index_info(wkm::io::model_from_json(load_json(par_model)), par_delta).eta;
      } else {
        throw wkm::InvalidArgument("params: give --eta or --model");
      }
      const auto plan = wkm::select_rate_parameters(eta, par_delta, par_q);
      if (par_json) print_json(wkm::io::to_json(plan));
      else std::cout << plan_table(plan);
    } else if (*metric) {
      const auto model = wkm::io::model_from_json(load_json(met_model));
      const auto cfg = wkm::io::weight_config_from_json(load_json(met_weight), &model);
      const wkm::EmpiricalCDF ecdf(wkm::io::read_csv_column(met_data));
      const auto r = wkm::weighted_distance_to_model(ecdf, model, cfg, met_refinement);
      print_json(wkm::io::distance_record(r, cfg, ecdf.size()));
    } else if (*two) {
      const auto cfg = wkm::io::weight_config_from_json(load_json(two_weight));
      const wkm::EmpiricalCDF a(wkm::io::read_csv_column(two_a));
      const wkm::EmpiricalCDF b(wkm::io::read_csv_column(two_b));
      const auto r = wkm::weighted_distance_two_sample(a, b, cfg);
      json j;
      j["value"] = r.value;
      j["argmax_t"] = r.argmax_t;
      j["q"] = cfg.q;
      j["exhaustion"] = wkm::io::to_json(cfg.exhaustion);
      j["n_a"] = a.size();
      j["n_b"] = b.size();
      print_json(j);
    } else if (*boot) {
      const auto model = wkm::io::model_from_json(load_json(boot_model));
      const auto cfg = wkm::io::weight_config_from_json(load_json(boot_weight), &model);
      const auto key = cache_key(model, boot_n, cfg, boot_refinement, boot_B, boot_seed);
      std::optional<std::vector<double>> table;
      bool cached = false;
      if (!boot_cache.empty()) {
        table = wkm::BootstrapCache(boot_cache).load(key);
        cached = table.has_value();
      }
      if (!table) table = wkm::bootstrap_null(model, boot_n, cfg, boot_B, boot_seed, boot_refinement, threads);
      if (!boot_cache.empty() && !cached) wkm::BootstrapCache(boot_cache).store(key, *table);
      if (!boot_out.empty()) {
        with_output(boot_out, [&](std::ostream& out) {
          out << "b,statistic\n";
          for (std::size_t b = 0; b < table->size(); ++b) out << b << ',' << wkm::format_double((*table)[b]) << '\n';
        });
      }
      json j;
      j["B"] = table->size();
      j["seed"] = boot_seed;
      j["n"] = boot_n;
      j["alpha"] = boot_alpha;
      j["critical_value"] = wkm::critical_value(*table, boot_alpha);
      if (boot_observed) {
        j["observed"] = *boot_observed;
        j["p_value"] = wkm::p_value(*boot_observed, *table);
      }
      print_json(j);
    } else if (*val) {
      const auto model = wkm::io::model_from_json(load_json(val_model));
      auto policy = wkm::io::policy_from_json(load_json(val_policy), model);
      policy.seed = val_seed;
      const auto returns = wkm::io::read_csv_column(val_data);
      const auto verdict = wkm::hybrid_validate(returns, model, policy, threads);
      print_json(wkm::io::to_json(verdict));
      return verdict.accept ? 0 : kExitReject;
    } else if (*grid) {
      const auto model = wkm::io::model_from_json(load_json(grid_model));
      const auto h = wkm::io::exhaustion_from_json(load_json(grid_exh), &model);
      const wkm::EmpiricalCDF ecdf(wkm::io::read_csv_column(grid_data));
      const auto r = wkm::grid_robust_distance(ecdf, model, h, grid_q, grid_refinement);
      json j;
      j["d_rob"] = r.d_rob;
      j["argmax_q"] = r.argmax_q;
      j["q_grid"] = r.q_grid;
      j["per_q"] = r.per_q;
      j["n"] = ecdf.size();
      if (grid_eps) {
        j["eps"] = *grid_eps;
        j["pass"] = r.d_rob <= *grid_eps;
      }
      print_json(j);
    } else if (*samp) {
      const auto model = wkm::io::model_from_json(load_json(samp_model));
      const auto xs = wkm::sample(model, samp_seed, samp_stream, samp_n);
      with_output(samp_out, [&](std::ostream& out) { wkm::io::write_sample_csv(out, xs); });
    }
  } catch (const wkm::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
