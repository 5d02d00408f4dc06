#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jointcal/io.hpp"

using namespace jointcal;
namespace fs = std::filesystem;

namespace {

ProblemConfig load_config(const std::string& path) {
  return ProblemConfig::from_json_file(path);
}

int cmd_generate(const std::string& config_path, const std::string& out_csv) {
  const ProblemConfig cfg = load_config(config_path);
  double singular = 0.0;
  const QuoteTable quotes = generate_simulated_quotes(cfg, &singular);
  const std::string path =
      out_csv.empty() ? (fs::path(cfg.output_dir) / "quotes.csv").string() : out_csv;
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? "."
                             : fs::path(path).parent_path().string());
  save_quotes_csv(quotes, path);
  std::cout << "wrote " << quotes.rows.size() << " quotes to " << path
            << " (generating-model singular price " << singular << ")\n";
  return 0;
}

int cmd_price(const std::string& config_path, const std::string& surface_csv,
              const std::string& out_csv) {
  const ProblemConfig cfg = load_config(config_path);
  QuoteTable quotes;
  if (cfg.mode == "simulated")
    quotes = generate_simulated_quotes(cfg);
  else
    quotes = load_quotes_csv(cfg.instruments_csv);
  Problem problem = build_problem(cfg, quotes);

  DiffusionSurface surf = problem.beta_bar;
  if (!surface_csv.empty())
    surf = load_surface_csv(surface_csv, problem.tgrid, problem.grid);
  const std::vector<PriceRow> rows = build_price_table(problem, surf);

  const std::string path =
      out_csv.empty() ? (fs::path(cfg.output_dir) / "prices.csv").string() : out_csv;
  fs::create_directories(cfg.output_dir);
  write_price_table_csv(rows, path);
  for (const auto& r : rows)
    std::cout << r.id << ": market " << r.market_price << " model " << r.model_price
              << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& surface_csv,
                 int n_paths_override, long seed_override) {
  const ProblemConfig cfg = load_config(config_path);
  QuoteTable quotes;
  if (cfg.mode == "simulated")
    quotes = generate_simulated_quotes(cfg);
  else
    quotes = load_quotes_csv(cfg.instruments_csv);
  Problem problem = build_problem(cfg, quotes);

  const int n_paths = n_paths_override > 0 ? n_paths_override : cfg.montecarlo.n_paths;
  const uint64_t seed =
      seed_override >= 0 ? static_cast<uint64_t>(seed_override) : cfg.montecarlo.seed;

  SimSource source = SimSource::from_heston(cfg.generating, problem.vix.big_t);
  DiffusionSurface surf;
  if (!surface_csv.empty()) {
    surf = load_surface_csv(surface_csv, problem.tgrid, problem.grid);
    source = SimSource::from_surface(surf, problem.grid);
  } else if (cfg.mode == "market") {
    source = SimSource::from_surface(problem.beta_bar, problem.grid);
  }

  const double x1_0 = problem.grid.coarse.x1[problem.grid.i0];
  const double x2_0 =
      unscale_x2(problem.grid.coarse.y2[problem.grid.j0_coarse], problem.grid.scale_k);
  PathBatch batch = euler_simulate(source, x1_0, x2_0, problem.tgrid, n_paths, seed,
                                   cfg.montecarlo.trajectory_paths);
  const TerminalDiagnostics diag = terminal_diagnostics(batch, problem.vix);

  fs::create_directories(cfg.output_dir);
  const fs::path out_dir(cfg.output_dir);
  write_mc_summary_csv(diag, (out_dir / "mc_summary.csv").string());
  write_histograms_csv(batch, (out_dir / "mc_histograms.csv").string());
  write_trajectories_csv(batch, (out_dir / "mc_trajectories.csv").string());
  std::cout << "paths " << n_paths << ": mean xi(X_T) = " << diag.mean_xi
            << ", mean exp(X1_T) = " << diag.mean_exp_x1_T << " (se "
            << diag.se_exp_x1_T << "), mean VIX(t0) = " << diag.mean_vix_t0 << "\n";
  return 0;
}

int cmd_infer_x2(const std::string& config_path, const std::string& quotes_csv) {
  const ProblemConfig cfg = load_config(config_path);
  const std::string path = quotes_csv.empty() ? cfg.instruments_csv : quotes_csv;
  if (path.empty()) throw InvalidInput("infer-x2 needs a quotes CSV");
  const QuoteTable all = load_quotes_csv(path);
  QuoteTable strip;
  for (const auto& row : all.rows)
    if ((row.kind == "spx_call" || row.kind == "spx_put") &&
        std::abs(row.maturity_days - cfg.t_days) < 0.25)
      strip.rows.push_back(row);
  double wings = 0.0;
  const double est = infer_x2_0(strip, cfg.spot, &wings);
  std::cout << "X2_0 estimate " << est << " (wing mass fraction " << wings << ")\n";
  return 0;
}

int cmd_report(const std::string& report_path, const std::string& out_csv) {
  std::ifstream in(report_path);
  if (!in) throw InvalidInput("cannot open report '" + report_path + "'");
  nlohmann::json j;
  in >> j;
  std::vector<PriceRow> rows;
  for (const auto& item : j.at("prices")) {
    PriceRow r;
    r.id = item.at("instrument").get<std::string>();
    r.kind = item.at("kind").get<std::string>();
    r.maturity_days = item.at("maturity_days").get<double>();
    if (item.contains("strike")) {
      r.strike = item["strike"].get<double>();
      r.has_strike = true;
    }
    r.market_price = item.at("market_price").get<double>();
    r.model_price = item.at("model_price").get<double>();
    if (item.contains("market_iv")) r.market_iv = item["market_iv"].get<double>();
    if (item.contains("model_iv")) r.model_iv = item["model_iv"].get<double>();
    rows.push_back(r);
  }
  const std::string path = out_csv.empty() ? "prices.csv" : out_csv;
  write_price_table_csv(rows, path);
  std::cout << "status " << j.value("status", "?") << ", gmax "
            << j.value("final_gmax", 0.0) << "; wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint SPX/VIX calibration by semimartingale optimal transport"};
  app.require_subcommand(1);

  std::string config_path, out_csv, surface_csv, quotes_csv, report_path;
  int max_rounds = -1, inner_iters = -1, n_paths = -1;
  long seed = -1;
  double eps1 = -1.0, eps2 = -1.0;
  bool dump_surfaces = false;

  auto* generate = app.add_subcommand("generate", "price the simulated instrument template");
  generate->add_option("-c,--config", config_path, "config JSON")->required();
  generate->add_option("-o,--output", out_csv, "quotes CSV path");

  auto* calibrate = app.add_subcommand("calibrate", "run the joint calibration pipeline");
  calibrate->add_option("-c,--config", config_path, "config JSON")->required();
  calibrate->add_option("--max-rounds", max_rounds, "reference-measure rounds");
  calibrate->add_option("--eps1", eps1, "gradient tolerance");
  calibrate->add_option("--eps2", eps2, "policy-iteration tolerance");
  calibrate->add_option("--inner-iters", inner_iters, "early-stop iterations per round");
  calibrate->add_flag("--dump-surfaces", dump_surfaces, "write phi/beta surface CSVs");

  auto* price = app.add_subcommand("price", "price the instrument set under a surface");
  price->add_option("-c,--config", config_path, "config JSON")->required();
  price->add_option("--surface", surface_csv, "beta surface CSV (default: reference)");
  price->add_option("-o,--output", out_csv, "price table CSV path");

  auto* simulate = app.add_subcommand("simulate", "Euler simulation and diagnostics");
  simulate->add_option("-c,--config", config_path, "config JSON")->required();
  simulate->add_option("--surface", surface_csv, "beta surface CSV");
  simulate->add_option("--paths", n_paths, "number of paths");
  simulate->add_option("--seed", seed, "RNG seed");

  auto* infer = app.add_subcommand("infer-x2", "estimate X2_0 from an SPX strip");
  infer->add_option("-c,--config", config_path, "config JSON")->required();
  infer->add_option("-q,--quotes", quotes_csv, "quotes CSV (default: config's)");

  auto* report = app.add_subcommand("report", "render tables from a report JSON");
  report->add_option("-r,--report", report_path, "report.json path")->required();
  report->add_option("-o,--output", out_csv, "price table CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(config_path, out_csv);
    if (calibrate->parsed()) {
      PipelineOptions opts;
      opts.dump_surfaces = dump_surfaces;
      if (max_rounds > 0) opts.max_rounds = max_rounds;
      if (eps1 > 0) opts.eps1 = eps1;
      if (eps2 > 0) opts.eps2 = eps2;
      if (inner_iters > 0) opts.inner_iters = inner_iters;
      return run_pipeline(load_config(config_path), opts);
    }
    if (price->parsed()) return cmd_price(config_path, surface_csv, out_csv);
    if (simulate->parsed()) return cmd_simulate(config_path, surface_csv, n_paths, seed);
    if (infer->parsed()) return cmd_infer_x2(config_path, quotes_csv);
    if (report->parsed()) return cmd_report(report_path, out_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
