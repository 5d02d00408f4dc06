#include "jointcal/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace jointcal {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, double fallback = 0.0) {
  if (s.empty()) return fallback;
  return std::stod(s);
}

}  // namespace

QuoteTable load_quotes_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open quotes file '" + path + "'");
  QuoteTable table;
  std::string line;
  int line_no = 0;
  std::vector<std::tuple<std::string, double, double>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.rfind("kind", 0) == 0) continue;  // header
    const auto cells = split_csv_line(line);
    if (cells.size() < 4)
      throw InvalidInput("quotes row " + std::to_string(line_no) + ": expected "
                         "kind,strike,maturity_days,price,implied_vol");
    QuoteRow row;
    row.kind = cells[0];
    kind_from_name(row.kind);  // validates
    row.strike = parse_double(cells[1]);
    row.maturity_days = parse_double(cells[2]);
    row.price = parse_double(cells[3]);
    row.implied_vol = cells.size() > 4 ? parse_double(cells[4]) : 0.0;
    if (row.price < 0.0)
      throw InvalidInput("quotes row " + std::to_string(line_no) + ": negative price");
    if (row.maturity_days <= 0.0)
      throw InvalidInput("quotes row " + std::to_string(line_no) + ": non-positive maturity");
    const auto key = std::make_tuple(row.kind, row.strike, row.maturity_days);
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw InvalidInput("quotes row " + std::to_string(line_no) +
                         ": duplicate (kind, strike, maturity)");
    seen.push_back(key);
    table.rows.push_back(row);
  }
  return table;
}

void save_quotes_csv(const QuoteTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write quotes file '" + path + "'");
  out << "kind,strike,maturity_days,price,implied_vol\n";
  for (const auto& row : table.rows) {
    out << row.kind << ",";
    if (row.kind == "vix_future")
      out << "";
    else
      out << row.strike;
    out << "," << row.maturity_days << "," << std::setprecision(12) << row.price
        << "," << row.implied_vol << "\n";
  }
}

ProblemConfig ProblemConfig::from_json_string(const std::string& text) {
  json j = json::parse(text);
  ProblemConfig cfg;
  cfg.mode = j.value("mode", cfg.mode);
  if (cfg.mode != "simulated" && cfg.mode != "market")
    throw InvalidInput("config: mode must be 'simulated' or 'market'");
  cfg.spot = j.value("spot", cfg.spot);
  if (cfg.spot <= 0.0) throw InvalidInput("config: spot must be positive");
  if (j.contains("x2_0")) {
    cfg.x2_0 = j["x2_0"].get<double>();
    if (*cfg.x2_0 <= 0.0) throw InvalidInput("config: x2_0 must be positive");
  }
  if (j.contains("vix")) {
    cfg.t0_days = j["vix"].value("t0_days", cfg.t0_days);
    cfg.t_days = j["vix"].value("t_days", cfg.t_days);
  }
  if (!(cfg.t0_days > 0 && cfg.t0_days < cfg.t_days))
    throw InvalidInput("config: need 0 < t0_days < t_days");

  auto read_heston = [](const json& h) {
    HestonParams p;
    p.kappa = h.at("kappa").get<double>();
    p.theta = h.at("theta").get<double>();
    p.omega = h.at("omega").get<double>();
    p.eta = h.at("eta").get<double>();
    p.validate();
    return p;
  };
  if (j.contains("generating_heston")) cfg.generating = read_heston(j["generating_heston"]);
  if (j.contains("reference")) {
    const json& r = j["reference"];
    const std::string kind = r.value("kind", "heston");
    if (kind == "heston") {
      cfg.reference_kind = ReferenceKind::Heston;
      cfg.reference_heston = read_heston(r.at("heston"));
    } else if (kind == "constant") {
      cfg.reference_kind = ReferenceKind::Constant;
      const auto& b = r.at("beta");
      cfg.reference_constants = {b.at(0).get<double>(), b.at(1).get<double>(),
                                 b.at(2).get<double>()};
    } else if (kind == "external") {
      cfg.reference_kind = ReferenceKind::External;
      cfg.reference_surface_csv = r.at("surface_csv").get<std::string>();
    } else {
      throw InvalidInput("config: unknown reference kind '" + kind + "'");
    }
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    cfg.grid.n_x1 = g.value("n_x1", cfg.grid.n_x1);
    cfg.grid.n_x2 = g.value("n_x2", cfg.grid.n_x2);
    cfg.grid.scale_k = g.value("scale_k", cfg.grid.scale_k);
    cfg.grid.x1_width_sigmas = g.value("x1_width_sigmas", cfg.grid.x1_width_sigmas);
    cfg.grid.x2_mult = g.value("x2_mult", cfg.grid.x2_mult);
    cfg.grid.refine_factor = g.value("refine_factor", cfg.grid.refine_factor);
    cfg.grid.refine_steps = g.value("refine_steps", cfg.grid.refine_steps);
    cfg.step_days = g.value("step_days", cfg.step_days);
  }
  if (j.contains("calibration")) {
    const json& c = j["calibration"];
    CalibrationConfig& cal = cfg.calibration;
    cal.eps1 = c.value("eps1", cal.eps1);
    cal.eps2 = c.value("eps2", cal.eps2);
    cal.max_outer_iters = c.value("max_outer_iters", cal.max_outer_iters);
    cal.lbfgs_memory = c.value("lbfgs_memory", cal.lbfgs_memory);
    if (c.contains("smoothing_bandwidths")) {
      const auto& b = c["smoothing_bandwidths"];
      cal.bw_t = b.at(0).get<int>();
      cal.bw_x1 = b.at(1).get<int>();
      cal.bw_x2 = b.at(2).get<int>();
    }
    cal.despike_epsilon = c.value("despike_epsilon", cal.despike_epsilon);
    cal.inner_early_stop = c.value("inner_early_stop", cal.inner_early_stop);
    cal.max_rounds = c.value("max_rounds", cal.max_rounds);
    cal.ref_change_tol = c.value("ref_change_tol", cal.ref_change_tol);
    const std::string backend = c.value("pricing_backend", std::string("implicit"));
    if (backend == "implicit")
      cal.backend = PdeBackend::Implicit;
    else if (backend == "adi")
      cal.backend = PdeBackend::Adi;
    else
      throw InvalidInput("config: pricing_backend must be 'implicit' or 'adi'");
  }
  if (j.contains("simulated_instruments")) {
    const json& s = j["simulated_instruments"];
    if (s.contains("spx_maturities_days"))
      cfg.sim_instruments.spx_maturities_days =
          s["spx_maturities_days"].get<std::vector<double>>();
    if (s.contains("spx_strikes"))
      cfg.sim_instruments.spx_strikes = s["spx_strikes"].get<std::vector<double>>();
    if (s.contains("vix_strikes"))
      cfg.sim_instruments.vix_strikes = s["vix_strikes"].get<std::vector<double>>();
  }
  if (j.contains("montecarlo")) {
    const json& m = j["montecarlo"];
    cfg.montecarlo.n_paths = m.value("n_paths", cfg.montecarlo.n_paths);
    cfg.montecarlo.seed = m.value("seed", cfg.montecarlo.seed);
    cfg.montecarlo.trajectory_paths =
        m.value("trajectory_paths", cfg.montecarlo.trajectory_paths);
  }
  cfg.instruments_csv = j.value("instruments_csv", cfg.instruments_csv);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  return cfg;
}

ProblemConfig ProblemConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

std::string ProblemConfig::to_json_string() const {
  json j;
  j["mode"] = mode;
  j["spot"] = spot;
  if (x2_0) j["x2_0"] = *x2_0;
  j["vix"] = {{"t0_days", t0_days}, {"t_days", t_days}};
  j["generating_heston"] = {{"kappa", generating.kappa},
                            {"theta", generating.theta},
                            {"omega", generating.omega},
                            {"eta", generating.eta}};
  json r;
  if (reference_kind == ReferenceKind::Heston) {
    r["kind"] = "heston";
    r["heston"] = {{"kappa", reference_heston.kappa},
                   {"theta", reference_heston.theta},
                   {"omega", reference_heston.omega},
                   {"eta", reference_heston.eta}};
  } else if (reference_kind == ReferenceKind::Constant) {
    r["kind"] = "constant";
    r["beta"] = {reference_constants.e11, reference_constants.e12,
                 reference_constants.e22};
  } else {
    r["kind"] = "external";
    r["surface_csv"] = reference_surface_csv;
  }
  j["reference"] = r;
  j["grid"] = {{"n_x1", grid.n_x1},
               {"n_x2", grid.n_x2},
               {"scale_k", grid.scale_k},
               {"x1_width_sigmas", grid.x1_width_sigmas},
               {"x2_mult", grid.x2_mult},
               {"refine_factor", grid.refine_factor},
               {"refine_steps", grid.refine_steps},
               {"step_days", step_days}};
  j["calibration"] = {
      {"eps1", calibration.eps1},
      {"eps2", calibration.eps2},
      {"max_outer_iters", calibration.max_outer_iters},
      {"lbfgs_memory", calibration.lbfgs_memory},
      {"smoothing_bandwidths", {calibration.bw_t, calibration.bw_x1, calibration.bw_x2}},
      {"despike_epsilon", calibration.despike_epsilon},
      {"inner_early_stop", calibration.inner_early_stop},
      {"max_rounds", calibration.max_rounds},
      {"ref_change_tol", calibration.ref_change_tol},
      {"pricing_backend", calibration.backend == PdeBackend::Implicit ? "implicit" : "adi"}};
  j["simulated_instruments"] = {
      {"spx_maturities_days", sim_instruments.spx_maturities_days},
      {"spx_strikes", sim_instruments.spx_strikes},
      {"vix_strikes", sim_instruments.vix_strikes}};
  j["montecarlo"] = {{"n_paths", montecarlo.n_paths},
                     {"seed", montecarlo.seed},
                     {"trajectory_paths", montecarlo.trajectory_paths}};
  j["instruments_csv"] = instruments_csv;
  j["output_dir"] = output_dir;
  return j.dump(2);
}

double infer_x2_0(const QuoteTable& strip, double forward, double* wing_fraction) {
  if (forward <= 0.0) throw InvalidInput("infer_x2_0: need a positive forward");
  struct Pt {
    double k;
    double call = -1.0, put = -1.0;
  };
  std::vector<Pt> pts;
  for (const auto& row : strip.rows) {
    if (row.kind != "spx_call" && row.kind != "spx_put") continue;
    auto it = std::find_if(pts.begin(), pts.end(),
                           [&](const Pt& p) { return std::abs(p.k - row.strike) < 1e-9; });
    if (it == pts.end()) {
      pts.push_back({row.strike});
      it = pts.end() - 1;
    }
    if (row.kind == "spx_call")
      it->call = row.price;
    else
      it->put = row.price;
  }
  if (pts.size() < 5)
    throw InvalidInput("infer_x2_0: need at least 5 strikes");
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.k < b.k; });
  if (pts.front().k >= forward || pts.back().k <= forward)
    throw InvalidInput("infer_x2_0: strikes must straddle the forward");

  // out-of-the-money price per strike, with put-call parity fallback
  auto otm = [&](const Pt& p) {
    const bool below = p.k < forward;
    double v = below ? p.put : p.call;
    if (v < 0.0) {
      const double other = below ? p.call : p.put;
      if (other < 0.0)
        throw InvalidInput("infer_x2_0: missing quote at strike " + std::to_string(p.k));
      v = below ? other - (forward - p.k) : other + (forward - p.k);
      v = std::max(v, 0.0);
    }
    return v;
  };

  std::vector<double> ks, vals;
  ks.push_back(0.5 * pts.front().k);          // truncated flat wing
  vals.push_back(otm(pts.front()));
  for (const auto& p : pts) {
    ks.push_back(p.k);
    vals.push_back(otm(p));
  }
  ks.push_back(2.0 * pts.back().k);
  vals.push_back(otm(pts.back()));

  // insert the forward as a node, interpolating the OTM envelope
  for (size_t q = 0; q + 1 < ks.size(); ++q) {
    if (ks[q] < forward && forward < ks[q + 1]) {
      const double w = (forward - ks[q]) / (ks[q + 1] - ks[q]);
      ks.insert(ks.begin() + q + 1, forward);
      vals.insert(vals.begin() + q + 1, (1 - w) * vals[q] + w * vals[q + 1]);
      break;
    }
  }

  double total = 0.0, wings = 0.0;
  for (size_t q = 0; q + 1 < ks.size(); ++q) {
    const double a = ks[q], b = ks[q + 1];
    const double fa = vals[q] / (a * a), fb = vals[q + 1] / (b * b);
    const double piece = 0.5 * (fa + fb) * (b - a);
    total += piece;
    if (q == 0 || q + 2 == ks.size()) wings += piece;
  }
  if (wing_fraction) *wing_fraction = total > 0.0 ? wings / total : 0.0;
  return total;
}

namespace {

std::vector<Instrument> template_instruments(const ProblemConfig& cfg) {
  std::vector<Instrument> raw;
  for (double md : cfg.sim_instruments.spx_maturities_days)
    for (double k : cfg.sim_instruments.spx_strikes) {
      Instrument ins;
      ins.kind = InstrumentKind::SpxCall;
      ins.strike = k;
      ins.maturity = years_from_days(md);
      raw.push_back(ins);
    }
  Instrument fut;
  fut.kind = InstrumentKind::VixFuture;
  fut.maturity = years_from_days(cfg.t0_days);
  raw.push_back(fut);
  for (double k : cfg.sim_instruments.vix_strikes) {
    Instrument ins;
    ins.kind = InstrumentKind::VixCall;
    ins.strike = k;
    ins.maturity = years_from_days(cfg.t0_days);
    raw.push_back(ins);
  }
  return raw;
}

std::vector<double> event_times(const ProblemConfig& cfg,
                                const std::vector<Instrument>& instruments) {
  std::vector<double> ev = {years_from_days(cfg.t0_days), years_from_days(cfg.t_days)};
  for (const auto& ins : instruments) ev.push_back(ins.maturity);
  std::sort(ev.begin(), ev.end());
  ev.erase(std::unique(ev.begin(), ev.end(),
                       [](double a, double b) { return std::abs(a - b) < 1e-12; }),
           ev.end());
  return ev;
}

}  // namespace

QuoteTable generate_simulated_quotes(const ProblemConfig& cfg, double* singular_price) {
  cfg.generating.validate();
  const VixSpec spec = cfg.vix_spec();
  if (!cfg.x2_0) throw InvalidInput("generate_simulated_quotes: x2_0 required");

  std::vector<Instrument> raw = template_instruments(cfg);
  InstrumentSet set = InstrumentSet::organize(raw, spec);

  TimeGrid tgrid = build_time_grid(spec.big_t, years_from_days(cfg.step_days),
                                   event_times(cfg, raw));
  SpatialGrid grid = build_spatial_grid(cfg.grid, cfg.x1_0(), *cfg.x2_0,
                                        tgrid.n_nodes());
  DiffusionSurface beta =
      reference_beta(ReferenceSpec::make_heston(cfg.generating), tgrid, grid, spec.big_t);

  const std::vector<PriceQuote> quotes =
      model_prices(beta, tgrid, grid, set, spec, cfg.calibration.backend);

  QuoteTable table;
  for (int q = 0; q < set.count(); ++q) {
    const Instrument& ins = set.all[q];
    if (ins.kind == InstrumentKind::SingularContract) {
      if (singular_price) *singular_price = quotes[q].model_price;
      continue;
    }
    QuoteRow row;
    row.kind = kind_name(ins.kind);
    row.strike = ins.strike;
    row.maturity_days = ins.maturity * kDaysPerYear;
    row.price = quotes[q].model_price;
    row.implied_vol = quotes[q].model_iv.value_or(0.0);
    table.rows.push_back(row);
  }
  return table;
}

Problem build_problem(const ProblemConfig& cfg, const QuoteTable& quotes) {
  const VixSpec spec = cfg.vix_spec();

  std::vector<Instrument> raw;
  for (const auto& row : quotes.rows) {
    Instrument ins;
    ins.kind = kind_from_name(row.kind);
    ins.strike = row.strike;
    ins.maturity = years_from_days(row.maturity_days);
    ins.market_price = row.price;
    ins.market_iv = row.implied_vol;
    raw.push_back(ins);
  }

  double x2_0;
  if (cfg.x2_0) {
    x2_0 = *cfg.x2_0;
  } else {
    QuoteTable strip;
    for (const auto& row : quotes.rows)
      if ((row.kind == "spx_call" || row.kind == "spx_put") &&
          std::abs(row.maturity_days - cfg.t_days) < 0.25)
        strip.rows.push_back(row);
    x2_0 = infer_x2_0(strip, cfg.spot);
  }

  // vega weights: futures level for VIX options comes from the quoted future
  double market_future = 0.0;
  for (const auto& ins : raw)
    if (ins.kind == InstrumentKind::VixFuture) market_future = ins.market_price;
  for (auto& ins : raw) {
    if (!ins.is_option()) continue;
    const double fwd = ins.is_spx() ? cfg.spot : market_future;
    double iv = ins.market_iv;
    if (iv <= 0.0) {
      const bool call = ins.kind == InstrumentKind::SpxCall ||
                        ins.kind == InstrumentKind::VixCall;
      iv = black_implied_vol(ins.market_price, fwd, ins.strike, ins.maturity, call);
    }
    ins = vega_scale(ins, iv, fwd);
  }

  Problem p;
  p.vix = spec;
  p.instruments = InstrumentSet::organize(raw, spec);
  p.tgrid = build_time_grid(spec.big_t, years_from_days(cfg.step_days),
                            event_times(cfg, raw));
  p.grid = build_spatial_grid(cfg.grid, cfg.x1_0(), x2_0, p.tgrid.n_nodes());
  p.hjb.eps2 = cfg.calibration.eps2;
  p.backend = cfg.calibration.backend;

  ReferenceSpec ref;
  switch (cfg.reference_kind) {
    case ReferenceKind::Heston:
      ref = ReferenceSpec::make_heston(cfg.reference_heston);
      break;
    case ReferenceKind::Constant:
      ref = ReferenceSpec::make_constant(cfg.reference_constants);
      break;
    case ReferenceKind::External:
      ref.kind = ReferenceKind::External;
      ref.surface = load_surface_csv(cfg.reference_surface_csv, p.tgrid, p.grid);
      break;
  }
  p.beta_bar = reference_beta(ref, p.tgrid, p.grid, spec.big_t);
  return p;
}

void write_price_table_csv(const std::vector<PriceRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << "instrument,kind,maturity_days,strike,market_price,model_price,price_error,"
         "market_iv,model_iv,iv_error\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.id << "," << r.kind << "," << r.maturity_days << ",";
    if (r.has_strike) out << r.strike;
    out << "," << r.market_price << "," << r.model_price << ","
        << (r.model_price - r.market_price) << ",";
    if (r.market_iv) out << *r.market_iv;
    out << ",";
    if (r.model_iv) out << *r.model_iv;
    out << ",";
    if (r.market_iv && r.model_iv) out << (*r.model_iv - *r.market_iv);
    out << "\n";
  }
}

void write_surface_csv(const DiffusionSurface& surf, const TimeGrid& tgrid,
                       const SpatialGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << "time_index,x1_index,x2_index,t,x1,x2,b11,b12,b22\n";
  out << std::setprecision(12);
  for (int k = 0; k < surf.n_intervals(); ++k) {
    const GridPhase& ph = grid.phase_for_interval(k);
    const Sym2Field& f = surf.slices[k];
    for (int i = 0; i < f.n1(); ++i)
      for (int j = 0; j < f.n2(); ++j)
        out << k << "," << i << "," << j << "," << tgrid.nodes[k] << "," << ph.x1[i]
            << "," << unscale_x2(ph.y2[j], grid.scale_k) << "," << f.b11.at(i, j)
            << "," << f.b12.at(i, j) << "," << f.b22.at(i, j) << "\n";
  }
}

DiffusionSurface load_surface_csv(const std::string& path, const TimeGrid& tgrid,
                                  const SpatialGrid& grid) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open surface file '" + path + "'");
  DiffusionSurface surf;
  surf.slices.reserve(tgrid.n_steps());
  for (int k = 0; k < tgrid.n_steps(); ++k)
    surf.slices.emplace_back(grid.phase_for_interval(k));

  std::string line;
  std::getline(in, line);  // header
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 9)
      throw InvalidInput("surface row " + std::to_string(line_no) + ": malformed");
    const int k = std::stoi(cells[0]);
    const int i = std::stoi(cells[1]);
    const int j = std::stoi(cells[2]);
    if (k < 0 || k >= surf.n_intervals())
      throw InvalidInput("surface row " + std::to_string(line_no) + ": bad time index");
    Sym2Field& f = surf.slices[k];
    if (i < 0 || i >= f.n1() || j < 0 || j >= f.n2())
      throw InvalidInput("surface row " + std::to_string(line_no) + ": bad node index");
    f.b11.at(i, j) = parse_double(cells[6]);
    f.b12.at(i, j) = parse_double(cells[7]);
    f.b22.at(i, j) = parse_double(cells[8]);
  }
  return surf;
}

void write_phi_csv(const std::vector<GridField>& phi, const TimeGrid& tgrid,
                   const SpatialGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << "time_index,x1_index,x2_index,t,x1,x2,phi\n";
  out << std::setprecision(12);
  for (size_t k = 0; k < phi.size(); ++k) {
    const GridPhase& ph = grid.phase_for_node(static_cast<int>(k));
    for (int i = 0; i < phi[k].n1; ++i)
      for (int j = 0; j < phi[k].n2; ++j)
        out << k << "," << i << "," << j << "," << tgrid.nodes[k] << "," << ph.x1[i]
            << "," << unscale_x2(ph.y2[j], grid.scale_k) << "," << phi[k].at(i, j)
            << "\n";
  }
}

void write_mc_summary_csv(const TerminalDiagnostics& diag, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << "metric,value\n" << std::setprecision(12);
  out << "mean_xi_T," << diag.mean_xi << "\n";
  out << "mean_x2_T," << diag.mean_x2_T << "\n";
  out << "q95_x2_T," << diag.q95_x2_T << "\n";
  out << "mean_exp_x1_T," << diag.mean_exp_x1_T << "\n";
  out << "se_exp_x1_T," << diag.se_exp_x1_T << "\n";
  out << "mean_vix_t0," << diag.mean_vix_t0 << "\n";
}

void write_histograms_csv(const PathBatch& batch, const std::string& path, int bins) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << "snapshot_time,variable,bin_left,bin_right,count\n";
  out << std::setprecision(10);
  for (size_t s = 0; s < batch.snapshot_nodes.size(); ++s) {
    const double t = batch.times[batch.snapshot_nodes[s]];
    for (int var = 0; var < 2; ++var) {
      const std::vector<double>& data = var == 0 ? batch.snap_x1[s] : batch.snap_x2[s];
      const double lo = *std::min_element(data.begin(), data.end());
      const double hi = *std::max_element(data.begin(), data.end());
      const double width = (hi - lo) > 0 ? (hi - lo) / bins : 1.0;
      std::vector<int> counts(bins, 0);
      for (double x : data) {
        int b = static_cast<int>((x - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        ++counts[b];
      }
      for (int b = 0; b < bins; ++b)
        out << t << "," << (var == 0 ? "x1" : "x2") << "," << lo + b * width << ","
            << lo + (b + 1) * width << "," << counts[b] << "\n";
    }
  }
}

void write_trajectories_csv(const PathBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << "path,time,x1,x2\n";
  out << std::setprecision(10);
  for (int p = 0; p < batch.trajectory_paths; ++p)
    for (size_t k = 0; k < batch.times.size(); ++k)
      out << p << "," << batch.times[k] << "," << batch.traj_x1[p][k] << ","
          << batch.traj_x2[p][k] << "\n";
}

void write_report_json(const CalibrationReport& report, const ProblemConfig& cfg,
                       const Problem& p, const std::string& path) {
  json j;
  j["status"] = report.status == CalibrationStatus::Converged ? "converged"
                                                              : "not_converged";
  j["possibly_infeasible"] = report.possibly_infeasible;
  j["rounds"] = report.rounds;
  j["inner_iterations"] = report.inner_iterations;
  j["final_gmax"] = report.final_gmax;
  j["wall_seconds"] = report.wall_seconds;
  j["multipliers"] = {{"spx", report.multipliers.lambda_spx},
                      {"vix_future", report.multipliers.lambda_vix_f},
                      {"vix", report.multipliers.lambda_vix},
                      {"singular", report.multipliers.lambda_xi}};
  j["objective_trace"] = report.objective_trace;
  j["gmax_trace"] = report.gmax_trace;

  json rows = json::array();
  for (const auto& r : report.prices) {
    json row;
    row["instrument"] = r.id;
    row["kind"] = r.kind;
    row["maturity_days"] = r.maturity_days;
    if (r.has_strike) row["strike"] = r.strike;
    row["market_price"] = r.market_price;
    row["model_price"] = r.model_price;
    if (r.market_iv) row["market_iv"] = *r.market_iv;
    if (r.model_iv) row["model_iv"] = *r.model_iv;
    rows.push_back(row);
  }
  j["prices"] = rows;

  // grid echo for reproducibility
  j["grid_echo"] = {{"n_x1", p.grid.coarse.x1.n},
                    {"n_x2_coarse", p.grid.coarse.y2.n},
                    {"n_x2_fine", p.grid.fine.y2.n},
                    {"scale_k", p.grid.scale_k},
                    {"x1_min", p.grid.coarse.x1.front()},
                    {"x1_max", p.grid.coarse.x1.back()},
                    {"y2_max", p.grid.coarse.y2.back()},
                    {"switch_node", p.grid.switch_node},
                    {"time_nodes", p.tgrid.n_nodes()}};
  j["config_echo"] = json::parse(cfg.to_json_string());

  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

int run_pipeline(const ProblemConfig& cfg_in, const PipelineOptions& opts) {
  ProblemConfig cfg = cfg_in;
  if (opts.max_rounds) cfg.calibration.max_rounds = *opts.max_rounds;
  if (opts.eps1) cfg.calibration.eps1 = *opts.eps1;
  if (opts.eps2) cfg.calibration.eps2 = *opts.eps2;
  if (opts.inner_iters) cfg.calibration.inner_early_stop = *opts.inner_iters;

  try {
    fs::create_directories(cfg.output_dir);
    const fs::path out_dir(cfg.output_dir);

    QuoteTable quotes;
    if (cfg.mode == "simulated") {
      double singular_price = 0.0;
      quotes = generate_simulated_quotes(cfg, &singular_price);
      save_quotes_csv(quotes, (out_dir / "quotes.csv").string());
      std::cout << "[generate] " << quotes.rows.size()
                << " quotes; generating-model singular price " << singular_price
                << "\n";
    } else {
      if (cfg.instruments_csv.empty())
        throw InvalidInput("market mode requires instruments_csv");
      quotes = load_quotes_csv(cfg.instruments_csv);
    }

    Problem problem = build_problem(cfg, quotes);
    CalibrationReport report = reference_measure_iteration(problem, cfg.calibration);

    write_report_json(report, cfg, problem, (out_dir / "report.json").string());
    write_price_table_csv(report.prices, (out_dir / "prices.csv").string());
    if (opts.dump_surfaces) {
      write_surface_csv(report.beta_star, problem.tgrid, problem.grid,
                        (out_dir / "beta_star.csv").string());
      write_surface_csv(report.beta_bar_final, problem.tgrid, problem.grid,
                        (out_dir / "beta_bar.csv").string());
    }

    // Monte Carlo diagnostics of the calibrated dynamics
    const double x1_0 = problem.grid.coarse.x1[problem.grid.i0];
    const double x2_0 =
        unscale_x2(problem.grid.coarse.y2[problem.grid.j0_coarse], problem.grid.scale_k);
    PathBatch batch = euler_simulate(
        SimSource::from_surface(report.beta_star, problem.grid), x1_0, x2_0,
        problem.tgrid, cfg.montecarlo.n_paths, cfg.montecarlo.seed,
        cfg.montecarlo.trajectory_paths);
    TerminalDiagnostics diag = terminal_diagnostics(batch, problem.vix);
    write_mc_summary_csv(diag, (out_dir / "mc_summary.csv").string());
    write_histograms_csv(batch, (out_dir / "mc_histograms.csv").string());
    write_trajectories_csv(batch, (out_dir / "mc_trajectories.csv").string());

    std::cout << "[calibrate] status="
              << (report.status == CalibrationStatus::Converged ? "converged"
                                                                : "not_converged")
              << " rounds=" << report.rounds << " gmax=" << report.final_gmax
              << " mc_mean_xi=" << diag.mean_xi << "\n";
    return report.status == CalibrationStatus::Converged ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace jointcal
