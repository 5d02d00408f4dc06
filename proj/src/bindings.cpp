#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "jointcal/calibrate.hpp"
#include "jointcal/conjugate.hpp"
#include "jointcal/heston.hpp"
#include "jointcal/io.hpp"
#include "jointcal/pricing.hpp"

namespace py = pybind11;
using namespace jointcal;

namespace {

HestonParams heston_from_tuple(double kappa, double theta, double omega, double eta) {
  HestonParams p{kappa, theta, omega, eta};
  p.validate();
  return p;
}

py::dict report_to_dict(const CalibrationReport& report) {
  py::dict d;
  d["status"] =
      report.status == CalibrationStatus::Converged ? "converged" : "not_converged";
  d["possibly_infeasible"] = report.possibly_infeasible;
  d["rounds"] = report.rounds;
  d["inner_iterations"] = report.inner_iterations;
  d["final_gmax"] = report.final_gmax;
  d["wall_seconds"] = report.wall_seconds;
  py::list rows;
  for (const auto& r : report.prices) {
    py::dict row;
    row["instrument"] = r.id;
    row["kind"] = r.kind;
    row["maturity_days"] = r.maturity_days;
    if (r.has_strike) row["strike"] = r.strike;
    row["market_price"] = r.market_price;
    row["model_price"] = r.model_price;
    if (r.market_iv) row["market_iv"] = *r.market_iv;
    if (r.model_iv) row["model_iv"] = *r.model_iv;
    rows.append(row);
  }
  d["prices"] = rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Joint SPX/VIX calibration core";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericFailure>(m, "NumericFailure", PyExc_RuntimeError);

  m.def("black_price", &black_price, py::arg("forward"), py::arg("strike"),
        py::arg("vol"), py::arg("maturity"), py::arg("is_call") = true);
  m.def("black_vega", &black_vega, py::arg("forward"), py::arg("strike"),
        py::arg("vol"), py::arg("maturity"));
  m.def("black_implied_vol", &black_implied_vol, py::arg("price"), py::arg("forward"),
        py::arg("strike"), py::arg("maturity"), py::arg("is_call") = true);

  m.def(
      "heston_cf_call",
      [](double kappa, double theta, double omega, double eta, double forward,
         double strike, double maturity, double v0) {
        return heston_cf_call(heston_from_tuple(kappa, theta, omega, eta), forward,
                              strike, maturity, v0);
      },
      py::arg("kappa"), py::arg("theta"), py::arg("omega"), py::arg("eta"),
      py::arg("forward"), py::arg("strike"), py::arg("maturity"), py::arg("v0"));

  m.def("mean_reversion_factor", &mean_reversion_factor, py::arg("t"),
        py::arg("kappa"), py::arg("big_t"));
  m.def("variance_from_x2", &variance_from_x2, py::arg("t"), py::arg("x2"),
        py::arg("kappa"), py::arg("theta"), py::arg("big_t"));
  m.def("x2_from_variance", &x2_from_variance, py::arg("t"), py::arg("nu"),
        py::arg("kappa"), py::arg("theta"), py::arg("big_t"));
  m.def(
      "heston_characteristics",
      [](double t, double x2, double kappa, double theta, double omega, double eta,
         double big_t) {
        const Characteristics ch = heston_characteristics(
            t, x2, heston_from_tuple(kappa, theta, omega, eta), big_t);
        return py::make_tuple(ch.alpha1, ch.alpha2,
                              py::make_tuple(ch.beta.e11, ch.beta.e12, ch.beta.e22));
      },
      py::arg("t"), py::arg("x2"), py::arg("kappa"), py::arg("theta"),
      py::arg("omega"), py::arg("eta"), py::arg("big_t"));

  m.def(
      "conjugate_f_star",
      [](double a1, double a2, std::array<double, 3> b, std::array<double, 3> bbar) {
        const ConjugateResult res =
            conjugate_f_star(a1, a2, {b[0], b[1], b[2]}, {bbar[0], bbar[1], bbar[2]});
        py::dict d;
        d["value"] = res.value;
        d["beta_star"] =
            py::make_tuple(res.beta_star.e11, res.beta_star.e12, res.beta_star.e22);
        d["case"] = res.tag == ConjugateCase::Interior  ? "interior"
                    : res.tag == ConjugateCase::Zero    ? "zero"
                                                        : "cone-boundary";
        return d;
      },
      py::arg("a1"), py::arg("a2"), py::arg("b"), py::arg("beta_bar"),
      "Closed-form convex conjugate; b and beta_bar are (m11, m12, m22) triples");
  m.def(
      "psd_project",
      [](std::array<double, 3> mat) {
        const Sym2 p = psd_project({mat[0], mat[1], mat[2]});
        return py::make_tuple(p.e11, p.e12, p.e22);
      },
      py::arg("m"), "Eigenvalue-clip projection of a symmetric 2x2 matrix");

  m.def("vix_value",
        [](double x2, double t0, double big_t) {
          return vix_value(x2, VixSpec{t0, big_t});
        },
        py::arg("x2"), py::arg("t0"), py::arg("big_t"));

  m.def(
      "infer_x2_0",
      [](const std::vector<std::string>& kinds, const std::vector<double>& strikes,
         const std::vector<double>& maturities_days, const std::vector<double>& prices,
         double forward) {
        if (kinds.size() != strikes.size() || kinds.size() != prices.size() ||
            kinds.size() != maturities_days.size())
          throw InvalidInput("infer_x2_0: array length mismatch");
        QuoteTable table;
        for (size_t q = 0; q < kinds.size(); ++q)
          table.rows.push_back(
              {kinds[q], strikes[q], maturities_days[q], prices[q], 0.0});
        double wings = 0.0;
        const double est = infer_x2_0(table, forward, &wings);
        return py::make_tuple(est, wings);
      },
      py::arg("kinds"), py::arg("strikes"), py::arg("maturities_days"),
      py::arg("prices"), py::arg("forward"),
      "Returns (x2_0 estimate, wing mass fraction)");

  m.def(
      "generate_quotes",
      [](const std::string& config_json) {
        const ProblemConfig cfg = ProblemConfig::from_json_string(config_json);
        double singular = 0.0;
        const QuoteTable table = generate_simulated_quotes(cfg, &singular);
        py::list rows;
        for (const auto& r : table.rows) {
          py::dict row;
          row["kind"] = r.kind;
          row["strike"] = r.strike;
          row["maturity_days"] = r.maturity_days;
          row["price"] = r.price;
          row["implied_vol"] = r.implied_vol;
          rows.append(row);
        }
        return py::make_tuple(rows, singular);
      },
      py::arg("config_json"),
      "Price the simulated-mode instrument template; returns (rows, singular price)");

  m.def(
      "calibrate",
      [](const std::string& config_json) {
        const ProblemConfig cfg = ProblemConfig::from_json_string(config_json);
        QuoteTable quotes;
        if (cfg.mode == "simulated")
          quotes = generate_simulated_quotes(cfg);
        else
          quotes = load_quotes_csv(cfg.instruments_csv);
        Problem problem = build_problem(cfg, quotes);
        const CalibrationReport report =
            reference_measure_iteration(problem, cfg.calibration);
        return report_to_dict(report);
      },
      py::arg("config_json"),
      "Run the full calibration for a JSON config string; returns a summary dict");

  m.def(
      "run_pipeline",
      [](const std::string& config_path, bool dump_surfaces) {
        PipelineOptions opts;
        opts.dump_surfaces = dump_surfaces;
        return run_pipeline(ProblemConfig::from_json_file(config_path), opts);
      },
      py::arg("config_path"), py::arg("dump_surfaces") = false,
      "Full pipeline from a config file; returns the process exit code");
}
