#include "implreg/experiments.hpp"
#include "implreg/io.hpp"
#include "implreg/optimizers.hpp"
#include "implreg/oracle.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace implreg;

namespace {

SymMat sym(const Matrix& m) { return SymMat(m); }

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  d["X"] = t.final_X.matrix();
  if (t.final_U) d["U"] = *t.final_U;
  d["status"] = to_string(t.status);
  d["steps"] = t.steps;
  d["time"] = t.time;
  d["message"] = t.message;
  std::vector<double> time, obj, res, nuc;
  for (const auto& h : t.history) {
    time.push_back(h.time);
    obj.push_back(h.objective);
    res.push_back(h.residual_norm);
    nuc.push_back(h.nuclear_norm);
  }
  d["history"] = py::dict(py::arg("time") = time, py::arg("objective") = obj,
                          py::arg("residual_norm") = res, py::arg("nuclear_norm") = nuc);
  if (t.integrated_dual) d["integrated_dual"] = *t.integrated_dual;
  return d;
}

py::dict certificate_dict(const KKTCertificate& c) {
  py::dict d;
  d["nu"] = c.nu;
  d["max_eig_dual"] = c.max_eig_dual;
  d["feas_residual"] = c.feas_residual;
  d["comp_residual"] = c.comp_residual;
  d["psd_violation"] = c.psd_violation;
  d["feasible_ok"] = c.feasible_ok;
  d["psd_ok"] = c.psd_ok;
  d["dual_ok"] = c.dual_ok;
  d["comp_ok"] = c.comp_ok;
  d["passed"] = c.passed;
  d["tol"] = c.tol;
  return d;
}

StepPolicy step_policy(const std::string& kind, double eta) {
  if (kind == "fixed") return StepPolicy::fixed(eta);
  if (kind == "line-search") return StepPolicy::line_search(eta);
  throw std::invalid_argument("unknown step policy '" + kind + "'");
}

template <class Config, class Run>
py::dict run_family(const std::string& config, Config cfg, Run run) {
  if (!config.empty()) apply_json(json::parse(config), cfg);
  cfg.validate();
  py::dict d;
  d["config"] = to_json(cfg).dump();
  run(cfg, d);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of implreg.";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<MeasurementEnsemble>(m, "Ensemble")
      .def(py::init([](const std::vector<Matrix>& mats, const Vector& y) {
             std::vector<SymMat> s;
             for (const auto& a : mats) s.emplace_back(a);
             return MeasurementEnsemble(std::move(s), y);
           }),
           py::arg("matrices"), py::arg("y"))
      .def_property_readonly("n", &MeasurementEnsemble::n)
      .def_property_readonly("m", &MeasurementEnsemble::m)
      .def_property_readonly("y", &MeasurementEnsemble::y)
      .def_property_readonly("matrices",
                             [](const MeasurementEnsemble& e) {
                               std::vector<Matrix> out;
                               for (const auto& a : e.mats()) out.push_back(a.matrix());
                               return out;
                             })
      .def("with_targets", &MeasurementEnsemble::with_targets, py::arg("y"))
      .def("apply", [](const MeasurementEnsemble& e, const Matrix& x) { return apply(e, sym(x)); })
      .def("adjoint", [](const MeasurementEnsemble& e, const Vector& r) { return adjoint(e, r).matrix(); })
      .def("residual", [](const MeasurementEnsemble& e, const Matrix& x) { return residual(e, sym(x)); })
      .def("max_commutator_norm", &max_commutator_norm)
      .def("__repr__", [](const MeasurementEnsemble& e) {
        return "Ensemble(n=" + std::to_string(e.n()) + ", m=" + std::to_string(e.m()) + ")";
      });

  // Generators.
  m.def("gen_gaussian", &gen_gaussian, py::arg("n"), py::arg("m"), py::arg("seed"));
  m.def(
      "gen_completion",
      [](Index n, Index mm, const std::string& dist, std::uint64_t seed, double gamma) {
        const CompletionDist d = dist == "uniform"    ? CompletionDist::uniform
                                 : dist == "powerlaw" ? CompletionDist::powerlaw
                                                      : throw std::invalid_argument("dist must be uniform or powerlaw");
        return gen_completion(n, mm, d, seed, gamma);
      },
      py::arg("n"), py::arg("m"), py::arg("dist") = "uniform", py::arg("seed") = 0,
      py::arg("gamma") = 1.0);
  m.def("completion_ensemble", &completion_ensemble, py::arg("n"), py::arg("entries"));
  m.def("gen_diagonal", &gen_diagonal, py::arg("n"), py::arg("m"), py::arg("seed"));
  m.def("diagonal_ensemble", &diagonal_ensemble, py::arg("coeffs"), py::arg("y"));
  m.def(
      "gen_planted",
      [](Index n, Index r, const std::string& kind, std::uint64_t seed) {
        return gen_planted(n, r, parse_planted_kind(kind), seed).matrix();
      },
      py::arg("n"), py::arg("r"), py::arg("kind") = "lowrank", py::arg("seed") = 0);
  m.def(
      "build_instance",
      [](const std::string& kind, Index n, Index r, Index mm, std::uint64_t seed,
         const std::string& planted, double gamma) {
        InstanceSpec spec{parse_problem_kind(kind), parse_planted_kind(planted), n, r, mm, gamma};
        const ProblemInstance inst = build_instance(spec, seed);
        py::dict d;
        d["ensemble"] = inst.ensemble;
        d["planted"] = inst.planted ? py::cast(inst.planted->matrix()) : py::none();
        d["kind"] = to_string(inst.kind);
        d["seed"] = inst.seed;
        return d;
      },
      py::arg("kind"), py::arg("n"), py::arg("r"), py::arg("m"), py::arg("seed") = 0,
      py::arg("planted") = "lowrank", py::arg("gamma") = 1.0);

  // Linear algebra.
  m.def("psd_project", [](const Matrix& x) { return psd_project(sym(x)).matrix(); });
  m.def("expm_sym", [](const Matrix& x) { return expm_sym(sym(x)).matrix(); });
  m.def("nuclear_norm", [](const Matrix& x) { return nuclear_norm(x); });
  m.def("eigh", [](const Matrix& x) {
    const EigenDecomp d = eigh_sym(sym(x));
    return py::make_tuple(d.values, d.vectors);
  });
  m.def("outer", [](const Matrix& u) { return outer(u).matrix(); }, py::arg("U"));

  // Dynamics.
  m.def("objective", [](const MeasurementEnsemble& e, const Matrix& x) { return objective(e, sym(x)); });
  m.def("grad_f", [](const MeasurementEnsemble& e, const Matrix& u) { return grad_f(u, e); });
  m.def("random_init", &random_init, py::arg("n"), py::arg("d"), py::arg("scale"), py::arg("seed"));
  m.def("identity_init", &identity_init, py::arg("n"), py::arg("scale"));
  m.def(
      "factored_gd",
      [](const MeasurementEnsemble& e, const Matrix& u0, double eta, const std::string& step,
         long max_steps, double residual_tol) {
        GDConfig cfg;
        cfg.step = step_policy(step, eta);
        cfg.d = u0.cols();
        cfg.init_scale = u0.norm();
        cfg.max_steps = max_steps;
        cfg.residual_tol = residual_tol;
        return trajectory_dict(factored_gd(e, u0, cfg));
      },
      py::arg("ensemble"), py::arg("U0"), py::arg("eta") = 1e-3, py::arg("step") = "fixed",
      py::arg("max_steps") = 200'000, py::arg("residual_tol") = tol::kResidualRtol);
  m.def(
      "gd_on_X",
      [](const MeasurementEnsemble& e, const Matrix& x0, double eta, long max_steps,
         double residual_tol, bool project) {
        return trajectory_dict(gd_on_X(e, sym(x0), eta, max_steps, residual_tol, project));
      },
      py::arg("ensemble"), py::arg("X0"), py::arg("eta"), py::arg("max_steps") = 1'000'000,
      py::arg("residual_tol") = tol::kResidualRtol, py::arg("project") = false);
  m.def("gram_spectral_bound", &gram_spectral_bound);
  m.def(
      "gradient_flow_ode",
      [](const MeasurementEnsemble& e, const Matrix& x0, double rel_tol, double abs_tol,
         double t_max, double residual_tol, long max_steps, bool track_dual) {
        ODEConfig cfg;
        cfg.rel_tol = rel_tol;
        cfg.abs_tol = abs_tol;
        cfg.t_max = t_max;
        cfg.residual_tol = residual_tol;
        cfg.max_steps = max_steps;
        cfg.track_dual = track_dual;
        return trajectory_dict(gradient_flow_ode(e, sym(x0), cfg));
      },
      py::arg("ensemble"), py::arg("X0"), py::arg("rel_tol") = tol::kOdeRelTol,
      py::arg("abs_tol") = tol::kOdeAbsTol, py::arg("t_max") = tol::kOdeTmax,
      py::arg("residual_tol") = tol::kResidualRtol, py::arg("max_steps") = 2'000'000,
      py::arg("track_dual") = false);
  m.def(
      "time_ordered_exp_solve",
      [](const MeasurementEnsemble& e, const Matrix& x0, double eta, long max_steps,
         double residual_tol) {
        return trajectory_dict(time_ordered_exp_solve(e, sym(x0), eta, max_steps, residual_tol));
      },
      py::arg("ensemble"), py::arg("X0"), py::arg("eta") = 1e-3, py::arg("max_steps") = 2'000'000,
      py::arg("residual_tol") = tol::kResidualRtol);

  // Oracles.
  m.def("min_frobenius_solution",
        [](const MeasurementEnsemble& e) { return min_frobenius_solution(e).matrix(); });
  m.def(
      "min_nuclear_psd",
      [](const MeasurementEnsemble& e, double tol_, int max_iters) {
        OracleOptions opts;
        opts.tol = tol_;
        opts.max_iters = max_iters;
        const OracleResult r = min_nuclear_psd(e, opts);
        py::dict d;
        d["X"] = r.X.matrix();
        d["status"] = to_string(r.status);
        d["objective"] = r.objective;
        d["iters"] = r.iters;
        d["message"] = r.message;
        d["certificate"] = certificate_dict(r.certificate);
        return d;
      },
      py::arg("ensemble"), py::arg("tol") = tol::kOracleTol,
      py::arg("max_iters") = tol::kOracleMaxIters);
  m.def(
      "kkt_check",
      [](const Matrix& x, const MeasurementEnsemble& e, double tol_) {
        return certificate_dict(kkt_check(sym(x), e, tol_));
      },
      py::arg("X"), py::arg("ensemble"), py::arg("tol") = 1e-5);
  m.def(
      "min_l1_nonneg",
      [](const Matrix& a, const Vector& y) {
        const L1Result r = min_l1_nonneg(a, y);
        return py::dict(py::arg("x") = r.x, py::arg("status") = to_string(r.status),
                        py::arg("objective") = r.objective);
      },
      py::arg("A"), py::arg("y"));

  // Experiment families. Configs and summaries travel as JSON text.
  m.def(
      "run_sweep",
      [](const std::string& scale, const std::string& config, int threads) {
        return run_family(config, sweep_preset(parse_scale(scale)),
                          [&](const SweepConfig& cfg, py::dict& d) {
                            ResultTable rows;
                            {
                              py::gil_scoped_release release;
                              rows = run_dimension_sweep(cfg, threads);
                            }
                            d["results_csv"] = results_csv(rows);
                            d["summary"] = to_json(summarize(rows)).dump();
                          });
      },
      py::arg("scale") = "smoke", py::arg("config") = "", py::arg("threads") = 1);
  m.def(
      "run_flow",
      [](const std::string& scale, const std::string& config, int threads) {
        return run_family(config, flow_preset(parse_scale(scale)),
                          [&](const FlowConfig& cfg, py::dict& d) {
                            ResultTable rows;
                            {
                              py::gil_scoped_release release;
                              rows = run_flow_comparison(cfg, threads);
                            }
                            d["results_csv"] = results_csv(rows);
                            d["summary"] = to_json(summarize(rows)).dump();
                          });
      },
      py::arg("scale") = "smoke", py::arg("config") = "", py::arg("threads") = 1);
  m.def(
      "run_grid",
      [](const std::string& scale, const std::string& config, int threads) {
        return run_family(config, grid_preset(parse_scale(scale)),
                          [&](const GridSearchConfig& cfg, py::dict& d) {
                            GridSearchResult res;
                            {
                              py::gil_scoped_release release;
                              res = run_grid_search(cfg, threads);
                            }
                            d["results_csv"] = results_csv(res.rows);
                            d["summary"] = to_json(summarize(res.rows)).dump();
                            d["grid"] = to_json(res.stats).dump();
                          });
      },
      py::arg("scale") = "smoke", py::arg("config") = "", py::arg("threads") = 1);
}
