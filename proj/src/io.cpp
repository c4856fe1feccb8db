#include "implreg/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace implreg {

namespace {

std::string opt_real(const std::optional<double>& v) {
  return v ? format_real(*v) : "NA";
}

// Rejects keys outside `known` so typos do not pass silently.
void check_keys(const json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_ode(const json& j, ODEConfig& ode) {
  check_keys(j, {"rel_tol", "abs_tol", "t_max", "residual_tol", "max_steps"}, "ode");
  read(j, "rel_tol", ode.rel_tol);
  read(j, "abs_tol", ode.abs_tol);
  read(j, "t_max", ode.t_max);
  read(j, "residual_tol", ode.residual_tol);
  read(j, "max_steps", ode.max_steps);
}

json ode_json(const ODEConfig& ode) {
  return {{"rel_tol", ode.rel_tol}, {"abs_tol", ode.abs_tol}, {"t_max", ode.t_max},
          {"residual_tol", ode.residual_tol}, {"max_steps", ode.max_steps}};
}

StepPolicy policy_from_json(const json& j) {
  check_keys(j, {"kind", "eta"}, "step policy");
  const std::string kind = j.value("kind", "fixed");
  if (kind == "fixed") return StepPolicy::fixed(j.value("eta", 1e-3));
  if (kind == "line_search") {
    return StepPolicy::line_search(j.value("eta", tol::kLineSearchMaxStep));
  }
  throw ConfigError("step policy: unknown kind '" + kind + "'");
}

template <typename Fn>
void guarded(const char* what, Fn&& fn) {
  try {
    fn();
  } catch (const json::exception& err) {
    throw ConfigError(std::string(what) + ": " + err.what());
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string(what) + ": " + err.what());
  }
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "experiment", "instance", "seed", "kind", "solver", "d", "alpha", "eta", "status",
      "objective", "residual", "rel_recon_error", "recon_error", "nuclear",
      "oracle_nuclear", "delta", "steps"};
  return cols;
}

std::string results_csv(const ResultTable& table) {
  std::ostringstream o;
  o << "# " << kResultsSchema << "\n";
  const auto& cols = result_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) o << (i ? "," : "") << cols[i];
  o << "\n";
  for (const auto& r : table) {
    o << r.experiment << ',' << r.instance << ',' << r.seed << ',' << r.kind << ','
      << r.solver << ',' << (r.d ? std::to_string(*r.d) : "NA") << ',' << opt_real(r.alpha)
      << ',' << opt_real(r.eta) << ',' << r.status << ',' << format_real(r.objective) << ','
      << format_real(r.residual) << ',' << opt_real(r.rel_recon_error) << ','
      << opt_real(r.recon_error) << ',' << format_real(r.nuclear) << ','
      << opt_real(r.oracle_nuclear) << ',' << opt_real(r.delta) << ',' << r.steps << "\n";
  }
  return o.str();
}

std::string timings_csv(const ResultTable& table) {
  std::ostringstream o;
  o << "instance,solver,d,alpha,eta,wall_time\n";
  for (const auto& r : table) {
    o << r.instance << ',' << r.solver << ',' << (r.d ? std::to_string(*r.d) : "NA") << ','
      << opt_real(r.alpha) << ',' << opt_real(r.eta) << ',' << format_real(r.wall_time)
      << "\n";
  }
  return o.str();
}

json to_json(const SymMat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

SymMat sym_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix: expected a non-empty array of rows");
  const auto n = static_cast<Index>(j.size());
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != n) {
      throw ConfigError("matrix: rows must all have length " + std::to_string(n));
    }
    for (Index c = 0; c < n; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  if ((m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm())) {
    throw ConfigError("matrix: not symmetric");
  }
  return SymMat(m);
}

json to_json(const ProblemInstance& inst, const std::string& id) {
  const auto& e = inst.ensemble;
  json mats = json::array();
  for (const auto& a : e.mats()) {
    json entries = json::array();
    for (Index j = 0; j < e.n(); ++j)
      for (Index i = 0; i <= j; ++i)
        if (a(i, j) != 0.0) entries.push_back({i, j, a(i, j)});
    mats.push_back(std::move(entries));
  }
  json doc = {{"schema", kInstanceSchema},
              {"id", id},
              {"kind", to_string(inst.kind)},
              {"seed", inst.seed},
              {"n", e.n()},
              {"m", e.m()},
              {"mats", std::move(mats)},
              {"y", std::vector<double>(e.y().data(), e.y().data() + e.y().size())},
              {"planted", nullptr}};
  if (inst.planted) {
    const EigenDecomp eig = eigh_sym(*inst.planted);
    doc["planted"] = {{"matrix", to_json(*inst.planted)},
                      {"spectrum", std::vector<double>(eig.values.data(),
                                                       eig.values.data() + eig.values.size())}};
  }
  return doc;
}

ProblemInstance instance_from_json(const json& j) {
  ProblemInstance inst{MeasurementEnsemble({SymMat::identity(1)}, Vector::Zero(1)),
                       std::nullopt, ProblemKind::gaussian, 0};
  guarded("instance", [&] {
    if (j.value("schema", std::string()) != kInstanceSchema) {
      throw ConfigError(std::string("expected schema '") + kInstanceSchema + "'");
    }
    const auto n = j.at("n").get<Index>();
    if (n < 1) throw ConfigError("n must be positive");
    std::vector<SymMat> mats;
    for (const json& entries : j.at("mats")) {
      Matrix a = Matrix::Zero(n, n);
      for (const json& t : entries) {
        const auto r = t.at(0).get<Index>();
        const auto c = t.at(1).get<Index>();
        if (r < 0 || c < 0 || r >= n || c >= n) throw ConfigError("mask index out of range");
        a(r, c) = a(c, r) = t.at(2).get<double>();
      }
      mats.emplace_back(a);
    }
    const auto yv = j.at("y").get<std::vector<double>>();
    Vector y = Eigen::Map<const Vector>(yv.data(), static_cast<Index>(yv.size()));
    inst.ensemble = MeasurementEnsemble(std::move(mats), std::move(y));
    inst.kind = parse_problem_kind(j.at("kind").get<std::string>());
    inst.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("planted") && !j.at("planted").is_null()) {
      inst.planted = sym_from_json(j.at("planted").at("matrix"));
    }
  });
  return inst;
}

json to_json(const KKTCertificate& c) {
  return {{"nu", std::vector<double>(c.nu.data(), c.nu.data() + c.nu.size())},
          {"max_eig_dual", c.max_eig_dual},
          {"feas_residual", c.feas_residual},
          {"comp_residual", c.comp_residual},
          {"psd_violation", c.psd_violation},
          {"feasible_ok", c.feasible_ok},
          {"psd_ok", c.psd_ok},
          {"dual_ok", c.dual_ok},
          {"comp_ok", c.comp_ok},
          {"passed", c.passed},
          {"tol", c.tol}};
}

json to_json(const OracleResult& r) {
  return {{"status", to_string(r.status)},
          {"objective", r.objective},
          {"iters", r.iters},
          {"message", r.message},
          {"X", to_json(r.X)},
          {"certificate", to_json(r.certificate)}};
}

json to_json(const Summary& s) {
  json groups = json::array();
  for (const auto& g : s.groups) {
    json stats = json::object();
    for (const auto& [name, cs] : g.stats) {
      stats[name] = {{"mean", cs.mean}, {"std", cs.std}, {"count", cs.count}};
    }
    json grp = {{"experiment", g.experiment},
                {"kind", g.kind},
                {"solver", g.solver},
                {"d", g.d ? json(*g.d) : json(nullptr)},
                {"alpha", g.alpha ? json(*g.alpha) : json(nullptr)},
                {"eta", g.eta ? json(*g.eta) : json(nullptr)},
                {"count", g.count},
                {"diverged", g.diverged},
                {"stats", std::move(stats)}};
    if (!g.delta_histogram.empty()) {
      grp["delta_histogram"] = {{"labels", delta_histogram_labels()},
                                {"counts", g.delta_histogram}};
    }
    groups.push_back(std::move(grp));
  }
  return {{"schema", kSummarySchema}, {"rows", s.rows}, {"groups", std::move(groups)}};
}

json to_json(const GridSearchStats& s) {
  json per = json::array();
  for (const auto& pa : s.per_alpha) {
    per.push_back({{"alpha_bar", pa.alpha_bar},
                   {"runs", pa.runs},
                   {"converged", pa.converged},
                   {"failed", pa.failed},
                   {"within_tol", pa.within_tol},
                   {"delta_defined", pa.delta_defined},
                   {"mean_delta", pa.mean_delta},
                   {"max_delta", pa.max_delta},
                   {"histogram", {{"labels", delta_histogram_labels()},
                                  {"counts", pa.histogram}}}});
  }
  return {{"attempted", s.attempted},
          {"feasible", s.feasible},
          {"discarded", s.discarded},
          {"infeasible", s.infeasible},
          {"oracle_unresolved", s.oracle_unresolved},
          {"zero_oracle", s.zero_oracle},
          {"per_alpha", std::move(per)}};
}

void apply_json(const json& j, SweepConfig& cfg) {
  guarded("sweep config", [&] {
    check_keys(j, {"n", "r", "measurement_factor", "kind", "planted", "d_grid", "init_scales",
                   "step_policies", "replicates", "seed", "max_steps", "residual_tol",
                   "powerlaw_gamma", "reference_eta", "x_gd_max_steps"},
               "sweep config");
    read(j, "n", cfg.n);
    read(j, "r", cfg.r);
    read(j, "measurement_factor", cfg.measurement_factor);
    if (j.contains("kind")) cfg.kind = parse_problem_kind(j.at("kind").get<std::string>());
    if (j.contains("planted")) cfg.planted = parse_planted_kind(j.at("planted").get<std::string>());
    read(j, "d_grid", cfg.d_grid);
    read(j, "init_scales", cfg.init_scales);
    if (j.contains("step_policies")) {
      cfg.step_policies.clear();
      for (const json& p : j.at("step_policies")) cfg.step_policies.push_back(policy_from_json(p));
    }
    read(j, "replicates", cfg.replicates);
    read(j, "seed", cfg.seed);
    read(j, "max_steps", cfg.max_steps);
    read(j, "residual_tol", cfg.residual_tol);
    read(j, "powerlaw_gamma", cfg.powerlaw_gamma);
    read(j, "reference_eta", cfg.reference_eta);
    read(j, "x_gd_max_steps", cfg.x_gd_max_steps);
  });
}

void apply_json(const json& j, FlowConfig& cfg) {
  guarded("flow config", [&] {
    check_keys(j, {"kinds", "n", "r", "measurement_factor", "planted", "alpha", "eta",
                   "replicates", "seed", "max_steps", "residual_tol", "powerlaw_gamma", "ode",
                   "x_gd_max_steps"},
               "flow config");
    if (j.contains("kinds")) {
      cfg.kinds.clear();
      for (const json& k : j.at("kinds")) cfg.kinds.push_back(parse_problem_kind(k.get<std::string>()));
    }
    read(j, "n", cfg.n);
    read(j, "r", cfg.r);
    read(j, "measurement_factor", cfg.measurement_factor);
    if (j.contains("planted")) cfg.planted = parse_planted_kind(j.at("planted").get<std::string>());
    read(j, "alpha", cfg.alpha);
    read(j, "eta", cfg.eta);
    read(j, "replicates", cfg.replicates);
    read(j, "seed", cfg.seed);
    read(j, "max_steps", cfg.max_steps);
    read(j, "residual_tol", cfg.residual_tol);
    read(j, "powerlaw_gamma", cfg.powerlaw_gamma);
    read(j, "x_gd_max_steps", cfg.x_gd_max_steps);
    if (j.contains("ode")) apply_ode(j.at("ode"), cfg.ode);
  });
}

void apply_json(const json& j, GridSearchConfig& cfg) {
  guarded("grid config", [&] {
    check_keys(j, {"values_per_entry", "lo", "hi", "alpha_bars", "delta_tol",
                   "inits_per_instance", "seed", "masks", "ode", "oracle"},
               "grid config");
    read(j, "values_per_entry", cfg.values_per_entry);
    read(j, "lo", cfg.lo);
    read(j, "hi", cfg.hi);
    read(j, "alpha_bars", cfg.alpha_bars);
    read(j, "delta_tol", cfg.delta_tol);
    read(j, "inits_per_instance", cfg.inits_per_instance);
    read(j, "seed", cfg.seed);
    read(j, "masks", cfg.masks);
    if (j.contains("ode")) apply_ode(j.at("ode"), cfg.ode);
    if (j.contains("oracle")) {
      const json& o = j.at("oracle");
      check_keys(o, {"tol", "max_iters", "penalty", "stall_window", "stall_improvement",
                     "certify_tol"},
                 "oracle");
      read(o, "tol", cfg.oracle.tol);
      read(o, "max_iters", cfg.oracle.max_iters);
      read(o, "penalty", cfg.oracle.penalty);
      read(o, "stall_window", cfg.oracle.stall_window);
      read(o, "stall_improvement", cfg.oracle.stall_improvement);
      read(o, "certify_tol", cfg.oracle.certify_tol);
    }
  });
}

json to_json(const SweepConfig& cfg) {
  json policies = json::array();
  for (const auto& p : cfg.step_policies) {
    policies.push_back({{"kind", p.kind == StepPolicy::Kind::fixed ? "fixed" : "line_search"},
                        {"eta", p.eta}});
  }
  return {{"n", cfg.n},
          {"r", cfg.r},
          {"m", cfg.m()},
          {"measurement_factor", cfg.measurement_factor},
          {"kind", to_string(cfg.kind)},
          {"planted", to_string(cfg.planted)},
          {"d_grid", cfg.d_grid},
          {"init_scales", cfg.init_scales},
          {"step_policies", std::move(policies)},
          {"replicates", cfg.replicates},
          {"seed", cfg.seed},
          {"max_steps", cfg.max_steps},
          {"residual_tol", cfg.residual_tol},
          {"powerlaw_gamma", cfg.powerlaw_gamma},
          {"reference_eta", cfg.reference_eta},
          {"x_gd_max_steps", cfg.x_gd_max_steps}};
}

json to_json(const FlowConfig& cfg) {
  std::vector<std::string> kinds;
  for (ProblemKind k : cfg.kinds) kinds.push_back(to_string(k));
  return {{"kinds", kinds},
          {"n", cfg.n},
          {"r", cfg.r},
          {"m", cfg.m()},
          {"measurement_factor", cfg.measurement_factor},
          {"planted", to_string(cfg.planted)},
          {"alpha", cfg.alpha},
          {"eta", cfg.eta},
          {"replicates", cfg.replicates},
          {"seed", cfg.seed},
          {"max_steps", cfg.max_steps},
          {"residual_tol", cfg.residual_tol},
          {"powerlaw_gamma", cfg.powerlaw_gamma},
          {"ode", ode_json(cfg.ode)},
          {"x_gd_max_steps", cfg.x_gd_max_steps}};
}

json to_json(const GridSearchConfig& cfg) {
  return {{"values_per_entry", cfg.values_per_entry},
          {"lo", cfg.lo},
          {"hi", cfg.hi},
          {"alpha_bars", cfg.alpha_bars},
          {"delta_tol", cfg.delta_tol},
          {"inits_per_instance", cfg.inits_per_instance},
          {"seed", cfg.seed},
          {"masks", cfg.masks},
          {"ode", ode_json(cfg.ode)},
          {"oracle", {{"tol", cfg.oracle.tol},
                      {"max_iters", cfg.oracle.max_iters},
                      {"penalty", cfg.oracle.penalty},
                      {"stall_window", cfg.oracle.stall_window},
                      {"stall_improvement", cfg.oracle.stall_improvement},
                      {"certify_tol", cfg.oracle.certify_tol}}}};
}

json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& err) {
    throw ConfigError(p.string() + ": " + err.what());
  }
}

void write_text_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace implreg
