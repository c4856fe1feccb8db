#include "implreg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <tuple>

namespace implreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Reference {
  std::optional<double> oracle_nuclear;
};

// Fills the solution-dependent columns of a row.
void fill_metrics(ResultRow& row, const ProblemInstance& inst, const SymMat& x,
                  const std::optional<double>& oracle) {
  row.oracle_nuclear = oracle;
  if (!x.all_finite()) {
    row.objective = row.residual = row.nuclear = kNaN;
    if (inst.planted) row.rel_recon_error = row.recon_error = kNaN;
    if (oracle) row.delta = kNaN;
    return;
  }
  const Vector r = residual(inst.ensemble, x);
  row.objective = r.squaredNorm();
  row.residual = r.norm();
  row.nuclear = nuclear_norm(x);
  if (inst.planted) {
    const double err = (x.matrix() - inst.planted->matrix()).norm();
    row.recon_error = err;
    row.rel_recon_error = err / inst.planted->frobenius_norm();
  }
  if (oracle) {
    row.delta = *oracle > tol::kTiny ? (row.nuclear - *oracle) / *oracle : kNaN;
  }
}

ResultRow failed_row(ResultRow row, const ProblemInstance& inst,
                     const std::optional<double>& oracle, const char* what) {
  std::cerr << "warning: " << row.experiment << " " << row.instance << " "
            << row.solver << ": " << what << "\n";
  row.status = to_string(Status::diverged);
  row.objective = row.residual = row.nuclear = kNaN;
  if (inst.planted) row.rel_recon_error = row.recon_error = kNaN;
  row.oracle_nuclear = oracle;
  if (oracle) row.delta = kNaN;
  return row;
}

// Runs `solve` and turns its trajectory (or exception) into a row.
template <typename Solve>
ResultRow run_row(ResultRow row, const ProblemInstance& inst,
                  const std::optional<double>& oracle, Solve&& solve) {
  const auto t0 = Clock::now();
  try {
    const Trajectory tr = solve();
    row.status = to_string(tr.status);
    row.steps = tr.steps;
    fill_metrics(row, inst, tr.final_X, oracle);
    if (!tr.message.empty() && tr.status == Status::diverged) {
      std::cerr << "warning: " << row.experiment << " " << row.instance << " "
                << row.solver << ": " << tr.message << "\n";
    }
  } catch (const std::exception& err) {
    row = failed_row(std::move(row), inst, oracle, err.what());
  }
  row.wall_time = seconds_since(t0);
  return row;
}

ResultRow base_row(const std::string& experiment, const std::string& id,
                   const ProblemInstance& inst, const std::string& solver) {
  ResultRow row;
  row.experiment = experiment;
  row.instance = id;
  row.seed = inst.seed;
  row.kind = to_string(inst.kind);
  row.solver = solver;
  return row;
}

std::string instance_id(const std::string& experiment, ProblemKind kind,
                        std::uint64_t seed) {
  return experiment + "-" + to_string(kind) + "-s" + std::to_string(seed);
}

// Projected gradient descent on X from zero with step 1 / L.
Trajectory x_gd_reference(const MeasurementEnsemble& e, long max_steps,
                          double residual_tol) {
  const double eta = 1.0 / gram_spectral_bound(e);
  return gd_on_X(e, SymMat::zero(e.n()), eta, max_steps, residual_tol, true);
}

// Oracle row plus the value later rows compare against.
std::pair<ResultRow, Reference> oracle_reference(const std::string& experiment,
                                                 const std::string& id,
                                                 const ProblemInstance& inst) {
  ResultRow row = base_row(experiment, id, inst, "oracle");
  Reference ref;
  const auto t0 = Clock::now();
  try {
    const OracleResult res = min_nuclear_psd(inst.ensemble);
    row.status = to_string(res.status);
    row.steps = res.iters;
    if (res.status == OracleStatus::optimal) ref.oracle_nuclear = res.objective;
    fill_metrics(row, inst, res.X, ref.oracle_nuclear);
  } catch (const std::exception& err) {
    row = failed_row(std::move(row), inst, std::nullopt, err.what());
  }
  row.wall_time = seconds_since(t0);
  return {row, ref};
}

ResultRow min_frobenius_row(const std::string& experiment, const std::string& id,
                            const ProblemInstance& inst,
                            const std::optional<double>& oracle) {
  ResultRow row = base_row(experiment, id, inst, "min-frobenius");
  const auto t0 = Clock::now();
  try {
    const SymMat x = min_frobenius_solution(inst.ensemble);
    row.status = to_string(Status::converged);
    fill_metrics(row, inst, x, oracle);
  } catch (const std::exception& err) {
    row = failed_row(std::move(row), inst, oracle, err.what());
  }
  row.wall_time = seconds_since(t0);
  return row;
}

std::uint64_t init_seed(std::uint64_t instance_seed, std::uint64_t a,
                        std::uint64_t b) {
  return Rng::mix(instance_seed ^ Rng::mix((a << 32) ^ b ^ 0x5EEDULL));
}

std::vector<ProblemInstance> build_instances(const InstanceSpec& spec,
                                             std::uint64_t seed, int replicates) {
  std::vector<ProblemInstance> out;
  for (int k = 0; k < replicates; ++k) {
    out.push_back(build_instance(spec, seed + static_cast<std::uint64_t>(k)));
  }
  return out;
}

Index measurement_count(double factor, Index n, Index r) {
  return static_cast<Index>(std::llround(factor * static_cast<double>(n * r)));
}

void validate_measurements(ProblemKind kind, Index n, Index m, const char* who) {
  const Index full = n * (n + 1) / 2;
  if (m < 1 || m > full) {
    throw ConfigError(std::string(who) + ": m = " + std::to_string(m) +
                      " must lie in [1, n(n+1)/2 = " + std::to_string(full) + "]");
  }
  if (kind == ProblemKind::grid3x3 || kind == ProblemKind::diagonal) {
    throw ConfigError(std::string(who) + ": unsupported measurement kind " +
                      to_string(kind));
  }
}

}  // namespace

std::string to_string(Scale s) {
  switch (s) {
    case Scale::smoke: return "smoke";
    case Scale::desk: return "desk";
    case Scale::paper: return "paper";
  }
  return "unknown";
}

Scale parse_scale(const std::string& s) {
  if (s == "smoke") return Scale::smoke;
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw ConfigError("unknown scale '" + s + "' (expected smoke, desk or paper)");
}

// ---------------------------------------------------------------- sweep

Index SweepConfig::m() const { return measurement_count(measurement_factor, n, r); }

void SweepConfig::validate() const {
  if (n < 1 || r < 1 || r > n) throw ConfigError("sweep: need 1 <= r <= n");
  validate_measurements(kind, n, m(), "sweep");
  if (d_grid.empty() || init_scales.empty() || step_policies.empty()) {
    throw ConfigError("sweep: d grid, init scales and step policies must be non-empty");
  }
  for (Index d : d_grid) {
    if (d < 1 || d > n) throw ConfigError("sweep: every d must lie in [1, n]");
  }
  for (double s : init_scales) {
    if (!(s > 0.0)) throw ConfigError("sweep: init scales must be positive");
  }
  for (const auto& p : step_policies) {
    if (!(p.eta > 0.0)) throw ConfigError("sweep: step sizes must be positive");
  }
  if (replicates < 1) throw ConfigError("sweep: replicates must be >= 1");
  if (max_steps < 1 || x_gd_max_steps < 1) throw ConfigError("sweep: step budgets must be >= 1");
  if (!(residual_tol > 0.0) || !(reference_eta > 0.0)) {
    throw ConfigError("sweep: residual_tol and reference_eta must be positive");
  }
}

ResultTable run_dimension_sweep(const SweepConfig& cfg, int threads,
                                const InstanceSink& sink) {
  cfg.validate();
  const std::string exp = "sweep";
  const InstanceSpec spec{cfg.kind, cfg.planted, cfg.n, cfg.r, cfg.m(),
                          cfg.powerlaw_gamma};
  const std::vector<ProblemInstance> insts =
      build_instances(spec, cfg.seed, cfg.replicates);
  std::vector<std::string> ids;
  for (const auto& inst : insts) {
    ids.push_back(instance_id(exp, inst.kind, inst.seed));
    if (sink) sink(ids.back(), inst);
  }

  // Oracle first: every later row reports its gap.
  const auto oracles = parallel_map<std::pair<ResultRow, Reference>>(
      insts.size(), threads,
      [&](std::size_t k) { return oracle_reference(exp, ids[k], insts[k]); });

  struct Job {
    std::size_t inst;
    enum class Kind { x_gd, min_frob, svd, gd } kind;
    Index d = 0;
    std::size_t scale = 0;
    std::size_t policy = 0;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < insts.size(); ++k) {
    jobs.push_back({k, Job::Kind::x_gd});
    jobs.push_back({k, Job::Kind::min_frob});
    for (Index d : cfg.d_grid) {
      if (d < cfg.n) jobs.push_back({k, Job::Kind::svd, d});
      for (std::size_t s = 0; s < cfg.init_scales.size(); ++s)
        for (std::size_t p = 0; p < cfg.step_policies.size(); ++p)
          jobs.push_back({k, Job::Kind::gd, d, s, p});
    }
  }

  // X_gd is needed by the SVD-initialized runs, so it goes in a first pass.
  std::vector<std::optional<SymMat>> x_gd(insts.size());
  const auto x_gd_rows = parallel_map<ResultRow>(insts.size(), threads, [&](std::size_t k) {
    const auto& oracle = oracles[k].second.oracle_nuclear;
    return run_row(base_row(exp, ids[k], insts[k], "x-gd"), insts[k], oracle, [&] {
      Trajectory tr = x_gd_reference(insts[k].ensemble, cfg.x_gd_max_steps,
                                     cfg.residual_tol);
      x_gd[k] = tr.final_X;
      return tr;
    });
  });

  const auto rows = parallel_map<std::optional<ResultRow>>(jobs.size(), threads, [&](std::size_t j) {
    const Job& job = jobs[j];
    const ProblemInstance& inst = insts[job.inst];
    const auto& oracle = oracles[job.inst].second.oracle_nuclear;
    const std::string& id = ids[job.inst];
    switch (job.kind) {
      case Job::Kind::x_gd:
        return std::optional<ResultRow>(x_gd_rows[job.inst]);
      case Job::Kind::min_frob:
        return std::optional<ResultRow>(min_frobenius_row(exp, id, inst, oracle));
      case Job::Kind::svd: {
        ResultRow row = base_row(exp, id, inst, "gd-svd");
        row.d = job.d;
        row.eta = cfg.reference_eta;
        return std::optional<ResultRow>(run_row(row, inst, oracle, [&] {
          if (!x_gd[job.inst]) throw NumericalError("X_gd reference unavailable");
          GDConfig gd;
          gd.step = StepPolicy::fixed(cfg.reference_eta);
          gd.max_steps = cfg.max_steps;
          gd.residual_tol = cfg.residual_tol;
          gd.d = job.d;
          return factored_gd(inst.ensemble, svd_init(*x_gd[job.inst], job.d), gd);
        }));
      }
      case Job::Kind::gd: {
        const StepPolicy& policy = cfg.step_policies[job.policy];
        const double scale = cfg.init_scales[job.scale];
        ResultRow row = base_row(exp, id, inst,
                                 policy.kind == StepPolicy::Kind::fixed ? "gd-fixed" : "gd-els");
        row.d = job.d;
        row.alpha = scale;
        row.eta = policy.eta;
        return std::optional<ResultRow>(run_row(row, inst, oracle, [&] {
          GDConfig gd;
          gd.step = policy;
          gd.init_scale = scale;
          gd.max_steps = cfg.max_steps;
          gd.residual_tol = cfg.residual_tol;
          gd.d = job.d;
          const Matrix u0 = random_init(cfg.n, job.d, scale,
                                        init_seed(inst.seed, static_cast<std::uint64_t>(job.d),
                                                  job.scale));
          return factored_gd(inst.ensemble, u0, gd);
        }));
      }
    }
    return std::optional<ResultRow>();
  });

  ResultTable out;
  for (std::size_t k = 0; k < insts.size(); ++k) out.push_back(oracles[k].first);
  for (const auto& r : rows)
    if (r) out.push_back(*r);
  return out;
}

SweepConfig sweep_preset(Scale s) {
  SweepConfig cfg;
  switch (s) {
    case Scale::smoke:
      cfg.n = 10;
      cfg.r = 1;
      cfg.d_grid = {1, 2, 5, 10};
      cfg.replicates = 1;
      cfg.max_steps = 100'000;
      break;
    case Scale::desk:
      cfg.n = 20;
      cfg.d_grid = {1, 2, 3, 4, 6, 10, 15, 20};
      break;
    case Scale::paper:
      cfg.n = 50;
      for (Index d = 1; d <= 50; ++d) cfg.d_grid.push_back(d);
      break;
  }
  return cfg;
}

// ---------------------------------------------------------------- flow

Index FlowConfig::m() const { return measurement_count(measurement_factor, n, r); }

void FlowConfig::validate() const {
  if (n < 1 || r < 1 || r > n) throw ConfigError("flow: need 1 <= r <= n");
  if (kinds.empty()) throw ConfigError("flow: kinds must be non-empty");
  for (ProblemKind k : kinds) validate_measurements(k, n, m(), "flow");
  if (!(alpha > 0.0) || !(eta > 0.0)) throw ConfigError("flow: alpha and eta must be positive");
  if (replicates < 1) throw ConfigError("flow: replicates must be >= 1");
  if (max_steps < 1 || x_gd_max_steps < 1) throw ConfigError("flow: step budgets must be >= 1");
  if (!(residual_tol > 0.0)) throw ConfigError("flow: residual_tol must be positive");
}

ResultTable run_flow_comparison(const FlowConfig& cfg, int threads,
                                const InstanceSink& sink) {
  cfg.validate();
  const std::string exp = "flow";
  std::vector<ProblemInstance> insts;
  for (ProblemKind kind : cfg.kinds) {
    const InstanceSpec spec{kind, cfg.planted, cfg.n, cfg.r, cfg.m(), cfg.powerlaw_gamma};
    for (auto& inst : build_instances(spec, cfg.seed, cfg.replicates)) {
      insts.push_back(std::move(inst));
    }
  }
  std::vector<std::string> ids;
  for (const auto& inst : insts) {
    ids.push_back(instance_id(exp, inst.kind, inst.seed));
    if (sink) sink(ids.back(), inst);
  }
  const auto oracles = parallel_map<std::pair<ResultRow, Reference>>(
      insts.size(), threads,
      [&](std::size_t k) { return oracle_reference(exp, ids[k], insts[k]); });

  const Matrix u0 = identity_init(cfg.n, cfg.alpha);
  const SymMat x0 = outer(u0);
  constexpr std::size_t kSolvers = 4;
  const auto rows = parallel_map<ResultRow>(insts.size() * kSolvers, threads, [&](std::size_t j) {
    const std::size_t k = j / kSolvers;
    const ProblemInstance& inst = insts[k];
    const auto& oracle = oracles[k].second.oracle_nuclear;
    switch (j % kSolvers) {
      case 0: {
        ResultRow row = base_row(exp, ids[k], inst, "ode");
        row.alpha = cfg.alpha;
        return run_row(row, inst, oracle,
                       [&] { return gradient_flow_ode(inst.ensemble, x0, cfg.ode); });
      }
      case 1: {
        ResultRow row = base_row(exp, ids[k], inst, "texp");
        row.alpha = cfg.alpha;
        row.eta = cfg.eta;
        return run_row(row, inst, oracle, [&] {
          return time_ordered_exp_solve(inst.ensemble, x0, cfg.eta, cfg.max_steps,
                                        cfg.residual_tol);
        });
      }
      case 2: {
        ResultRow row = base_row(exp, ids[k], inst, "gd");
        row.d = cfg.n;
        row.alpha = cfg.alpha;
        row.eta = cfg.eta;
        return run_row(row, inst, oracle, [&] {
          GDConfig gd;
          gd.step = StepPolicy::fixed(cfg.eta);
          gd.init_scale = cfg.alpha;
          gd.max_steps = cfg.max_steps;
          gd.residual_tol = cfg.residual_tol;
          gd.d = cfg.n;
          return factored_gd(inst.ensemble, u0, gd);
        });
      }
      default:
        return run_row(base_row(exp, ids[k], inst, "x-gd"), inst, oracle, [&] {
          return x_gd_reference(inst.ensemble, cfg.x_gd_max_steps, cfg.residual_tol);
        });
    }
  });

  ResultTable out;
  for (std::size_t k = 0; k < insts.size(); ++k) {
    out.push_back(oracles[k].first);
    for (std::size_t s = 0; s < kSolvers; ++s) out.push_back(rows[k * kSolvers + s]);
  }
  return out;
}

FlowConfig flow_preset(Scale s) {
  FlowConfig cfg;
  switch (s) {
    case Scale::smoke:
      cfg.n = 10;
      cfg.r = 1;
      cfg.max_steps = 100'000;
      cfg.ode.max_steps = 20'000;
      break;
    case Scale::desk:
      cfg.n = 20;
      // The overparameterized tail is sublinear; nuclear norms settle long
      // before the residual stop.
      cfg.max_steps = 1'000'000;
      cfg.ode.max_steps = 100'000;
      break;
    case Scale::paper:
      cfg.n = 50;
      cfg.replicates = 3;
      break;
  }
  return cfg;
}

// ---------------------------------------------------------------- grid

GridSearchConfig::GridSearchConfig() {
  ode.t_max = 1e6;
  ode.max_steps = 50'000;
  ode.history_stride = 1'000'000;
}

void GridSearchConfig::validate() const {
  if (values_per_entry < 2) throw ConfigError("grid: values_per_entry must be >= 2");
  if (!(lo < hi)) throw ConfigError("grid: need lo < hi");
  if (alpha_bars.empty()) throw ConfigError("grid: alpha_bars must be non-empty");
  for (double a : alpha_bars) {
    if (!(a > 0.0)) throw ConfigError("grid: alpha_bars must be positive");
  }
  if (inits_per_instance < 1) throw ConfigError("grid: inits_per_instance must be >= 1");
  if (!(delta_tol > 0.0)) throw ConfigError("grid: delta_tol must be positive");
  for (int m : masks) {
    if (m < 0 || m >= 15) throw ConfigError("grid: mask indices must lie in [0, 15)");
  }
}

std::vector<std::vector<std::pair<Index, Index>>> grid_masks() {
  const std::pair<Index, Index> entries[6] = {{0, 0}, {1, 1}, {2, 2},
                                              {0, 1}, {0, 2}, {1, 2}};
  std::vector<std::vector<std::pair<Index, Index>>> out;
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b)
      for (int c = b + 1; c < 6; ++c)
        for (int d = c + 1; d < 6; ++d)
          out.push_back({entries[a], entries[b], entries[c], entries[d]});
  return out;
}

std::vector<double> grid_values(int v, double lo, double hi) {
  if (v < 2) throw ConfigError("grid_values: need at least two values");
  std::vector<double> out(static_cast<std::size_t>(v));
  for (int i = 0; i < v; ++i) {
    out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (v - 1);
  }
  return out;
}

Vector grid_filling(int f, const std::vector<double>& values) {
  const int v = static_cast<int>(values.size());
  Vector y(4);
  for (int k = 0; k < 4; ++k) {
    y(k) = values[static_cast<std::size_t>(f % v)];
    f /= v;
  }
  return y;
}

std::vector<std::string> delta_histogram_labels() {
  std::vector<std::string> out{"<1e-8"};
  for (int e = -8; e < 1; ++e) {
    out.push_back("[1e" + std::to_string(e) + ",1e" + std::to_string(e + 1) + ")");
  }
  out.push_back(">=1e1");
  out.push_back("undefined");
  return out;
}

std::size_t delta_histogram_bin(double delta) {
  if (!std::isfinite(delta)) return 11;
  if (delta < 1e-8) return 0;
  if (delta >= 10.0) return 10;
  const int e = static_cast<int>(std::floor(std::log10(delta)));
  return static_cast<std::size_t>(std::clamp(e + 9, 1, 9));
}

GridSearchResult run_grid_search(const GridSearchConfig& cfg, int threads) {
  cfg.validate();
  const auto masks = grid_masks();
  std::vector<int> mask_ids = cfg.masks;
  if (mask_ids.empty()) {
    for (int i = 0; i < static_cast<int>(masks.size()); ++i) mask_ids.push_back(i);
  }
  const std::vector<double> values = grid_values(cfg.values_per_entry, cfg.lo, cfg.hi);
  int fillings = 1;
  for (int k = 0; k < 4; ++k) fillings *= cfg.values_per_entry;

  struct Cell {
    int mask;
    int filling;
  };
  std::vector<Cell> cells;
  for (int mk : mask_ids)
    for (int f = 0; f < fillings; ++f) cells.push_back({mk, f});

  auto cell_id = [&](const Cell& c) {
    std::ostringstream s;
    s << "m" << std::setw(2) << std::setfill('0') << c.mask << "-f" << std::setw(5)
      << std::setfill('0') << c.filling;
    return s.str();
  };
  auto cell_instance = [&](const Cell& c) {
    const MeasurementEnsemble base =
        completion_ensemble(3, masks[static_cast<std::size_t>(c.mask)]);
    ProblemInstance inst{base.with_targets(grid_filling(c.filling, values)), std::nullopt,
                         ProblemKind::grid3x3,
                         static_cast<std::uint64_t>(c.mask) * 1'000'000ULL +
                             static_cast<std::uint64_t>(c.filling)};
    return inst;
  };

  struct OracleOut {
    ResultRow row;
    OracleStatus status;
    double objective;
  };
  const auto oracle_out = parallel_map<OracleOut>(cells.size(), threads, [&](std::size_t i) {
    const ProblemInstance inst = cell_instance(cells[i]);
    ResultRow row = base_row("grid", cell_id(cells[i]), inst, "oracle");
    const auto t0 = Clock::now();
    const OracleResult res = min_nuclear_psd(inst.ensemble, cfg.oracle);
    row.status = to_string(res.status);
    row.steps = res.iters;
    const std::optional<double> ref =
        res.status == OracleStatus::optimal ? std::optional<double>(res.objective)
                                            : std::nullopt;
    fill_metrics(row, inst, res.X, ref);
    row.wall_time = seconds_since(t0);
    return OracleOut{row, res.status, res.objective};
  });

  GridSearchResult out;
  GridSearchStats& st = out.stats;
  st.attempted = static_cast<long>(cells.size());
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    switch (oracle_out[i].status) {
      case OracleStatus::optimal:
        feasible.push_back(i);
        if (oracle_out[i].objective <= tol::kTiny) ++st.zero_oracle;
        break;
      case OracleStatus::infeasible: ++st.infeasible; break;
      case OracleStatus::max_iters: ++st.oracle_unresolved; break;
    }
  }
  st.feasible = static_cast<long>(feasible.size());
  st.discarded = st.attempted - st.feasible;

  const std::size_t n_alpha = cfg.alpha_bars.size();
  const auto n_init = static_cast<std::size_t>(cfg.inits_per_instance);
  const std::size_t per_cell = n_alpha * n_init;
  const auto flow_rows = parallel_map<ResultRow>(feasible.size() * per_cell, threads, [&](std::size_t j) {
    const std::size_t i = feasible[j / per_cell];
    const std::size_t a = (j % per_cell) / n_init;
    const std::size_t k = j % n_init;
    const ProblemInstance inst = cell_instance(cells[i]);
    ResultRow row = base_row("grid", cell_id(cells[i]), inst, "ode");
    row.alpha = cfg.alpha_bars[a];
    row.seed = init_seed(cfg.seed ^ inst.seed, a, k);
    return run_row(row, inst, oracle_out[i].objective, [&] {
      const Matrix u0 = random_init(3, 3, cfg.alpha_bars[a], row.seed);
      return gradient_flow_ode(inst.ensemble, outer(u0), cfg.ode);
    });
  });

  const std::size_t bins = delta_histogram_labels().size();
  for (std::size_t a = 0; a < n_alpha; ++a) {
    GridSearchStats::PerAlpha pa;
    pa.alpha_bar = cfg.alpha_bars[a];
    pa.histogram.assign(bins, 0);
    double sum = 0.0;
    for (std::size_t f = 0; f < feasible.size(); ++f)
      for (std::size_t k = 0; k < n_init; ++k) {
        const ResultRow& row = flow_rows[f * per_cell + a * n_init + k];
        ++pa.runs;
        if (row.status == to_string(Status::converged)) ++pa.converged;
        if (row.status == to_string(Status::diverged)) ++pa.failed;
        const double d = row.delta.value_or(kNaN);
        ++pa.histogram[delta_histogram_bin(d)];
        if (std::isfinite(d)) {
          ++pa.delta_defined;
          sum += d;
          pa.max_delta = pa.delta_defined == 1 ? d : std::max(pa.max_delta, d);
          if (d <= cfg.delta_tol) ++pa.within_tol;
        }
      }
    pa.mean_delta = pa.delta_defined > 0 ? sum / static_cast<double>(pa.delta_defined) : kNaN;
    st.per_alpha.push_back(std::move(pa));
  }

  // Canonical order: every instance's oracle row, then its flow rows.
  std::size_t next = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out.rows.push_back(oracle_out[i].row);
    if (next < feasible.size() && feasible[next] == i) {
      for (std::size_t s = 0; s < per_cell; ++s) out.rows.push_back(flow_rows[next * per_cell + s]);
      ++next;
    }
  }
  return out;
}

GridSearchConfig grid_preset(Scale s) {
  GridSearchConfig cfg;
  switch (s) {
    case Scale::smoke: cfg.values_per_entry = 3; break;
    case Scale::desk: cfg.values_per_entry = 5; break;
    case Scale::paper: cfg.values_per_entry = 10; break;
  }
  return cfg;
}

// ---------------------------------------------------------------- summary

Summary summarize(const ResultTable& table) {
  if (table.empty()) throw std::invalid_argument("summarize: empty result table");
  using Key = std::tuple<std::string, std::string, std::string, std::optional<long>,
                         std::optional<double>, std::optional<double>>;
  std::map<Key, std::vector<const ResultRow*>> groups;
  std::vector<Key> order;
  for (const auto& row : table) {
    Key key{row.experiment, row.kind, row.solver, row.d, row.alpha, row.eta};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&row);
  }
  std::sort(order.begin(), order.end());

  const std::vector<std::pair<std::string, std::function<std::optional<double>(const ResultRow&)>>>
      columns = {
          {"objective", [](const ResultRow& r) { return std::optional<double>(r.objective); }},
          {"residual", [](const ResultRow& r) { return std::optional<double>(r.residual); }},
          {"rel_recon_error", [](const ResultRow& r) { return r.rel_recon_error; }},
          {"nuclear", [](const ResultRow& r) { return std::optional<double>(r.nuclear); }},
          {"oracle_nuclear", [](const ResultRow& r) { return r.oracle_nuclear; }},
          {"delta", [](const ResultRow& r) { return r.delta; }},
          {"steps", [](const ResultRow& r) {
             return std::optional<double>(static_cast<double>(r.steps));
           }},
      };

  Summary out;
  out.rows = static_cast<long>(table.size());
  const std::string diverged = to_string(Status::diverged);
  for (const Key& key : order) {
    const auto& rows = groups[key];
    SummaryGroup g;
    std::tie(g.experiment, g.kind, g.solver, g.d, g.alpha, g.eta) = key;
    g.count = static_cast<long>(rows.size());
    g.delta_histogram.assign(delta_histogram_labels().size(), 0);
    bool any_delta = false;
    for (const ResultRow* r : rows) {
      if (r->status == diverged) ++g.diverged;
      if (r->delta) {
        any_delta = true;
        ++g.delta_histogram[delta_histogram_bin(*r->delta)];
      }
    }
    if (!any_delta) g.delta_histogram.clear();
    for (const auto& [name, get] : columns) {
      std::vector<double> vals;
      for (const ResultRow* r : rows) {
        if (r->status == diverged) continue;
        const auto v = get(*r);
        if (v && std::isfinite(*v)) vals.push_back(*v);
      }
      SummaryGroup::ColumnStat cs;
      cs.count = static_cast<long>(vals.size());
      if (vals.empty()) {
        cs.mean = cs.std = kNaN;
      } else {
        double sum = 0.0;
        for (double v : vals) sum += v;
        cs.mean = sum / static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - cs.mean) * (v - cs.mean);
        cs.std = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
      }
      g.stats[name] = cs;
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

std::string summary_text(const Summary& s) {
  std::ostringstream o;
  auto opt = [](const auto& v) {
    std::ostringstream t;
    if (v) t << *v; else t << "NA";
    return t.str();
  };
  o << std::left << std::setw(6) << "exp" << std::setw(22) << "kind" << std::setw(14)
    << "solver" << std::setw(5) << "d" << std::setw(8) << "alpha" << std::setw(8) << "eta"
    << std::setw(6) << "n" << std::setw(5) << "div" << std::setw(26) << "nuclear mean+-std"
    << std::setw(13) << "delta mean" << "rel err mean\n";
  for (const auto& g : s.groups) {
    const auto& nuc = g.stats.at("nuclear");
    std::ostringstream nm;
    nm << std::setprecision(6) << nuc.mean << " +- " << std::setprecision(2) << nuc.std;
    std::ostringstream dm, rm;
    dm << std::setprecision(4) << g.stats.at("delta").mean;
    rm << std::setprecision(4) << g.stats.at("rel_recon_error").mean;
    o << std::left << std::setw(6) << g.experiment << std::setw(22) << g.kind << std::setw(14)
      << g.solver << std::setw(5) << opt(g.d) << std::setw(8) << opt(g.alpha) << std::setw(8)
      << opt(g.eta) << std::setw(6) << g.count << std::setw(5) << g.diverged << std::setw(26)
      << nm.str() << std::setw(13) << dm.str() << rm.str() << "\n";
  }
  return o.str();
}

}  // namespace implreg
