// Command-line driver for the experiment families and the oracle tools.
//
// Exit codes: 0 success, 1 configuration error, 2 hard solver failure.

#include "implreg/experiments.hpp"
#include "implreg/io.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace implreg;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverFailure = 2;

struct Common {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string scale = "desk";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config overlaying the preset");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "base RNG seed");
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--scale", c.scale, "preset size")
      ->check(CLI::IsMember({"smoke", "desk", "paper"}));
}

json load_config(const Common& c) {
  return c.config.empty() ? json::object() : read_json_file(c.config);
}

void write_instance(const fs::path& out, const std::string& id, const ProblemInstance& inst) {
  write_text_file(out / "instances" / (id + ".json"), to_json(inst, id).dump(1) + "\n");
}

void write_outputs(const fs::path& out, const ResultTable& rows, json summary_doc,
                   const json& config, const std::string& experiment) {
  const Summary s = summarize(rows);
  json doc = to_json(s);
  doc["experiment"] = experiment;
  doc["config"] = config;
  for (auto& [k, v] : summary_doc.items()) doc[k] = v;
  write_text_file(out / "results.csv", results_csv(rows));
  write_text_file(out / "timings.csv", timings_csv(rows));
  write_text_file(out / "summary.json", doc.dump(1) + "\n");
  write_text_file(out / "summary.txt", summary_text(s));
  write_text_file(out / "config.json", config.dump(1) + "\n");
  std::cout << summary_text(s);
}

int run_sweep(const Common& c) {
  SweepConfig cfg = sweep_preset(parse_scale(c.scale));
  apply_json(load_config(c), cfg);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const fs::path out = c.out;
  const ResultTable rows = run_dimension_sweep(
      cfg, c.threads, [&](const std::string& id, const ProblemInstance& inst) {
        write_instance(out, id, inst);
      });
  write_outputs(out, rows, json::object(), to_json(cfg), "sweep");
  return kOk;
}

int run_flow(const Common& c) {
  FlowConfig cfg = flow_preset(parse_scale(c.scale));
  apply_json(load_config(c), cfg);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const fs::path out = c.out;
  const ResultTable rows = run_flow_comparison(
      cfg, c.threads, [&](const std::string& id, const ProblemInstance& inst) {
        write_instance(out, id, inst);
      });
  write_outputs(out, rows, json::object(), to_json(cfg), "flow");
  return kOk;
}

int run_grid(const Common& c) {
  GridSearchConfig cfg = grid_preset(parse_scale(c.scale));
  apply_json(load_config(c), cfg);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  const fs::path out = c.out;
  const GridSearchResult res = run_grid_search(cfg, c.threads);

  // The grid is generated, not sampled: one document describes every instance.
  json masks = json::array();
  for (const auto& mask : grid_masks()) {
    json entries = json::array();
    for (const auto& [a, b] : mask) entries.push_back({a, b});
    masks.push_back(std::move(entries));
  }
  write_text_file(out / "instances" / "grid.json",
                  json{{"schema", "implreg-grid v1"},
                       {"n", 3},
                       {"masks", std::move(masks)},
                       {"values", grid_values(cfg.values_per_entry, cfg.lo, cfg.hi)},
                       {"id_format", "m<mask>-f<filling>, filling digits base v, first "
                                     "observed entry fastest"}}
                          .dump(1) +
                      "\n");
  write_outputs(out, res.rows, json{{"grid", to_json(res.stats)}}, to_json(cfg), "grid");
  std::cout << "attempted " << res.stats.attempted << ", feasible " << res.stats.feasible
            << ", discarded " << res.stats.discarded << "\n";
  for (const auto& pa : res.stats.per_alpha) {
    std::cout << "alpha_bar " << pa.alpha_bar << ": " << pa.within_tol << "/" << pa.runs
              << " runs with delta <= " << cfg.delta_tol << ", mean delta " << pa.mean_delta
              << "\n";
  }
  return kOk;
}

ProblemInstance instance_for_oracle(const std::string& instance_path, const Common& c,
                                    std::string& id) {
  if (!instance_path.empty()) {
    const json doc = read_json_file(instance_path);
    id = doc.value("id", fs::path(instance_path).stem().string());
    return instance_from_json(doc);
  }
  InstanceSpec spec;
  const json j = load_config(c);
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "kind" && key != "planted" && key != "n" && key != "r" && key != "m" &&
          key != "powerlaw_gamma") {
        throw ConfigError("oracle config: unknown key '" + key + "'");
      }
    }
    if (j.contains("kind")) spec.kind = parse_problem_kind(j.at("kind").get<std::string>());
    if (j.contains("planted")) spec.planted = parse_planted_kind(j.at("planted").get<std::string>());
    spec.n = j.value("n", spec.n);
    spec.r = j.value("r", spec.r);
    spec.m = j.value("m", 3 * spec.n * spec.r);
    spec.powerlaw_gamma = j.value("powerlaw_gamma", spec.powerlaw_gamma);
  } catch (const json::exception& err) {
    throw ConfigError(std::string("oracle config: ") + err.what());
  }
  const std::uint64_t seed = c.seed.value_or(0);
  id = "oracle-" + to_string(spec.kind) + "-s" + std::to_string(seed);
  try {
    return build_instance(spec, seed);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
}

int run_oracle(const Common& c, const std::string& instance_path) {
  std::string id;
  const ProblemInstance inst = instance_for_oracle(instance_path, c, id);
  const fs::path out = c.out;
  write_instance(out, id, inst);
  const OracleResult res = min_nuclear_psd(inst.ensemble);
  json doc = to_json(res);
  doc["instance"] = id;
  write_text_file(out / "oracle.json", doc.dump(1) + "\n");
  std::cout << "status " << to_string(res.status) << ", nuclear norm "
            << format_real(res.objective) << ", iterations " << res.iters << "\n";
  return res.status == OracleStatus::optimal ? kOk : kSolverFailure;
}

int run_check_kkt(const Common& c, const std::string& instance_path, const std::string& x_path,
                  double tol) {
  if (instance_path.empty() || x_path.empty()) {
    throw ConfigError("check-kkt needs --instance and --x");
  }
  const ProblemInstance inst = instance_from_json(read_json_file(instance_path));
  const json xdoc = read_json_file(x_path);
  SymMat x = SymMat::zero(1);
  try {
    x = sym_from_json(xdoc.is_object() ? xdoc.at("X") : xdoc);
  } catch (const json::exception& err) {
    throw ConfigError(std::string("--x: ") + err.what());
  }
  if (x.dim() != inst.ensemble.n()) throw ConfigError("--x: dimension does not match the instance");
  const KKTCertificate cert = kkt_check(x, inst.ensemble, tol);
  const json doc = to_json(cert);
  if (!c.out.empty()) {
    write_text_file(fs::path(c.out) / "kkt.json", doc.dump(1) + "\n");
  }
  std::cout << doc.dump(1) << "\n";
  return cert.passed ? kOk : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-flow implicit regularization experiments"};
  app.require_subcommand(1);

  Common sweep_opts, flow_opts, grid_opts, oracle_opts, kkt_opts;
  auto* sweep = app.add_subcommand("sweep", "dimension sweep of factored gradient descent");
  add_common(sweep, sweep_opts);
  auto* flow = app.add_subcommand("flow", "integrator comparison");
  add_common(flow, flow_opts);
  auto* grid = app.add_subcommand("grid", "exhaustive 3x3 completion grid search");
  add_common(grid, grid_opts);

  std::string oracle_instance;
  auto* oracle = app.add_subcommand("oracle", "minimum nuclear norm PSD solve");
  add_common(oracle, oracle_opts);
  oracle->add_option("--instance", oracle_instance, "instance JSON (else generated from --config)");

  std::string kkt_instance, kkt_x;
  double kkt_tol = 1e-5;
  auto* kkt = app.add_subcommand("check-kkt", "optimality certificate for a candidate X");
  kkt_opts.out.clear();
  add_common(kkt, kkt_opts);
  kkt->add_option("--instance", kkt_instance, "instance JSON")->required();
  kkt->add_option("--x", kkt_x, "candidate matrix JSON (rows, or an object with key X)")
      ->required();
  kkt->add_option("--tol", kkt_tol, "certificate tolerance")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sweep) return run_sweep(sweep_opts);
    if (*flow) return run_flow(flow_opts);
    if (*grid) return run_grid(grid_opts);
    if (*oracle) return run_oracle(oracle_opts, oracle_instance);
    if (*kkt) return run_check_kkt(kkt_opts, kkt_instance, kkt_x, kkt_tol);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kConfigError;
}
