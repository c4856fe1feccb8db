#pragma once

#include "implreg/detail/parallel.hpp"
#include "implreg/measurements.hpp"
#include "implreg/optimizers.hpp"
#include "implreg/oracle.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace implreg {

/// One line of results.csv. Empty optionals are written as NA.
struct ResultRow {
  std::string experiment;
  std::string instance;
  std::uint64_t seed = 0;
  std::string kind;
  std::string solver;
  std::optional<long> d;
  std::optional<double> alpha;
  std::optional<double> eta;
  std::string status;
  double objective = 0.0;
  double residual = 0.0;
  std::optional<double> rel_recon_error;
  std::optional<double> recon_error;
  double nuclear = 0.0;
  std::optional<double> oracle_nuclear;
  std::optional<double> delta;
  long steps = 0;
  double wall_time = 0.0;
};

using ResultTable = std::vector<ResultRow>;

enum class Scale { smoke, desk, paper };

std::string to_string(Scale s);
Scale parse_scale(const std::string& s);

/// Thrown for invalid experiment configurations.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SweepConfig {
  Index n = 20;
  Index r = 2;
  /// m = round(measurement_factor * n * r): 3 for reconstructable, 0.25 not.
  double measurement_factor = 3.0;
  ProblemKind kind = ProblemKind::gaussian;
  PlantedKind planted = PlantedKind::lowrank;
  std::vector<Index> d_grid;
  std::vector<double> init_scales{1e-4, 1.0};
  std::vector<StepPolicy> step_policies{StepPolicy::fixed(1e-3),
                                        StepPolicy::line_search()};
  int replicates = 3;
  std::uint64_t seed = 0;
  long max_steps = 200'000;
  double residual_tol = tol::kResidualRtol;
  double powerlaw_gamma = tol::kPowerLawGamma;
  /// Step size of the SVD-initialized reference runs.
  double reference_eta = 1e-3;
  /// Iteration budget of the projected gd_on_X reference.
  long x_gd_max_steps = 200'000;

  Index m() const;
  void validate() const;
};

struct FlowConfig {
  std::vector<ProblemKind> kinds{ProblemKind::gaussian,
                                 ProblemKind::completion_uniform,
                                 ProblemKind::completion_powerlaw};
  Index n = 20;
  Index r = 2;
  double measurement_factor = 3.0;
  PlantedKind planted = PlantedKind::lowrank;
  /// U0 = (alpha / sqrt(n)) I for every integrator.
  double alpha = 1e-4;
  double eta = 1e-3;
  int replicates = 1;
  std::uint64_t seed = 0;
  long max_steps = 2'000'000;
  double residual_tol = tol::kResidualRtol;
  double powerlaw_gamma = tol::kPowerLawGamma;
  ODEConfig ode;
  long x_gd_max_steps = 200'000;

  Index m() const;
  void validate() const;
};

struct GridSearchConfig {
  int values_per_entry = 10;
  double lo = -1.0;
  double hi = 1.0;
  std::vector<double> alpha_bars{1e-5, 1e-3, 1.0};
  /// Delta threshold reported in the summary.
  double delta_tol = 1e-2;
  int inits_per_instance = 1;
  std::uint64_t seed = 0;
  ODEConfig ode;
  OracleOptions oracle;
  /// Restrict to these mask indices (all 15 when empty).
  std::vector<int> masks;

  GridSearchConfig();
  void validate() const;
};

/// Counts and per-alpha statistics of a grid search.
struct GridSearchStats {
  long attempted = 0;
  long feasible = 0;
  long discarded = 0;
  long infeasible = 0;
  long oracle_unresolved = 0;
  long zero_oracle = 0;
  struct PerAlpha {
    double alpha_bar = 0.0;
    long runs = 0;
    long converged = 0;
    long failed = 0;
    long within_tol = 0;
    long delta_defined = 0;
    double mean_delta = 0.0;
    double max_delta = 0.0;
    std::vector<long> histogram;
  };
  std::vector<PerAlpha> per_alpha;
};

/// Bin edges of the Delta histogram: underflow (< 1e-8), one bin per decade
/// up to 1e1, overflow, undefined.
std::vector<std::string> delta_histogram_labels();
std::size_t delta_histogram_bin(double delta);

struct GridSearchResult {
  ResultTable rows;
  GridSearchStats stats;
};

/// Masks as sets of 4 of the 6 distinct entries of a symmetric 3 x 3 matrix,
/// in lexicographic order of entry index. Entries are ordered
/// (0,0), (1,1), (2,2), (0,1), (0,2), (1,2).
std::vector<std::vector<std::pair<Index, Index>>> grid_masks();

/// v uniformly spaced values from lo to hi inclusive.
std::vector<double> grid_values(int v, double lo, double hi);

/// Observed values of filling f (base-v digits, first entry fastest).
Vector grid_filling(int f, const std::vector<double>& values);

/// Generated instances keyed by an id, for serialization.
using InstanceSink =
    std::function<void(const std::string& id, const ProblemInstance& inst)>;

ResultTable run_dimension_sweep(const SweepConfig& cfg, int threads = 1,
                                const InstanceSink& sink = {});
ResultTable run_flow_comparison(const FlowConfig& cfg, int threads = 1,
                                const InstanceSink& sink = {});
GridSearchResult run_grid_search(const GridSearchConfig& cfg, int threads = 1);

SweepConfig sweep_preset(Scale s);
FlowConfig flow_preset(Scale s);
GridSearchConfig grid_preset(Scale s);

/// Aggregate over rows sharing (experiment, kind, solver, d, alpha, eta).
struct SummaryGroup {
  std::string experiment;
  std::string kind;
  std::string solver;
  std::optional<long> d;
  std::optional<double> alpha;
  std::optional<double> eta;
  long count = 0;
  long diverged = 0;
  struct ColumnStat {
    double mean = 0.0;
    double std = 0.0;
    long count = 0;
  };
  /// Mean and sample standard deviation over the finite values of
  /// non-diverged rows; NaN when none qualifies.
  std::map<std::string, ColumnStat> stats;
  std::vector<long> delta_histogram;
};

struct Summary {
  std::vector<SummaryGroup> groups;
  long rows = 0;
};

/// Throws std::invalid_argument on an empty table.
Summary summarize(const ResultTable& table);

/// Fixed-width text rendering of a summary.
std::string summary_text(const Summary& s);

}  // namespace implreg
