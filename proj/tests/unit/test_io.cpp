#include "implreg/io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace implreg;
using implreg::testing::Gen;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string item;
  while (std::getline(s, item, sep)) out.push_back(item);
  return out;
}

std::vector<std::string> lines(const std::string& text) { return split(text, '\n'); }

ResultRow sample_row() {
  ResultRow r;
  r.experiment = "flow";
  r.instance = "flow-gaussian-s0";
  r.seed = 7;
  r.kind = "gaussian";
  r.solver = "ode";
  r.alpha = 1e-4;
  r.status = "converged";
  r.objective = 0.1;
  r.residual = std::sqrt(0.1);
  r.nuclear = 1.25;
  r.oracle_nuclear = 1.0;
  r.delta = 0.25;
  r.steps = 42;
  r.wall_time = 3.5;
  return r;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("implreg_io_" + name);
}

}  // namespace

TEST(FormatReal, Sentinels) {
  EXPECT_EQ(format_real(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_real(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_real(0.0), "0");
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
}

TEST(FormatReal, RoundTripsExactly) {
  Gen g(1);
  for (int t = 0; t < 1000; ++t) {
    const double v = g.normal() * std::pow(10.0, g.uniform(-30, 30));
    EXPECT_EQ(std::strtod(format_real(v).c_str(), nullptr), v);
  }
}

TEST(ResultsCsv, LayoutAndSentinels) {
  ResultRow bad = sample_row();
  bad.solver = "gd";
  bad.d = 20;
  bad.eta = 1e-3;
  bad.status = "diverged";
  bad.objective = std::numeric_limits<double>::quiet_NaN();
  bad.nuclear = std::numeric_limits<double>::infinity();
  bad.delta = std::numeric_limits<double>::quiet_NaN();
  const auto out = lines(results_csv({sample_row(), bad}));
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0], "# implreg-results v1");
  const auto header = split(out[1], ',');
  EXPECT_EQ(header, result_columns());
  EXPECT_EQ(header.size(), 17u);
  const auto a = split(out[2], ',');
  const auto b = split(out[3], ',');
  ASSERT_EQ(a.size(), header.size());
  ASSERT_EQ(b.size(), header.size());
  auto col = [&](const std::vector<std::string>& f, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return f[i];
    ADD_FAILURE() << "missing column " << name;
    return std::string();
  };
  EXPECT_EQ(col(a, "d"), "NA");
  EXPECT_EQ(col(a, "eta"), "NA");
  EXPECT_EQ(col(a, "rel_recon_error"), "NA");
  EXPECT_EQ(col(a, "alpha"), "0.0001");
  EXPECT_EQ(col(a, "steps"), "42");
  EXPECT_EQ(col(a, "delta"), "0.25");
  EXPECT_EQ(col(b, "d"), "20");
  EXPECT_EQ(col(b, "objective"), "nan");
  EXPECT_EQ(col(b, "nuclear"), "inf");
  EXPECT_EQ(col(b, "delta"), "nan");
  EXPECT_EQ(out[2].find("3.5"), std::string::npos);
}

TEST(ResultsCsv, EmptyTableHasHeaderOnly) {
  EXPECT_EQ(lines(results_csv({})).size(), 2u);
}

TEST(TimingsCsv, CarriesWallTime) {
  const auto out = lines(timings_csv({sample_row()}));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], "instance,solver,d,alpha,eta,wall_time");
  EXPECT_EQ(split(out[1], ',').back(), "3.5");
}

TEST(InstanceJson, RoundTripGaussian) {
  const ProblemInstance inst =
      build_instance({ProblemKind::gaussian, PlantedKind::lowrank, 6, 2, 20, 1.0}, 5);
  const json doc = json::parse(to_json(inst, "x").dump());
  EXPECT_EQ(doc.at("schema"), kInstanceSchema);
  EXPECT_EQ(doc.at("id"), "x");
  EXPECT_EQ(doc.at("planted").at("spectrum").size(), 6u);
  const ProblemInstance back = instance_from_json(doc);
  ASSERT_EQ(back.ensemble.m(), inst.ensemble.m());
  ASSERT_EQ(back.ensemble.n(), inst.ensemble.n());
  for (Index i = 0; i < inst.ensemble.m(); ++i) {
    EXPECT_EQ(back.ensemble.mat(i).matrix(), inst.ensemble.mat(i).matrix());
  }
  EXPECT_EQ(back.ensemble.y(), inst.ensemble.y());
  ASSERT_TRUE(back.planted.has_value());
  EXPECT_EQ(back.planted->matrix(), inst.planted->matrix());
  EXPECT_EQ(back.kind, inst.kind);
  EXPECT_EQ(back.seed, inst.seed);
}

TEST(InstanceJson, CompletionStoresSparseEntries) {
  const ProblemInstance inst =
      build_instance({ProblemKind::completion_uniform, PlantedKind::lowrank, 5, 1, 8, 1.0}, 2);
  const json doc = to_json(inst, "c");
  for (const json& entries : doc.at("mats")) EXPECT_EQ(entries.size(), 1u);
  const ProblemInstance back = instance_from_json(doc);
  EXPECT_EQ(back.kind, ProblemKind::completion_uniform);
  EXPECT_EQ(back.ensemble.y(), inst.ensemble.y());
}

TEST(InstanceJson, RejectsMalformedDocuments) {
  const ProblemInstance inst =
      build_instance({ProblemKind::gaussian, PlantedKind::lowrank, 3, 1, 4, 1.0}, 1);
  json doc = to_json(inst, "x");
  json wrong = doc;
  wrong["schema"] = "other";
  EXPECT_THROW(instance_from_json(wrong), ConfigError);
  wrong = doc;
  wrong["mats"][0][0][0] = 9;
  EXPECT_THROW(instance_from_json(wrong), ConfigError);
  wrong = doc;
  wrong.erase("y");
  EXPECT_THROW(instance_from_json(wrong), ConfigError);
  wrong = doc;
  wrong["kind"] = "mystery";
  EXPECT_THROW(instance_from_json(wrong), ConfigError);
}

TEST(SymJson, RoundTripAndValidation) {
  Gen g(3);
  const SymMat m = g.sym(4);
  EXPECT_EQ(sym_from_json(json::parse(to_json(m).dump())).matrix(), m.matrix());
  EXPECT_THROW(sym_from_json(json::parse("[[1,2],[3,4]]")), ConfigError);
  EXPECT_THROW(sym_from_json(json::parse("[[1,2],[2]]")), ConfigError);
  EXPECT_THROW(sym_from_json(json::array()), ConfigError);
}

TEST(OracleJson, CertificateFields) {
  const MeasurementEnsemble e =
      completion_ensemble(2, {{0, 1}}).with_targets(implreg::testing::vec({1.0}));
  const OracleResult res = min_nuclear_psd(e);
  const json doc = to_json(res);
  EXPECT_EQ(doc.at("status"), "optimal");
  EXPECT_NEAR(doc.at("objective").get<double>(), 2.0, 1e-8);
  const json& c = doc.at("certificate");
  for (const char* key : {"nu", "max_eig_dual", "feas_residual", "comp_residual",
                          "psd_violation", "feasible_ok", "psd_ok", "dual_ok", "comp_ok",
                          "passed", "tol"}) {
    EXPECT_TRUE(c.contains(key)) << key;
  }
  EXPECT_TRUE(c.at("passed").get<bool>());
  EXPECT_EQ(doc.at("X").size(), 2u);
}

TEST(SummaryJson, GroupsAndHistogram) {
  const Summary s = summarize({sample_row(), sample_row()});
  const json doc = json::parse(to_json(s).dump());
  EXPECT_EQ(doc.at("schema"), kSummarySchema);
  EXPECT_EQ(doc.at("rows"), 2);
  ASSERT_EQ(doc.at("groups").size(), 1u);
  const json& g = doc.at("groups")[0];
  EXPECT_TRUE(g.at("d").is_null());
  EXPECT_EQ(g.at("count"), 2);
  EXPECT_DOUBLE_EQ(g.at("stats").at("nuclear").at("mean").get<double>(), 1.25);
  EXPECT_EQ(g.at("delta_histogram").at("labels").size(), delta_histogram_labels().size());
}

TEST(GridStatsJson, Fields) {
  GridSearchStats st;
  st.attempted = 10;
  st.feasible = 7;
  st.discarded = 3;
  GridSearchStats::PerAlpha pa;
  pa.alpha_bar = 1e-5;
  pa.runs = 7;
  pa.histogram.assign(delta_histogram_labels().size(), 0);
  st.per_alpha.push_back(pa);
  const json doc = to_json(st);
  EXPECT_EQ(doc.at("attempted"), 10);
  EXPECT_EQ(doc.at("per_alpha")[0].at("runs"), 7);
  EXPECT_EQ(doc.at("per_alpha")[0].at("histogram").at("counts").size(),
            delta_histogram_labels().size());
}

TEST(ConfigJson, OverlaysPreset) {
  SweepConfig s = sweep_preset(Scale::smoke);
  apply_json(json::parse(R"({"n": 8, "d_grid": [1, 8], "step_policies": [{"kind": "line_search"}],
                              "kind": "completion-powerlaw"})"),
             s);
  EXPECT_EQ(s.n, 8);
  EXPECT_EQ(s.d_grid, (std::vector<Index>{1, 8}));
  ASSERT_EQ(s.step_policies.size(), 1u);
  EXPECT_EQ(s.step_policies[0].kind, StepPolicy::Kind::clipped_exact_line_search);
  EXPECT_EQ(s.kind, ProblemKind::completion_powerlaw);
  EXPECT_EQ(to_json(s).at("m"), s.m());

  FlowConfig f = flow_preset(Scale::smoke);
  apply_json(json::parse(R"({"alpha": 0.001, "ode": {"rel_tol": 1e-9}, "kinds": ["gaussian"]})"), f);
  EXPECT_DOUBLE_EQ(f.alpha, 1e-3);
  EXPECT_DOUBLE_EQ(f.ode.rel_tol, 1e-9);
  EXPECT_EQ(f.kinds.size(), 1u);

  GridSearchConfig g = grid_preset(Scale::smoke);
  apply_json(json::parse(R"({"masks": [2, 3], "oracle": {"max_iters": 123}})"), g);
  EXPECT_EQ(g.masks, (std::vector<int>{2, 3}));
  EXPECT_EQ(g.oracle.max_iters, 123);
}

TEST(ConfigJson, UnknownKeysAndBadTypesAreConfigErrors) {
  SweepConfig s;
  EXPECT_THROW(apply_json(json::parse(R"({"nn": 3})"), s), ConfigError);
  EXPECT_THROW(apply_json(json::parse(R"({"n": "three"})"), s), ConfigError);
  EXPECT_THROW(apply_json(json::parse(R"({"step_policies": [{"kind": "magic"}]})"), s), ConfigError);
  EXPECT_THROW(apply_json(json::parse("[1, 2]"), s), ConfigError);
  FlowConfig f;
  EXPECT_THROW(apply_json(json::parse(R"({"ode": {"tolerance": 1}})"), f), ConfigError);
  GridSearchConfig g;
  EXPECT_THROW(apply_json(json::parse(R"({"oracle": {"rho": 1}})"), g), ConfigError);
  EXPECT_THROW(apply_json(json::parse(R"({"alpha": [1]})"), g), ConfigError);
}

TEST(Files, ReadAndWrite) {
  const auto dir = temp_path("files");
  std::filesystem::remove_all(dir);
  const auto p = dir / "nested" / "a.json";
  write_text_file(p, R"({"k": 1})");
  EXPECT_EQ(read_json_file(p).at("k"), 1);
  write_text_file(p, "{not json");
  EXPECT_THROW(read_json_file(p), ConfigError);
  EXPECT_THROW(read_json_file(dir / "missing.json"), ConfigError);
  std::filesystem::remove_all(dir);
}
