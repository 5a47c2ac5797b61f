// End-to-end pipelines at reduced size, plus the command-line binary.

#include "infograd/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;
using namespace infograd;

namespace {

std::pair<double, double> multipath_gradient(double e1, double e2) {
  const double gain = e1 * e2 + 1.0;
  const double noise = e2 * e2 + 2.0;
  const double v = gain * gain + noise;
  return {e2 * gain / v, (e1 * gain + e2) / v - e2 / noise};
}

double multipath_mi(double e1, double e2) {
  const double gain = e1 * e2 + 1.0;
  const double noise = e2 * e2 + 2.0;
  return 0.5 * std::log((gain * gain + noise) / noise);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("infograd_integration_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(INFOGRAD_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
#ifdef WEXITSTATUS
  return WEXITSTATUS(status);
#else
  return status;
#endif
}

}  // namespace

TEST(Pipeline, LearnedSweepTracksClosedForm) {
  Json c = default_config("sweep-multipath");
  c["grid_min"] = -1.0;
  c["grid_max"] = 1.0;
  c["grid_points"] = 2;
  c["samples"] = 50000;
  c["train_samples"] = 50000;
  c["dsm_steps"] = 1500;
  const auto out = run_sweep_multipath(c, 11);
  for (const std::string vary : {"eta1", "eta2"}) {
    const Table& t = out.tables.at("sweep_" + vary + ".csv");
    const auto eta = t.column("eta"), ga = t.column("grad_mc_analytic_scores"), gl = t.column("grad_mc_learned_scores");
    const auto se = t.column("se_mc");
    ASSERT_EQ(eta.size(), 2u);
    for (std::size_t i = 0; i < eta.size(); ++i) {
      const auto [d1, d2] = vary == "eta1" ? multipath_gradient(eta[i], 1.0) : multipath_gradient(1.0, eta[i]);
      const double truth = vary == "eta1" ? d1 : d2;
      EXPECT_LE(std::abs(ga[i] - truth), 4.0 * se[i]) << vary << " = " << eta[i];
      EXPECT_LE(std::abs(gl[i] - truth), std::max(0.15 * std::abs(truth), 0.03)) << vary << " = " << eta[i];
    }
  }
}

TEST(Pipeline, ShortLearnedAscentFollowsAnalytic) {
  Json c = default_config("pga-multipath");
  c["iterations"] = 5;
  c["samples"] = 30000;
  c["train_samples"] = 30000;
  c["initial_dsm_steps"] = 600;
  c["refresh_dsm_steps"] = 100;
  const auto out = run_pga_multipath(c, 3);
  const Table& t = out.tables.at("pga_trace.csv");
  const auto e1 = t.column("eta1"), e2 = t.column("eta2"), flag = t.column("mi_learned_run_flag");
  std::vector<double> analytic, learned;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    EXPECT_NEAR(std::hypot(e1[i], e2[i]), 1.0, 1e-9);
    (flag[i] == 0.0 ? analytic : learned).push_back(multipath_mi(e1[i], e2[i]));
  }
  ASSERT_EQ(analytic.size(), 6u);
  ASSERT_EQ(learned.size(), 6u);
  EXPECT_NEAR(analytic.front(), 0.5 * std::log(1.5), 1e-12);
  EXPECT_GT(analytic.back(), analytic.front());
  EXPECT_GT(learned.back(), learned.front());
  EXPECT_NEAR(learned.back(), analytic.back(), 0.02);
}

TEST(Pipeline, TanhPointAgreesWithQuadrature) {
  Json c = default_config("tanh-sweep");
  c["eta_min"] = 1.0;
  c["eta_max"] = 1.0;
  c["grid_points"] = 1;
  c["samples"] = 50000;
  c["train_samples"] = 50000;
  const auto out = run_tanh_sweep(c, 2);
  const Table& t = out.tables.at("tanh_sweep.csv");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_NEAR(t.column("grad_score_learned")[0], t.column("grad_fd")[0], 0.03);
  EXPECT_GT(t.column("mi_quadrature")[0], 0.0);
}

TEST(Cli, CascadeCheckWritesArtifacts) {
  const fs::path dir = scratch("cli");
  ASSERT_EQ(run_cli("cascade-check --out \"" + dir.string() + "\" --seed 4", dir / "log.txt"), 0);
  EXPECT_TRUE(fs::exists(dir / "cascade.csv"));
  std::ifstream in(dir / "cascade.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("eta1,grad_analytic,grad_mc,se,z", 0), 0u);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_GE(files, 3u);  // table, manifest, log
  fs::remove_all(dir);
}

TEST(Cli, VersionAndBadInput) {
  const fs::path dir = scratch("cli_errors");
  EXPECT_EQ(run_cli("--version", dir / "version.txt"), 0);
  std::ifstream in(dir / "version.txt");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("infograd ", 0), 0u);
  EXPECT_NE(run_cli("cascade-check --out \"" + dir.string() + "\" --override no_such_key=1", dir / "bad.txt"), 0);
  EXPECT_NE(run_cli("no-such-command", dir / "bad2.txt"), 0);
  fs::remove_all(dir);
}
