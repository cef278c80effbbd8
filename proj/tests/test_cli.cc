// Runs the installed binary end to end through the shell.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "gnsspdr/io.h"
#include "support.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result run(const std::string& args, const std::string& tag) {
  const fs::path dir = fs::temp_directory_path();
  const fs::path o = dir / ("gnsspdr_cli_" + tag + ".out"),
                 e = dir / ("gnsspdr_cli_" + tag + ".err");
  const std::string cmd = std::string(GNSSPDR_CLI) + " " + args + " >" + o.string() + " 2>" +
                          e.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testsupport::slurp(o);
  r.err = testsupport::slurp(e);
  return r;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// A short scenario written to `dir`, and a run config that reads it back.
fs::path short_scenario(const std::string& name, double nlos = 0.0) {
  const fs::path dir = testsupport::temp_dir(name);
  write_file(dir / "sim.ini", "[scenario]\nseed = 5\nduration = 40\n[nlos]\nprobability = " +
                                  std::to_string(nlos) + "\n[output]\ndir = sim\n");
  write_file(dir / "run.ini",
             "[input]\ngnss = sim/gnss.csv\nimu = sim/imu.csv\ntruth = sim/truth.csv\n"
             "[output]\ndir = res\n[run]\norigin = 22.3, 114.18, 10\n");
  return dir;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(Cli, HelpAndUnknownFlag) {
  EXPECT_EQ(run("--help", "help").code, 0);
  EXPECT_EQ(run("solve --help", "help2").code, 0);
  EXPECT_EQ(run("solve --no-such-flag", "unknown").code, 2);
  EXPECT_EQ(run("", "nosub").code, 2);
  EXPECT_EQ(run("simulate --nlos-prob 1.5", "range").code, 2);
}

TEST(Cli, SimulateWritesFilesDeterministically) {
  const fs::path dir = short_scenario("cli_sim");
  const Result a = run("simulate --config " + (dir / "sim.ini").string(), "sim_a");
  ASSERT_EQ(a.code, 0) << a.err;
  for (const char* f : {"gnss.csv", "imu.csv", "truth.csv"}) {
    ASSERT_TRUE(fs::exists(dir / "sim" / f)) << f;
  }
  EXPECT_EQ(count_lines(testsupport::slurp(dir / "sim" / "truth.csv")), 41u);
  const std::string first = testsupport::slurp(dir / "sim" / "gnss.csv");
  ASSERT_EQ(run("simulate --config " + (dir / "sim.ini").string(), "sim_b").code, 0);
  EXPECT_EQ(testsupport::slurp(dir / "sim" / "gnss.csv"), first);
  // --seed changes the noise
  const fs::path other = dir / "other";
  ASSERT_EQ(run("simulate --config " + (dir / "sim.ini").string() + " --seed 6 --out " +
                    other.string(), "sim_c").code, 0);
  EXPECT_EQ(testsupport::slurp(other / "truth.csv"), testsupport::slurp(dir / "sim" / "truth.csv"));
}

TEST(Cli, MalformedConfigWritesNothing) {
  const fs::path dir = testsupport::temp_dir("cli_bad");
  write_file(dir / "bad.ini", "[scenario]\nduration = -5\n[output]\ndir = sim\n");
  const Result r = run("simulate --config " + (dir / "bad.ini").string(), "bad");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ConfigError"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "sim"));
  EXPECT_EQ(run("simulate --config " + (dir / "missing.ini").string(), "bad2").code, 2);
}

TEST(Cli, SolveAndReport) {
  const fs::path dir = short_scenario("cli_solve", 0.2);
  ASSERT_EQ(run("simulate --config " + (dir / "sim.ini").string(), "solve_sim").code, 0);
  const std::string cfg = (dir / "run.ini").string();

  const Result fgo = run("solve --config " + cfg + " --pipeline FGO --out " +
                             (dir / "fgo").string(), "solve_fgo");
  ASSERT_EQ(fgo.code, 0) << fgo.err;
  EXPECT_NE(fgo.out.find("FGO"), std::string::npos);
  for (const char* f : {"trajectory.csv", "residuals.csv", "metrics.json", "trajectory.geojson",
                        "errors.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "fgo" / f)) << f;
  }

  const Result all = run("solve --config " + cfg, "solve_all");
  ASSERT_EQ(all.code, 0) << all.err;
  std::set<std::string> kinds;
  for (const auto& row : gnsspdr::read_residuals_csv(dir / "res" / "residuals.csv")) {
    kinds.insert(row.kind);
  }
  EXPECT_EQ(kinds, (std::set<std::string>{"pseudorange", "doppler", "pdr", "cv", "smm"}));

  const Result rep = run("report --out " + (dir / "res").string(), "report");
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_NE(rep.out.find("doppler"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "res" / "histograms.csv"));

  const Result pdr = run("pdr-only --config " + cfg + " --out " + (dir / "pdr").string(), "pdr");
  ASSERT_EQ(pdr.code, 0) << pdr.err;
  EXPECT_TRUE(fs::exists(dir / "pdr" / "pdr_track.csv"));

  EXPECT_EQ(run("solve --config " + cfg + " --pipeline NOPE", "badpipe").code, 2);
  fs::remove(dir / "sim" / "imu.csv");
  const Result noimu = run("solve --config " + cfg, "noimu");
  EXPECT_EQ(noimu.code, 4) << noimu.err;
  // a configured input that is missing fails whatever the pipeline
  EXPECT_EQ(run("solve --config " + cfg + " --pipeline FGO-CV-SMM --out " +
                    (dir / "cv").string(), "cv_noimu").code, 4);
}

TEST(Cli, MalformedCsvIsAnIoFailure) {
  const fs::path dir = short_scenario("cli_csv");
  ASSERT_EQ(run("simulate --config " + (dir / "sim.ini").string(), "csv_sim").code, 0);
  {
    std::ofstream out(dir / "sim" / "gnss.csv", std::ios::app);
    out << "99,G01,oops,1,0.19,40,1,1,1,0,0,0,0,0\n";
  }
  const Result r = run("solve --config " + (dir / "run.ini").string(), "csv_bad");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("line"), std::string::npos) << r.err;
}

TEST(Cli, CompareCleanData) {
  const fs::path dir = short_scenario("cli_cmp");
  ASSERT_EQ(run("simulate --config " + (dir / "sim.ini").string(), "cmp_sim").code, 0);
  const Result r = run("compare --config " + (dir / "run.ini").string(), "cmp");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"FGO ", "EKF-PDR", "FGO-CV ", "FGO-CV-SMM", "FGO-PDR ", "FGO-PDR-SMM",
                           "FGO-PDR-CV ", "FGO-PDR-CV-SMM"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  }
  // header plus eight rows
  EXPECT_EQ(count_lines(testsupport::slurp(dir / "res" / "compare_stats.csv")), 9u);
  EXPECT_TRUE(fs::exists(dir / "res" / "FGO-PDR-CV-SMM" / "trajectory.csv"));

  // no truth
  write_file(dir / "notruth.ini",
             "[input]\ngnss = sim/gnss.csv\nimu = sim/imu.csv\n[output]\ndir = nt\n");
  EXPECT_EQ(run("compare --config " + (dir / "notruth.ini").string(), "cmp_nt").code, 2);
}
