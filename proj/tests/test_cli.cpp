#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "mfgplan_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const std::string cmd =
      "cd '" + work_dir().string() + "' && '" + std::string(MFGPLAN_CLI) + "' " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) r.out += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path out(const std::string& name) { return work_dir() / name; }

void write_file(const std::string& name, const std::string& text) { std::ofstream(out(name)) << text; }

}  // namespace

TEST(Cli, ExplicitLimitPrintsAnchor) {
  const auto r = run("explicit --out explicit_limit");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("r1=1.115460237"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("k(1)=2.230920"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("congestion=1/2,kinetic=1/2"), std::string::npos);
  const auto csv = slurp(out("explicit_limit") / "profile.csv");
  EXPECT_EQ(csv.rfind("t,k,r,l,a,j\n", 0), 0u);
  const auto rep = nlohmann::json::parse(slurp(out("explicit_limit") / "report.json"));
  EXPECT_EQ(rep.at("kind"), "limit");
  EXPECT_NEAR(rep.at("r1").get<double>(), 1.1154602372, 1e-9);
}

TEST(Cli, ExplicitEtaStartsAtInverseEta) {
  const auto r = run("explicit --eta 0.05 --out explicit_eta");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto csv = slurp(out("explicit_eta") / "profile.csv");
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(row.rfind("0,0,", 0), 0u) << row;
  EXPECT_EQ(row.substr(row.rfind(',', row.rfind(',') - 1) + 1), "20,0");
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("explicit --eta 0.9 --out bad_eta").code, 2);
  EXPECT_EQ(run("solve --n-x 100 --out bad_nx").code, 2);
  EXPECT_EQ(run("minimize --theta 2.5 --out bad_theta").code, 2);
  EXPECT_EQ(run("sweep --etas 0.1,0.2,0.05 --out bad_etas").code, 2);
  EXPECT_EQ(run("--out nothing").code, 2);
  write_file("unknown.toml", "bogus = 3\n");
  EXPECT_EQ(run("explicit --config unknown.toml --out bad_cfg").code, 2);
}

TEST(Cli, SolveWritesArtifactsAndConverges) {
  const auto r = run("solve --n-x 101 --n-t 100 --epsilon 0.1 --eta 0.1 --out solve_ok");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("converged=true"), std::string::npos);
  for (const char* f : {"report.json", "fields.csv", "energy.csv", "timing.json"}) {
    EXPECT_TRUE(fs::exists(out("solve_ok") / f)) << f;
  }
  const auto rep = nlohmann::json::parse(slurp(out("solve_ok") / "report.json"));
  EXPECT_EQ(rep.at("status"), "ok");
  EXPECT_LE(rep.at("max_mass_error").get<double>(), 1e-10);
  EXPECT_FALSE(rep.contains("wall_seconds"));
}

TEST(Cli, ConfigFileMatchesFlags) {
  write_file("solve.toml", "n_x = 101\nn_t = 100\nepsilon = 0.1\neta = 0.1\n");
  ASSERT_EQ(run("solve --config solve.toml --out solve_cfg").code, 0);
  ASSERT_EQ(run("solve --n-x 101 --n-t 100 --epsilon 0.1 --eta 0.1 --out solve_flags").code, 0);
  EXPECT_EQ(slurp(out("solve_cfg") / "fields.csv"), slurp(out("solve_flags") / "fields.csv"));
}

TEST(Cli, NonConvergedSolveExitsOne) {
  const auto r = run("solve --n-x 101 --n-t 100 --epsilon 0.1 --tol 1e-30 --max-iter 1 --out solve_cap");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("non-converged"), std::string::npos) << r.out;
  const auto rep = nlohmann::json::parse(slurp(out("solve_cap") / "report.json"));
  EXPECT_EQ(rep.at("status"), "failed");
}

TEST(Cli, UnwritableOutputExitsOne) {
  write_file("plain_file", "x");
  const auto r = run("solve --n-x 101 --n-t 100 --out plain_file/sub");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("cannot create output directory"), std::string::npos) << r.out;
}

TEST(Cli, SinglePointSweepIsInsufficientNotFailure) {
  const auto r = run("sweep --etas 0.1 --n-x 101 --n-t 100 --out sweep_one");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("insufficient points"), std::string::npos);
  EXPECT_NE(r.out.find("fewer than 3 points"), std::string::npos);
}

TEST(Cli, SweepIsDeterministicAcrossWorkerCounts) {
  const std::string base = "sweep --etas 0.2,0.1,0.05 --n-x 101 --n-t 100 ";
  const auto a = run(base + "--workers 1 --out sweep_w1");
  const auto b = run(base + "--workers 3 --out sweep_w3");
  EXPECT_EQ(a.code, b.code);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(slurp(out("sweep_w1") / "points.csv"), slurp(out("sweep_w3") / "points.csv"));
  auto ja = nlohmann::json::parse(slurp(out("sweep_w1") / "report.json"));
  auto jb = nlohmann::json::parse(slurp(out("sweep_w3") / "report.json"));
  EXPECT_EQ(ja.at("points"), jb.at("points"));
  EXPECT_EQ(ja.at("verdicts"), jb.at("verdicts"));
  EXPECT_EQ(nlohmann::json::parse(slurp(out("sweep_w1") / "timing.json")).size(), 3u);
}

TEST(Cli, MinimizeSmallGridConverges) {
  const auto r = run("minimize --n-x 41 --n-t 40 --out minimize_small");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto rep = nlohmann::json::parse(slurp(out("minimize_small") / "report.json"));
  EXPECT_TRUE(rep.at("converged").get<bool>());
  EXPECT_LT(rep.at("gap").get<double>(), 1e-4);
  EXPECT_LE(rep.at("primal").get<double>(), rep.at("candidate_total").get<double>());
}

TEST(Cli, KpzReportsRescalingVerdicts) {
  const auto r = run("kpz --etas 0.2,0.1,0.05 --n-x 101 --n-t 100 --out kpz_small");
  EXPECT_NE(r.out.find("kpz_a_error"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("kpz_mu_error"), std::string::npos);
  EXPECT_NE(r.out.find("eta_stability"), std::string::npos);
  EXPECT_TRUE(fs::exists(out("kpz_small") / "eta_stability.json"));
}
