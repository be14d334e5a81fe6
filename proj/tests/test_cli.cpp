#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "eflow/io.hpp"

namespace fs = std::filesystem;
using eflow::io::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("eflow_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path write(const std::string& name, const std::string& body) const {
    std::ofstream(path(name)) << body;
    return path(name);
  }

  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + " " + EFLOW_CLI_PATH + " " + args + " 2>" + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return slurp(dir_ / "stderr.txt"); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
  }

  fs::path dir_;
};

const char* kScalar = R"({"generate":{"seed":0,"regime":["scalar"],"dim":1}})";
const char* kPairing = R"({"problem":{"upsilon0":{"n":2,"re":[[1,0],[0,1]]},
  "d0":{"n":2,"re":[[0,0.5],[-0.5,0]]},"symmetry":-1,"mu":1.4,"epsilon":2.4}})";

}  // namespace

TEST_F(Cli, FlowScalarFixture) {
  const auto cfg = write("s.json", kScalar);
  ASSERT_EQ(run("flow --config " + cfg.string() + " --out " + path("o").string()), 0);
  const std::size_t rows = line_count(path("o/trajectory.csv")) - 1;
  EXPECT_GE(rows, 200u);
  EXPECT_LE(rows, 202u);
  const json st = eflow::io::read_json_file(path("o/state_final.json").string());
  EXPECT_TRUE(st["stats"]["reached_stop"].get<bool>());
  const json m = eflow::io::read_json_file(path("o/manifest.json").string());
  EXPECT_EQ(m["command"], "flow");
  EXPECT_EQ(m["artifacts"]["trajectory.csv"], eflow::io::file_checksum(path("o/trajectory.csv").string()));
}

TEST_F(Cli, FlowTrivialIsConstant) {
  const auto cfg = write("t.json", R"({"generate":{"seed":4,"regime":["trivial_D0"],"dim":3}})");
  ASSERT_EQ(run("flow --config " + cfg.string() + " --out " + path("o").string()), 0);
  std::ifstream in(path("o/trajectory.csv"));
  std::string header, first, line;
  std::getline(in, header);
  std::getline(in, first);
  const std::string tail0 = first.substr(first.find(','));
  while (std::getline(in, line)) EXPECT_EQ(line.substr(line.find(',')), tail0);
}

TEST_F(Cli, InputErrors) {
  const auto bad = write("bad.json", R"({"problem":{"upsilon0":{"n":2,"re":[[1,0]]},"d0":{"n":2,"re":[[0,0],[0,0]]},"mu":1,"epsilon":0.5}})");
  EXPECT_EQ(run("flow --config " + bad.string() + " --out " + path("o").string()), 1);
  const auto corrupt = write("corrupt.json", "{\"generate\": {\"seed\": 0, \"regime\": [\"scal");
  EXPECT_EQ(run("invariants --config " + corrupt.string() + " --out " + path("o2").string()), 1);
  EXPECT_EQ(run("flow --config " + path("missing.json").string()), 1);
  const auto hyp = write("hyp.json", R"({"problem":{"upsilon0":{"n":1,"re":[[-1]]},"d0":{"n":1,"re":[[0.1]]},"mu":0.5,"epsilon":0.1}})");
  EXPECT_EQ(run("flow --config " + hyp.string() + " --out " + path("o3").string()), 1);
  EXPECT_NE(stderr_text().find("-(mu - epsilon)"), std::string::npos);
  EXPECT_EQ(run("nonsense"), 1);
  EXPECT_EQ(run("flow"), 1);
}

TEST_F(Cli, NotConvergedExitCode) {
  const auto cfg = write("s.json", kScalar);
  EXPECT_EQ(run("flow --config " + cfg.string() + " --t-max 0.2 --out " + path("o").string()), 2);
  EXPECT_TRUE(fs::exists(path("o/trajectory.csv")));
  EXPECT_EQ(run("asymptote --config " + cfg.string() + " --t-max 0.2 --out " + path("o2").string()), 2);
}

TEST_F(Cli, InvariantsScalarAndPsdInstance) {
  const auto cfg = write("s.json", kScalar);
  ASSERT_EQ(run("invariants --config " + cfg.string() + " --out " + path("o").string()), 0);
  const json r = eflow::io::read_json_file(path("o/invariants.json").string());
  EXPECT_TRUE(r["verdicts"]["zeta_monotone"].get<bool>());
  EXPECT_EQ(r["verdicts"]["zeta_direction"], "increasing");

  const auto psd = write("p.json", R"({"generate":{"seed":2,"regime":["nonpositive_frakD0_psd"],"dim":3}})");
  ASSERT_EQ(run("invariants --config " + psd.string() + " --out " + path("p").string()), 0);
  const json v = eflow::io::read_json_file(path("p/invariants.json").string())["verdicts"];
  for (const char* key : {"zeta_monotone", "frakD_norm_decreasing", "frakB_trace_decreasing", "hs_budget_ok", "all_ok"}) {
    EXPECT_TRUE(v[key].get<bool>()) << key;
  }
}

TEST_F(Cli, InvariantVerdictFailureExitCode) {
  // A loose tolerance lets the constant of motion drift past 1e-8.
  const auto cfg = write("g.json", R"({"generate":{"seed":3,"regime":[],"dim":4}})");
  EXPECT_EQ(run("invariants --config " + cfg.string() + " --rtol 1e-3 --atol 1e-3 --out " + path("o").string()), 3);
}

TEST_F(Cli, AsymptoteWritesLimit) {
  const auto cfg = write("s.json", kScalar);
  ASSERT_EQ(run("asymptote --config " + cfg.string() + " --out " + path("o").string()), 0);
  const json a = eflow::io::read_json_file(path("o/asymptotics.json").string());
  EXPECT_NEAR(a["upsilon_inf"]["re"][0][0].get<double>(), 0.99985, 1e-5);
  EXPECT_LE(a["commutative_closed_form_residual"].get<double>(), 1e-6);
}

TEST_F(Cli, FockCommands) {
  const auto pair = write("pair.json", kPairing);
  ASSERT_EQ(run("fock --config " + pair.string() + " --out " + path("o").string()), 0);
  const json s = eflow::io::read_json_file(path("o/spectra.json").string());
  EXPECT_LE(s["max_abs_gap"].get<double>(), 1e-5);
  EXPECT_EQ(s["spec_h0"].size(), 4u);
  EXPECT_EQ(run("fock --config " + pair.string() + " --rtol 1e-4 --tolerance 1e-300 --out " + path("o4").string()), 4);

  const auto triv = write("triv.json", R"({"generate":{"seed":1,"regime":["trivial_D0","fermionic_antisymmetric"],"dim":3}})");
  ASSERT_EQ(run("fock --config " + triv.string() + " --out " + path("t").string()), 0);
  EXPECT_LE(eflow::io::read_json_file(path("t/spectra.json").string())["max_abs_gap"].get<double>(), 1e-10);

  const auto big = write("big.json", R"({"generate":{"seed":1,"regime":["trivial_D0","fermionic_antisymmetric"],"dim":13}})");
  EXPECT_EQ(run("fock --config " + big.string() + " --out " + path("b").string()), 1);
  EXPECT_NE(stderr_text().find("TooManyModes"), std::string::npos);

  const auto sym = write("sym.json", R"({"generate":{"seed":1,"regime":["gap_positive"],"dim":2}})");
  EXPECT_EQ(run("fock --config " + sym.string() + " --out " + path("s").string()), 1);
}

TEST_F(Cli, ScalarCommand) {
  ASSERT_EQ(run("scalar --alpha 0.99 --beta 0.07 --t-max 2.5 --out " + path("o").string()), 0);
  std::ifstream in(path("o/scalar.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,f_closed,g_closed,f_numeric,g_numeric,abs_err");
  double worst = 0;
  std::string last;
  while (std::getline(in, line)) {
    worst = std::max(worst, std::stod(line.substr(line.rfind(',') + 1)));
    last = line;
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_EQ(last.substr(0, 3), "2.5");

  EXPECT_EQ(run("scalar --alpha 0.5 --beta 0 --out " + path("z").string()), 1);

  ASSERT_EQ(run("scalar --alpha 0 --beta 0.3 --t-max 20 --out " + path("a0").string()), 0);
  std::ifstream a0(path("a0/scalar.csv"));
  while (std::getline(a0, line)) last = line;
  const auto c3 = last.find(',', last.find(',', last.find(',') + 1) + 1);
  EXPECT_NEAR(std::stod(last.substr(c3 + 1)), 0.6, 1e-8);
}

TEST_F(Cli, SeedOverrideAndReproducibility) {
  const auto cfg = write("g.json", R"({"generate":{"seed":1,"regime":["gap_positive"],"dim":3}})");
  ASSERT_EQ(run("flow --config " + cfg.string() + " --out " + path("a").string()), 0);
  ASSERT_EQ(run("flow --config " + cfg.string() + " --out " + path("b").string()), 0);
  EXPECT_EQ(slurp(path("a/trajectory.csv")), slurp(path("b/trajectory.csv")));
  EXPECT_EQ(slurp(path("a/manifest.json")).size() > 0, true);

  ASSERT_EQ(run("flow --config " + cfg.string() + " --out " + path("c").string(), "ELLIPTIC_FLOW_SEED=5"), 0);
  EXPECT_NE(slurp(path("a/trajectory.csv")), slurp(path("c/trajectory.csv")));
  const json m = eflow::io::read_json_file(path("c/manifest.json").string());
  EXPECT_EQ(m["source"]["generate"]["seed"], 5);

  const auto five = write("five.json", R"({"generate":{"seed":5,"regime":["gap_positive"],"dim":3}})");
  ASSERT_EQ(run("flow --config " + five.string() + " --out " + path("d").string()), 0);
  EXPECT_EQ(slurp(path("c/trajectory.csv")), slurp(path("d/trajectory.csv")));

  EXPECT_EQ(run("flow --config " + cfg.string() + " --out " + path("e").string(), "ELLIPTIC_FLOW_SEED=abc"), 1);
}

TEST_F(Cli, SweepParallelMatchesSerial) {
  const auto cfg = write("sweep.json", R"({"generate":{"seed":10,"count":3,"regime":["gap_positive"],"dims":[2,3]},
    "commands":["flow","invariants","asymptote"]})");
  ASSERT_EQ(run("sweep --config " + cfg.string() + " --jobs 3 --out " + path("par").string()), 0);
  ASSERT_EQ(run("sweep --config " + cfg.string() + " --jobs 1 --out " + path("ser").string()), 0);
  const json summary = eflow::io::read_json_file(path("par/sweep.json").string());
  ASSERT_EQ(summary["runs"].size(), 6u);
  for (int i = 0; i < 6; ++i) {
    const std::string sub = "run-" + std::to_string(i);
    for (const char* f : {"trajectory.csv", "invariants.json", "asymptotics.json"}) {
      EXPECT_EQ(slurp(path("par/" + sub + "/" + f)), slurp(path("ser/" + sub + "/" + f))) << sub << f;
    }
  }
  const auto bad = write("bad.json", R"({"commands":["flow"]})");
  EXPECT_EQ(run("sweep --config " + bad.string() + " --out " + path("x").string()), 1);
}
