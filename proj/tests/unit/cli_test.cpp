#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "deltalab/cli.hpp"

using namespace deltalab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli_dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "deltalab_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

const std::string kDesigns = std::string(DELTALAB_DATA_DIR) + "/designs";

}  // namespace

TEST(Cli, SolvePrintsBaseline) {
  const auto r = cli({"solve", "--game", "pbeauty", "--p", "0.6667", "--benchmark", "level-k", "--k", "2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("role 0 (LevelK(2)): 22.22"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("config_hash=fnv1a64:"), std::string::npos);
}

TEST(Cli, SolveWritesEnvelope) {
  const auto path = scratch("solve.json");
  EXPECT_EQ(cli({"solve", "--game-id", "ultimatum-100", "--out", path.string()}).code, 0);
  const auto j = read_json(path);
  EXPECT_EQ(j.at("command"), "solve");
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("seed"), 1);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({"simulate", "--design", kDesigns + "/battery_classical.json"}).code, 2);  // needs --out
  const auto bad = cli({"solve", "--game", "pd", "--T", "2", "--R", "3", "--P", "1", "--S", "0"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("InvalidParams"), std::string::npos) << bad.err;
  const auto missing = cli({"analyze", "--data", scratch("does-not-exist.csv").string()});
  EXPECT_EQ(missing.code, 2);  // rejected while parsing arguments
  EXPECT_NE(missing.err.find("does-not-exist"), std::string::npos) << missing.err;
}

TEST(Cli, SimulateThenAnalyzeClassical) {
  const auto csv = scratch("classical.csv"), out = scratch("classical.json");
  ASSERT_EQ(cli({"simulate", "--design", kDesigns + "/battery_classical.json", "--seed", "3", "--out", csv.string()})
                .code,
            0);
  const auto r = cli({"analyze", "--data", csv.string(), "--permutations", "199", "--bootstrap", "199", "--out",
                      out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(out);
  EXPECT_EQ(j.at("result").at("classification"), "Unstructured");
  EXPECT_EQ(j.at("inputs").at("rows"), 2000);
  EXPECT_EQ(j.at("config").at("permutations"), 199);

  const auto report_dir = scratch("classical_report");
  fs::remove_all(report_dir);
  EXPECT_EQ(cli({"report", "--in", out.string(), "--out", report_dir.string()}).code, 0);
  EXPECT_TRUE(fs::exists(report_dir / "report.md"));
  EXPECT_TRUE(fs::exists(report_dir / "signature_tests.csv"));
}

TEST(Cli, PowerAndEvidence) {
  const auto r = cli({"power", "--d", "0.5", "--alpha", "0.05", "--power", "0.8", "--simulations", "2000"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("6"), std::string::npos);
  const auto e = cli({"evidence"});
  EXPECT_EQ(e.code, 0);
  EXPECT_NE(e.out.find("+0.28"), std::string::npos) << e.out;
}
