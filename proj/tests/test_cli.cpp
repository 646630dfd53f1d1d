#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "fixtures.hpp"
#include "giet/io.hpp"

using namespace giet;
using namespace fixtures;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CliRun {
  int code = -1;
  std::string out, err;
  fs::path dir;
  json summary() const { return json::parse(out.empty() ? err : out); }
};

// Each run gets its own directory holding the config, the outputs and the captured streams.
class Cli : public ::testing::Test {
 protected:
  fs::path root;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root = fs::temp_directory_path() / (std::string("giet_cli_") + info->name());
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(root);
  }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = root / name;
    std::ofstream(p) << text;
    return p;
  }

  CliRun run(const std::string& cmd, const fs::path& config, const std::string& extra = "", const std::string& tag = "out") {
    CliRun r;
    r.dir = root / tag;
    const std::string line = std::string(GIET_CLI_PATH) + " " + cmd + " --config " + config.string() + " --out " +
                             r.dir.string() + " " + extra + " > " + (root / (tag + ".stdout")).string() + " 2> " +
                             (root / (tag + ".stderr")).string();
    const int status = std::system(line.c_str());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(root / (tag + ".stdout"));
    r.err = slurp(root / (tag + ".stderr"));
    return r;
  }
};

// Data rows of a CSV, split on commas, skipping provenance lines and the header.
std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream s(line);
    for (std::string cell; std::getline(s, cell, ',');) f.push_back(cell);
    rows.push_back(f);
  }
  return rows;
}

const fs::path configs = GIET_CONFIG_DIR;

}  // namespace

TEST_F(Cli, GoldenRenormalizeHasFibonacciReturnTimes) {
  const CliRun r = run("renormalize", configs / "golden_d2.json", "--depth 30 --scalar quad");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary()["status"], "ok");
  const auto rows = csv_rows(r.dir / "renormalize.csv");
  ASSERT_EQ(rows.size(), 30u);
  const auto fib = fibonacci(40);
  // columns: n, eps, winner, loser, |I^n|, q_A, q_B, ...
  for (std::size_t n = 1; n <= 30; ++n) {
    const auto& row = rows[n - 1];
    EXPECT_EQ(row[0], std::to_string(n));
    const std::uint64_t qa = std::stoull(row[5]), qb = std::stoull(row[6]);
    EXPECT_EQ(std::max(qa, qb), fib[n + 2]) << n;
    EXPECT_EQ(std::min(qa, qb), fib[n + 1]) << n;
  }
}

TEST_F(Cli, DepthZeroWritesHeaderOnly) {
  const CliRun r = run("renormalize", configs / "golden_d2.json", "--depth 0");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(csv_rows(r.dir / "renormalize.csv").empty());
  EXPECT_EQ(r.summary()["result"]["rows"], 0);
}

TEST_F(Cli, ProvenanceHeader) {
  const CliRun r = run("renormalize", configs / "golden_d2.json", "--depth 3 --precision-bits 200");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(r.dir / "renormalize.csv");
  EXPECT_TRUE(text.starts_with("# config_hash: ")) << text;
  EXPECT_NE(text.find("# precision_bits: 200\n"), std::string::npos);
  EXPECT_NE(text.find(std::string("# version: ") + version_string()), std::string::npos);
  const std::string canonical = json::parse(slurp(configs / "golden_d2.json")).dump();
  EXPECT_NE(text.find(config_hash(canonical)), std::string::npos);
}

TEST_F(Cli, OutputIsDeterministic) {
  const fs::path cfg = configs / "rigidity_pair.json";
  const CliRun a = run("rigidity", cfg, "--depth 20 --scalar quad", "a");
  const CliRun b = run("rigidity", cfg, "--depth 20 --scalar quad", "b");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  for (const char* f : {"dh_samples.csv", "c8_spread.csv", "psi_increments.csv", "rigidity.json"})
    EXPECT_EQ(slurp(a.dir / f), slurp(b.dir / f)) << f;
}

TEST_F(Cli, ReducibleConfigExitsWithInvalidInput) {
  const CliRun r = run("renormalize", configs / "reducible.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  const json e = json::parse(r.err);
  EXPECT_EQ(e["status"], "error");
  EXPECT_EQ(e["kind"], "invalid_input");
}

TEST_F(Cli, MalformedJsonExitsWithInvalidInput) {
  const CliRun r = run("renormalize", write_config("bad.json", "{\"alphabet\": ["));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err)["kind"], "invalid_input");
}

TEST_F(Cli, PrecisionExhaustionExitsWithPrecisionError) {
  const CliRun r = run("renormalize", configs / "golden_d2.json", "--depth 400 --scalar quad");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_EQ(json::parse(r.err)["kind"], "precision_exhausted");
}

TEST_F(Cli, AffineModelRecoversAffineInput) {
  const CliRun r = run("affine-model", configs / "affine_d3.json", "--scalar quad");
  ASSERT_EQ(r.code, 0) << r.err;
  const AffineIem input = parse_affine_json(json::parse(slurp(configs / "affine_d3.json")).dump());
  const AffineIem model = parse_affine_json(slurp(r.dir / "model.json"));
  EXPECT_EQ(model.pi, input.pi);
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(model.lengths[a], input.lengths[a], 1e-10);
    EXPECT_NEAR(model.slopes[a], input.slopes[a], 1e-10);
  }
  for (const char* f : {"model_trace.csv", "pseudo_orbit.csv", "omega_increments.csv", "model_distance.csv"})
    EXPECT_TRUE(fs::exists(r.dir / f)) << f;
}

TEST_F(Cli, NonzeroMeanNonlinearityIsAHypothesisError) {
  GiemConfig c = to_config(seed_model());
  c.branches = {BranchSpec{"moebius", {{"a", "1.3"}}}, BranchSpec{}, BranchSpec{}};
  const CliRun r = run("affine-model", write_config("moebius.json", giem_config_to_json(c)), "--scalar quad");
  EXPECT_EQ(r.code, 2);
  const json e = json::parse(r.err);
  EXPECT_EQ(e["kind"], "hypothesis_violation");
  EXPECT_NE(e["message"].get<std::string>().find("mean nonlinearity"), std::string::npos);
}

TEST_F(Cli, RigidityOfAMapWithItself) {
  const json pair = json::parse(slurp(configs / "break_pair.json"));
  const CliRun r = run("rigidity", write_config("self.json", json{{"f", pair["f"]}, {"g", pair["f"]}}.dump()),
                    "--depth 12 --scalar quad");
  ASSERT_EQ(r.code, 0) << r.err;
  const json res = r.summary()["result"];
  EXPECT_EQ(res["c8"], 1.0);
  EXPECT_EQ(res["dh_max_relative_deviation"], 0.0);
  EXPECT_TRUE(res["failures"].empty()) << res["failures"];
  for (const auto& row : csv_rows(r.dir / "pair_distance.csv")) EXPECT_EQ(std::stod(row[1]), 0) << row[0];
}

TEST_F(Cli, DifferentCombinatoricsExitWithMismatch) {
  const json pair = json::parse(slurp(configs / "break_pair.json"));
  json g = pair["f"];
  g["domain_lengths"] = {"0.5", "0.2", "0.3"};
  g.erase("image_lengths");
  const CliRun r = run("rigidity", write_config("mismatch.json", json{{"f", pair["f"]}, {"g", g}}.dump()),
                    "--depth 20 --scalar quad");
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_EQ(json::parse(r.err)["kind"], "combinatorics_mismatch");
}

TEST_F(Cli, CocycleAuditOnAnExplicitSequence) {
  json cfg = json::parse(combinatorics_to_json(p1_pi()));
  cfg["sequence"] = json::parse(sequence_to_json(seed_loop()));
  const CliRun r = run("cocycle-audit", write_config("seq.json", cfg.dump()));
  ASSERT_EQ(r.code, 0) << r.err;
  const json res = r.summary()["result"];
  EXPECT_EQ(res["intertwine_failed"], 0);
  EXPECT_EQ(res["sequence_length"], 7);
  EXPECT_TRUE(res["central_fixed_exactly"].get<bool>());
  EXPECT_EQ(csv_rows(r.dir / "cocycle_growth.csv").size(), 7u);
  EXPECT_TRUE(fs::exists(r.dir / "cocycle_audit.json"));
}

TEST_F(Cli, CocycleAuditFromAMap) {
  const CliRun r = run("cocycle-audit", configs / "charted_d3.json", "--depth 40 --scalar quad");
  ASSERT_EQ(r.code, 0) << r.err;
  const json res = r.summary()["result"];
  EXPECT_EQ(res["sequence_length"], 40);
  const std::string det = res["product_determinant"];
  EXPECT_TRUE(det == "1" || det == "-1") << det;
  EXPECT_TRUE(res["hyperbolicity"]["hyperbolic"].get<bool>());
}
