#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "isomono/cli.hpp"

using namespace isomono;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = ISOMONO_FIXTURES;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("isomono_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

cli::RunSpec spec(const std::string& command, const std::string& input, const fs::path& out) {
  cli::RunSpec s;
  s.command = command;
  s.input = input;
  s.out = out.string();
  return s;
}

io::Json load(const fs::path& p) { return io::read_json_file(p.string()); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fixture with one field replaced, written to the scratch directory.
std::string edited(const std::string& fixture, const fs::path& dir, const std::function<void(io::Json&)>& edit) {
  io::Json j = io::read_json_file(kFixtures + "/" + fixture);
  edit(j);
  const fs::path p = dir / ("edited_" + fixture);
  std::ofstream(p) << j.dump();
  return p.string();
}

}  // namespace

TEST(Cli, VerifyCommutingFixture) {
  const fs::path out = scratch("verify");
  ASSERT_EQ(cli::run(spec("verify", kFixtures + "/commuting.json", out)), cli::kOk);
  const io::Json j = load(out / "drift.json");
  const DriftReport d = io::drift_from_json(io::Node(j["drift"], "drift"));
  EXPECT_LT(d.max_abs_drift, 1e-9);
  EXPECT_LT(d.max_rel_drift, 1e-9);
  EXPECT_LT(d.max_formal_drift, 1e-9);
  EXPECT_FALSE(fs::exists(out / "trajectory.csv"));
}

TEST(Cli, MonodromyOfDiagonalOverZ) {
  const fs::path out = scratch("mono");
  ASSERT_EQ(cli::run(spec("monodromy", kFixtures + "/diag_over_z.json", out)), cli::kOk);
  const io::MonodromyRecord r = io::monodromy_from_json(io::Node(load(out / "monodromy.json"), "m"));
  ASSERT_EQ(r.matrices.size(), 1u);
  const cplx r0(0.3, 0.1), r1(-0.7, 0.2);
  EXPECT_LT(std::abs(r.matrices[0](0, 0) - std::exp(2.0 * kPi * kI * r0)), 1e-10);
  EXPECT_LT(std::abs(r.matrices[0](1, 1) - std::exp(2.0 * kPi * kI * r1)), 1e-10);
  EXPECT_LT(std::abs(r.matrices[0](0, 1)) + std::abs(r.matrices[0](1, 0)), 1e-10);
}

TEST(Cli, FlowOnRankTwoFourPoleFixture) {
  const fs::path out = scratch("flow");
  ASSERT_EQ(cli::run(spec("flow", kFixtures + "/rank2_4pole.json", out)), cli::kOk);
  ASSERT_TRUE(fs::exists(out / "trajectory.csv"));
  const io::Json j = load(out / "drift.json");
  EXPECT_LT(io::drift_from_json(io::Node(j["drift"], "drift")).max_scaled_drift, 1e-6);
  // The CSV reproduces the final state of a fresh integration exactly.
  const Connection a0 = io::connection_from_json(io::Node(load(kFixtures + "/rank2_4pole.json")["connection"], "c"));
  std::ifstream csv(out / "trajectory.csv");
  const auto rows = io::read_trajectory_csv(csv, a0);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows.front().a.poles()[1].t, a0.poles()[1].t);
  EXPECT_LT(std::abs(rows.back().a.poles()[1].t - (a0.poles()[1].t + 0.6)), 1e-9);
}

TEST(Cli, IrregularFlowTracksType) {
  const fs::path out = scratch("irr");
  ASSERT_EQ(cli::run(spec("flow", kFixtures + "/irregular.json", out)), cli::kOk);
  const io::Json j = load(out / "drift.json");
  const DriftReport d = io::drift_from_json(io::Node(j["drift"], "drift"));
  EXPECT_LT(d.max_type_tracking, 1e-8);
  EXPECT_LT(d.max_scaled_drift, 1e-6);
}

TEST(Cli, OutputsAreDeterministic) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(cli::run(spec("monodromy", kFixtures + "/rank2_4pole.json", a)), cli::kOk);
  ASSERT_EQ(cli::run(spec("monodromy", kFixtures + "/rank2_4pole.json", b)), cli::kOk);
  EXPECT_EQ(slurp(a / "monodromy.json"), slurp(b / "monodromy.json"));
  auto sa = spec("pairing", kFixtures + "/pairing.json", a), sb = spec("pairing", kFixtures + "/pairing.json", b);
  sa.seed = sb.seed = 11;
  ASSERT_EQ(cli::run(sa), cli::kOk);
  ASSERT_EQ(cli::run(sb), cli::kOk);
  EXPECT_EQ(slurp(a / "pairing.json"), slurp(b / "pairing.json"));
}

TEST(Cli, HamiltonianOutput) {
  const fs::path out = scratch("ham");
  ASSERT_EQ(cli::run(spec("hamiltonian", kFixtures + "/irregular.json", out)), cli::kOk);
  const io::Json j = load(out / "hamiltonian.json");
  EXPECT_EQ(j["mu_Q"].size(), 3u);
  ASSERT_EQ(j["beta_B"].size(), 1u);
  const Connection a = io::connection_from_json(io::Node(load(kFixtures + "/irregular.json")["connection"], "c"));
  Mat beta = zero_mat(2);
  beta(0, 0) = 0.4;
  beta(1, 1) = -0.1;
  EXPECT_EQ(io::Node(j["beta_B"][0]["value"], "v").complex(), hamiltonian_beta_B(IrregularCotangent{{beta}}, a, 0));
}

TEST(Cli, ParseErrorsExitFour) {
  const fs::path out = scratch("parse");
  std::ofstream(out / "broken.json") << "{\"connection\": {\"n\": 2,";
  EXPECT_EQ(cli::run(spec("flow", (out / "broken.json").string(), out)), cli::kParse);
  const std::string bad_kind =
      edited("commuting.json", out, [](io::Json& j) { j["flow"]["path"]["kind"] = "spiral"; });
  EXPECT_EQ(cli::run(spec("flow", bad_kind, out)), cli::kParse);
  EXPECT_EQ(cli::run(spec("dance", kFixtures + "/commuting.json", out)), cli::kParse);
  auto pins = spec("verify", kFixtures + "/commuting.json", out);
  pins.pins = {0, 1, 2, 0};
  EXPECT_EQ(cli::run(pins), cli::kParse);
  pins.pins = {1};  // the fixture path moves pole 1
  EXPECT_EQ(cli::run(pins), cli::kParse);
  pins.pins = {0, 2};
  EXPECT_EQ(cli::run(pins), cli::kOk);
  auto neg = spec("verify", kFixtures + "/commuting.json", out);
  neg.tol = -1.0;
  EXPECT_EQ(cli::run(neg), cli::kParse);
}

TEST(Cli, InvariantViolationExitsTwo) {
  const fs::path out = scratch("inv");
  const std::string strict = edited("commuting.json", out, [](io::Json& j) { j["flow"]["max_drift"] = 0.0; });
  EXPECT_EQ(cli::run(spec("verify", strict, out)), cli::kInvariant);
  EXPECT_FALSE(load(out / "drift.json")["ok"].get<bool>());
}

TEST(Cli, CollisionExitsThree) {
  const fs::path out = scratch("collide");
  const std::string crash = edited("commuting.json", out, [](io::Json& j) {
    j["flow"]["path"] = {{"kind", "line"}, {"pole", 1}, {"to", {0.0, 0.0}}};
  });
  EXPECT_EQ(cli::run(spec("flow", crash, out)), cli::kNumeric);
  EXPECT_EQ(load(out / "drift.json")["status"].get<std::string>(), "pole collision");
}
