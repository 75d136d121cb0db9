#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "riesz/cli/config.hpp"
#include "riesz/cli/experiments.hpp"
#include "riesz/io.hpp"
#include "riesz/verify.hpp"

namespace fs = std::filesystem;
using namespace riesz;

namespace {

const std::string kZu = R"(schema_version: 1
kernel: {alpha: 2.0, dim: 3}
seed: 5
plates:
  - {shape: sphere, center: [0, 0, 0], radius: 1.0, sign: 1, nodes: 300}
  - {shape: sphere, center: [0, 0, 0], radius: 2.0, sign: -1, nodes: 300}
solver: {grad_tol: 1.0e-9}
)";

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("riesz_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RIESZ_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string config_error(const std::string& text) {
  try {
    cli::parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesFullSchema) {
  const cli::RunConfig c = cli::parse_config(R"(schema_version: 1
kernel: {alpha: 1.5, dim: 3}
diagonal: {mode: nearest_neighbor, nn_scale: 0.8}
seed: 9
plates:
  - shape: sphere
    center: [0, 0, 0]
    radius: 1
    nodes: 50
    mass: 2
    constraint: {type: uniform_cap, total: 3}
  - {shape: revolution, r_exponent: 2, x1_min: 1, x1_max: 4, sign: -1, nodes: 40,
     constraint: {type: scaled_equilibrium, factor: 1.5}}
solver: {max_iters: 100, grad_tol: 1.0e-6, step_rule: fixed, restarts: 2, kkt_tol: 0.01}
output: {dir: results}
)",
                                             "/base");
  EXPECT_EQ(c.alpha, 1.5);
  EXPECT_EQ(c.diag.mode, DiagonalPolicy::Mode::NearestNeighbor);
  EXPECT_EQ(c.diag.nn_scale, 0.8);
  ASSERT_EQ(c.plates.size(), 2u);
  EXPECT_EQ(c.plates[0].mass, 2.0);
  EXPECT_EQ(c.plates[0].constraint.kind, cli::ConstraintRecipe::Kind::UniformCap);
  EXPECT_EQ(c.plates[1].spec.sign, -1);
  EXPECT_EQ(c.plates[1].constraint.value, 1.5);
  EXPECT_EQ(c.solver.step_rule, StepRule::FixedFromLipschitz);
  EXPECT_EQ(c.solver.restart_count, 2);
  EXPECT_EQ(c.solver.seed, 9u);
  EXPECT_EQ(c.kkt_tol, 0.01);
  EXPECT_EQ(c.out_dir, fs::path("/base/results"));
}

TEST(Config, ErrorsNameLineAndField) {
  const std::string unknown = config_error("schema_version: 1\nkernel: {alpha: 2, dim: 3}\nplats: []\n");
  EXPECT_NE(unknown.find("line 3"), std::string::npos) << unknown;
  EXPECT_NE(unknown.find("plats"), std::string::npos);

  const std::string bad_alpha = config_error("schema_version: 1\nkernel: {alpha: 5, dim: 3}\n"
                                             "plates: [{shape: sphere, center: [0,0,0], radius: 1, nodes: 5}]\n");
  EXPECT_NE(bad_alpha.find("line 2"), std::string::npos) << bad_alpha;

  const std::string wrong_type = config_error("schema_version: 1\nkernel: {alpha: 2, dim: 3}\n"
                                              "plates:\n  - shape: sphere\n    center: [0,0,0]\n    radius: big\n");
  EXPECT_NE(wrong_type.find("line 6"), std::string::npos) << wrong_type;
  EXPECT_NE(wrong_type.find("plates[0].radius"), std::string::npos);

  EXPECT_NE(config_error("schema_version: 2\n").find("unsupported"), std::string::npos);
  EXPECT_NE(config_error("kernel: [").find("line"), std::string::npos);
  EXPECT_NE(config_error(kZu + "field: {type: riesz_of_measure}\n").find("field.path"), std::string::npos);
}

TEST(Config, BuildsProblemWithRecipes) {
  const fs::path d = scratch("recipes");
  write(d / "caps.txt", [] {
    std::string s;
    for (int j = 0; j < 20; ++j) s += "0.1\n";
    return s;
  }());
  write(d / "zeta.txt", "3 0 0 1.0\n");
  const cli::RunConfig c = cli::parse_config(R"(schema_version: 1
kernel: {alpha: 2.0, dim: 3}
plates:
  - {shape: sphere, center: [0, 0, 0], radius: 1.0, nodes: 20, constraint: {type: explicit_file, path: caps.txt}}
  - {shape: sphere, center: [0, 0, 0], radius: 2.0, sign: -1, nodes: 30, constraint: {type: uniform_cap, total: 1.5}}
field: {type: riesz_of_measure, path: zeta.txt}
)",
                                             d);
  const cli::Problem p = cli::build_problem(c);
  EXPECT_EQ(p.cond.plate_count(), 2u);
  EXPECT_NEAR(p.spec.caps[0]->sum(), 2.0, 1e-12);
  EXPECT_NEAR(p.spec.caps[1]->sum(), 1.5, 1e-12);
  EXPECT_TRUE(std::holds_alternative<RieszField>(p.spec.field));
}

TEST(Cli, SolveIsDeterministicAndReloadsToAPassingCertificate) {
  const fs::path d = scratch("solve");
  write(d / "zu.yaml", kZu);
  ASSERT_EQ(run("solve --config " + (d / "zu.yaml").string() + " --out " + (d / "a").string(), d / "a.log"), 0)
      << slurp(d / "a.log");
  ASSERT_EQ(run("solve --config " + (d / "zu.yaml").string() + " --out " + (d / "b").string(), d / "b.log"), 0);
  const std::string wa = slurp(d / "a" / "weights.csv");
  EXPECT_FALSE(wa.empty());
  EXPECT_EQ(wa, slurp(d / "b" / "weights.csv"));
  EXPECT_EQ(wa.substr(0, wa.find('\n')), "plate,node_index,x1,x2,x3,weight,cap");

  const nlohmann::json rep = nlohmann::json::parse(slurp(d / "a" / "report.json"));
  EXPECT_NEAR(rep["energy"].get<double>(), 0.5, 0.025);

  // round trip: rebuild the condenser and certify the table read back from disk
  const cli::Problem p = cli::build_problem(cli::parse_config(kZu));
  const DiscreteVectorMeasure mu = read_weights_table(d / "a" / "weights.csv", p.cond);
  const KKTReport k = kkt_check(p.cond, p.spec, mu, p.kernel, DiagonalPolicy{}, 1e-3);
  EXPECT_TRUE(k.pass);
}

TEST(Cli, ExitCodes) {
  const fs::path d = scratch("exit");
  write(d / "infeasible.yaml", R"(schema_version: 1
kernel: {alpha: 2.0, dim: 3}
plates:
  - {shape: sphere, center: [0, 0, 0], radius: 1.0, nodes: 40, constraint: {type: uniform_cap, total: 0.6}}
)");
  EXPECT_EQ(run("solve --config " + (d / "infeasible.yaml").string() + " --out " + d.string(), d / "inf.log"), 2);
  EXPECT_NE(slurp(d / "inf.log").find("0.4"), std::string::npos) << slurp(d / "inf.log");

  write(d / "bad.yaml", "schema_version: 1\nkernel: {alpha: 2.0, dim: 3}\nplates: [{shape: cube, nodes: 3}]\n");
  EXPECT_EQ(run("solve --config " + (d / "bad.yaml").string(), d / "bad.log"), 4);
  EXPECT_NE(slurp(d / "bad.log").find("plates[0].shape"), std::string::npos);
  EXPECT_EQ(run("solve --config " + (d / "missing.yaml").string(), d / "missing.log"), 4);
  EXPECT_EQ(run("experiment no_such_thing", d / "name.log"), 4);

  write(d / "slow.yaml", kZu + "output: {dir: slow}\n");
  EXPECT_EQ(run("solve --config " + (d / "slow.yaml").string() + " --max-iters 2", d / "slow.log"), 3);
}

TEST(Cli, CapacityAndKelvinSubcommands) {
  const fs::path d = scratch("sub");
  ASSERT_EQ(run("capacity --radius 2 --nodes 800 --out " + d.string(), d / "cap.log"), 0);
  const nlohmann::json cap = nlohmann::json::parse(slurp(d / "capacity.json"));
  EXPECT_NEAR(cap["capacity"].get<double>(), 2.0, 0.1);

  write(d / "mu.txt", "0.5 0 0 1.0\n0 2 0 -0.25\n");
  ASSERT_EQ(run("kelvin --input " + (d / "mu.txt").string() + " --center 0,0,0 --out " + d.string(), d / "k.log"), 0);
  const SignedDiscreteMeasure out = read_measure(d / "kelvin.txt");
  ASSERT_EQ(out.size(), 2);
  EXPECT_NEAR(out.points(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(out.weights(0), 2.0, 1e-14);   // 0.5^(2-3)
  EXPECT_NEAR(out.weights(1), -0.125, 1e-14);
}

TEST(Experiments, SmallRuns) {
  cli::Overrides ov;
  ov.nodes = 300;
  const cli::ExperimentResult zu = cli::run_experiment("zu", ov);
  EXPECT_TRUE(zu.ok);
  ASSERT_FALSE(zu.tables.empty());
  const cli::ExperimentResult cap = cli::run_experiment("capacity_sweep", ov);
  ASSERT_EQ(cap.tables.front().rows.size(), 3u);
  for (const auto& row : cap.tables.front().rows) EXPECT_NEAR(row[1], row[0], 0.1 * row[0]);
  EXPECT_THROW(cli::run_experiment("nope", ov), ConfigError);
}
