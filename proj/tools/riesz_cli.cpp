#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "riesz/cli/config.hpp"
#include "riesz/cli/experiments.hpp"
#include "riesz/cli/report.hpp"
#include "riesz/io.hpp"
#include "riesz/kelvin.hpp"
#include "riesz/verify.hpp"

namespace fs = std::filesystem;
using namespace riesz;

namespace {

enum Exit { kOk = 0, kFailure = 1, kInfeasible = 2, kNoConvergence = 3, kConfig = 4 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long> nodes;
  std::optional<double> tol;
  std::optional<int> max_iters;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--nodes", c.nodes, "node count override");
  app->add_option("--tol", c.tol, "solver tolerance (relative KKT residual)");
  app->add_option("--max-iters", c.max_iters, "iteration limit");
}

Point parse_point(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SolveOptions solve_options(const Common& c, SolveOptions o = {}) {
  if (c.tol) o.grad_tol = *c.tol;
  if (c.max_iters) o.max_iters = *c.max_iters;
  if (c.seed) o.seed = *c.seed;
  return o;
}

fs::path out_dir(const Common& c, const fs::path& fallback) {
  fs::path d = c.out.empty() ? fallback : fs::path(c.out);
  fs::create_directories(d);
  return d;
}

int run_solve(const Common& c) {
  if (c.config.empty()) throw ConfigError("solve needs --config");
  cli::RunConfig cfg = cli::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.nodes)
    for (auto& p : cfg.plates)
      if (!std::holds_alternative<PointCloudShape>(p.spec.shape)) p.spec.node_count = *c.nodes;
  cfg.solver = solve_options(c, cfg.solver);
  const auto t0 = std::chrono::steady_clock::now();
  cli::Problem prob = cli::build_problem(cfg);
  const SignedGram gram(prob.cond, prob.kernel, cfg.diag);
  const auto field = resolve_field(prob.cond, prob.spec.field, prob.kernel, cfg.diag);
  const SolveReport r = prob.spec.unconstrained() ? solve_unconstrained(prob.cond, prob.spec, gram, field, cfg.solver)
                                                  : solve_constrained(prob.cond, prob.spec, gram, field, cfg.solver);
  const KKTReport k = kkt_check(prob.cond, prob.spec, r.minimizer, gram, field, cfg.kkt_tol, cfg.seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir = out_dir(c, cfg.out_dir);
  write_weights_table(dir / "weights.csv", prob.cond, prob.spec, r.minimizer);
  cli::write_json(dir / "report.json", cli::solve_json(prob.cond, prob.spec, r, k, secs));
  std::cout << "energy " << format_real(r.energy) << "\nconverged " << (r.converged ? "yes" : "no")
            << "\nkkt " << (k.pass ? "pass" : "fail") << "\nreport " << (dir / "report.json").string() << '\n';
  return r.converged && k.pass ? kOk : kNoConvergence;
}

int run_experiment(const std::string& name, const Common& c, double q) {
  cli::Overrides ov;
  if (c.nodes) ov.nodes = *c.nodes;
  if (c.seed) ov.seed = *c.seed;
  ov.tol = c.tol;
  ov.max_iters = c.max_iters;
  ov.q = q;
  const cli::ExperimentResult r = cli::run_experiment(name, ov);
  const fs::path dir = out_dir(c, "out");
  for (const auto& t : r.tables) write_xy_table(dir / (t.name + ".txt"), t.header, t.rows);
  cli::write_json(dir / (name + ".json"), r.summary);
  std::cout << r.summary.dump(2) << '\n';
  return r.ok ? kOk : kNoConvergence;
}

int run_capacity(const Common& c, double radius, double alpha, int dim) {
  const RieszKernel k(alpha, dim);
  const Eigen::Index n = c.nodes.value_or(4000);
  const CapacityResult r =
      capacity_solve(k, sample_sphere(Point::Zero(dim), radius, n, c.seed.value_or(kDefaultSeed)), {}, solve_options(c));
  std::cout << "capacity " << format_real(r.capacity) << '\n';
  if (!c.out.empty())
    cli::write_json(out_dir(c, "out") / "capacity.json",
                    {{"radius", radius}, {"alpha", alpha}, {"dim", dim}, {"nodes", n}, {"capacity", r.capacity},
                     {"converged", r.report.converged}});
  return r.report.converged ? kOk : kNoConvergence;
}

int run_balayage(const Common& c, const std::string& point, double radius) {
  const Point y = parse_point(point);
  const int dim = static_cast<int>(y.size());
  const RieszKernel k(2.0, dim);
  const NodeSet target = sample_sphere(Point::Zero(dim), radius, c.nodes.value_or(2000), c.seed.value_or(kDefaultSeed));
  const DiscreteMeasure nu = balayage(k, dirac<false>(y), target, {}, solve_options(c));
  std::cout << "swept_mass " << format_real(nu.mass()) << '\n';
  if (!c.out.empty()) write_measure(out_dir(c, "out") / "balayage.txt", nu);
  return kOk;
}

int run_kelvin(const Common& c, const std::string& input, const std::string& center, double alpha) {
  const SignedDiscreteMeasure mu = read_measure(input);
  const Point x0 = parse_point(center);
  const RieszKernel k(alpha, mu.dim());
  const SignedDiscreteMeasure out = kelvin_transform(mu, x0, k);
  const fs::path dir = out_dir(c, "out");
  write_measure(dir / "kelvin.txt", out);
  std::cout << "wrote " << (dir / "kelvin.txt").string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Riesz energy problems for condensers"};
  app.require_subcommand(1);
  Common common;

  auto* solve = app.add_subcommand("solve", "solve the problem described by a config file");
  solve->add_option("--config", common.config, "config file")->required();
  add_common(solve, common);

  std::string exp_name;
  double q = 1.0;
  auto* exp = app.add_subcommand("experiment", "run a named experiment");
  exp->add_option("name", exp_name, "experiment name")->required()->check(CLI::IsMember(cli::experiment_names()));
  exp->add_option("--q", q, "short-circuit rate exponent");
  add_common(exp, common);

  double radius = 1.0, alpha = 2.0;
  int dim = 3;
  auto* cap = app.add_subcommand("capacity", "capacity of a sphere");
  cap->add_option("--radius", radius);
  cap->add_option("--alpha", alpha);
  cap->add_option("--dim", dim);
  add_common(cap, common);

  std::string point = "2,0,0";
  auto* bal = app.add_subcommand("balayage", "sweep a unit Dirac onto a sphere (Newtonian kernel)");
  bal->add_option("--point", point, "comma separated coordinates");
  bal->add_option("--radius", radius);
  add_common(bal, common);

  std::string input, center;
  auto* kel = app.add_subcommand("kelvin", "Kelvin transform of a measure file");
  kel->add_option("--input", input)->required();
  kel->add_option("--center", center)->required();
  kel->add_option("--alpha", alpha);
  add_common(kel, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }

  try {
    if (*solve) return run_solve(common);
    if (*exp) return run_experiment(exp_name, common, q);
    if (*cap) return run_capacity(common, radius, alpha, dim);
    if (*bal) return run_balayage(common, point, radius);
    if (*kel) return run_kelvin(common, input, center, alpha);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
