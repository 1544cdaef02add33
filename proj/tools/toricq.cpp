// toricq: balanced and sigma-balanced metrics on toric manifolds.
//
//   toricq lattice     --polytope P --k 1..6
//   toricq solve       --polytope P --k 4..12..2 --mode auto-sigma --out runs/
//   toricq weights     --polytope P --k 4..12..2
//   toricq bergman-fit --polytope cp1.json --k 8..32..8 --potential perturbed
//   toricq b1-check    --polytope P --k 8..12..4
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 numerical non-convergence.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "toricq/cli.hpp"
#include "toricq/io.hpp"
#include "toricq/parallel.hpp"
#include "toricq/weights.hpp"

using namespace toricq;
using toricq::cli::ConfigError;
using toricq::cli::ExperimentConfig;

namespace {

struct Flags {
  std::string config, polytope, k, mode, sigma, grid_radius, out, potential;
  double tol = 0.0, epsilon = 0.0;
  int max_iter = 0, grid_res = 0, threads = 0;
  std::uint64_t seed = 0;
  bool zero_weight = false;
};

struct Options {
  CLI::Option *config, *polytope, *k, *mode, *sigma, *tol, *max_iter, *grid_res, *grid_radius, *seed, *threads,
      *out, *potential, *epsilon, *zero_weight;
};

Options add_flags(CLI::App* app, Flags& f) {
  Options o{};
  o.config = app->add_option("--config", f.config, "JSON config file (flags win)");
  o.polytope = app->add_option("--polytope", f.polytope, "polytope JSON file");
  o.k = app->add_option("--k", f.k, "INT or A..B[..STEP]");
  o.mode = app->add_option("--mode", f.mode, "plain | fixed-sigma | auto-sigma");
  o.sigma = app->add_option("--sigma", f.sigma, "v1,...,vm for fixed-sigma");
  o.tol = app->add_option("--tol", f.tol, "residual tolerance");
  o.max_iter = app->add_option("--max-iter", f.max_iter, "iteration cap");
  o.grid_res = app->add_option("--grid-res", f.grid_res, "points per axis (default: adaptive)");
  o.grid_radius = app->add_option("--grid-radius", f.grid_radius, "FLOAT or auto");
  o.seed = app->add_option("--seed", f.seed, "seed of the random initial H");
  o.threads = app->add_option("--threads", f.threads, "worker threads");
  o.out = app->add_option("--out", f.out, "output directory");
  o.potential = app->add_option("--potential", f.potential, "bergman-fit: round | perturbed");
  o.epsilon = app->add_option("--epsilon", f.epsilon, "bergman-fit: perturbation size");
  o.zero_weight = app->add_flag("--zero-weight", f.zero_weight, "b1-check: evaluate with v = 0");
  return o;
}

ExperimentConfig build_config(const Flags& f, const Options& o, bool sigma_default) {
  ExperimentConfig c;
  if (sigma_default) c.solver.mode = SolverMode::AutoSigma;
  if (*o.config) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot read config file " + f.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(f.config + ": " + e.what());
    }
    c = cli::apply_json(j, c);
  }
  try {
    if (*o.polytope) c.polytope_path = f.polytope;
    if (*o.k) c.ks = cli::parse_k_range(f.k);
    if (*o.mode) c.solver.mode = parse_mode(f.mode);
    if (*o.sigma) c.solver.sigma = cli::parse_vector(f.sigma);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (*o.tol) c.solver.tol = f.tol;
  if (*o.max_iter) c.solver.max_iter = f.max_iter;
  if (*o.grid_res) c.solver.grid.resolution = f.grid_res;
  if (*o.grid_radius) {
    if (f.grid_radius == "auto") {
      c.solver.grid.radius = 0.0;
    } else {
      try {
        c.solver.grid.radius = std::stod(f.grid_radius);
      } catch (const std::exception&) {
        throw ConfigError("--grid-radius must be a number or auto");
      }
      if (!(c.solver.grid.radius > 0.0)) throw ConfigError("--grid-radius must be positive or auto");
    }
  }
  if (*o.seed) c.solver.seed = f.seed;
  if (*o.threads) c.threads = f.threads;
  if (*o.out) c.out = f.out;
  if (*o.potential) c.potential = f.potential;
  if (*o.epsilon) c.epsilon = f.epsilon;
  if (*o.zero_weight) c.zero_weight = f.zero_weight;
  c.validate();
  return c;
}

std::shared_ptr<const Polytope> polytope_of(const ExperimentConfig& c) {
  try {
    auto p = load_polytope(c.polytope_path);
    c.solver.validate(p->dim());
    return p;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

// Prints to stdout and, with --out, also to dir/name.
class Table {
 public:
  void line(const std::string& s) { text_ << s << "\n"; }
  void emit(const ExperimentConfig& c, const std::string& name) const {
    std::cout << text_.str();
    if (c.out) {
      std::filesystem::create_directories(*c.out);
      std::ofstream f(*c.out / name);
      f << text_.str();
    }
  }

 private:
  std::ostringstream text_;
};

std::string join(const std::vector<double>& x) {
  std::string s;
  for (std::size_t i = 0; i < x.size(); ++i) s += (i ? "," : "") + format_double(x[i]);
  return s;
}

std::string numbered(const std::string& prefix, int m) {
  std::string s;
  for (int j = 1; j <= m; ++j) s += (j > 1 ? "," : "") + prefix + std::to_string(j);
  return s;
}

void write_json(const ExperimentConfig& c, const std::string& name, const nlohmann::json& j) {
  if (!c.out) return;
  std::filesystem::create_directories(*c.out);
  std::ofstream f(*c.out / name);
  f << j.dump(2) << "\n";
}

std::vector<cli::SolveReport> solve_all(const ExperimentConfig& c, const std::shared_ptr<const Polytope>& p) {
  auto reports = cli::run_solves(p, c.ks, c.solver);
  for (const auto& r : reports) {
    if (c.out) cli::write_solve_outputs(*c.out, r, c.solver.mode, c.threads);
    if (!r.state.converged)
      std::cerr << "k=" << r.k << ": not converged after " << r.state.iterations
                << " iterations, residual " << r.state.residual << "\n";
  }
  return reports;
}

bool all_converged(const std::vector<cli::SolveReport>& rs) {
  for (const auto& r : rs)
    if (!r.state.converged) return false;
  return true;
}

int cmd_lattice(const ExperimentConfig& c) {
  const auto p = polytope_of(c);
  Table t;
  t.line("k,N_k,prediction,gap,ehrhart");
  for (const auto& r : cli::cmd_lattice(p, c.ks))
    t.line(std::to_string(r.k) + "," + std::to_string(r.count) + "," + to_string(r.prediction) + "," +
           to_string(r.gap) + "," + to_string(r.ehrhart));
  t.emit(c, "lattice.csv");
  return 0;
}

int cmd_solve(const ExperimentConfig& c) {
  const auto p = polytope_of(c);
  const auto reports = solve_all(c, p);
  Table t;
  const int m = p->dim();
  t.line("k,converged,iterations,residual," + numbered("v_", m) + "," + numbered("kv_", m) + ",twisted_bergman_spread");
  nlohmann::json all = nlohmann::json::array();
  for (const auto& r : reports) {
    std::vector<double> kv(r.state.v.v);
    for (auto& x : kv) x *= r.k;
    t.line(std::to_string(r.k) + "," + (r.state.converged ? "true" : "false") + "," +
           std::to_string(r.state.iterations) + "," + format_double(r.state.residual) + "," +
           join(r.state.v.v) + "," + join(kv) + "," + format_double(r.state.tb_spread));
    all.push_back(cli::solve_summary(r, c.solver.mode, c.threads));
  }
  t.emit(c, "solve.csv");
  write_json(c, "summary.json", all);
  return all_converged(reports) ? 0 : 2;
}

int cmd_weights(const ExperimentConfig& c) {
  const auto p = polytope_of(c);
  if (c.ks.size() < 3) throw ConfigError("weights needs at least three k values to assess the trend");
  const auto reports = solve_all(c, p);
  if (!all_converged(reports)) return 2;
  const auto rep = cli::cmd_weights(*p, reports);
  const int m = p->dim();
  Table t;
  t.line("k,N_k," + numbered("v_", m) + "," + numbered("kv_", m) + ",grad_norm,F_max,delta_kv," +
         numbered("theta_", m) + "," + numbered("kappa_", m) + "," + numbered("k2v_", m));
  for (const auto& r : rep.rows)
    t.line(std::to_string(r.k) + "," + std::to_string(r.count) + "," + join(r.v) + "," + join(r.kv) + "," +
           format_double(r.grad_norm) + "," + format_double(r.f_max) + "," + format_double(r.dkv) + "," +
           join(r.theta_linear) + "," + join(r.kappa) + "," + join(r.k2v));
  t.emit(c, "weights_report.csv");
  if (!rep.cauchy) {
    std::cerr << "increments of k v_k do not decrease\n";
    return 2;
  }
  return 0;
}

int cmd_bergman_fit(const ExperimentConfig& c) {
  const auto p = polytope_of(c);
  cli::BergmanFitReport rep;
  try {
    GridOptions g;
    g.resolution = c.solver.grid.resolution;
    g.radius = c.solver.grid.radius;
    rep = cli::cmd_bergman_fit(p, c.ks, c.potential, c.epsilon, g);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Table t;
  t.line("k,rho_error,a1_error");
  for (const auto& r : rep.rows)
    t.line(std::to_string(r.k) + "," + format_double(r.rho_error) + "," + format_double(r.a1_error));
  t.line("# fit_error=" + format_double(rep.fit_error) + " decay_ratio=" + format_double(rep.decay_ratio));
  t.emit(c, "bergman_fit.csv");
  return 0;
}

int cmd_b1_check(const ExperimentConfig& c) {
  const auto p = polytope_of(c);
  if (c.ks.size() < 2) throw ConfigError("b1-check needs at least two k values");
  const auto reports = solve_all(c, p);
  if (!all_converged(reports)) return 2;
  const auto rep = cli::cmd_b1_check(*p, reports, c.zero_weight);
  Table t;
  t.line("k,max_error,closed_form_v0");
  for (const auto& r : rep.rows)
    t.line(std::to_string(r.k) + "," + format_double(r.max_error) + "," + to_string(r.closed_form));
  t.emit(c, "b1_check.csv");
  if (!rep.decreasing) {
    std::cerr << "max |e_k| does not decrease in k\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balanced and sigma-balanced metrics on toric manifolds"};
  app.require_subcommand(1);
  struct Sub {
    CLI::App* app;
    Flags flags;
    Options opts;
    int (*run)(const ExperimentConfig&);
    bool sigma_default;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto add = [&](const char* name, const char* help, int (*run)(const ExperimentConfig&), bool sigma_default) {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(name, help);
    s->opts = add_flags(s->app, s->flags);
    s->run = run;
    s->sigma_default = sigma_default;
    subs.push_back(std::move(s));
  };
  add("lattice", "lattice counts against the Ehrhart prediction", cmd_lattice, false);
  add("solve", "run the iteration for each k", cmd_solve, false);
  add("weights", "optimal weights k v_k across k", cmd_weights, true);
  add("bergman-fit", "Bergman function expansion on CP^m", cmd_bergman_fit, false);
  add("b1-check", "first coefficient of the twisted expansion", cmd_b1_check, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  for (auto& s : subs) {
    if (!s->app->parsed()) continue;
    try {
      const auto cfg = build_config(s->flags, s->opts, s->sigma_default);
      set_thread_count(cfg.threads);
      return s->run(cfg);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    } catch (const GridStaleError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}
