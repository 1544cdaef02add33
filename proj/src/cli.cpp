#include "toricq/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "toricq/io.hpp"
#include "toricq/weights.hpp"

namespace toricq::cli {

namespace {

int parse_int(std::string_view s, std::string_view what) {
  int x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("bad integer '" + std::string(s) + "' in " + std::string(what));
  return x;
}

double parse_real(std::string_view s, std::string_view what) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("bad number '" + std::string(s) + "' in " + std::string(what));
  return x;
}

const nlohmann::json* find_key(const nlohmann::json& j, const std::string& key) {
  for (const auto& name : {key, [&] {
                             std::string u = key;
                             std::replace(u.begin(), u.end(), '-', '_');
                             return u;
                           }()}) {
    const auto it = j.find(name);
    if (it != j.end()) return &*it;
  }
  return nullptr;
}

std::vector<double> sample_box(const std::vector<double>& center, double half, double step) {
  const int m = static_cast<int>(center.size());
  const int per = static_cast<int>(std::lround(2.0 * half / step)) + 1;
  std::size_t total = 1;
  for (int j = 0; j < m; ++j) total *= static_cast<std::size_t>(per);
  std::vector<double> out;
  out.reserve(total * m);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (int j = 0; j < m; ++j) {
      out.push_back(center[j] - half + step * static_cast<double>(rest % per));
      rest /= per;
    }
  }
  return out;
}

bool is_standard_simplex(const Polytope& p) {
  const int m = p.dim();
  if (static_cast<int>(p.vertices().size()) != m + 1) return false;
  for (int j = -1; j < m; ++j) {
    RationalVector e(m, Rational(0));
    if (j >= 0) e[j] = 1;
    if (std::find(p.vertices().begin(), p.vertices().end(), e) == p.vertices().end()) return false;
  }
  return true;
}

// Errors below this are rounding noise; a sequence at this level counts as decreasing.
constexpr double kRoundoffFloor = 1e-10;

Rational ipow(const Rational& x, int n) {
  Rational r = 1;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

std::vector<int> parse_k_range(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find("..", start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 2;
  }
  if (parts.size() > 3) throw ConfigError("k range must be INT, A..B or A..B..STEP");
  const int a = parse_int(parts[0], "--k");
  const int b = parts.size() > 1 ? parse_int(parts[1], "--k") : a;
  const int step = parts.size() > 2 ? parse_int(parts[2], "--k") : 1;
  if (a < 1 || b < a || step < 1) throw ConfigError("k range must be positive, nonempty and increasing");
  std::vector<int> ks;
  for (int k = a; k <= b; k += step) ks.push_back(k);
  return ks;
}

std::vector<double> parse_vector(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find(',', start);
    const auto piece = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    out.push_back(parse_real(piece, "--sigma"));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (polytope_path.empty()) throw ConfigError("no polytope given (--polytope)");
  if (!std::filesystem::exists(polytope_path)) throw ConfigError("polytope file not found: " + polytope_path.string());
  if (ks.empty()) throw ConfigError("no k given (--k)");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) throw ConfigError("k must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw ConfigError("k values must be increasing");
  }
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (potential != "round" && potential != "perturbed")
    throw ConfigError("potential must be round or perturbed");
  if (!(solver.tol > 0.0)) throw ConfigError("tol must be positive");
  if (solver.max_iter < 1) throw ConfigError("max-iter must be at least 1");
  if (solver.grid.resolution != 0 && solver.grid.resolution < 32) throw ConfigError("grid-res must be at least 32");
  if (solver.grid.radius < 0.0) throw ConfigError("grid-radius must be positive or auto");
}

ExperimentConfig apply_json(const nlohmann::json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  try {
    if (const auto* x = find_key(j, "polytope")) c.polytope_path = x->get<std::string>();
    if (const auto* x = find_key(j, "k")) {
      if (x->is_number_integer()) {
        c.ks = {x->get<int>()};
      } else if (x->is_array()) {
        c.ks = x->get<std::vector<int>>();
      } else {
        c.ks = parse_k_range(x->get<std::string>());
      }
    }
    if (const auto* x = find_key(j, "mode")) c.solver.mode = parse_mode(x->get<std::string>());
    if (const auto* x = find_key(j, "sigma"))
      c.solver.sigma = x->is_array() ? x->get<std::vector<double>>() : parse_vector(x->get<std::string>());
    if (const auto* x = find_key(j, "tol")) c.solver.tol = x->get<double>();
    if (const auto* x = find_key(j, "max-iter")) c.solver.max_iter = x->get<int>();
    if (const auto* x = find_key(j, "grid-res")) c.solver.grid.resolution = x->get<int>();
    if (const auto* x = find_key(j, "grid-radius"))
      c.solver.grid.radius = x->is_string() && x->get<std::string>() == "auto" ? 0.0 : x->get<double>();
    if (const auto* x = find_key(j, "seed")) c.solver.seed = x->get<std::uint64_t>();
    if (const auto* x = find_key(j, "threads")) c.threads = x->get<int>();
    if (const auto* x = find_key(j, "out")) c.out = x->get<std::string>();
    if (const auto* x = find_key(j, "potential")) c.potential = x->get<std::string>();
    if (const auto* x = find_key(j, "epsilon")) c.epsilon = x->get<double>();
    if (const auto* x = find_key(j, "zero-weight")) c.zero_weight = x->get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

// ------------------------------------------------------------------ lattice

std::vector<LatticeRow> cmd_lattice(std::shared_ptr<const Polytope> p, const std::vector<int>& ks) {
  const auto coef = ehrhart_coefficients(*p);
  const int m = p->dim();
  std::vector<LatticeRow> rows;
  for (int k : ks) {
    LatticeRow r;
    r.k = k;
    r.count = static_cast<std::int64_t>(lattice_points(p, k)->size());
    const Rational kk(k);
    r.prediction = p->volume() * ipow(kk, m) + p->boundary_volume() / 2 * ipow(kk, m - 1);
    r.gap = Rational(r.count) - r.prediction;
    for (int i = 0; i <= m; ++i) r.ehrhart += coef[i] * ipow(kk, i);
    rows.push_back(std::move(r));
  }
  return rows;
}

// -------------------------------------------------------------------- solve

std::vector<SolveReport> run_solves(std::shared_ptr<const Polytope> p, const std::vector<int>& ks,
                                    const SolverConfig& cfg, const IterationObserver& observer) {
  std::vector<SolveReport> out;
  for (int k : ks) out.push_back({k, solve(p, k, cfg, observer)});
  return out;
}

nlohmann::json solve_summary(const SolveReport& r, SolverMode mode, int threads) {
  const auto& st = r.state;
  std::vector<double> kv(st.v.v);
  for (auto& x : kv) x *= r.k;
  return {{"k", r.k},
          {"mode", std::string(mode_name(mode))},
          {"converged", st.converged},
          {"iterations", st.iterations},
          {"residual", st.residual},
          {"v", st.v.v},
          {"kv", kv},
          {"f_max", st.f_max},
          {"twisted_bergman_spread", st.tb_spread},
          {"seed", st.seed},
          {"threads", threads},
          {"simd", std::string(simd::backend_name(simd::active_backend()))}};
}

void write_solve_outputs(const std::filesystem::path& dir, const SolveReport& r, SolverMode mode, int threads) {
  std::filesystem::create_directories(dir);
  const std::string tag = "k" + std::to_string(r.k);
  write_run_log(dir / ("run_" + tag + ".csv"), r.state);
  write_weights_csv(dir / ("weights_" + tag + ".csv"), r.state.H);
  std::ofstream js(dir / ("summary_" + tag + ".json"));
  if (!js) throw std::runtime_error("cannot write " + (dir / ("summary_" + tag + ".json")).string());
  js << solve_summary(r, mode, threads).dump(2) << "\n";
}

// ------------------------------------------------------------------ weights

WeightsReport cmd_weights(const Polytope& p, const std::vector<SolveReport>& solves) {
  if (solves.size() < 3) throw ConfigError("weights needs at least three k values to assess the trend");
  const auto theta = extremal_affine(p).linear_double();
  WeightsReport rep;
  for (const auto& s : solves) {
    WeightRow row;
    row.k = s.k;
    row.count = s.state.H.size();
    row.v = s.state.v.v;
    const auto d = section_mass(s.state.H, s.state.grid);
    row.grad_norm = g_gradient(d, s.state.v).norm();
    row.f_max = s.state.f_max;
    row.theta_linear = theta;
    for (std::size_t j = 0; j < row.v.size(); ++j) {
      row.kv.push_back(s.k * row.v[j]);
      row.k2v.push_back(double(s.k) * s.k * row.v[j]);
      row.kappa.push_back(theta[j] == 0.0 ? std::numeric_limits<double>::quiet_NaN() : row.kv[j] / theta[j]);
    }
    if (!rep.rows.empty()) {
      double s2 = 0.0;
      for (std::size_t j = 0; j < row.kv.size(); ++j) s2 += std::pow(row.kv[j] - rep.rows.back().kv[j], 2);
      row.dkv = std::sqrt(s2);
    }
    rep.rows.push_back(std::move(row));
  }
  rep.cauchy = true;
  for (std::size_t i = 2; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].dkv < rep.rows[i - 1].dkv) && rep.rows[i].dkv > kRoundoffFloor) rep.cauchy = false;
  return rep;
}

// ------------------------------------------------------------- bergman-fit

BergmanFitReport cmd_bergman_fit(std::shared_ptr<const Polytope> p, const std::vector<int>& ks,
                                 const std::string& potential, double epsilon, const GridOptions& grid) {
  const int m = p->dim();
  if (!is_standard_simplex(*p)) throw ConfigError("bergman-fit needs the standard simplex (CP^m)");
  if (ks.empty()) throw ConfigError("bergman-fit needs at least one k");
  const bool round = potential == "round";
  if (!round && potential != "perturbed") throw ConfigError("potential must be round or perturbed");
  const PotentialFunction phi = round ? round_potential(m) : perturbed_round_potential(m, epsilon);

  const auto probe = make_grid(phi, ks.back(), *p, grid);
  const auto samples = sample_box(probe.center, 3.0, m == 1 ? 0.1 : 0.5);
  const std::size_t ns = samples.size() / m;
  std::vector<double> half_s(ns);
  for (std::size_t i = 0; i < ns; ++i) half_s[i] = 0.5 * scalar_curvature(phi, samples.data() + i * m);

  BergmanFitReport rep;
  std::vector<std::vector<double>> a_k;  // per k, per sample
  for (int k : ks) {
    const auto g = make_grid(phi, k, *p, grid);
    const auto rho = bergman_function(phi, lattice_points(p, k), g);
    double oracle = 1.0;
    for (int j = 1; j <= m; ++j) oracle *= k + j;
    BergmanFitRow row;
    row.k = k;
    if (round) row.rho_error = 0.0;
    std::vector<double> a(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      const double r = rho(samples.data() + i * m);
      if (round) row.rho_error = std::max(row.rho_error, std::abs(r / oracle - 1.0));
      a[i] = r / std::pow(k, m - 1) - k;
      row.a1_error = std::max(row.a1_error, std::abs(a[i] - half_s[i]));
    }
    a_k.push_back(std::move(a));
    rep.rows.push_back(row);
  }
  if (ks.size() >= 2) {
    rep.decay_ratio = rep.rows.back().a1_error / rep.rows[rep.rows.size() - 2].a1_error;
    // a_k = A1 + A2/k + ... : exact interpolation in 1/k through all k.
    const auto n = static_cast<Eigen::Index>(ks.size());
    Eigen::MatrixXd vm(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) vm(r, c) = std::pow(1.0 / ks[r], static_cast<double>(c));
    const auto lu = vm.fullPivLu();
    rep.fit_error = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
      Eigen::VectorXd rhs(n);
      for (Eigen::Index r = 0; r < n; ++r) rhs(r) = a_k[r][i];
      rep.fit_error = std::max(rep.fit_error, std::abs(lu.solve(rhs)(0) - half_s[i]));
    }
  }
  return rep;
}

// ----------------------------------------------------------------- b1-check

B1Report cmd_b1_check(const Polytope& p, const std::vector<SolveReport>& solves, bool zero_weight) {
  if (solves.empty()) throw ConfigError("b1-check needs converged solves");
  const auto theta = extremal_affine(p);
  const int m = p.dim();
  B1Report rep;
  for (const auto& s : solves) {
    if (!s.state.converged) throw ConfigError("b1-check: solve at k=" + std::to_string(s.k) + " did not converge");
    const auto& h = s.state.H;
    const TorusElement v = zero_weight ? TorusElement::zero(m) : s.state.v;
    const auto psi = psi_function(h, v, s.state.grid);
    const auto samples = sample_box(s.state.grid.center, 2.0, 0.25);
    B1Row row;
    row.k = s.k;
    for (std::size_t i = 0; i < samples.size() / m; ++i) {
      const double* u = samples.data() + i * m;
      const auto mm = moment_and_metric(h, u);
      std::vector<double> x(m);
      for (int j = 0; j < m; ++j) x[j] = mm.moment(j) / s.k;
      const double e = s.k * std::expm1(psi(u)) - 0.5 * theta(x.data());
      row.max_error = std::max(row.max_error, std::abs(e));
    }
    const Rational kk(s.k);
    row.closed_form = kk * (Rational(static_cast<long long>(h.size())) / (ipow(kk, m) * p.volume()) - 1) -
                      p.average_scalar_curvature() / 2;
    rep.rows.push_back(std::move(row));
  }
  rep.decreasing = rep.rows.size() >= 2;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].max_error < rep.rows[i - 1].max_error) && rep.rows[i].max_error > kRoundoffFloor)
      rep.decreasing = false;
  return rep;
}

}  // namespace toricq::cli
