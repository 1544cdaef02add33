#include "toricq/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace toricq {

namespace {

HermitianWeights step_from_mass(const HermitianWeights& h, const SectionMass& d, const std::vector<double>& lam) {
  std::vector<double> w(h.size());
  for (std::size_t a = 0; a < h.size(); ++a) w[a] = h.logw()[a] + lam[a] + std::log(d.D[a]);
  return HermitianWeights(h.points_ptr(), std::move(w)).sl_normalized();
}

double residual_from(const SectionMass& d, const std::vector<double>& lam) {
  std::vector<double> x(d.size());
  double mean = 0.0;
  for (std::size_t a = 0; a < d.size(); ++a) {
    x[a] = std::exp(lam[a]) * d.D[a];
    mean += x[a];
  }
  mean /= static_cast<double>(d.size());
  double worst = 0.0;
  for (double v : x) worst = std::max(worst, std::abs(v - mean));
  return worst / mean;
}

// Twisted Bergman function B_{H'}/B_H normalized to unit mean against dmu of H.
std::pair<double, double> tb_range(const HermitianWeights& h, const SectionMass& d, const HermitianWeights& next,
                                   const std::vector<double>& log_b, const std::vector<double>& log_b_next) {
  std::vector<double> l(h.size());
  for (std::size_t a = 0; a < h.size(); ++a) l[a] = h.logw()[a] - next.logw()[a] + std::log(d.D[a]);
  const double log_mean = log_sum_exp(l);
  double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_b.size(); ++i) {
    const double r = log_b_next[i] - log_b[i];
    hi = std::max(hi, r);
    lo = std::min(lo, r);
  }
  return {std::exp(hi - log_mean), std::exp(lo - log_mean)};
}

void check_same_lattice(const HermitianWeights& a, const HermitianWeights& b) {
  if (!a.points().same_as(b.points())) throw std::invalid_argument("weights live on different lattice point sets");
}

}  // namespace

std::string_view mode_name(SolverMode mode) {
  switch (mode) {
    case SolverMode::Plain:
      return "plain";
    case SolverMode::FixedSigma:
      return "fixed-sigma";
    case SolverMode::AutoSigma:
      return "auto-sigma";
  }
  return "plain";
}

SolverMode parse_mode(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), '_', '-');
  if (s == "plain") return SolverMode::Plain;
  if (s == "fixed-sigma") return SolverMode::FixedSigma;
  if (s == "auto-sigma") return SolverMode::AutoSigma;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "' (plain, fixed-sigma, auto-sigma)");
}

void SolverConfig::validate(int dim) const {
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (weight_update_period < 1) throw std::invalid_argument("weight_update_period must be at least 1");
  if (mode == SolverMode::FixedSigma && static_cast<int>(sigma.size()) != dim)
    throw std::invalid_argument("fixed-sigma needs one sigma component per polytope dimension");
}

std::vector<double> IterationState::residuals() const {
  std::vector<double> r;
  r.reserve(history.size());
  for (const auto& rec : history) r.push_back(rec.residual);
  return r;
}

HermitianWeights t_step(const HermitianWeights& h, const QuadratureGrid& grid) {
  return sigma_step(h, TorusElement::zero(h.dim()), grid);
}

HermitianWeights sigma_step(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid) {
  const auto d = section_mass(h, grid);
  return step_from_mass(h, d, weight_vector(v, h.points()));
}

double residual(const SectionMass& d, const TorusElement& v) {
  return residual_from(d, weight_vector(v, *d.points));
}

double residual(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid) {
  return residual(section_mass(h, grid), v);
}

double twisted_bergman_spread(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid) {
  const auto pass = quadrature_pass(h, grid);
  const auto d = section_mass(h, pass);
  const auto next = step_from_mass(h, d, weight_vector(v, h.points()));
  const auto next_pass = quadrature_pass(next, grid, false);
  const auto [hi, lo] = tb_range(h, d, next, pass.log_bergman, next_pass.log_bergman);
  return hi / lo - 1.0;
}

IterationState solve(std::shared_ptr<const Polytope> p, int k, const SolverConfig& cfg,
                     const IterationObserver& observer) {
  if (!p) throw std::invalid_argument("solve: null polytope");
  const int m = p->dim();
  cfg.validate(m);
  const auto pts = lattice_points(p, k);
  HermitianWeights h = cfg.initial_logw ? HermitianWeights(pts, *cfg.initial_logw)
                                        : HermitianWeights::random(pts, cfg.seed);
  h = h.sl_normalized();

  IterationState st(h, cfg.mode == SolverMode::FixedSigma ? TorusElement(cfg.sigma) : TorusElement::zero(m));
  st.seed = cfg.seed;
  const auto& bary = pts->barycenter_double();

  // Early iterates only need quadrature accurate relative to their residual;
  // the grid is tightened as the residual falls and is at full accuracy when
  // convergence is declared.
  const bool adaptive = cfg.grid.resolution == 0;
  bool grid_changed = false;
  double grid_scale = 1.0;  // residual the current grid was built for
  auto options_for = [&](double r) {
    GridOptions o = cfg.grid;
    if (adaptive) {
      o.rel_tol = std::max(o.rel_tol, 1e-3 * r);
      o.mass_tol = std::max(o.mass_tol, 1e-3 * r);
    }
    return o;
  };
  auto at_full_accuracy = [&] { return !adaptive || 1e-3 * grid_scale <= std::min(cfg.grid.rel_tol, cfg.grid.mass_tol); };
  auto rebuild = [&](const HermitianWeights& cur, double r) {
    grid_scale = r;
    st.grid = make_grid(cur, options_for(r));
    ++st.grid_rebuilds;
    grid_changed = true;
  };
  grid_scale = 1.0;
  st.grid = make_grid(h, options_for(grid_scale));
  auto drifted = [&](const QuadraturePass& pass) {
    for (int j = 0; j < m; ++j)
      if (std::abs(pass.center_moment(j) - bary[j]) > 0.02 * k) return true;
    return false;
  };
  auto emit = [&](std::size_t idx) {
    if (observer) observer(st.history[idx]);
  };

  bool have_prev = false;
  std::vector<double> prev_log_b;
  std::optional<SectionMass> prev_d;
  std::optional<HermitianWeights> prev_h;

  for (int it = 0;; ++it) {
    QuadraturePass pass;
    const double r_prev = st.history.empty() ? grid_scale : st.history.back().residual;
    try {
      if (adaptive && !at_full_accuracy() && r_prev < 0.01 * grid_scale) throw GridStaleError("tighten");
      // Random starts need fine grids that the smoothed iterates no longer do.
      if (adaptive && it > 0 && it % 20 == 0 && st.grid.step < 0.99 * default_grid_step(k)) throw GridStaleError("coarsen");
      pass = quadrature_pass(h, st.grid);
      if (drifted(pass)) throw GridStaleError("moment drift");
    } catch (const GridStaleError&) {
      rebuild(h, std::min(grid_scale, std::max(r_prev, 1e-300)));
      pass = quadrature_pass(h, st.grid);
    }
    if (have_prev && !grid_changed) {
      const auto [hi, lo] = tb_range(*prev_h, *prev_d, h, prev_log_b, pass.log_bergman);
      st.history.back().tb_sup = hi;
      st.history.back().tb_inf = lo;
    }
    if (have_prev) emit(st.history.size() - 1);
    grid_changed = false;

    const SectionMass d = section_mass(h, pass);
    if (cfg.mode == SolverMode::AutoSigma && it % cfg.weight_update_period == 0) {
      st.v = optimal_weight(d, nullptr, &st.v);
    }
    const auto lam = weight_vector(st.v, *pts);
    const double r = residual_from(d, lam);
    st.history.push_back({it, r, st.v.v});
    st.residual = r;
    st.iterations = it + 1;
    st.H = h;
    st.f_max = f_character_max(d, st.v);

    const HermitianWeights next = step_from_mass(h, d, lam);
    if (r < cfg.tol && !at_full_accuracy()) {
      rebuild(h, 0.0);
    } else if (r < cfg.tol || it + 1 >= cfg.max_iter) {
      st.converged = r < cfg.tol;
      const auto next_pass = quadrature_pass(next, st.grid, false);
      const auto [hi, lo] = tb_range(h, d, next, pass.log_bergman, next_pass.log_bergman);
      st.history.back().tb_sup = hi;
      st.history.back().tb_inf = lo;
      st.tb_spread = hi / lo - 1.0;
      emit(st.history.size() - 1);
      break;
    }
    prev_log_b = std::move(pass.log_bergman);
    prev_d = d;
    prev_h = h;
    have_prev = true;
    h = next;
  }
  return st;
}

double gauge_compare(const HermitianWeights& h1, const HermitianWeights& h2) {
  check_same_lattice(h1, h2);
  const auto& pts = h1.points();
  const int m = pts.dim();
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a(n, m + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    for (int j = 0; j < m; ++j) a(i, j + 1) = static_cast<double>(pts[i][j]);
    b(i) = h1.logw()[i] - h2.logw()[i];
  }
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
  return (a * coef - b).cwiseAbs().maxCoeff();
}

namespace {

struct SplitTable {
  std::shared_ptr<const LatticePointSet> first, second;
  Eigen::MatrixXd values;  // rows: first factor, cols: second factor
};

SplitTable split_table(const HermitianWeights& h, std::shared_ptr<const Polytope> p1,
                       std::shared_ptr<const Polytope> p2) {
  const int m1 = p1->dim(), m2 = p2->dim();
  if (m1 + m2 != h.dim()) throw std::invalid_argument("split_check: polytope is not the declared product");
  SplitTable t{lattice_points(p1, h.k()), lattice_points(p2, h.k()), {}};
  if (t.first->size() * t.second->size() != h.size())
    throw std::invalid_argument("split_check: polytope is not the declared product");
  std::map<IntVector, Eigen::Index> i1, i2;
  for (std::size_t i = 0; i < t.first->size(); ++i) i1[(*t.first)[i]] = static_cast<Eigen::Index>(i);
  for (std::size_t i = 0; i < t.second->size(); ++i) i2[(*t.second)[i]] = static_cast<Eigen::Index>(i);
  t.values = Eigen::MatrixXd::Constant(t.first->size(), t.second->size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t a = 0; a < h.size(); ++a) {
    const auto& pt = h.points()[a];
    const IntVector x1(pt.begin(), pt.begin() + m1), x2(pt.begin() + m1, pt.end());
    const auto f1 = i1.find(x1), f2 = i2.find(x2);
    if (f1 == i1.end() || f2 == i2.end())
      throw std::invalid_argument("split_check: polytope is not the declared product");
    t.values(f1->second, f2->second) = h.logw()[a];
  }
  if (t.values.hasNaN()) throw std::invalid_argument("split_check: polytope is not the declared product");
  return t;
}

}  // namespace

double split_check(const HermitianWeights& h, const Polytope& first, const Polytope& second) {
  const auto t = split_table(h, std::make_shared<const Polytope>(first), std::make_shared<const Polytope>(second));
  const Eigen::VectorXd rows = t.values.rowwise().mean();
  const Eigen::RowVectorXd cols = t.values.colwise().mean();
  const double grand = t.values.mean();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < t.values.rows(); ++i)
    for (Eigen::Index j = 0; j < t.values.cols(); ++j)
      worst = std::max(worst, std::abs(t.values(i, j) - rows(i) - cols(j) + grand));
  return worst;
}

std::pair<HermitianWeights, HermitianWeights> split_factors(const HermitianWeights& h,
                                                            std::shared_ptr<const Polytope> first,
                                                            std::shared_ptr<const Polytope> second) {
  const auto t = split_table(h, std::move(first), std::move(second));
  const Eigen::VectorXd rows = t.values.rowwise().mean();
  const Eigen::RowVectorXd cols = t.values.colwise().mean();
  const double grand = t.values.mean();
  std::vector<double> f(rows.data(), rows.data() + rows.size());
  std::vector<double> g(cols.size());
  for (Eigen::Index j = 0; j < cols.size(); ++j) g[j] = cols(j) - grand;
  return {HermitianWeights(t.first, std::move(f)), HermitianWeights(t.second, std::move(g))};
}

}  // namespace toricq
