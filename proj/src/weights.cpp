#include "toricq/weights.hpp"

#include <cmath>
#include <stdexcept>

#include "toricq/parallel.hpp"

namespace toricq {

namespace {

void check_same(const SectionMass& d, const TorusElement& v) {
  if (!d.points) throw std::invalid_argument("section mass without lattice");
  if (v.dim() != d.points->dim()) throw std::invalid_argument("torus element has wrong dimension");
}

// Centered lattice coordinates (a - abar) as an N x m matrix.
Eigen::MatrixXd centered(const LatticePointSet& pts) {
  const int m = pts.dim();
  Eigen::MatrixXd c(pts.size(), m);
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (int j = 0; j < m; ++j) c(a, j) = to_double(Rational(pts[a][j]) - pts.barycenter()[j]);
  return c;
}

double neumaier_sum(const std::vector<double>& x) {
  double s = 0.0, c = 0.0;
  for (double v : x) {
    const double t = s + v;
    c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
    s = t;
  }
  return s + c;
}

}  // namespace

double SectionMass::total() const { return neumaier_sum(D); }

std::vector<double> weight_vector(const TorusElement& v, const LatticePointSet& points) {
  if (v.dim() != points.dim()) throw std::invalid_argument("weight_vector: dimension mismatch");
  const Eigen::MatrixXd c = centered(points);
  std::vector<double> lam(points.size());
  for (std::size_t a = 0; a < points.size(); ++a) {
    double s = 0.0;
    for (int j = 0; j < v.dim(); ++j) s += c(a, j) * v.v[j];
    lam[a] = s;
  }
  const double mean = neumaier_sum(lam) / static_cast<double>(lam.size());
  for (auto& x : lam) x -= mean;
  return lam;
}

SectionMass section_mass(const HermitianWeights& h, const QuadraturePass& pass) {
  const double total = h.points().scaled_volume();
  SectionMass d{h.points_ptr(), std::vector<double>(h.size())};
  for (std::size_t a = 0; a < h.size(); ++a) d.D[a] = pass.mass[a] / total;
  return d;
}

SectionMass section_mass(const HermitianWeights& h, const QuadratureGrid& grid) {
  return section_mass(h, quadrature_pass(h, grid));
}

double g_functional(const SectionMass& d, const TorusElement& v) {
  check_same(d, v);
  const auto lam = weight_vector(v, *d.points);
  std::vector<double> l(lam.size());
  for (std::size_t a = 0; a < lam.size(); ++a) l[a] = lam[a] + std::log(d.D[a]);
  return std::exp(log_sum_exp(l));
}

Eigen::VectorXd g_gradient(const SectionMass& d, const TorusElement& v) {
  check_same(d, v);
  const Eigen::MatrixXd c = centered(*d.points);
  const auto lam = weight_vector(v, *d.points);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(v.dim());
  for (std::size_t a = 0; a < lam.size(); ++a) g += std::exp(lam[a]) * d.D[a] * c.row(a).transpose();
  return g;
}

Eigen::MatrixXd g_hessian(const SectionMass& d, const TorusElement& v) {
  check_same(d, v);
  const Eigen::MatrixXd c = centered(*d.points);
  const auto lam = weight_vector(v, *d.points);
  Eigen::MatrixXd hs = Eigen::MatrixXd::Zero(v.dim(), v.dim());
  for (std::size_t a = 0; a < lam.size(); ++a)
    hs += std::exp(lam[a]) * d.D[a] * c.row(a).transpose() * c.row(a);
  return hs;
}

TorusElement optimal_weight(const SectionMass& d, OptimalWeightInfo* info, const TorusElement* start) {
  const int m = d.points->dim();
  TorusElement v = start ? *start : TorusElement::zero(m);
  check_same(d, v);
  double gv = g_functional(d, v);
  Eigen::VectorXd g = g_gradient(d, v);
  int it = 0;
  for (; it < 100 && g.norm() >= 1e-12; ++it) {
    const Eigen::MatrixXd hs = g_hessian(d, v);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-300))
      throw std::runtime_error("optimal_weight: G-Hessian is numerically singular");
    const Eigen::VectorXd step = ldlt.solve(-g);
    // Once the Newton decrement is below roundoff of G the line search cannot
    // see a decrease; the full step is safe there.
    if (-g.dot(step) < 1e-14 * gv) {
      for (int j = 0; j < m; ++j) v.v[j] += step(j);
      gv = g_functional(d, v);
      g = g_gradient(d, v);
      continue;
    }
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      TorusElement trial(v);
      for (int j = 0; j < m; ++j) trial.v[j] += t * step(j);
      const double gt = g_functional(d, trial);
      if (gt < gv && gt <= gv + 1e-4 * t * g.dot(step)) {
        v = std::move(trial);
        gv = gt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    g = g_gradient(d, v);
  }
  if (info) {
    info->iterations = it;
    info->grad_norm = g.norm();
  }
  if (g.norm() >= 1e-12)
    throw std::runtime_error("optimal_weight: Newton iteration stopped at gradient norm " + std::to_string(g.norm()) +
                             " after " + std::to_string(it) + " steps");
  return v;
}

double f_character(const SectionMass& d, const TorusElement& v, const TorusElement& a) {
  check_same(d, v);
  check_same(d, a);
  const auto lv = weight_vector(v, *d.points);
  const auto la = weight_vector(a, *d.points);
  double s = 0.0;
  for (std::size_t i = 0; i < lv.size(); ++i) s += la[i] * std::exp(lv[i]) * d.D[i];
  return -s;
}

double f_character_max(const SectionMass& d, const TorusElement& v) {
  double out = 0.0;
  for (int j = 0; j < v.dim(); ++j) {
    TorusElement e = TorusElement::zero(v.dim());
    e.v[j] = 1.0;
    out = std::max(out, std::abs(f_character(d, v, e)));
  }
  return out;
}

double f_character_direct(const HermitianWeights& h, const TorusElement& v, const TorusElement& a,
                          const QuadratureGrid& grid) {
  const int m = h.dim();
  if (v.dim() != m || a.dim() != m) throw std::invalid_argument("f_character_direct: dimension mismatch");
  const auto lv = weight_vector(v, h.points());
  const auto la = weight_vector(a, h.points());
  std::vector<double> g(lv.size());
  for (std::size_t i = 0; i < lv.size(); ++i) g[i] = std::exp(lv[i]);
  const auto& coords = h.points().coordinates();
  const std::size_t n = h.size();
  const auto acc = integrate_over_grid(h, grid, 1, [&](const NodeSample& s, double* out) {
    const double inv = 1.0 / s.moments->sum;
    double f = 0.0, theta = 0.0;
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd d(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = s.weights[i] * inv;
      f += g[i] * p;
      theta += la[i] * p;
      for (int j = 0; j < m; ++j) d(j) = coords[j][i] - s.moments->mean[j];
      second.noalias() += (g[i] * p) * d * d.transpose();
    }
    Eigen::MatrixXd cov(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) cov(i, j) = s.moments->cov[i][j];
    const Eigen::MatrixXd hess_f = 4.0 * second - 4.0 * f * cov;
    const double lap = -(4.0 * cov).ldlt().solve(hess_f).trace();
    out[0] += s.quad_weight * s.density * theta * (f + lap);
  });
  return -acc[0] / h.points().scaled_volume();
}

TorusElement quantized_field(std::shared_ptr<const Polytope> p, int k, const WeightSolver& solver) {
  TorusElement v = solver(std::move(p), k);
  for (auto& x : v.v) x *= k;
  return v;
}

}  // namespace toricq
