#include "toricq/quantization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "toricq/parallel.hpp"

namespace toricq {

namespace {

constexpr std::size_t kChunk = 256;

double det_small(const double c[simd::kMaxDim][simd::kMaxDim], int m, double scale) {
  switch (m) {
    case 1:
      return scale * c[0][0];
    case 2:
      return scale * scale * (c[0][0] * c[1][1] - c[0][1] * c[1][0]);
    default:
      return scale * scale * scale *
             (c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0]) +
              c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]));
  }
}

// Softmax statistics of one H at arbitrary points. Copies share the padded
// lattice and bias; each copy owns its scratch buffer.
class Evaluator {
 public:
  explicit Evaluator(const HermitianWeights& h) : shared_(std::make_shared<Shared>(h)) {
    scratch_.assign(shared_->lattice.padded(), 0.0);
  }
  Evaluator(const Evaluator& other) : shared_(other.shared_), scratch_(other.scratch_.size(), 0.0) {}
  Evaluator& operator=(const Evaluator&) = delete;

  simd::SoftmaxMoments operator()(const double* u) {
    return simd::active_kernels().softmax_moments(shared_->lattice.view(), shared_->bias.data(), u, scratch_.data());
  }
  [[nodiscard]] const double* weights() const { return scratch_.data(); }

 private:
  struct Shared {
    explicit Shared(const HermitianWeights& h) : lattice(h.points().coordinates()) {
      std::vector<double> b(h.size());
      for (std::size_t a = 0; a < h.size(); ++a) b[a] = -h.logw()[a];
      bias = lattice.pad_bias(b);
    }
    simd::PaddedLattice lattice;
    std::vector<double> bias;
  };
  std::shared_ptr<const Shared> shared_;
  std::vector<double> scratch_;
};

void check_point(const double* u, int m) {
  for (int j = 0; j < m; ++j)
    if (!std::isfinite(u[j])) throw std::invalid_argument("non-finite evaluation point");
}

// Minimizes f with grad f = target-relative moment and Hessian `jac`, by damped Newton.
std::vector<double> newton_center(int m, const std::function<double(const Eigen::VectorXd&)>& f,
                                  const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>& gh) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m), g(m);
  Eigen::MatrixXd hess(m, m);
  double fu = f(u);
  for (int it = 0; it < 200; ++it) {
    gh(u, g, hess);
    if (g.norm() < 1e-13) break;
    Eigen::VectorXd step = hess.ldlt().solve(-g);
    if (!step.allFinite()) step = -g;
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::VectorXd trial = u + t * step;
      const double ft = f(trial);
      if (ft <= fu + 1e-4 * t * g.dot(step)) {
        u = trial;
        fu = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return std::vector<double>(u.data(), u.data() + m);
}

// Samples of the box boundary {|u - c|_inf = R}.
std::vector<std::vector<double>> box_boundary(const std::vector<double>& c, double r) {
  const int m = static_cast<int>(c.size());
  const int per = m == 1 ? 1 : (m == 2 ? 64 : 16);
  std::vector<std::vector<double>> out;
  for (int face = 0; face < m; ++face)
    for (int side = -1; side <= 1; side += 2) {
      std::vector<int> idx(m, 0);
      while (true) {
        std::vector<double> u(c);
        int q = 0;
        for (int j = 0; j < m; ++j) {
          if (j == face) {
            u[j] += side * r;
          } else {
            u[j] += -r + 2.0 * r * idx[q] / per;
            ++q;
          }
        }
        out.push_back(std::move(u));
        int d = 0;
        while (d < m - 1 && ++idx[d] > per) idx[d++] = 0;
        if (d == m - 1) break;
      }
    }
  return out;
}

QuadratureGrid tensor_grid(const std::vector<double>& center, double radius, int resolution, double rel_tol) {
  const int m = static_cast<int>(center.size());
  if (resolution < 32) throw std::invalid_argument("grid resolution must be at least 32 per axis");
  QuadratureGrid g;
  g.dim = m;
  g.center = center;
  g.radius = radius;
  g.resolution = resolution;
  g.step = 2.0 * radius / (resolution - 1);
  g.rel_tol = rel_tol;
  std::size_t n = 1;
  for (int j = 0; j < m; ++j) n *= static_cast<std::size_t>(resolution);
  g.nodes.resize(n * m);
  g.weights.resize(n);
  std::vector<int> idx(m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    for (int j = 0; j < m; ++j) {
      g.nodes[i * m + j] = center[j] - radius + idx[j] * g.step;
      w *= (idx[j] == 0 || idx[j] == resolution - 1) ? 0.5 * g.step : g.step;
    }
    g.weights[i] = w;
    for (int j = m - 1; j >= 0; --j) {
      if (++idx[j] < resolution) break;
      idx[j] = 0;
    }
  }
  return g;
}

double tail_radius(const std::vector<double>& center, const GridOptions& opts,
                   const std::function<double(const double*)>& density) {
  if (opts.radius > 0.0) return opts.radius;
  const double peak = density(center.data());
  double r = 4.0;
  while (r < 400.0) {
    double edge = 0.0;
    for (const auto& u : box_boundary(center, r)) edge = std::max(edge, density(u.data()));
    if (edge <= opts.tail_tol * peak) break;
    r *= 1.25;
  }
  return r;
}

std::string miss_message(double err) {
  std::ostringstream msg;
  msg << "quadrature grid misses the volume k^m Vol(P) by " << err << "; increase the radius or the resolution";
  return msg.str();
}

// Refines the step from default_grid_step(k) by factors 3/4 until `settled`
// accepts a pair (coarse, fine) of grids. Trapezoid errors fall geometrically
// with the step, so once the two agree the coarse one is already within the
// tolerance; it is returned when keep_coarse is set.
QuadratureGrid refine_grid(const std::vector<double>& center, double r, int k, const GridOptions& opts,
                           const std::function<bool(const QuadratureGrid&, const QuadratureGrid&)>& settled,
                           bool keep_coarse = false) {
  const int m = static_cast<int>(center.size());
  const double max_nodes = m == 1 ? 1e6 : (m == 2 ? 4e6 : 2e7);
  auto build = [&](double h) {
    const int res = std::max(32, static_cast<int>(std::ceil(2.0 * r / h)) + 1);
    if (std::pow(static_cast<double>(res), m) > max_nodes)
      throw GridStaleError("quadrature grid refinement exceeded the node budget; integrand too rough");
    return tensor_grid(center, r, res, opts.rel_tol);
  };
  double h = default_grid_step(k);
  QuadratureGrid coarse = build(h);
  while (true) {
    h *= 0.75;
    QuadratureGrid fine = build(h);
    if (settled(coarse, fine)) return keep_coarse ? coarse : fine;
    coarse = std::move(fine);
  }
}

// x_j = e^{2u_j} / (1 + sum e^{2u}); y_j = 1 - x_j formed without cancellation.
double round_log_partition(int m, const double* u, double* x, double* y = nullptr) {
  double hi = 0.0;
  for (int j = 0; j < m; ++j) hi = std::max(hi, 2.0 * u[j]);
  double s = std::exp(-hi);
  for (int j = 0; j < m; ++j) s += std::exp(2.0 * u[j] - hi);
  for (int j = 0; j < m; ++j) x[j] = std::exp(2.0 * u[j] - hi) / s;
  if (y) {
    const double x0 = std::exp(-hi) / s;
    for (int j = 0; j < m; ++j) {
      y[j] = x0;
      for (int l = 0; l < m; ++l)
        if (l != j) y[j] += x[l];
    }
  }
  return hi + std::log(s);
}

}  // namespace

double TorusElement::norm() const {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double v : x) s += std::exp(v - hi);
  return hi + std::log(s);
}

// ---------------------------------------------------------------- weights

HermitianWeights::HermitianWeights(std::shared_ptr<const LatticePointSet> points, std::vector<double> logw)
    : points_(std::move(points)), logw_(std::move(logw)) {
  if (!points_) throw std::invalid_argument("HermitianWeights: null lattice");
  if (logw_.size() != points_->size()) throw std::invalid_argument("HermitianWeights: length differs from N_k");
  for (double x : logw_)
    if (!std::isfinite(x)) throw std::invalid_argument("HermitianWeights: non-finite log-weight");
}

HermitianWeights HermitianWeights::uniform(std::shared_ptr<const LatticePointSet> points) {
  const std::size_t n = points->size();
  return {std::move(points), std::vector<double>(n, 0.0)};
}

HermitianWeights HermitianWeights::random(std::shared_ptr<const LatticePointSet> points, std::uint64_t seed,
                                          double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  std::vector<double> w(points->size());
  for (auto& x : w) x = dist(rng);
  return {std::move(points), std::move(w)};
}

HermitianWeights HermitianWeights::sl_normalized() const {
  const double mean = pairwise_sum(logw_) / static_cast<double>(logw_.size());
  std::vector<double> w(logw_);
  for (auto& x : w) x -= mean;
  return {points_, std::move(w)};
}

HermitianWeights HermitianWeights::scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("scale must be positive");
  std::vector<double> w(logw_);
  const double lc = std::log(c);
  for (auto& x : w) x += lc;
  return {points_, std::move(w)};
}

// ------------------------------------------------------------- potentials

PotentialFunction fs_potential(const HermitianWeights& h) {
  // Each call works on its own copy so the potential can be used from several threads.
  const auto proto = std::make_shared<const Evaluator>(h);
  const int m = h.dim();
  const double k = h.k();
  const double log_n = std::log(static_cast<double>(h.size()));
  PotentialFunction phi;
  phi.dim = m;
  phi.value = [proto, k, log_n](const double* u) { return (Evaluator(*proto)(u).log_sum - log_n) / k; };
  phi.gradient = [proto, k, m](const double* u, double* g) {
    const auto s = Evaluator(*proto)(u);
    for (int j = 0; j < m; ++j) g[j] = 2.0 * s.mean[j] / k;
  };
  phi.hessian = [proto, k, m](const double* u, double* hs) {
    const auto s = Evaluator(*proto)(u);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) hs[i * m + j] = 4.0 * s.cov[i][j] / k;
  };
  return phi;
}

PotentialFunction round_potential(int dim) { return perturbed_round_potential(dim, 0.0); }

PotentialFunction perturbed_round_potential(int dim, double eps) {
  if (dim < 1 || dim > simd::kMaxDim) throw std::invalid_argument("potential dimension must be 1..3");
  const int m = dim;
  PotentialFunction phi;
  phi.dim = m;
  phi.value = [m, eps](const double* u) {
    double x[simd::kMaxDim], y[simd::kMaxDim];
    double v = round_log_partition(m, u, x, y);
    for (int j = 0; j < m; ++j) v += eps * 4.0 * x[j] * y[j];
    return v;
  };
  // J[j][i] = d x_j / d u_i; the diagonal 2 x_j y_j keeps its relative accuracy far out.
  auto jacobian = [m](const double* x, const double* y, double jac[simd::kMaxDim][simd::kMaxDim]) {
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) jac[j][i] = i == j ? 2.0 * x[j] * y[j] : -2.0 * x[i] * x[j];
  };
  phi.gradient = [m, eps, jacobian](const double* u, double* g) {
    double x[simd::kMaxDim], y[simd::kMaxDim], jac[simd::kMaxDim][simd::kMaxDim];
    round_log_partition(m, u, x, y);
    jacobian(x, y, jac);
    for (int i = 0; i < m; ++i) {
      g[i] = 2.0 * x[i];
      for (int j = 0; j < m; ++j) g[i] += eps * 4.0 * (y[j] - x[j]) * jac[j][i];
    }
  };
  phi.hessian = [m, eps, jacobian](const double* u, double* hs) {
    double x[simd::kMaxDim], y[simd::kMaxDim], jac[simd::kMaxDim][simd::kMaxDim];
    round_log_partition(m, u, x, y);
    jacobian(x, y, jac);
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < m; ++l) {
        double v = 2.0 * jac[i][l];
        for (int j = 0; j < m; ++j) {
          // d J[j][i] / d u_l
          const double d2 = i == j ? 2.0 * jac[j][l] * (y[j] - x[j])
                                   : -2.0 * (jac[i][l] * x[j] + x[i] * jac[j][l]);
          v += eps * (-8.0 * jac[j][i] * jac[j][l] + 4.0 * (y[j] - x[j]) * d2);
        }
        hs[i * m + l] = v;
      }
  };
  return phi;
}

PotentialFunction potential_from_values(int dim, std::function<double(const double*)> value, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  auto f = std::make_shared<std::function<double(const double*)>>(std::move(value));
  const int m = dim;
  PotentialFunction phi;
  phi.dim = m;
  phi.fd_step = h;
  phi.value = [f](const double* u) { return (*f)(u); };
  phi.gradient = [f, m, h](const double* u, double* g) {
    std::vector<double> p(u, u + m);
    for (int j = 0; j < m; ++j) {
      p[j] = u[j] + h;
      const double fp = (*f)(p.data());
      p[j] = u[j] - h;
      const double fm = (*f)(p.data());
      p[j] = u[j];
      g[j] = (fp - fm) / (2.0 * h);
    }
  };
  phi.hessian = [f, m, h](const double* u, double* hs) {
    std::vector<double> p(u, u + m);
    const double f0 = (*f)(u);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        double v;
        if (i == j) {
          p[i] = u[i] + h;
          const double fp = (*f)(p.data());
          p[i] = u[i] - h;
          const double fm = (*f)(p.data());
          p[i] = u[i];
          v = (fp - 2.0 * f0 + fm) / (h * h);
        } else {
          double s = 0.0;
          for (int a = -1; a <= 1; a += 2)
            for (int b = -1; b <= 1; b += 2) {
              p[i] = u[i] + a * h;
              p[j] = u[j] + b * h;
              s += a * b * (*f)(p.data());
            }
          p[i] = u[i];
          p[j] = u[j];
          v = s / (4.0 * h * h);
        }
        hs[i * m + j] = hs[j * m + i] = v;
      }
  };
  return phi;
}

// --------------------------------------------------------- point evaluations

double log_bergman_density(const HermitianWeights& h, const double* u) {
  check_point(u, h.dim());
  Evaluator ev(h);
  return ev(u).log_sum;
}

double bergman_density(const HermitianWeights& h, const double* u) { return std::exp(log_bergman_density(h, u)); }

MomentMetric moment_and_metric(const HermitianWeights& h, const double* u) {
  check_point(u, h.dim());
  Evaluator ev(h);
  const auto s = ev(u);
  const int m = h.dim();
  MomentMetric out{Eigen::VectorXd(m), Eigen::MatrixXd(m, m)};
  for (int i = 0; i < m; ++i) {
    out.moment(i) = s.mean[i];
    for (int j = 0; j < m; ++j) out.metric(i, j) = 2.0 * s.cov[i][j];
  }
  return out;
}

// ------------------------------------------------------------------ grids

double default_grid_step(int k) { return std::min(0.2, 0.55 / std::sqrt(static_cast<double>(std::max(k, 1)))); }

QuadratureGrid make_grid(const HermitianWeights& h, const GridOptions& opts) {
  const int m = h.dim();
  const auto& bary = h.points().barycenter_double();
  Evaluator ev(h);
  auto f = [&](const Eigen::VectorXd& u) {
    double v = 0.5 * ev(u.data()).log_sum;
    for (int j = 0; j < m; ++j) v -= bary[j] * u(j);
    return v;
  };
  auto gh = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g, Eigen::MatrixXd& hs) {
    const auto s = ev(u.data());
    for (int i = 0; i < m; ++i) {
      g(i) = s.mean[i] - bary[i];
      for (int j = 0; j < m; ++j) hs(i, j) = 2.0 * s.cov[i][j];
    }
  };
  const auto center = newton_center(m, f, gh);
  auto density = [&](const double* u) {
    const auto s = ev(u);
    return det_small(s.cov, m, 2.0);
  };
  const double r = tail_radius(center, opts, density);
  const double target = h.points().scaled_volume();
  if (opts.resolution > 0) {
    QuadratureGrid g = tensor_grid(center, r, opts.resolution, opts.rel_tol);
    const double err = std::abs(quadrature_pass(h, g, false).volume / target - 1.0);
    if (!(err <= opts.rel_tol)) throw GridStaleError(miss_message(err));
    return g;
  }
  // Doubling test on the section masses themselves; the total volume alone is
  // far less sensitive to the step than the individual masses.
  std::optional<QuadraturePass> last;
  int last_res = 0;
  return refine_grid(center, r, h.k(), opts, [&](const QuadratureGrid& coarse, const QuadratureGrid& fine) {
    if (last_res != coarse.resolution || !last) last = quadrature_pass(h, coarse, false);
    auto next = quadrature_pass(h, fine, false);
    double worst = std::abs(next.volume / target - 1.0) / opts.rel_tol;
    for (std::size_t a = 0; a < h.size(); ++a)
      worst = std::max(worst, std::abs(last->mass[a] - next.mass[a]) / next.mass[a] / opts.mass_tol);
    last = std::move(next);
    last_res = fine.resolution;
    return worst <= 1.0;
  }, true);
}

QuadratureGrid make_grid(const PotentialFunction& phi, int k, const Polytope& p, const GridOptions& opts) {
  const int m = phi.dim;
  if (m != p.dim()) throw std::invalid_argument("potential and polytope dimensions differ");
  std::vector<double> bary(m);
  for (int j = 0; j < m; ++j) bary[j] = to_double(p.barycenter()[j]);
  std::vector<double> buf(m * m);
  auto f = [&](const Eigen::VectorXd& u) {
    double v = 0.5 * phi.value(u.data());
    for (int j = 0; j < m; ++j) v -= bary[j] * u(j);
    return v;
  };
  auto gh = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g, Eigen::MatrixXd& hs) {
    phi.gradient(u.data(), buf.data());
    for (int j = 0; j < m; ++j) g(j) = 0.5 * buf[j] - bary[j];
    phi.hessian(u.data(), buf.data());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) hs(i, j) = 0.5 * buf[i * m + j];
  };
  const auto center = newton_center(m, f, gh);
  auto density = [&](const double* u) {
    std::vector<double> hs(m * m);
    phi.hessian(u, hs.data());
    Eigen::Map<Eigen::MatrixXd> mat(hs.data(), m, m);
    return (0.5 * k * mat).determinant();
  };
  const double target = std::pow(static_cast<double>(k), m) * to_double(p.volume());
  auto total = [&](const QuadratureGrid& g) {
    return chunked_reduce(g.size(), 1, kChunk, [&](std::size_t b, std::size_t e, double* acc) {
      for (std::size_t i = b; i < e; ++i) acc[0] += g.weights[i] * density(g.node(i));
    })[0];
  };
  const double r = tail_radius(center, opts, density);
  if (opts.resolution > 0) {
    QuadratureGrid g = tensor_grid(center, r, opts.resolution, opts.rel_tol);
    const double err = std::abs(total(g) / target - 1.0);
    if (!(err <= opts.rel_tol)) throw GridStaleError(miss_message(err));
    return g;
  }
  return refine_grid(center, r, k, opts, [&](const QuadratureGrid&, const QuadratureGrid& fine) {
    return std::abs(total(fine) / target - 1.0) <= 1e-3 * opts.rel_tol;
  });
}

// -------------------------------------------------------------- integrals

std::vector<double> integrate_over_grid(const HermitianWeights& h, const QuadratureGrid& grid, std::size_t components,
                                        const NodeVisitor& visit) {
  if (grid.dim != h.dim()) throw std::invalid_argument("grid and weights have different dimensions");
  const Evaluator proto(h);
  const int m = h.dim();
  return chunked_reduce(grid.size(), components, kChunk, [&](std::size_t b, std::size_t e, double* acc) {
    Evaluator ev(proto);
    for (std::size_t i = b; i < e; ++i) {
      const double* u = grid.node(i);
      const auto s = ev(u);
      const NodeSample sample{i, u, &s, ev.weights(), grid.weights[i], det_small(s.cov, m, 2.0)};
      visit(sample, acc);
    }
  });
}

QuadraturePass quadrature_pass(const HermitianWeights& h, const QuadratureGrid& grid, bool validate) {
  const std::size_t n = h.size();
  QuadraturePass out;
  out.log_bergman.assign(grid.size(), 0.0);
  const auto& kern = simd::active_kernels();
  auto acc = integrate_over_grid(h, grid, n + 1, [&](const NodeSample& s, double* a) {
    const double w = s.quad_weight * s.density;
    kern.axpy(n, w / s.moments->sum, s.weights, a);
    a[n] += w;
    out.log_bergman[s.index] = s.moments->log_sum;
  });
  out.volume = acc[n];
  acc.resize(n);
  out.mass = std::move(acc);
  out.center_moment = moment_and_metric(h, grid.center.data()).moment;
  if (validate) {
    const double target = h.points().scaled_volume();
    const double err = std::abs(out.volume / target - 1.0);
    if (!(err <= grid.rel_tol)) {
      std::ostringstream msg;
      msg << "quadrature grid misses the volume k^m Vol(P) by " << err << "; rebuild it or increase radius/resolution";
      throw GridStaleError(msg.str());
    }
  }
  return out;
}

HermitianWeights hilb(const HermitianWeights& h, const QuadratureGrid& grid) {
  const auto pass = quadrature_pass(h, grid);
  const double n = static_cast<double>(h.size());
  const double scale = std::log(n / h.points().scaled_volume());
  std::vector<double> w(h.size());
  for (std::size_t a = 0; a < h.size(); ++a) w[a] = h.logw()[a] + scale + std::log(pass.mass[a]);
  return {h.points_ptr(), std::move(w)};
}

// ---------------------------------------------------------------- Bergman

BergmanFunction::BergmanFunction(PotentialFunction phi, std::shared_ptr<const LatticePointSet> points,
                                 std::vector<double> log_hilb)
    : phi_(std::move(phi)), points_(std::move(points)), log_hilb_(std::move(log_hilb)) {}

double BergmanFunction::operator()(const double* u) const {
  const int m = phi_.dim;
  const auto& pts = points_->points();
  std::vector<double> l(pts.size());
  for (std::size_t b = 0; b < pts.size(); ++b) {
    double v = -log_hilb_[b];
    for (int j = 0; j < m; ++j) v += 2.0 * pts[b][j] * u[j];
    l[b] = v;
  }
  return std::exp(log_sum_exp(l) - points_->k() * phi_.value(u));
}

BergmanFunction bergman_function(const PotentialFunction& phi, std::shared_ptr<const LatticePointSet> points,
                                 const QuadratureGrid& grid) {
  const int m = phi.dim;
  const int k = points->k();
  if (m != points->dim() || grid.dim != m) throw std::invalid_argument("bergman_function: dimension mismatch");
  if (grid.step * std::sqrt(static_cast<double>(k)) > 1.0)
    throw std::invalid_argument("bergman_function: grid step too coarse for k (need step*sqrt(k) <= 1)");
  const auto& pts = points->points();
  const std::size_t n = pts.size();
  auto sums = chunked_reduce(grid.size(), n, kChunk, [&](std::size_t b, std::size_t e, double* acc) {
    std::vector<double> hs(m * m);
    for (std::size_t i = b; i < e; ++i) {
      const double* u = grid.node(i);
      phi.hessian(u, hs.data());
      Eigen::Map<Eigen::MatrixXd> mat(hs.data(), m, m);
      const double det = (0.5 * k * mat).determinant();
      if (!(det > 0.0)) {
        // far out the determinant is below roundoff of its own entries
        if (std::abs(det) <= 1e-12 * std::pow(0.5 * k * mat.cwiseAbs().maxCoeff(), m)) continue;
        throw std::domain_error("bergman_function: Hessian not positive definite at a node");
      }
      const double base = std::log(grid.weights[i] * det) - k * phi.value(u);
      for (std::size_t a = 0; a < n; ++a) {
        double l = base;
        for (int j = 0; j < m; ++j) l += 2.0 * pts[a][j] * u[j];
        acc[a] += std::exp(l);
      }
    }
  });
  std::vector<double> log_hilb(n);
  const double norm = m * std::log(static_cast<double>(k));
  for (std::size_t a = 0; a < n; ++a) log_hilb[a] = std::log(sums[a]) - norm;
  return {phi, std::move(points), std::move(log_hilb)};
}

double scalar_curvature(const PotentialFunction& phi, const double* u, double h) {
  const int m = phi.dim;
  if (!(h > 1e-8)) throw std::invalid_argument("scalar_curvature: finite-difference step underflow");
  std::vector<double> hs(m * m), p(u, u + m);
  auto logdet = [&](const std::vector<double>& x) {
    phi.hessian(x.data(), hs.data());
    Eigen::Map<Eigen::MatrixXd> mat(hs.data(), m, m);
    const double d = mat.determinant();
    if (!(d > 0.0)) throw std::domain_error("scalar_curvature: metric not positive definite");
    return std::log(d);
  };
  auto second = [&](double step) {
    Eigen::MatrixXd d2(m, m);
    const double l0 = logdet(p);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        if (i == j) {
          p[i] = u[i] + step;
          const double lp = logdet(p);
          p[i] = u[i] - step;
          const double lm = logdet(p);
          p[i] = u[i];
          d2(i, i) = (lp - 2.0 * l0 + lm) / (step * step);
        } else {
          double s = 0.0;
          for (int a = -1; a <= 1; a += 2)
            for (int b = -1; b <= 1; b += 2) {
              p[i] = u[i] + a * step;
              p[j] = u[j] + b * step;
              s += a * b * logdet(p);
            }
          p[i] = u[i];
          p[j] = u[j];
          d2(i, j) = d2(j, i) = s / (4.0 * step * step);
        }
      }
    return d2;
  };
  const Eigen::MatrixXd d2 = (4.0 * second(0.5 * h) - second(h)) / 3.0;
  phi.hessian(u, hs.data());
  const Eigen::Map<Eigen::MatrixXd> g(hs.data(), m, m);
  return -(g.ldlt().solve(d2)).trace();
}

// -------------------------------------------------------------------- psi

PsiFunction::PsiFunction(HermitianWeights h, TorusElement v, double constant)
    : h_(std::move(h)), v_(std::move(v)), constant_(constant) {
  const auto& pts = h_.points().points();
  shifted_bias_.resize(pts.size());
  for (std::size_t a = 0; a < pts.size(); ++a) {
    double s = -h_.logw()[a];
    for (int j = 0; j < h_.dim(); ++j) s += pts[a][j] * v_.v[j];
    shifted_bias_[a] = s;
  }
}

double PsiFunction::operator()(const double* u) const {
  const int m = h_.dim();
  const auto& pts = h_.points().points();
  std::vector<double> l0(pts.size()), l1(pts.size());
  for (std::size_t a = 0; a < pts.size(); ++a) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += 2.0 * pts[a][j] * u[j];
    l0[a] = s - h_.logw()[a];
    l1[a] = s + shifted_bias_[a];
  }
  return log_sum_exp(l1) - log_sum_exp(l0) + constant_;
}

PsiFunction psi_function(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid) {
  if (v.dim() != h.dim()) throw std::invalid_argument("psi_function: torus element has wrong dimension");
  const auto pass = quadrature_pass(h, grid);
  const auto& pts = h.points().points();
  const double total = h.points().scaled_volume();
  std::vector<double> l(pts.size());
  for (std::size_t a = 0; a < pts.size(); ++a) {
    double s = std::log(pass.mass[a] / total);
    for (int j = 0; j < h.dim(); ++j) s += pts[a][j] * v.v[j];
    l[a] = s;
  }
  const double c = std::log(static_cast<double>(h.size()) / total) - log_sum_exp(l);
  return {h, v, c};
}

}  // namespace toricq
