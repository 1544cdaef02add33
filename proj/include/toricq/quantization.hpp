#pragma once

// Torus-invariant quantization: diagonal Hermitian forms on H^0(L^k), the
// Fubini-Study potential, the Hilbert map, Bergman densities and all
// quadrature over the open orbit (logarithmic coordinates u = log|z|).

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "toricq/polytope.hpp"
#include "toricq/simd/kernels.hpp"

namespace toricq {

/// Element v of Lie(T^c) = R^m. exp(v) translates u by v/2.
struct TorusElement {
  std::vector<double> v;

  TorusElement() = default;
  explicit TorusElement(std::vector<double> coords) : v(std::move(coords)) {}
  static TorusElement zero(int dim) { return TorusElement(std::vector<double>(dim, 0.0)); }
  [[nodiscard]] int dim() const { return static_cast<int>(v.size()); }
  [[nodiscard]] double norm() const;
};

/// Diagonal Hermitian form on the monomial basis, stored as log H_aa.
class HermitianWeights {
 public:
  HermitianWeights(std::shared_ptr<const LatticePointSet> points, std::vector<double> logw);

  static HermitianWeights uniform(std::shared_ptr<const LatticePointSet> points);
  /// logw i.i.d. uniform in [-amplitude, amplitude].
  static HermitianWeights random(std::shared_ptr<const LatticePointSet> points, std::uint64_t seed,
                                 double amplitude = 1.0);

  [[nodiscard]] int k() const { return points_->k(); }
  [[nodiscard]] int dim() const { return points_->dim(); }
  [[nodiscard]] std::size_t size() const { return logw_.size(); }
  [[nodiscard]] const std::vector<double>& logw() const { return logw_; }
  [[nodiscard]] const LatticePointSet& points() const { return *points_; }
  [[nodiscard]] const std::shared_ptr<const LatticePointSet>& points_ptr() const { return points_; }

  /// Subtract the mean log-weight (H in SL).
  [[nodiscard]] HermitianWeights sl_normalized() const;
  /// c H for c > 0.
  [[nodiscard]] HermitianWeights scaled(double c) const;

 private:
  std::shared_ptr<const LatticePointSet> points_;
  std::vector<double> logw_;
};

/// A torus-invariant potential phi(u) at level k = 1 with its derivatives.
/// hessian writes a row-major m x m matrix. fd_step is 0 for analytic derivatives.
struct PotentialFunction {
  int dim = 0;
  std::function<double(const double*)> value;
  std::function<void(const double*, double*)> gradient;
  std::function<void(const double*, double*)> hessian;
  double fd_step = 0.0;
};

/// phi = (1/k)(log B_H - log N_k), analytic derivatives.
PotentialFunction fs_potential(const HermitianWeights& h);
/// log(1 + sum_j exp(2 u_j)): the round potential of CP^m.
PotentialFunction round_potential(int dim);
/// Round potential plus eps * sum_j 4 x_j (1 - x_j), x the round moment.
/// For CP^1 the perturbation is eps * sech^2(u).
PotentialFunction perturbed_round_potential(int dim, double eps);
/// Derivatives by central differences with step h.
PotentialFunction potential_from_values(int dim, std::function<double(const double*)> value, double h = 1e-4);

double log_bergman_density(const HermitianWeights& h, const double* u);
/// B_H(u) = sum_a exp(2<a,u> - logw_a).
double bergman_density(const HermitianWeights& h, const double* u);

struct MomentMetric {
  Eigen::VectorXd moment;  // E_p[alpha] = grad(k phi)/2
  Eigen::MatrixXd metric;  // 2 Cov_p(alpha) = Hess(k phi)/2
};
MomentMetric moment_and_metric(const HermitianWeights& h, const double* u);

/// Raised when a grid no longer reproduces the total volume k^m Vol(P).
class GridStaleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridOptions {
  int resolution = 0;   // points per axis; 0 = automatic
  double radius = 0.0;  // half-width of the box; 0 = automatic
  double rel_tol = 1e-10;   // allowed relative miss of the total volume
  double mass_tol = 1e-12;  // automatic step: relative change of every section mass under refinement
  double tail_tol = 1e-15;
};

/// Tensor trapezoid grid on center + [-R, R]^m.
struct QuadratureGrid {
  int dim = 0;
  std::vector<double> center;
  double radius = 0.0;
  int resolution = 0;
  double step = 0.0;
  double rel_tol = 1e-10;
  std::vector<double> nodes;    // node i at nodes[i*dim .. i*dim+dim)
  std::vector<double> weights;  // positive

  [[nodiscard]] std::size_t size() const { return weights.size(); }
  [[nodiscard]] const double* node(std::size_t i) const { return nodes.data() + i * dim; }
};

/// Automatic step used when resolution is not given.
double default_grid_step(int k);

/// Grid adapted to FS(H): centered where the moment is the lattice barycenter,
/// radius from the density tail. Validates the total volume.
QuadratureGrid make_grid(const HermitianWeights& h, const GridOptions& opts = {});
/// Same for a level-one potential scaled by k, on the polytope P.
QuadratureGrid make_grid(const PotentialFunction& phi, int k, const Polytope& p, const GridOptions& opts = {});

/// What the integrator hands to a node visitor.
struct NodeSample {
  std::size_t index;
  const double* u;
  const simd::SoftmaxMoments* moments;
  const double* weights;  // max-shifted exp weights; p_a = weights[a] / moments->sum
  double quad_weight;
  double density;  // det(2 Cov)
};
using NodeVisitor = std::function<void(const NodeSample&, double* accumulator)>;

/// Sums visitor contributions over the grid. Chunked and reduced in a fixed
/// order, so the result does not depend on the thread count.
std::vector<double> integrate_over_grid(const HermitianWeights& h, const QuadratureGrid& grid,
                                        std::size_t components, const NodeVisitor& visit);

/// One sweep over the grid for H.
struct QuadraturePass {
  std::vector<double> mass;         // int p_a det(2Cov) du
  double volume = 0.0;              // int det(2Cov) du
  std::vector<double> log_bergman;  // log B_H at every node
  Eigen::VectorXd center_moment;    // moment at the grid center
};
/// Throws GridStaleError when the volume misses k^m Vol(P) by more than grid.rel_tol.
QuadraturePass quadrature_pass(const HermitianWeights& h, const QuadratureGrid& grid, bool validate = true);

/// Hilb_k(FS_k(H)) on the diagonal, not normalized.
HermitianWeights hilb(const HermitianWeights& h, const QuadratureGrid& grid);

/// rho_k(phi) for a level-one potential phi.
class BergmanFunction {
 public:
  BergmanFunction(PotentialFunction phi, std::shared_ptr<const LatticePointSet> points, std::vector<double> log_hilb);

  [[nodiscard]] double operator()(const double* u) const;
  [[nodiscard]] const std::vector<double>& log_hilb() const { return log_hilb_; }
  [[nodiscard]] int k() const { return points_->k(); }

 private:
  PotentialFunction phi_;
  std::shared_ptr<const LatticePointSet> points_;
  std::vector<double> log_hilb_;
};

/// Hilb_b = k^{-m} int exp(2<b,u> - k phi) det(Hess(k phi)/2) du, then
/// rho_k = sum_b exp(2<b,u> - k phi)/Hilb_b. Throws if the grid is too coarse for k.
BergmanFunction bergman_function(const PotentialFunction& phi, std::shared_ptr<const LatticePointSet> points,
                                 const QuadratureGrid& grid);

/// S = -tr(Hess(phi)^{-1} Hess(log det Hess phi)); round CP^1 gives 2.
double scalar_curvature(const PotentialFunction& phi, const double* u, double h = 2e-3);

/// psi(u) = k phi(u + v/2) - k phi(u) + c, normalized so that the mean of
/// exp(psi) against the probability measure of FS(H) is N_k/(k^m Vol P).
class PsiFunction {
 public:
  PsiFunction(HermitianWeights h, TorusElement v, double constant);
  [[nodiscard]] double operator()(const double* u) const;
  [[nodiscard]] double constant() const { return constant_; }

 private:
  HermitianWeights h_;
  TorusElement v_;
  std::vector<double> shifted_bias_;
  double constant_;
};
PsiFunction psi_function(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid);

/// log sum exp of a vector.
double log_sum_exp(std::span<const double> x);

}  // namespace toricq
