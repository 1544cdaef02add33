#pragma once

// The optimal twist: section masses D, the convex functional G, its Newton
// minimizer, and the character F.

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "toricq/polytope.hpp"
#include "toricq/quantization.hpp"

namespace toricq {

/// D_a = (1/(k^m Vol P)) int p_a det(2Cov) du; a probability vector.
struct SectionMass {
  std::shared_ptr<const LatticePointSet> points;
  std::vector<double> D;

  [[nodiscard]] std::size_t size() const { return D.size(); }
  [[nodiscard]] double total() const;
};

/// lambda_a(v) = <a - abar, v>, centered so that the entries sum to zero.
std::vector<double> weight_vector(const TorusElement& v, const LatticePointSet& points);

SectionMass section_mass(const HermitianWeights& h, const QuadratureGrid& grid);
/// Section mass from an already computed quadrature pass.
SectionMass section_mass(const HermitianWeights& h, const QuadraturePass& pass);

/// G(v) = sum_a exp(lambda_a(v)) D_a.
double g_functional(const SectionMass& d, const TorusElement& v);
Eigen::VectorXd g_gradient(const SectionMass& d, const TorusElement& v);
Eigen::MatrixXd g_hessian(const SectionMass& d, const TorusElement& v);

struct OptimalWeightInfo {
  int iterations = 0;
  double grad_norm = 0.0;
};

/// Unique minimizer of G by Newton's method with Armijo backtracking.
TorusElement optimal_weight(const SectionMass& d, OptimalWeightInfo* info = nullptr,
                            const TorusElement* start = nullptr);

/// F(a) = -sum_a lambda_a(a) exp(lambda_a(v)) D_a.
double f_character(const SectionMass& d, const TorusElement& v, const TorusElement& a);

/// The same character from its integral form -int theta_a (1 + Laplacian) exp(psi) dmu,
/// with exp(psi) lifted to carry total mass G(v).
double f_character_direct(const HermitianWeights& h, const TorusElement& v, const TorusElement& a,
                          const QuadratureGrid& grid);

/// max over coordinate directions of |F(e_j)|.
double f_character_max(const SectionMass& d, const TorusElement& v);

/// Returns the converged optimal weight v_k for (P, k).
using WeightSolver = std::function<TorusElement(std::shared_ptr<const Polytope>, int)>;

/// k * v_k.
TorusElement quantized_field(std::shared_ptr<const Polytope> p, int k, const WeightSolver& solver);

}  // namespace toricq
