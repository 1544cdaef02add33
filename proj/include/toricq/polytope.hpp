#pragma once

// Delzant moment polytopes and the exact (rational) computations on them:
// lattice points of kP, interior/boundary integrals, the extremal affine
// function and the toric Futaki invariant.

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace toricq {

using Rational = boost::multiprecision::cpp_rational;
using RationalVector = std::vector<Rational>;
using IntVector = std::vector<std::int64_t>;

/// Raised for malformed or non-Delzant polytope descriptions.
class PolytopeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Half-space {x : <normal, x> + offset >= 0}.
struct Facet {
  IntVector normal;
  Rational offset;
};

/// Parse "p/q", "p" or a decimal-free integer string into a rational.
Rational parse_rational(const std::string& text);
std::string to_string(const Rational& q);
double to_double(const Rational& q);

/// Affine function c + <l, x> on R^m.
struct AffineFunction {
  Rational constant;
  RationalVector linear;

  [[nodiscard]] int dim() const { return static_cast<int>(linear.size()); }
  [[nodiscard]] Rational operator()(const RationalVector& x) const;
  [[nodiscard]] double operator()(const double* x) const;
  [[nodiscard]] std::vector<double> linear_double() const;

  static AffineFunction constant_function(int dim, Rational c);
  static AffineFunction coordinate(int dim, int j);
};

/// Polynomial of total degree <= 2 in m variables:
/// constant + sum_i linear[i] x_i + sum_{i<=j} quadratic(i,j) x_i x_j.
/// Higher-degree terms can be recorded through add_monomial but are rejected
/// by the integrators.
class Polynomial {
 public:
  explicit Polynomial(int dim);
  static Polynomial from_affine(const AffineFunction& f);

  Polynomial& add_monomial(const Rational& coefficient, const std::vector<int>& exponents);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int degree() const;
  [[nodiscard]] const std::vector<std::pair<Rational, std::vector<int>>>& terms() const { return terms_; }
  [[nodiscard]] double evaluate(const double* x) const;

 private:
  int dim_;
  std::vector<std::pair<Rational, std::vector<int>>> terms_;
};

/// A validated Delzant polytope. Immutable after construction.
class Polytope {
 public:
  /// Validates primitivity, boundedness and the Delzant condition and
  /// computes the vertices by exact vertex enumeration.
  static Polytope from_facets(int dim, std::vector<Facet> facets, std::string name = {});

  /// Cartesian product P1 x P2 (coordinates of P1 first).
  static Polytope product(const Polytope& first, const Polytope& second);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const std::vector<Facet>& facets() const { return facets_; }
  [[nodiscard]] const std::vector<RationalVector>& vertices() const { return vertices_; }
  /// Indices of vertices lying on each facet.
  [[nodiscard]] const std::vector<std::vector<int>>& facet_vertices() const { return facet_vertices_; }

  /// Does x satisfy every inequality of kP?
  [[nodiscard]] bool contains(const IntVector& x, std::int64_t k = 1) const;

  [[nodiscard]] const Rational& volume() const { return volume_; }
  /// Lattice-normalized boundary volume.
  [[nodiscard]] const Rational& boundary_volume() const { return boundary_volume_; }
  /// Continuous barycenter of P.
  [[nodiscard]] const RationalVector& barycenter() const { return barycenter_; }
  /// Vol(dP)/Vol(P): the average scalar curvature in the toric dictionary.
  [[nodiscard]] Rational average_scalar_curvature() const { return boundary_volume_ / volume_; }

  /// Simplices (vertex index lists) of a triangulation of P and of each facet.
  [[nodiscard]] const std::vector<std::vector<int>>& simplices() const { return simplices_; }
  [[nodiscard]] const std::vector<std::vector<std::vector<int>>>& facet_simplices() const {
    return facet_simplices_;
  }

 private:
  Polytope() = default;
  void build();

  int dim_ = 0;
  std::string name_;
  std::vector<Facet> facets_;
  std::vector<RationalVector> vertices_;
  std::vector<std::vector<int>> facet_vertices_;
  std::vector<std::vector<int>> simplices_;
  std::vector<std::vector<std::vector<int>>> facet_simplices_;
  Rational volume_;
  Rational boundary_volume_;
  RationalVector barycenter_;
};

/// Lattice points of kP in lexicographic order: the monomial basis of H^0(X, L^k).
class LatticePointSet {
 public:
  LatticePointSet(std::shared_ptr<const Polytope> polytope, int k);

  [[nodiscard]] int k() const { return k_; }
  [[nodiscard]] int dim() const { return polytope_->dim(); }
  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] const std::vector<IntVector>& points() const { return points_; }
  [[nodiscard]] const IntVector& operator[](std::size_t i) const { return points_[i]; }
  /// Mean of the lattice points (exact).
  [[nodiscard]] const RationalVector& barycenter() const { return barycenter_; }
  [[nodiscard]] const std::vector<double>& barycenter_double() const { return barycenter_d_; }
  [[nodiscard]] const Polytope& polytope() const { return *polytope_; }
  [[nodiscard]] const std::shared_ptr<const Polytope>& polytope_ptr() const { return polytope_; }
  /// k^m Vol(P) as a double.
  [[nodiscard]] double scaled_volume() const { return scaled_volume_; }

  /// Coordinates stored per axis (structure of arrays), as doubles.
  [[nodiscard]] const std::vector<std::vector<double>>& coordinates() const { return coords_; }

  [[nodiscard]] bool same_as(const LatticePointSet& other) const;

 private:
  std::shared_ptr<const Polytope> polytope_;
  int k_;
  std::vector<IntVector> points_;
  RationalVector barycenter_;
  std::vector<double> barycenter_d_;
  std::vector<std::vector<double>> coords_;
  double scaled_volume_ = 0.0;
};

std::shared_ptr<const LatticePointSet> lattice_points(std::shared_ptr<const Polytope> polytope, int k);

/// Exact integral of a degree <= 2 polynomial over P.
Rational interior_integral(const Polytope& p, const Polynomial& f);

/// Integral of an affine function over the boundary of P with the lattice-normalized
/// facet measure (a primitive lattice segment of a facet has measure one).
Rational boundary_integral(const Polytope& p, const AffineFunction& f);

/// The affine theta with int_P theta f dx = int_{dP} f dsigma for every affine f.
AffineFunction extremal_affine(const Polytope& p);

/// L(f) = int_{dP} f dsigma - (Vol(dP)/Vol(P)) int_P f dx.
Rational donaldson_futaki(const Polytope& p, const AffineFunction& f);

/// Exact Ehrhart polynomial coefficients c_0..c_m (index = power of k),
/// interpolated from lattice counts at k = 0..m.
RationalVector ehrhart_coefficients(const Polytope& p);

}  // namespace toricq
