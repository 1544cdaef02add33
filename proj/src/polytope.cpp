#include "toricq/polytope.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace toricq {

namespace {

using RationalMatrix = std::vector<RationalVector>;

std::int64_t gcd_of(const IntVector& v) {
  std::int64_t g = 0;
  for (auto x : v) g = std::gcd(g, x < 0 ? -x : x);
  return g;
}

Rational factorial(int n) {
  Rational f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Determinant by fraction-exact Gaussian elimination.
Rational determinant(RationalMatrix a) {
  const std::size_t n = a.size();
  Rational det = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && a[pivot][col] == 0) ++pivot;
    if (pivot == n) return 0;
    if (pivot != col) {
      std::swap(a[pivot], a[col]);
      det = -det;
    }
    det *= a[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      if (a[r][col] == 0) continue;
      const Rational f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return det;
}

// Solves a x = b; returns false when a is singular.
bool solve(RationalMatrix a, RationalVector b, RationalVector& x) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && a[pivot][col] == 0) ++pivot;
    if (pivot == n) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0) continue;
      const Rational f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return true;
}

int rank_of(RationalMatrix a) {
  if (a.empty()) return 0;
  const std::size_t rows = a.size(), cols = a[0].size();
  int rank = 0;
  for (std::size_t col = 0; col < cols && static_cast<std::size_t>(rank) < rows; ++col) {
    std::size_t pivot = rank;
    while (pivot < rows && a[pivot][col] == 0) ++pivot;
    if (pivot == rows) continue;
    std::swap(a[pivot], a[rank]);
    for (std::size_t r = rank + 1; r < rows; ++r) {
      if (a[r][col] == 0) continue;
      const Rational f = a[r][col] / a[rank][col];
      for (std::size_t c = col; c < cols; ++c) a[r][c] -= f * a[rank][c];
    }
    ++rank;
  }
  return rank;
}

Rational facet_value(const Facet& f, const RationalVector& x) {
  Rational s = f.offset;
  for (std::size_t j = 0; j < x.size(); ++j) s += f.normal[j] * x[j];
  return s;
}

std::string format_point(const RationalVector& x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t j = 0; j < x.size(); ++j) os << (j ? "," : "") << to_string(x[j]);
  os << ')';
  return os.str();
}

void combinations(int n, int r, int start, std::vector<int>& current,
                  std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == r) {
    out.push_back(current);
    return;
  }
  for (int i = start; i < n; ++i) {
    current.push_back(i);
    combinations(n, r, i + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw PolytopeError("empty rational literal");
  const auto slash = s.find('/');
  auto parse_int = [&](const std::string& part) {
    if (part.empty() || part.find_first_not_of("+-0123456789") != std::string::npos ||
        part.find_first_of("0123456789") == std::string::npos)
      throw PolytopeError("malformed rational literal '" + text + "'");
    return boost::multiprecision::cpp_int(part[0] == '+' ? part.substr(1) : part);
  };
  if (slash == std::string::npos) return Rational(parse_int(s));
  const auto den = parse_int(s.substr(slash + 1));
  if (den == 0) throw PolytopeError("zero denominator in '" + text + "'");
  return Rational(parse_int(s.substr(0, slash)), den);
}

std::string to_string(const Rational& q) { return q.str(); }

double to_double(const Rational& q) { return q.convert_to<double>(); }

Rational AffineFunction::operator()(const RationalVector& x) const {
  Rational s = constant;
  for (std::size_t j = 0; j < linear.size(); ++j) s += linear[j] * x[j];
  return s;
}

double AffineFunction::operator()(const double* x) const {
  double s = to_double(constant);
  for (std::size_t j = 0; j < linear.size(); ++j) s += to_double(linear[j]) * x[j];
  return s;
}

std::vector<double> AffineFunction::linear_double() const {
  std::vector<double> out;
  for (const auto& l : linear) out.push_back(to_double(l));
  return out;
}

AffineFunction AffineFunction::constant_function(int dim, Rational c) {
  return AffineFunction{std::move(c), RationalVector(dim, 0)};
}

AffineFunction AffineFunction::coordinate(int dim, int j) {
  AffineFunction f{0, RationalVector(dim, 0)};
  f.linear.at(j) = 1;
  return f;
}

Polynomial::Polynomial(int dim) : dim_(dim) {}

Polynomial Polynomial::from_affine(const AffineFunction& f) {
  Polynomial p(f.dim());
  p.add_monomial(f.constant, std::vector<int>(f.dim(), 0));
  for (int j = 0; j < f.dim(); ++j) {
    std::vector<int> e(f.dim(), 0);
    e[j] = 1;
    p.add_monomial(f.linear[j], e);
  }
  return p;
}

Polynomial& Polynomial::add_monomial(const Rational& coefficient, const std::vector<int>& exponents) {
  if (static_cast<int>(exponents.size()) != dim_)
    throw std::invalid_argument("monomial exponent vector has wrong length");
  for (int e : exponents)
    if (e < 0) throw std::invalid_argument("negative exponent");
  terms_.emplace_back(coefficient, exponents);
  return *this;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [c, e] : terms_)
    if (c != 0) d = std::max(d, std::accumulate(e.begin(), e.end(), 0));
  return d;
}

double Polynomial::evaluate(const double* x) const {
  double s = 0.0;
  for (const auto& [c, e] : terms_) {
    double t = to_double(c);
    for (int j = 0; j < dim_; ++j)
      for (int r = 0; r < e[j]; ++r) t *= x[j];
    s += t;
  }
  return s;
}

Polytope Polytope::from_facets(int dim, std::vector<Facet> facets, std::string name) {
  if (dim < 1) throw PolytopeError("polytope dimension must be positive");
  if (static_cast<int>(facets.size()) < dim + 1)
    throw PolytopeError("a bounded polytope needs at least dim+1 facets");
  for (std::size_t i = 0; i < facets.size(); ++i) {
    if (static_cast<int>(facets[i].normal.size()) != dim)
      throw PolytopeError("facet " + std::to_string(i) + " normal has wrong dimension");
    if (gcd_of(facets[i].normal) != 1)
      throw PolytopeError("facet " + std::to_string(i) + " normal is not primitive");
  }
  Polytope p;
  p.dim_ = dim;
  p.facets_ = std::move(facets);
  p.name_ = std::move(name);
  p.build();
  return p;
}

Polytope Polytope::product(const Polytope& first, const Polytope& second) {
  const int m1 = first.dim(), m2 = second.dim();
  std::vector<Facet> facets;
  for (const auto& f : first.facets()) {
    Facet g{f.normal, f.offset};
    g.normal.resize(m1 + m2, 0);
    facets.push_back(std::move(g));
  }
  for (const auto& f : second.facets()) {
    Facet g{IntVector(m1, 0), f.offset};
    g.normal.insert(g.normal.end(), f.normal.begin(), f.normal.end());
    facets.push_back(std::move(g));
  }
  return from_facets(m1 + m2, std::move(facets), first.name() + "x" + second.name());
}

void Polytope::build() {
  const int m = dim_;
  const int nf = static_cast<int>(facets_.size());

  // Vertex enumeration over all m-subsets of facets.
  std::vector<std::vector<int>> subsets;
  std::vector<int> scratch;
  combinations(nf, m, 0, scratch, subsets);
  std::vector<RationalVector> verts;
  for (const auto& s : subsets) {
    RationalMatrix a;
    RationalVector b;
    for (int i : s) {
      RationalVector row;
      for (int j = 0; j < m; ++j) row.emplace_back(facets_[i].normal[j]);
      a.push_back(row);
      b.push_back(-facets_[i].offset);
    }
    RationalVector x;
    if (!solve(a, b, x)) continue;
    bool inside = true;
    for (const auto& f : facets_)
      if (facet_value(f, x) < 0) {
        inside = false;
        break;
      }
    if (inside && std::find(verts.begin(), verts.end(), x) == verts.end()) verts.push_back(x);
  }
  if (verts.empty()) throw PolytopeError("polytope is empty or unbounded (no vertices)");
  std::sort(verts.begin(), verts.end());
  vertices_ = std::move(verts);

  // Delzant condition and boundedness (every edge ray must leave the polytope).
  for (const auto& v : vertices_) {
    std::vector<int> tight;
    for (int i = 0; i < nf; ++i)
      if (facet_value(facets_[i], v) == 0) tight.push_back(i);
    if (static_cast<int>(tight.size()) != m)
      throw PolytopeError("non-Delzant vertex " + format_point(v) + ": " +
                          std::to_string(tight.size()) + " facets meet there");
    RationalMatrix basis;
    for (int i : tight) {
      RationalVector row;
      for (int j = 0; j < m; ++j) row.emplace_back(facets_[i].normal[j]);
      basis.push_back(row);
    }
    const Rational det = determinant(basis);
    if (det != 1 && det != -1)
      throw PolytopeError("non-Delzant vertex " + format_point(v) +
                          ": normals do not form a lattice basis (det " + to_string(det) + ")");
    for (int e = 0; e < m; ++e) {
      RationalVector rhs(m, 0), dir;
      rhs[e] = 1;
      solve(basis, rhs, dir);
      bool bounded = false;
      for (const auto& f : facets_) {
        Rational s = 0;
        for (int j = 0; j < m; ++j) s += f.normal[j] * dir[j];
        if (s < 0) bounded = true;
      }
      if (!bounded) throw PolytopeError("polytope is unbounded (edge ray at vertex " + format_point(v) + ")");
    }
  }

  auto affine_dim = [&](const std::vector<int>& idx) {
    RationalMatrix diffs;
    for (std::size_t i = 1; i < idx.size(); ++i) {
      RationalVector d(m);
      for (int j = 0; j < m; ++j) d[j] = vertices_[idx[i]][j] - vertices_[idx[0]][j];
      diffs.push_back(d);
    }
    return rank_of(diffs);
  };

  facet_vertices_.assign(nf, {});
  for (int i = 0; i < nf; ++i) {
    for (int v = 0; v < static_cast<int>(vertices_.size()); ++v)
      if (facet_value(facets_[i], vertices_[v]) == 0) facet_vertices_[i].push_back(v);
    if (static_cast<int>(facet_vertices_[i].size()) < m || affine_dim(facet_vertices_[i]) != m - 1)
      throw PolytopeError("facet " + std::to_string(i) + " is redundant (not a facet of the polytope)");
  }

  // Recursive fan triangulation of a face given by its vertex set.
  std::function<std::vector<std::vector<int>>(const std::vector<int>&, int)> triangulate =
      [&](const std::vector<int>& face, int d) -> std::vector<std::vector<int>> {
    if (d == 0) return {{face.front()}};
    const int apex = face.front();
    std::set<std::vector<int>> subfaces;
    for (int i = 0; i < nf; ++i) {
      std::vector<int> g;
      std::set_intersection(face.begin(), face.end(), facet_vertices_[i].begin(), facet_vertices_[i].end(),
                            std::back_inserter(g));
      if (g.size() == face.size() || g.empty()) continue;
      if (std::binary_search(g.begin(), g.end(), apex)) continue;
      if (affine_dim(g) == d - 1) subfaces.insert(g);
    }
    std::vector<std::vector<int>> out;
    for (const auto& g : subfaces)
      for (auto s : triangulate(g, d - 1)) {
        s.push_back(apex);
        out.push_back(std::move(s));
      }
    return out;
  };

  std::vector<int> all(vertices_.size());
  std::iota(all.begin(), all.end(), 0);
  simplices_ = triangulate(all, m);
  facet_simplices_.clear();
  for (int i = 0; i < nf; ++i) facet_simplices_.push_back(triangulate(facet_vertices_[i], m - 1));

  // Volume, barycenter and lattice boundary volume.
  volume_ = 0;
  barycenter_.assign(m, 0);
  for (const auto& s : simplices_) {
    RationalMatrix edges;
    for (int a = 1; a <= m; ++a) {
      RationalVector e(m);
      for (int j = 0; j < m; ++j) e[j] = vertices_[s[a]][j] - vertices_[s[0]][j];
      edges.push_back(e);
    }
    Rational vol = abs(determinant(edges)) / factorial(m);
    volume_ += vol;
    for (int j = 0; j < m; ++j) {
      Rational c = 0;
      for (int a : s) c += vertices_[a][j];
      barycenter_[j] += vol * c / (m + 1);
    }
  }
  for (auto& b : barycenter_) b /= volume_;

  boundary_volume_ = 0;
  for (int i = 0; i < nf; ++i) {
    Rational norm2 = 0;
    for (auto n : facets_[i].normal) norm2 += n * n;
    for (const auto& s : facet_simplices_[i]) {
      RationalMatrix rows;
      RationalVector nrow;
      for (auto n : facets_[i].normal) nrow.emplace_back(n);
      rows.push_back(nrow);
      for (int a = 1; a < m; ++a) {
        RationalVector e(m);
        for (int j = 0; j < m; ++j) e[j] = vertices_[s[a]][j] - vertices_[s[0]][j];
        rows.push_back(e);
      }
      boundary_volume_ += abs(determinant(rows)) / (norm2 * factorial(m - 1));
    }
  }
}

bool Polytope::contains(const IntVector& x, std::int64_t k) const {
  for (const auto& f : facets_) {
    Rational s = f.offset * k;
    for (int j = 0; j < dim_; ++j) s += f.normal[j] * x[j];
    if (s < 0) return false;
  }
  return true;
}

LatticePointSet::LatticePointSet(std::shared_ptr<const Polytope> polytope, int k)
    : polytope_(std::move(polytope)), k_(k) {
  if (!polytope_) throw std::invalid_argument("lattice_points: null polytope");
  if (k <= 0) throw std::invalid_argument("lattice_points: k must be positive");
  const int m = polytope_->dim();
  IntVector lo(m), hi(m);
  for (int j = 0; j < m; ++j) {
    Rational mn = polytope_->vertices()[0][j], mx = mn;
    for (const auto& v : polytope_->vertices()) {
      mn = std::min(mn, v[j]);
      mx = std::max(mx, v[j]);
    }
    mn *= k;
    mx *= k;
    // floor/ceil of rationals
    boost::multiprecision::cpp_int q = numerator(mn) / denominator(mn);
    if (Rational(q) > mn) q -= 1;
    lo[j] = q.convert_to<std::int64_t>();
    q = numerator(mx) / denominator(mx);
    if (Rational(q) < mx) q += 1;
    hi[j] = q.convert_to<std::int64_t>();
  }
  IntVector x(m);
  std::function<void(int)> rec = [&](int j) {
    if (j == m) {
      if (polytope_->contains(x, k)) points_.push_back(x);
      return;
    }
    for (x[j] = lo[j]; x[j] <= hi[j]; ++x[j]) rec(j + 1);
  };
  rec(0);
  if (points_.empty()) throw PolytopeError("kP contains no lattice points");

  barycenter_.assign(m, 0);
  coords_.assign(m, std::vector<double>(points_.size()));
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (int j = 0; j < m; ++j) {
      barycenter_[j] += points_[i][j];
      coords_[j][i] = static_cast<double>(points_[i][j]);
    }
  for (auto& b : barycenter_) {
    b /= static_cast<std::int64_t>(points_.size());
    barycenter_d_.push_back(to_double(b));
  }
  Rational sv = polytope_->volume();
  for (int j = 0; j < m; ++j) sv *= k;
  scaled_volume_ = to_double(sv);
}

bool LatticePointSet::same_as(const LatticePointSet& other) const {
  return this == &other || (k_ == other.k_ && points_ == other.points_);
}

std::shared_ptr<const LatticePointSet> lattice_points(std::shared_ptr<const Polytope> polytope, int k) {
  return std::make_shared<const LatticePointSet>(std::move(polytope), k);
}

Rational interior_integral(const Polytope& p, const Polynomial& f) {
  if (f.dim() != p.dim()) throw std::invalid_argument("interior_integral: dimension mismatch");
  if (f.degree() > 2) throw std::invalid_argument("interior_integral: degree > 2 unsupported");
  const int m = p.dim();
  const auto& verts = p.vertices();
  Rational total = 0;
  for (const auto& s : p.simplices()) {
    RationalMatrix edges;
    for (int a = 1; a <= m; ++a) {
      RationalVector e(m);
      for (int j = 0; j < m; ++j) e[j] = verts[s[a]][j] - verts[s[0]][j];
      edges.push_back(e);
    }
    const Rational vol = abs(determinant(edges)) / factorial(m);
    RationalVector sums(m, 0);
    for (int a : s)
      for (int j = 0; j < m; ++j) sums[j] += verts[a][j];
    for (const auto& [coef, e] : f.terms()) {
      if (coef == 0) continue;
      std::vector<int> idx;
      for (int j = 0; j < m; ++j)
        for (int r = 0; r < e[j]; ++r) idx.push_back(j);
      if (idx.empty()) {
        total += coef * vol;
      } else if (idx.size() == 1) {
        total += coef * vol * sums[idx[0]] / (m + 1);
      } else {
        const int i = idx[0], j = idx[1];
        Rational cross = 0;
        for (int a : s) cross += verts[a][i] * verts[a][j];
        total += coef * vol * (cross + sums[i] * sums[j]) / ((m + 1) * (m + 2));
      }
    }
  }
  return total;
}

Rational boundary_integral(const Polytope& p, const AffineFunction& f) {
  if (f.dim() != p.dim()) throw std::invalid_argument("boundary_integral: dimension mismatch");
  const int m = p.dim();
  const auto& verts = p.vertices();
  Rational total = 0;
  for (std::size_t i = 0; i < p.facets().size(); ++i) {
    const auto& facet = p.facets()[i];
    Rational norm2 = 0;
    for (auto n : facet.normal) norm2 += n * n;
    for (const auto& s : p.facet_simplices()[i]) {
      RationalMatrix rows;
      RationalVector nrow;
      for (auto n : facet.normal) nrow.emplace_back(n);
      rows.push_back(nrow);
      for (int a = 1; a < m; ++a) {
        RationalVector e(m);
        for (int j = 0; j < m; ++j) e[j] = verts[s[a]][j] - verts[s[0]][j];
        rows.push_back(e);
      }
      const Rational mass = abs(determinant(rows)) / (norm2 * factorial(m - 1));
      RationalVector centroid(m, 0);
      for (int a : s)
        for (int j = 0; j < m; ++j) centroid[j] += verts[a][j];
      for (auto& c : centroid) c /= static_cast<int>(s.size());
      total += mass * f(centroid);
    }
  }
  return total;
}

AffineFunction extremal_affine(const Polytope& p) {
  const int m = p.dim();
  // Gram system in the basis {1, x_1, ..., x_m}.
  RationalMatrix gram(m + 1, RationalVector(m + 1));
  RationalVector rhs(m + 1);
  for (int a = 0; a <= m; ++a) {
    for (int b = a; b <= m; ++b) {
      Polynomial q(m);
      std::vector<int> e(m, 0);
      if (a > 0) e[a - 1] += 1;
      if (b > 0) e[b - 1] += 1;
      q.add_monomial(1, e);
      gram[a][b] = gram[b][a] = interior_integral(p, q);
    }
    AffineFunction f = a == 0 ? AffineFunction::constant_function(m, 1) : AffineFunction::coordinate(m, a - 1);
    rhs[a] = boundary_integral(p, f);
  }
  RationalVector x;
  if (!solve(gram, rhs, x)) throw std::logic_error("extremal_affine: singular Gram matrix");
  AffineFunction theta{x[0], RationalVector(x.begin() + 1, x.end())};
  return theta;
}

Rational donaldson_futaki(const Polytope& p, const AffineFunction& f) {
  return boundary_integral(p, f) - p.average_scalar_curvature() * interior_integral(p, Polynomial::from_affine(f));
}

RationalVector ehrhart_coefficients(const Polytope& p) {
  const int m = p.dim();
  auto shared = std::make_shared<const Polytope>(p);
  RationalMatrix vander;
  RationalVector counts;
  for (int k = 1; k <= m + 1; ++k) {
    RationalVector row;
    Rational pw = 1;
    for (int d = 0; d <= m; ++d) {
      row.push_back(pw);
      pw *= k;
    }
    vander.push_back(row);
    counts.emplace_back(static_cast<std::int64_t>(LatticePointSet(shared, k).size()));
  }
  RationalVector c;
  solve(vander, counts, c);
  return c;
}

}  // namespace toricq
