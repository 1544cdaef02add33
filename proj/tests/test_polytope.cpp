#include <doctest.h>

#include "toricq/io.hpp"
#include "toricq/polytope.hpp"

using namespace toricq;

namespace {

std::shared_ptr<const Polytope> fixture(const std::string& name) {
  return load_polytope(std::string(TORICQ_DATA_DIR) + "/" + name + ".json");
}

Rational q(const char* s) { return parse_rational(s); }

}  // namespace

TEST_CASE("rational literals") {
  CHECK(parse_rational("3/6") == Rational(1, 2));
  CHECK(parse_rational("-4") == Rational(-4));
  CHECK(to_string(Rational(5, 2)) == "5/2");
  CHECK_THROWS_AS(parse_rational("1/0"), PolytopeError);
  CHECK_THROWS_AS(parse_rational("0.5"), PolytopeError);
  CHECK_THROWS_AS(parse_rational(""), PolytopeError);
}

TEST_CASE("segment, simplex and trapezoid: volumes and curvature") {
  const auto cp1 = fixture("cp1");
  CHECK(cp1->volume() == 1);
  CHECK(cp1->boundary_volume() == 2);
  CHECK(cp1->average_scalar_curvature() == 2);

  const auto cp2 = fixture("cp2");
  CHECK(cp2->volume() == q("1/2"));
  CHECK(cp2->boundary_volume() == 3);
  CHECK(cp2->average_scalar_curvature() == 6);

  const auto f1 = fixture("f1");
  CHECK(f1->volume() == q("3/2"));
  CHECK(f1->boundary_volume() == 5);
  CHECK(f1->vertices().size() == 4);
  CHECK(f1->barycenter() == RationalVector{q("7/9"), q("4/9")});
}

TEST_CASE("extremal affine function") {
  const auto theta1 = extremal_affine(*fixture("cp1"));
  CHECK(theta1.constant == 2);
  CHECK(theta1.linear == RationalVector{0});

  const auto theta2 = extremal_affine(*fixture("cp2"));
  CHECK(theta2.constant == 6);
  CHECK(theta2.linear == RationalVector{0, 0});

  const auto f1 = fixture("f1");
  const auto th = extremal_affine(*f1);
  CHECK(th.constant == q("54/13"));
  CHECK(th.linear == RationalVector{0, q("-24/13")});
  // mean over P is the average scalar curvature
  CHECK(interior_integral(*f1, Polynomial::from_affine(th)) / f1->volume() == f1->average_scalar_curvature());
}

TEST_CASE("Futaki invariant") {
  const auto f1 = fixture("f1");
  CHECK(donaldson_futaki(*f1, AffineFunction::coordinate(2, 1)) == q("-2/9"));
  CHECK(donaldson_futaki(*f1, AffineFunction::coordinate(2, 0)) == q("1/9"));  // 4 - (10/3)(7/6)
  CHECK(donaldson_futaki(*f1, AffineFunction::constant_function(2, 1)) == 0);
  for (const char* name : {"cp1", "cp2", "cp1xcp1"}) {
    const auto p = fixture(name);
    for (int j = 0; j < p->dim(); ++j) CHECK(donaldson_futaki(*p, AffineFunction::coordinate(p->dim(), j)) == 0);
  }
  // L(f) = int (theta_ex - Sbar) f over P
  const auto th = extremal_affine(*f1);
  for (int j = 0; j < 2; ++j) {
    const std::vector<int> xj{j == 0 ? 1 : 0, j == 1 ? 1 : 0};
    Polynomial g(2);
    g.add_monomial(th.constant - f1->average_scalar_curvature(), xj);
    for (int i = 0; i < 2; ++i) {
      std::vector<int> e = xj;
      e[i] += 1;
      g.add_monomial(th.linear[i], e);
    }
    CHECK(interior_integral(*f1, g) == donaldson_futaki(*f1, AffineFunction::coordinate(2, j)));
  }
}

TEST_CASE("interior and boundary integrals") {
  const auto cp2 = fixture("cp2");
  Polynomial x(2);
  x.add_monomial(1, {1, 0});
  CHECK(interior_integral(*cp2, x) == q("1/6"));
  Polynomial xy(2);
  xy.add_monomial(1, {1, 1});
  CHECK(interior_integral(*cp2, xy) == q("1/24"));
  Polynomial xx(2);
  xx.add_monomial(1, {2, 0});
  CHECK(interior_integral(*cp2, xx) == q("1/12"));
  // the hypotenuse x + y = 1 has lattice length 1, like the legs
  CHECK(boundary_integral(*cp2, AffineFunction::coordinate(2, 0)) == 1);
  Polynomial cubic(2);
  cubic.add_monomial(1, {3, 0});
  CHECK_THROWS_AS(interior_integral(*cp2, cubic), std::invalid_argument);
}

TEST_CASE("lattice points and Ehrhart polynomial") {
  const auto cp1 = fixture("cp1");
  const auto cp2 = fixture("cp2");
  const auto f1 = fixture("f1");
  for (int k = 1; k <= 5; ++k) CHECK(lattice_points(cp1, k)->size() == static_cast<std::size_t>(k + 1));
  CHECK(lattice_points(cp2, 3)->size() == 10);
  CHECK(lattice_points(f1, 2)->size() == 12);

  CHECK(ehrhart_coefficients(*f1) == RationalVector{1, q("5/2"), q("3/2")});
  for (const auto& p : {cp1, cp2, f1}) {
    const auto c = ehrhart_coefficients(*p);
    const int m = p->dim();
    CHECK(c[m] == p->volume());
    CHECK(c[m - 1] == p->boundary_volume() / 2);
    for (int k = 1; k <= 6; ++k) {
      Rational value = 0, kk = 1;
      for (int i = 0; i <= m; ++i, kk *= k) value += c[i] * kk;
      CHECK(value == Rational(static_cast<long long>(lattice_points(p, k)->size())));
    }
  }
}

TEST_CASE("lattice order and barycenter") {
  const auto pts = lattice_points(fixture("f1"), 2);
  for (std::size_t i = 1; i < pts->size(); ++i) CHECK((*pts)[i - 1] < (*pts)[i]);
  for (const auto& a : pts->points()) CHECK(pts->polytope().contains(a, 2));
  RationalVector mean(2, Rational(0));
  for (const auto& a : pts->points())
    for (int j = 0; j < 2; ++j) mean[j] += a[j];
  for (auto& x : mean) x /= static_cast<long long>(pts->size());
  CHECK(pts->barycenter() == mean);
  CHECK(pts->scaled_volume() == doctest::Approx(6.0));
  CHECK(lattice_points(fixture("cp1"), 7)->barycenter()[0] == q("7/2"));
  CHECK_THROWS_AS(lattice_points(fixture("cp1"), 0), std::invalid_argument);
}

TEST_CASE("products") {
  const auto cp1 = fixture("cp1");
  const auto sq = Polytope::product(*cp1, *cp1);
  CHECK(sq.dim() == 2);
  CHECK(sq.volume() == 1);
  CHECK(sq.boundary_volume() == 4);
  CHECK(sq.vertices().size() == 4);
  CHECK(fixture("cp1xcp1")->volume() == 1);
}

TEST_CASE("invalid descriptions are rejected") {
  // normals (1,0) and (-1,-2) meet at (0,1) with determinant -2
  CHECK_THROWS_WITH_AS(parse_polytope(R"({"dim":2,"facets":[{"normal":[1,0],"offset":"0"},
      {"normal":[0,1],"offset":"0"},{"normal":[-1,-2],"offset":"2"}]})"),
                       doctest::Contains("non-Delzant"), PolytopeError);
  CHECK_THROWS_WITH_AS(parse_polytope(R"({"dim":1,"facets":[{"normal":[2],"offset":"0"},{"normal":[-1],"offset":"1"}]})"),
                       doctest::Contains("primitive"), PolytopeError);
  CHECK_THROWS_AS(parse_polytope(R"({"dim":2,"facets":[{"normal":[1,0],"offset":"0"},{"normal":[0,1],"offset":"0"},
      {"normal":[1,1],"offset":"1"}]})"),
                  PolytopeError);
  CHECK_THROWS_WITH_AS(parse_polytope("{\n\"dim\": 1,\n\"facets\": [ }", "bad.json"), doctest::Contains("bad.json"),
                       PolytopeError);
  CHECK_THROWS_AS(parse_polytope(R"({"dim":1,"facets":[{"normal":[1],"offset":0.5},{"normal":[-1],"offset":"1"}]})"),
                  PolytopeError);
}
