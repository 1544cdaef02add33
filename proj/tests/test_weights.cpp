#include <doctest.h>

#include <cmath>
#include <random>

#include "toricq/io.hpp"
#include "toricq/solver.hpp"
#include "toricq/weights.hpp"

using namespace toricq;

namespace {

std::shared_ptr<const Polytope> fixture(const std::string& name) {
  return load_polytope(std::string(TORICQ_DATA_DIR) + "/" + name + ".json");
}

HermitianWeights binomial(int k) {
  auto pts = lattice_points(fixture("cp1"), k);
  std::vector<double> w(k + 1);
  for (int a = 0; a <= k; ++a) w[a] = std::lgamma(a + 1.0) + std::lgamma(k - a + 1.0) - std::lgamma(k + 1.0);
  return {pts, w};
}

// Random probability vector on the lattice points.
SectionMass random_mass(std::shared_ptr<const LatticePointSet> pts, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.2, 1.0);
  std::vector<double> x(pts->size());
  double s = 0.0;
  for (auto& v : x) s += (v = d(rng));
  for (auto& v : x) v /= s;
  return {std::move(pts), std::move(x)};
}

TorusElement random_torus(int m, std::mt19937_64& rng, double scale = 0.3) {
  std::uniform_real_distribution<double> d(-scale, scale);
  TorusElement v = TorusElement::zero(m);
  for (auto& x : v.v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("weight vector") {
  const auto pts = lattice_points(fixture("cp1"), 2);
  const auto l = weight_vector(TorusElement({0.7}), *pts);
  CHECK(l == std::vector<double>{-0.7, 0.0, 0.7});
  for (double x : weight_vector(TorusElement::zero(1), *pts)) CHECK(x == 0.0);
  std::mt19937_64 rng(1);
  for (const char* name : {"cp2", "f1", "cp1xcp1"}) {
    const auto p = lattice_points(fixture(name), 5);
    for (int t = 0; t < 10; ++t) {
      double s = 0.0;
      for (double x : weight_vector(random_torus(2, rng, 5.0), *p)) s += x;
      CHECK(std::abs(s) < 1e-12);
    }
  }
}

TEST_CASE("G on the binomial form") {
  const auto h = binomial(2);
  const auto d = section_mass(h, make_grid(h));
  CHECK(g_functional(d, TorusElement::zero(1)) == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : {-1.0, 0.3, 2.0})
    CHECK(g_functional(d, TorusElement({v})) == doctest::Approx((std::exp(-v) + 1.0 + std::exp(v)) / 3.0).epsilon(1e-10));
  OptimalWeightInfo info;
  const auto v = optimal_weight(d, &info);
  CHECK(std::abs(v.v[0]) < 1e-10);
  CHECK(info.grad_norm < 1e-12);
  for (double a : {1.0, -3.0}) CHECK(std::abs(f_character(d, TorusElement::zero(1), TorusElement({a}))) < 1e-10);
}

TEST_CASE("G is strictly convex: gradient and Hessian against differences") {
  std::mt19937_64 rng(4);
  for (const char* name : {"cp1", "cp2", "f1", "cp1xcp1"}) {
    const auto p = fixture(name);
    const int m = p->dim();
    const auto pts = lattice_points(p, 4);
    for (int t = 0; t < 100; ++t) {
      const auto d = random_mass(pts, rng);
      const auto v = random_torus(m, rng, 1.0);
      const Eigen::MatrixXd hs = g_hessian(d, v);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hs).eigenvalues().minCoeff() > 0.0);
      if (t % 10) continue;
      const Eigen::VectorXd g = g_gradient(d, v);
      const double e = 1e-5;
      for (int j = 0; j < m; ++j) {
        TorusElement up(v), dn(v);
        up.v[j] += e;
        dn.v[j] -= e;
        CHECK((g_functional(d, up) - g_functional(d, dn)) / (2 * e) == doctest::Approx(g(j)).epsilon(1e-7));
        const Eigen::VectorXd dg = (g_gradient(d, up) - g_gradient(d, dn)) / (2 * e);
        for (int i = 0; i < m; ++i) CHECK(dg(i) == doctest::Approx(hs(i, j)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("optimal weight: first-order condition, uniqueness and linearity of F") {
  std::mt19937_64 rng(6);
  for (const char* name : {"cp1", "cp2", "f1"}) {
    const auto p = fixture(name);
    const int m = p->dim();
    const auto pts = lattice_points(p, 5);
    for (int t = 0; t < 10; ++t) {
      const auto d = random_mass(pts, rng);
      OptimalWeightInfo info;
      const auto v = optimal_weight(d, &info);
      CHECK(info.grad_norm < 1e-12);
      CHECK(f_character_max(d, v) < 1e-10);
      // Newton from a different start lands on the same point
      const auto start = random_torus(m, rng, 2.0);
      const auto w = optimal_weight(d, nullptr, &start);
      for (int j = 0; j < m; ++j) CHECK(w.v[j] == doctest::Approx(v.v[j]).epsilon(1e-9));
      CHECK(g_functional(d, v) <= g_functional(d, random_torus(m, rng)));

      const auto u = random_torus(m, rng);
      const auto a = random_torus(m, rng);
      const auto b = random_torus(m, rng);
      TorusElement ab(a), ca(a);
      for (int j = 0; j < m; ++j) {
        ab.v[j] += b.v[j];
        ca.v[j] *= -2.5;
      }
      CHECK(f_character(d, u, ab) == doctest::Approx(f_character(d, u, a) + f_character(d, u, b)).epsilon(1e-12));
      CHECK(f_character(d, u, ca) == doctest::Approx(-2.5 * f_character(d, u, a)).epsilon(1e-12));
    }
  }
}

TEST_CASE("symmetric masses have zero optimal weight") {
  const auto pts = lattice_points(fixture("cp2"), 4);
  // invariant under permutations of (a1, a2, k - a1 - a2)
  std::vector<double> x(pts->size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& a = (*pts)[i];
    const double c = 4.0 - a[0] - a[1];
    s += (x[i] = 1.0 + 0.1 * (a[0] * a[0] + a[1] * a[1] + c * c) + 0.05 * a[0] * a[1] * c);
  }
  for (auto& v : x) v /= s;
  const auto v = optimal_weight({pts, x});
  CHECK(v.norm() < 1e-12);
}

TEST_CASE("the trapezoid's optimal weight points down") {
  const auto p = fixture("f1");
  auto h = HermitianWeights::uniform(lattice_points(p, 4));
  const auto grid = make_grid(h);
  for (int i = 0; i < 5; ++i) h = t_step(h, grid).sl_normalized();
  const auto v = optimal_weight(section_mass(h, make_grid(h)));
  CHECK(std::abs(v.v[0]) < 1e-6);
  CHECK(v.v[1] < 0.0);
}

TEST_CASE("gauge: torus translations of H leave v* and F alone") {
  std::mt19937_64 rng(8);
  const auto p = fixture("f1");
  const auto h = HermitianWeights::random(lattice_points(p, 3), 5);
  std::vector<double> w(h.logw());
  for (std::size_t a = 0; a < w.size(); ++a) w[a] += 0.7 + 0.4 * h.points()[a][0] - 0.9 * h.points()[a][1];
  const HermitianWeights g(h.points_ptr(), w);
  const auto d1 = section_mass(h, make_grid(h));
  const auto d2 = section_mass(g, make_grid(g));
  for (std::size_t a = 0; a < d1.size(); ++a) CHECK(d1.D[a] == doctest::Approx(d2.D[a]).epsilon(1e-9));
  const auto v1 = optimal_weight(d1);
  const auto v2 = optimal_weight(d2);
  for (int j = 0; j < 2; ++j) CHECK(v1.v[j] == doctest::Approx(v2.v[j]).epsilon(1e-8));

  const auto v = random_torus(2, rng);
  const auto a = random_torus(2, rng);
  const double f1 = f_character_direct(h, v, a, make_grid(h));
  const double f2 = f_character_direct(g, v, a, make_grid(g));
  CHECK(std::abs(f1 - f2) < 1e-4);
}

TEST_CASE("F through the integral and through G agree") {
  std::mt19937_64 rng(10);
  for (const char* name : {"cp1", "f1"}) {
    const auto p = fixture(name);
    const int m = p->dim();
    const auto pts = lattice_points(p, 4);
    for (int t = 0; t < 5; ++t) {
      const auto h = HermitianWeights::random(pts, rng());
      const auto grid = make_grid(h);
      const auto d = section_mass(h, grid);
      const auto v = random_torus(m, rng);
      const auto a = random_torus(m, rng, 1.0);
      CHECK(std::abs(f_character_direct(h, v, a, grid) - f_character(d, v, a)) < 1e-4);
    }
    const auto h = HermitianWeights::random(pts, 1);
    CHECK(f_character_direct(h, TorusElement::zero(m), TorusElement::zero(m), make_grid(h)) == 0.0);
  }
}

TEST_CASE("quantized field scales by k") {
  const auto p = fixture("f1");
  int calls = 0;
  const auto kv = quantized_field(p, 4, [&](std::shared_ptr<const Polytope> q, int k) {
    ++calls;
    CHECK(q == p);
    CHECK(k == 4);
    return TorusElement({0.01, -0.03});
  });
  CHECK(calls == 1);
  CHECK(kv.v[0] == doctest::Approx(0.04));
  CHECK(kv.v[1] == doctest::Approx(-0.12));
}

TEST_CASE("mismatched inputs are rejected") {
  const auto d = section_mass(binomial(3), make_grid(binomial(3)));
  CHECK_THROWS_AS(g_functional(d, TorusElement::zero(2)), std::invalid_argument);
  CHECK_THROWS_AS(f_character(d, TorusElement::zero(1), TorusElement::zero(2)), std::invalid_argument);
}
