#include <doctest.h>

#include <cmath>

#include "toricq/io.hpp"
#include "toricq/parallel.hpp"
#include "toricq/solver.hpp"

using namespace toricq;

namespace {

std::shared_ptr<const Polytope> fixture(const std::string& name) {
  return load_polytope(std::string(TORICQ_DATA_DIR) + "/" + name + ".json");
}

std::vector<double> binomial_logw(int k) {
  std::vector<double> w(k + 1);
  for (int a = 0; a <= k; ++a) w[a] = std::lgamma(a + 1.0) + std::lgamma(k - a + 1.0) - std::lgamma(k + 1.0);
  return w;
}

HermitianWeights binomial(int k) { return {lattice_points(fixture("cp1"), k), binomial_logw(k)}; }

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("modes and configuration") {
  CHECK(parse_mode("plain") == SolverMode::Plain);
  CHECK(parse_mode("fixed-sigma") == SolverMode::FixedSigma);
  CHECK(parse_mode("auto_sigma") == SolverMode::AutoSigma);
  CHECK(mode_name(SolverMode::AutoSigma) == "auto-sigma");
  CHECK_THROWS_AS(parse_mode("twisted"), std::invalid_argument);
  SolverConfig cfg;
  CHECK_NOTHROW(cfg.validate(2));
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(2), std::invalid_argument);
  cfg.tol = 1e-8;
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(2), std::invalid_argument);
  cfg.max_iter = 10;
  cfg.mode = SolverMode::FixedSigma;
  cfg.sigma = {0.1};
  CHECK_THROWS_AS(cfg.validate(2), std::invalid_argument);
  cfg.sigma = {0.1, 0.2};
  CHECK_NOTHROW(cfg.validate(2));
}

TEST_CASE("one step of the iteration") {
  const auto h = HermitianWeights::random(lattice_points(fixture("f1"), 3), 3);
  const auto grid = make_grid(h);
  const auto a = t_step(h, grid);
  CHECK(a.logw() == sigma_step(h, TorusElement::zero(2), grid).logw());
  CHECK(max_diff(t_step(h.scaled(5.0), grid).logw(), a.logw()) < 1e-12);
  double mean = 0.0;
  for (double x : a.logw()) mean += x;
  CHECK(std::abs(mean) < 1e-12);
  // the twist only adds an affine function of the lattice point
  CHECK(gauge_compare(sigma_step(h, TorusElement({0.3, -0.2}), grid), a) < 1e-12);
  // residual is scale invariant and vanishes exactly on the binomial form
  CHECK(residual(h.scaled(3.0), TorusElement::zero(2), grid) ==
        doctest::Approx(residual(h, TorusElement::zero(2), grid)).epsilon(1e-10));
  const auto b = binomial(8);
  const auto gb = make_grid(b);
  CHECK(residual(b, TorusElement::zero(1), gb) < 1e-10);
  CHECK(max_diff(t_step(b, gb).logw(), b.sl_normalized().logw()) < 1e-10);
  auto w = b.logw();
  w[3] += 0.1;
  CHECK(residual(HermitianWeights(b.points_ptr(), w), TorusElement::zero(1), gb) > 1e-3);
}

TEST_CASE("CP1 balanced fixed point from a random start") {
  SolverConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 200;
  cfg.seed = 17;
  const auto st = solve(fixture("cp1"), 8, cfg);
  CHECK(st.converged);
  CHECK(st.iterations <= 200);
  CHECK(st.residual < 1e-10);
  CHECK(gauge_compare(st.H, binomial(8)) < 1e-8);
  CHECK(st.tb_spread < 1e-6);
  CHECK(st.seed == 17);
  const auto r = st.residuals();
  for (int i = 1; i < 50; ++i) CHECK(r[i] < r[i - 1]);
  for (std::size_t i = r.size() - 50; i < r.size(); ++i) CHECK(r[i] < r[i - 1]);
  for (const auto& rec : st.history) CHECK(rec.residual >= 0.0);
}

TEST_CASE("solves are gauge equivariant") {
  const auto p = fixture("f1");
  const auto pts = lattice_points(p, 3);
  const auto h = HermitianWeights::random(pts, 2);
  auto moved = h.logw();
  for (std::size_t a = 0; a < moved.size(); ++a) moved[a] += 0.5 - 0.3 * (*pts)[a][0] + 0.2 * (*pts)[a][1];
  SolverConfig cfg;
  cfg.mode = SolverMode::AutoSigma;
  cfg.tol = 1e-11;
  cfg.initial_logw = h.logw();
  const auto s1 = solve(p, 3, cfg);
  cfg.initial_logw = moved;
  const auto s2 = solve(p, 3, cfg);
  REQUIRE(s1.converged);
  REQUIRE(s2.converged);
  CHECK(gauge_compare(s1.H, s2.H) < 1e-10);
  for (int j = 0; j < 2; ++j) CHECK(std::abs(s1.v.v[j] - s2.v.v[j]) < 1e-10);
}

TEST_CASE("F1: twisted solve converges, plain solve stalls") {
  const auto p = fixture("f1");
  SolverConfig cfg;
  cfg.mode = SolverMode::AutoSigma;
  cfg.tol = 1e-8;
  cfg.seed = 1;
  std::size_t seen = 0;
  const auto st = solve(p, 4, cfg, [&](const IterationRecord&) { ++seen; });
  REQUIRE(st.converged);
  CHECK(seen == st.history.size());
  CHECK(st.v.v[1] < -1e-3);
  CHECK(std::abs(st.v.v[0]) < 1e-6);
  CHECK(st.f_max < 1e-8);
  CHECK(st.tb_spread < 1e-6);

  // holding the twist at the optimum reproduces the fixed point
  SolverConfig fixed = cfg;
  fixed.mode = SolverMode::FixedSigma;
  fixed.sigma = st.v.v;
  const auto sf = solve(p, 4, fixed);
  CHECK(sf.converged);
  CHECK(gauge_compare(sf.H, st.H) < 1e-7);

  SolverConfig plain;
  plain.tol = 1e-8;
  plain.max_iter = 150;
  const auto sp = solve(p, 4, plain);
  CHECK_FALSE(sp.converged);
  CHECK(sp.iterations == 150);
  CHECK(sp.residual > 1e-4);
}

TEST_CASE("solves do not depend on the thread count") {
  SolverConfig cfg;
  cfg.mode = SolverMode::AutoSigma;
  cfg.max_iter = 30;
  cfg.seed = 4;
  set_thread_count(1);
  const auto a = solve(fixture("f1"), 3, cfg);
  set_thread_count(4);
  const auto b = solve(fixture("f1"), 3, cfg);
  set_thread_count(1);
  CHECK(a.H.logw() == b.H.logw());
  CHECK(a.residuals() == b.residuals());
}

TEST_CASE("gauge comparison") {
  const auto h = HermitianWeights::random(lattice_points(fixture("cp2"), 4), 1);
  CHECK(gauge_compare(h, h) == 0.0);
  auto w = h.logw();
  for (std::size_t a = 0; a < w.size(); ++a) w[a] += 3.0 + 0.25 * h.points()[a][0] - 1.5 * h.points()[a][1];
  CHECK(gauge_compare(h, HermitianWeights(h.points_ptr(), w)) < 1e-12);
  w[2] += 0.5;
  CHECK(gauge_compare(h, HermitianWeights(h.points_ptr(), w)) > 0.1);
  CHECK_THROWS_AS(gauge_compare(h, HermitianWeights::random(lattice_points(fixture("cp2"), 3), 1)),
                  std::invalid_argument);
}

TEST_CASE("splitting on the square") {
  const auto cp1 = fixture("cp1");
  const auto sq = fixture("cp1xcp1");
  const int k = 4;
  const auto pts = lattice_points(sq, k);
  const auto f = binomial_logw(k);
  const auto g = HermitianWeights::random(lattice_points(cp1, k), 3).logw();
  std::vector<double> prod(pts->size()), coupled(pts->size());
  for (std::size_t a = 0; a < pts->size(); ++a) {
    const auto& x = (*pts)[a];
    prod[a] = f[x[0]] + g[x[1]];
    coupled[a] = static_cast<double>(x[0] * x[1]);
  }
  const HermitianWeights hp(pts, prod);
  CHECK(split_check(hp, *cp1, *cp1) < 1e-12);
  CHECK(split_check(HermitianWeights(pts, coupled), *cp1, *cp1) > 0.1);
  const auto [f1, f2] = split_factors(hp, cp1, cp1);
  CHECK(gauge_compare(f1, binomial(k)) < 1e-12);
  CHECK(gauge_compare(f2, HermitianWeights(lattice_points(cp1, k), g)) < 1e-12);
  CHECK_THROWS_AS(split_check(HermitianWeights::random(lattice_points(fixture("f1"), k), 1), *cp1, *cp1),
                  std::invalid_argument);
}
