#include <doctest.h>

#include <cmath>
#include <random>

#include "toricq/io.hpp"
#include "toricq/quantization.hpp"
#include "toricq/simd/kernels.hpp"

using namespace toricq;
using namespace toricq::simd;

namespace {

struct RandomLattice {
  std::vector<std::vector<double>> coords;
  std::vector<double> bias;
};

RandomLattice random_lattice(int m, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coord(0, 12);
  std::uniform_real_distribution<double> b(-3.0, 3.0);
  RandomLattice r;
  r.coords.assign(m, std::vector<double>(n));
  for (auto& c : r.coords)
    for (auto& x : c) x = coord(rng);
  r.bias.resize(n);
  for (auto& x : r.bias) x = b(rng);
  return r;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(backend_available(Backend::Scalar));
  CHECK(backend_name(Backend::Scalar) == "scalar");
}

TEST_CASE("padding entries carry zero weight") {
  std::mt19937_64 rng(3);
  const auto lat = random_lattice(2, 5, rng);
  PaddedLattice pad(lat.coords);
  CHECK(pad.count() == 5);
  CHECK(pad.padded() % kLanes == 0);
  const auto bias = pad.pad_bias(lat.bias);
  std::vector<double> w(pad.padded());
  const double u[2] = {0.1, -0.2};
  scalar_kernels().softmax_moments(pad.view(), bias.data(), u, w.data());
  for (std::size_t a = pad.count(); a < pad.padded(); ++a) CHECK(w[a] == 0.0);
}

TEST_CASE("scalar kernel against a direct evaluation") {
  std::mt19937_64 rng(5);
  for (int m = 1; m <= 3; ++m) {
    const auto lat = random_lattice(m, 37, rng);
    PaddedLattice pad(lat.coords);
    const auto bias = pad.pad_bias(lat.bias);
    std::vector<double> w(pad.padded());
    const double u[3] = {0.3, -0.7, 0.05};
    const auto s = scalar_kernels().softmax_moments(pad.view(), bias.data(), u, w.data());

    std::vector<double> l(37);
    for (std::size_t a = 0; a < 37; ++a) {
      l[a] = lat.bias[a];
      for (int j = 0; j < m; ++j) l[a] += 2.0 * lat.coords[j][a] * u[j];
    }
    const double lse = log_sum_exp(l);
    CHECK(s.log_sum == doctest::Approx(lse).epsilon(1e-14));
    for (int i = 0; i < m; ++i) {
      double mean = 0.0;
      for (std::size_t a = 0; a < 37; ++a) mean += std::exp(l[a] - lse) * lat.coords[i][a];
      CHECK(s.mean[i] == doctest::Approx(mean).epsilon(1e-13));
      for (int j = 0; j < m; ++j) {
        double c = 0.0, mj = 0.0;
        for (std::size_t a = 0; a < 37; ++a) mj += std::exp(l[a] - lse) * lat.coords[j][a];
        for (std::size_t a = 0; a < 37; ++a)
          c += std::exp(l[a] - lse) * (lat.coords[i][a] - mean) * (lat.coords[j][a] - mj);
        CHECK(std::abs(s.cov[i][j] - c) < 1e-12);
      }
    }
  }
}

TEST_CASE("weights far below the maximum are exact zeros") {
  std::vector<std::vector<double>> coords{{0.0, 1.0, 2.0, 3.0}};
  PaddedLattice pad(coords);
  const auto bias = pad.pad_bias({0.0, -10.0, -60.0, -700.0});
  std::vector<double> w(pad.padded());
  const double u = 0.0;
  for (Backend b : {Backend::Scalar, Backend::Avx2}) {
    if (!backend_available(b)) continue;
    kernels(b).softmax_moments(pad.view(), bias.data(), &u, w.data());
    CHECK(w[0] == 1.0);
    CHECK(w[1] == doctest::Approx(std::exp(-10.0)).epsilon(1e-14));
    CHECK(w[2] == 0.0);
    CHECK(w[3] == 0.0);
  }
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!backend_available(Backend::Avx2)) {
    MESSAGE("AVX2 not available on this CPU; equivalence not exercised");
    return;
  }
  const auto& sc = scalar_kernels();
  const auto& vx = kernels(Backend::Avx2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uu(-4.0, 4.0);
  for (int m = 1; m <= 3; ++m) {
    for (std::size_t n : {1u, 3u, 4u, 7u, 16u, 91u, 250u}) {
      const auto lat = random_lattice(m, n, rng);
      PaddedLattice pad(lat.coords);
      const auto bias = pad.pad_bias(lat.bias);
      std::vector<double> w1(pad.padded()), w2(pad.padded());
      for (int trial = 0; trial < 25; ++trial) {
        double u[3] = {uu(rng), uu(rng), uu(rng)};
        const auto a = sc.softmax_moments(pad.view(), bias.data(), u, w1.data());
        const auto b = vx.softmax_moments(pad.view(), bias.data(), u, w2.data());
        // exponents of size ~300 are formed with and without FMA: ~1e-13 relative in the weights
        CHECK(rel(b.log_sum, a.log_sum) < 1e-14);
        CHECK(rel(b.sum, a.sum) < 2e-13);
        for (int i = 0; i < m; ++i) {
          CHECK(std::abs(b.mean[i] - a.mean[i]) < 1e-12);
          for (int j = 0; j < m; ++j) CHECK(std::abs(b.cov[i][j] - a.cov[i][j]) < 1e-11);
        }
        for (std::size_t k = 0; k < pad.padded(); ++k) CHECK(std::abs(w1[k] - w2[k]) <= 2e-13 * std::max(1.0, w1[k]));
      }
    }
  }

  std::vector<double> x(103), y1(103), y2(103);
  for (auto& v : x) v = uu(rng) * 50.0 - 100.0;
  sc.exp_array(x.size(), x.data(), y1.data());
  vx.exp_array(x.size(), x.data(), y2.data());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y2[i] - y1[i]) <= 1e-14 * y1[i]);
  CHECK(sc.dot(x.size(), x.data(), y1.data()) == doctest::Approx(vx.dot(x.size(), x.data(), y1.data())).epsilon(1e-14));
  std::vector<double> z1(x), z2(x);
  sc.axpy(z1.size(), 0.37, y1.data(), z1.data());
  vx.axpy(z2.size(), 0.37, y1.data(), z2.data());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(z1[i] == doctest::Approx(z2[i]).epsilon(1e-15));
}

TEST_CASE("a full quadrature pass is backend independent") {
  if (!backend_available(Backend::Avx2)) return;
  const auto f1 = load_polytope(std::string(TORICQ_DATA_DIR) + "/f1.json");
  const auto h = HermitianWeights::random(lattice_points(f1, 4), 2);
  const Backend before = active_backend();
  set_active_backend(Backend::Scalar);
  const auto grid = make_grid(h);
  const auto a = quadrature_pass(h, grid);
  set_active_backend(Backend::Avx2);
  const auto b = quadrature_pass(h, grid);
  set_active_backend(before);
  CHECK(rel(b.volume, a.volume) < 1e-13);
  for (std::size_t i = 0; i < a.mass.size(); ++i) CHECK(rel(b.mass[i], a.mass[i]) < 1e-12 * std::max(1.0, a.mass[i]));
}
