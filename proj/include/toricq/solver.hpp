#pragma once

// The twisted Donaldson iteration H -> e^lambda(v) Hilb(FS(H)), its residual,
// self-consistent sigma-balanced solves and the uniqueness/splitting checks.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "toricq/polytope.hpp"
#include "toricq/quantization.hpp"
#include "toricq/weights.hpp"

namespace toricq {

enum class SolverMode { Plain, FixedSigma, AutoSigma };

std::string_view mode_name(SolverMode mode);
/// Accepts plain, fixed-sigma, auto-sigma (underscores also accepted).
SolverMode parse_mode(std::string_view text);

struct SolverConfig {
  SolverMode mode = SolverMode::Plain;
  double tol = 1e-10;
  int max_iter = 1000;
  GridOptions grid;
  int weight_update_period = 1;
  std::vector<double> sigma;  // fixed-sigma only
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> initial_logw;

  void validate(int dim) const;
};

struct IterationRecord {
  int iter = 0;
  double residual = 0.0;
  std::vector<double> v;
  // Twisted Bergman function of this iterate, normalized to mean one.
  double tb_sup = std::numeric_limits<double>::quiet_NaN();
  double tb_inf = std::numeric_limits<double>::quiet_NaN();
};

struct IterationState {
  IterationState(HermitianWeights h, TorusElement v0) : H(std::move(h)), v(std::move(v0)) {}

  HermitianWeights H;
  TorusElement v;
  std::vector<IterationRecord> history;
  int iterations = 0;  // iterates whose residual was evaluated, the start included
  bool converged = false;
  std::uint64_t seed = 0;
  double residual = std::numeric_limits<double>::infinity();
  double f_max = 0.0;      // max_j |F(e_j)| at the returned (H, v)
  double tb_spread = std::numeric_limits<double>::quiet_NaN();  // sup/inf - 1 at the returned H
  int grid_rebuilds = 0;
  QuadratureGrid grid;

  [[nodiscard]] std::vector<double> residuals() const;
};

HermitianWeights t_step(const HermitianWeights& h, const QuadratureGrid& grid);
HermitianWeights sigma_step(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid);
/// max_a |d_a - mean d| / mean d with d_a = exp(lambda_a(v)) Hilb(H)_aa / H_aa.
double residual(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid);
/// Same from precomputed section masses.
double residual(const SectionMass& d, const TorusElement& v);

/// sup/inf - 1 over the grid of the twisted Bergman function of (H, v).
double twisted_bergman_spread(const HermitianWeights& h, const TorusElement& v, const QuadratureGrid& grid);

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Iterates sigma_step until residual < tol or max_iter steps. Non-convergence
/// is reported through the state, not thrown.
IterationState solve(std::shared_ptr<const Polytope> p, int k, const SolverConfig& cfg,
                     const IterationObserver& observer = {});

/// Sup-norm residual of the least-squares fit of logw1 - logw2 by c + <a, delta>.
double gauge_compare(const HermitianWeights& h1, const HermitianWeights& h2);

/// Sup-norm residual of the fit logw(a1, a2) = f(a1) + g(a2) on kP1 x kP2.
double split_check(const HermitianWeights& h, const Polytope& first, const Polytope& second);
/// The fitted factors f and g as weights on kP1 and kP2.
std::pair<HermitianWeights, HermitianWeights> split_factors(const HermitianWeights& h,
                                                            std::shared_ptr<const Polytope> first,
                                                            std::shared_ptr<const Polytope> second);

}  // namespace toricq
