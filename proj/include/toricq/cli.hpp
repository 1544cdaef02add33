#pragma once

// Experiment runner behind the toricq command line: configuration, the five
// commands as library calls returning tables, and their file outputs.

#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "toricq/polytope.hpp"
#include "toricq/quantization.hpp"
#include "toricq/solver.hpp"

namespace toricq::cli {

/// Usage or configuration problem; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// "8", "4..12" or "4..12..2".
std::vector<int> parse_k_range(std::string_view text);
/// "0.1,-0.2"
std::vector<double> parse_vector(std::string_view text);

struct ExperimentConfig {
  std::filesystem::path polytope_path;
  std::vector<int> ks;
  SolverConfig solver;
  std::optional<std::filesystem::path> out;
  int threads = 1;
  // bergman-fit
  std::string potential = "round";  // round | perturbed
  double epsilon = 0.05;
  // b1-check negative control: evaluate with v = 0
  bool zero_weight = false;

  /// Checks that the polytope file exists and the k list is nonempty and increasing.
  void validate() const;
};

/// Fields of a JSON config file applied on top of `base`. Keys mirror the
/// long flags with dashes or underscores: polytope, k, mode, sigma, tol,
/// max-iter, grid-res, grid-radius, seed, threads, out, potential, epsilon, zero-weight.
ExperimentConfig apply_json(const nlohmann::json& j, ExperimentConfig base);

// ------------------------------------------------------------------ lattice

struct LatticeRow {
  int k = 0;
  std::int64_t count = 0;
  Rational prediction;  // Vol k^m + Vol(dP) k^(m-1) / 2
  Rational gap;         // count - prediction
  Rational ehrhart;     // full Ehrhart polynomial at k
};
std::vector<LatticeRow> cmd_lattice(std::shared_ptr<const Polytope> p, const std::vector<int>& ks);

// -------------------------------------------------------------------- solve

struct SolveReport {
  int k = 0;
  IterationState state;
};
std::vector<SolveReport> run_solves(std::shared_ptr<const Polytope> p, const std::vector<int>& ks,
                                    const SolverConfig& cfg, const IterationObserver& observer = {});
nlohmann::json solve_summary(const SolveReport& r, SolverMode mode, int threads);
/// run_k<k>.csv, weights_k<k>.csv and summary_k<k>.json in `dir`.
void write_solve_outputs(const std::filesystem::path& dir, const SolveReport& r, SolverMode mode, int threads);

// ------------------------------------------------------------------ weights

struct WeightRow {
  int k = 0;
  std::size_t count = 0;
  std::vector<double> v, kv, k2v;
  double grad_norm = 0.0;
  double f_max = 0.0;
  double dkv = std::numeric_limits<double>::quiet_NaN();  // |kv(k) - kv(previous k)|
  std::vector<double> theta_linear;
  std::vector<double> kappa;  // kv_j / theta_linear_j; NaN where theta_linear_j = 0
};
struct WeightsReport {
  std::vector<WeightRow> rows;
  bool cauchy = false;  // increments dkv strictly decreasing (or at rounding level)
};
WeightsReport cmd_weights(const Polytope& p, const std::vector<SolveReport>& solves);

// ------------------------------------------------------------- bergman-fit

struct BergmanFitRow {
  int k = 0;
  double rho_error = std::numeric_limits<double>::quiet_NaN();  // max |rho_k / oracle - 1| when an oracle exists
  double a1_error = 0.0;  // max_u |k^(1-m) rho_k - k - S/2|
};
struct BergmanFitReport {
  std::vector<BergmanFitRow> rows;
  double fit_error = std::numeric_limits<double>::quiet_NaN();  // polynomial-in-1/k fit of A1 across all k
  double decay_ratio = std::numeric_limits<double>::quiet_NaN();  // a1_error(last) / a1_error(previous)
};
/// Round (or perturbed round) potential on the standard simplex.
BergmanFitReport cmd_bergman_fit(std::shared_ptr<const Polytope> p, const std::vector<int>& ks,
                                 const std::string& potential, double epsilon, const GridOptions& grid = {});

// ----------------------------------------------------------------- b1-check

struct B1Row {
  int k = 0;
  double max_error = 0.0;  // max |e_k(u)| over the sample box
  Rational closed_form;    // e_k for v = 0: k (N_k/(k^m Vol) - 1) - S/2
};
struct B1Report {
  std::vector<B1Row> rows;
  bool decreasing = false;  // max_error decreases in k (or stays at rounding level)
};
B1Report cmd_b1_check(const Polytope& p, const std::vector<SolveReport>& solves, bool zero_weight = false);

}  // namespace toricq::cli
