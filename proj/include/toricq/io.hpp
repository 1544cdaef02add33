#pragma once

// File formats: polytope JSON, weight CSV, run logs and reports.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "toricq/polytope.hpp"
#include "toricq/quantization.hpp"
#include "toricq/solver.hpp"

namespace toricq {

/// {"dim": m, "facets": [{"normal": [..], "offset": "p/q"}, ...], "name": "..."}
std::shared_ptr<const Polytope> parse_polytope(const std::string& text, const std::string& origin = "<string>");
std::shared_ptr<const Polytope> load_polytope(const std::filesystem::path& path);

/// Header "# k=<k> polytope=<name>", then alpha_1..alpha_m,logw in lattice order.
void write_weights_csv(const std::filesystem::path& path, const HermitianWeights& h);
HermitianWeights read_weights_csv(const std::filesystem::path& path, std::shared_ptr<const LatticePointSet> points);

/// iter,residual,v_1..v_m,sup_twisted_bergman,inf_twisted_bergman
void write_run_log(const std::filesystem::path& path, const IterationState& st);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

}  // namespace toricq
