#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "toricq/cli.hpp"
#include "toricq/io.hpp"

using namespace toricq;
using namespace toricq::cli;

namespace {

std::string data(const std::string& name) { return std::string(TORICQ_DATA_DIR) + "/" + name + ".json"; }
std::shared_ptr<const Polytope> fixture(const std::string& name) { return load_polytope(data(name)); }

}  // namespace

TEST_CASE("k ranges and vectors") {
  CHECK(parse_k_range("8") == std::vector<int>{8});
  CHECK(parse_k_range("4..7") == std::vector<int>{4, 5, 6, 7});
  CHECK(parse_k_range("4..12..4") == std::vector<int>{4, 8, 12});
  CHECK(parse_k_range("4..11..4") == std::vector<int>{4, 8});
  for (const char* bad : {"", "0", "9..4", "4..12..0", "4..x", "4..6..1..2", "1.5", "-3"})
    CHECK_THROWS_AS(parse_k_range(bad), ConfigError);
  CHECK(parse_vector("0.5,-1e-3") == std::vector<double>{0.5, -1e-3});
  CHECK(parse_vector("2") == std::vector<double>{2.0});
  for (const char* bad : {"", "1,", "a,1", "1;2"}) CHECK_THROWS_AS(parse_vector(bad), ConfigError);
}

TEST_CASE("JSON configuration") {
  ExperimentConfig base;
  base.threads = 3;
  const auto c = apply_json(nlohmann::json::parse(R"({"polytope": "x.json", "k": "2..6..2", "mode": "auto-sigma",
      "max_iter": 77, "grid-radius": "auto", "tol": 1e-9, "sigma": [0.1, 0.2], "zero_weight": true})"),
                            base);
  CHECK(c.polytope_path == "x.json");
  CHECK(c.ks == std::vector<int>{2, 4, 6});
  CHECK(c.solver.mode == SolverMode::AutoSigma);
  CHECK(c.solver.max_iter == 77);
  CHECK(c.solver.grid.radius == 0.0);
  CHECK(c.solver.tol == 1e-9);
  CHECK(c.solver.sigma == std::vector<double>{0.1, 0.2});
  CHECK(c.zero_weight);
  CHECK(c.threads == 3);
  CHECK(apply_json(nlohmann::json::parse(R"({"k": [3, 5]})"), base).ks == std::vector<int>{3, 5});
  CHECK(apply_json(nlohmann::json::parse(R"({"k": 9, "sigma": "1,2"})"), base).solver.sigma == std::vector<double>{1, 2});
  CHECK_THROWS_AS(apply_json(nlohmann::json::parse("[1]"), base), ConfigError);
  CHECK_THROWS_AS(apply_json(nlohmann::json::parse(R"({"tol": "small"})"), base), ConfigError);
  CHECK_THROWS_AS(apply_json(nlohmann::json::parse(R"({"mode": "fast"})"), base), ConfigError);
}

TEST_CASE("configuration validation") {
  ExperimentConfig c;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.polytope_path = data("missing");
  c.ks = {2};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.polytope_path = data("cp1");
  CHECK_NOTHROW(c.validate());
  c.ks = {4, 2};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.ks = {2};
  c.solver.grid.resolution = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.solver.grid.resolution = 0;
  c.potential = "bumpy";
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("lattice table") {
  const auto rows = cmd_lattice(fixture("cp1"), {1, 2, 3, 4, 5});
  for (const auto& r : rows) {
    CHECK(r.count == r.k + 1);
    CHECK(r.prediction == Rational(r.k + 1));
    CHECK(r.gap == 0);
    CHECK(r.ehrhart == Rational(r.count));
  }
  CHECK(cmd_lattice(fixture("cp2"), {3})[0].count == 10);
  const auto f1 = cmd_lattice(fixture("f1"), {2})[0];
  CHECK(f1.count == 12);
  CHECK(f1.prediction == 11);
  CHECK(f1.gap == 1);
}

TEST_CASE("solve outputs and the weights table on CP1") {
  SolverConfig cfg;
  cfg.mode = SolverMode::AutoSigma;
  cfg.tol = 1e-10;
  const auto p = fixture("cp1");
  const auto solves = run_solves(p, {2, 3, 4}, cfg);
  REQUIRE(solves.size() == 3);
  for (const auto& s : solves) CHECK(s.state.converged);

  const auto j = solve_summary(solves[2], cfg.mode, 1);
  CHECK(j["k"] == 4);
  CHECK(j["mode"] == "auto-sigma");
  CHECK(j["converged"] == true);
  CHECK(j["v"].size() == 1);
  CHECK(j["kv"].size() == 1);

  const auto dir = std::filesystem::temp_directory_path() / "toricq_test_cli";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_solve_outputs(dir, solves[2], cfg.mode, 1);
  CHECK(std::filesystem::exists(dir / "run_k4.csv"));
  CHECK(std::filesystem::exists(dir / "summary_k4.json"));
  const auto back = read_weights_csv(dir / "weights_k4.csv", lattice_points(p, 4));
  CHECK(back.logw() == solves[2].state.H.logw());
  std::ifstream in(dir / "summary_k4.json");
  CHECK(nlohmann::json::parse(in)["iterations"] == solves[2].state.iterations);
  std::filesystem::remove_all(dir);

  const auto w = cmd_weights(*p, solves);
  REQUIRE(w.rows.size() == 3);
  for (const auto& r : w.rows) CHECK(std::abs(r.kv[0]) < 1e-8);
  CHECK(w.cauchy);
  CHECK_THROWS_AS(cmd_weights(*p, {solves[0], solves[1]}), ConfigError);

  const auto b1 = cmd_b1_check(*p, solves);
  for (const auto& r : b1.rows) {
    CHECK(r.closed_form == 0);
    CHECK(r.max_error < 1e-8);
  }
}

TEST_CASE("Bergman fit on the round line") {
  const auto rep = cmd_bergman_fit(fixture("cp1"), {8, 16}, "round", 0.0);
  REQUIRE(rep.rows.size() == 2);
  for (const auto& r : rep.rows) {
    CHECK(r.rho_error < 1e-8);
    CHECK(r.a1_error < 1e-6);
  }
  CHECK_THROWS_AS(cmd_bergman_fit(fixture("f1"), {4}, "round", 0.0), ConfigError);
  CHECK_THROWS_AS(cmd_bergman_fit(fixture("cp1"), {}, "round", 0.0), ConfigError);
  CHECK_THROWS_AS(cmd_bergman_fit(fixture("cp1"), {4}, "wavy", 0.0), ConfigError);
}
