#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "srlab/verify_suite.hpp"

using namespace srlab;
using nlohmann::json;

TEST_CASE("verdict semantics") {
  CHECK(decide(0.0, 0.0) == Verdict::pass);
  CHECK(decide(-1e-10, 1e-9) == Verdict::pass);
  CHECK(decide(-1e-8, 1e-9) == Verdict::fail);
  CHECK(decide(-1e-8, 1e-9, 1e-7) == Verdict::inconclusive);
  CHECK(decide(-1.0, 0.0, 0.5) == Verdict::fail);
  CHECK(to_string(Verdict::inconclusive) == "inconclusive");
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(parse_config(json{{"seed", 3}, {"checks", json::array()}}));
  CHECK_THROWS_AS(parse_config(json::array()), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"sed", 3}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"jobs", 0}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"checks", {{{"id", "nope"}}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"checks", {{{"id", "validate"}, {"model", "moebius"}}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"checks", {{{"id", "validate"}, {"paths", 3}}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"output", {{"xml", "a"}}}}), ConfigError);
  const auto cfg = parse_config(json{{"seed", 9}, {"jobs", 2}, {"output", {{"json", "a.json"}, {"csv_dir", "d"}}}});
  CHECK(cfg.seed == 9);
  CHECK(cfg.jobs == 2);
  CHECK(cfg.json_path == "a.json");
  CHECK(cfg.csv_dir == "d");
}

TEST_CASE("default config parses and names only known checks") {
  const auto cfg = parse_config(default_config());
  const auto ids = check_ids();
  for (const auto& c : cfg.checks)
    CHECK(std::find(ids.begin(), ids.end(), c.at("id").get<std::string>()) != ids.end());
}

TEST_CASE("empty suite") {
  const auto rep = run_suite(parse_config(json{{"checks", json::array()}}));
  CHECK(rep.results.empty());
  CHECK(rep.exit_code() == 0);
  CHECK(report_json(rep) == json::array());
}

TEST_CASE("suite output is deterministic across thread counts and writes CSV") {
  const auto dir = std::filesystem::temp_directory_path() / "srlab_suite_test";
  std::filesystem::remove_all(dir);
  json j = {{"seed", 5},
            {"checks",
             {{{"id", "validate"}, {"model", "engel"}},
              {{"id", "cond_b"}, {"model", "heisenberg"}, {"samples", 50}},
              {{"id", "cd_star"}, {"model", "heisenberg"}, {"functions", 30}, {"points", 3}},
              {{"id", "semigroup"}, {"model", "heisenberg"}, {"paths", 2000}, {"steps", 20}}}}};
  auto cfg = parse_config(j);
  const auto a = run_suite(cfg);
  cfg.jobs = 3;
  cfg.csv_dir = dir.string();
  const auto b = run_suite(cfg);
  CHECK(report_json(a).dump() == report_json(b).dump());
  CHECK(a.failed == 0);
  for (const auto& r : a.results) CHECK(r.inputs_digest.size() > 0);

  std::ifstream in(dir / "cd_star.csv");
  REQUIRE(in);
  std::string header;
  std::getline(in, header);
  CHECK(header == "check_id,anchor,model,margin,tolerance,error,verdict,runtime_s");
  std::filesystem::remove_all(dir);
}

TEST_CASE("per-check seeds change Monte Carlo results") {
  const json c = {{"id", "semigroup"}, {"model", "heisenberg"}, {"paths", 1000}, {"steps", 10}};
  const auto a = run_check(c, 1), b = run_check(c, 2);
  CHECK(json(a).dump() != json(b).dump());
  CHECK(json(run_check(c, 1)).dump() == json(a).dump());
}

TEST_CASE("run_check maps bad inputs to configuration errors") {
  CHECK_THROWS_AS(run_check({{"id", "validate"}, {"model", "su2_pair:-1"}}, 1), ConfigError);
  CHECK_THROWS_AS(run_check({{"id", "cond_b"}, {"model", "heisenberg"}, {"expect", "maybe"}}, 1), ConfigError);
}

TEST_CASE("gradient bound (a) on a coordinate function") {
  // Heisenberg constants rho1 = 0, rho20 = 1/2, ell = 1: alpha = -1, so the bound reads 1 <= e^t.
  const LieModel m = build_heisenberg();
  const auto k = assemble_constants(geometry_report(m), std::nullopt, Objective::max_rho2);
  GradientSettings s;
  s.mc.paths = 2000;
  s.mc.steps = 20;
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  for (double t : {0.3, 1.0}) {
    const auto r = check_gradient_bounds(m, k, TestFunction::coordinate(3, 0), x, t, 'a', s);
    CHECK(r.verdict == Verdict::pass);
    CHECK(r.detail["lhs"].get<double>() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.detail["rhs"].get<double>() == doctest::Approx(std::exp(t)).epsilon(1e-6));
  }
  const auto one = check_gradient_bounds(m, k, TestFunction::constant(3, 2.0), x, 0.5, 'b', s);
  CHECK(one.verdict == Verdict::pass);
  CHECK(one.margin == 0.0);
  s.mc.paths = 500;
  CHECK(check_gradient_bounds(m, k, TestFunction::coordinate(3, 0), x, 0.5, 'a', s).verdict == Verdict::inconclusive);
}

TEST_CASE("Poincare decay: initial time and the zero function") {
  const LieModel m = build_heisenberg();
  const auto k = suite_constants(m);
  PoincareSettings s;
  s.times = {0.0};
  const auto r = check_poincare_decay(m, k, TestFunction::gaussian_bump(Eigen::VectorXd::Zero(3), 0.5), s);
  CHECK(r.margin == 0.0);
  CHECK(r.verdict == Verdict::pass);
  s.times = {0.0, 0.5};
  const auto z = check_poincare_decay(m, k, TestFunction::constant(3, 0.0), s);
  CHECK(z.margin == 0.0);
  CHECK(z.verdict == Verdict::pass);
  s.variant = 'q';
  CHECK_THROWS_AS(check_poincare_decay(m, k, TestFunction::constant(3, 0.0), s), std::invalid_argument);
}

TEST_CASE("suite constants") {
  const auto h = suite_constants(build_heisenberg());
  CHECK(h.rho1 == doctest::Approx(0.0));
  CHECK(h.rho20 == doctest::Approx(0.5));
  CHECK(std::isinf(h.c));
  const auto s = suite_constants(build_su2_pair(1.0));
  CHECK(s.alpha == doctest::Approx(0.8));
}
