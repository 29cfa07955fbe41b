#include <doctest.h>

#include "srlab/model_zoo.hpp"

using namespace srlab;

TEST_CASE("Heisenberg model") {
  const LieModel m = build_heisenberg();
  CHECK(m.dim_h() == 2);
  CHECK(m.dim_v() == 1);
  CHECK(m.c(0, 1, 2) == 1.0);
  CHECK(m.c(1, 0, 2) == -1.0);
  REQUIRE(m.declared());
  CHECK(m.declared()->n == 2);
  CHECK(m.declared()->rho20 == 0.5);
  const auto v = validate(m);
  CHECK(v.jacobi_residual == 0.0);
  CHECK(v.structural_ok());
  CHECK(v.metric_preserving());
  CHECK(v.v_integrable());
  CHECK(v.bracket_step == 2);
}

TEST_CASE("free nilpotent models") {
  for (int n : {2, 3, 4}) {
    const LieModel m = build_free_nilpotent(n);
    CHECK(m.dim() == n * (n + 1) / 2);
    CHECK(m.dim_v() == n * (n - 1) / 2);
    REQUIRE(m.declared());
    CHECK(m.declared()->rho20 == doctest::Approx(1.0 / (2.0 * (n - 1))));
    CHECK(validate(m).structural_ok());
  }
  CHECK_THROWS_AS(build_free_nilpotent(1), ModelError);
  // F(2) is the Heisenberg algebra.
  CHECK(build_free_nilpotent(2).structure_constants() == build_heisenberg().structure_constants());
}

TEST_CASE("Engel model") {
  const LieModel m = build_engel();
  const auto v = validate(m);
  CHECK(m.dim() == 4);
  CHECK(v.bracket_step == 3);
  CHECK(v.jacobi_residual == 0.0);
  CHECK(v.metric_preserving());
  CHECK_FALSE(v.vertical_parallel());
  CHECK(v.v_integrable());
  CHECK_FALSE(m.declared());
}

TEST_CASE("su2 pair model") {
  const LieModel m = build_su2_pair(1.0);
  CHECK(m.dim_h() == 3);
  REQUIRE(m.declared());
  CHECK(m.declared()->rho1 == doctest::Approx(4.0));
  CHECK(m.declared()->rho20 == doctest::Approx(0.25));
  const auto v = validate(m);
  CHECK(v.structural_ok());
  CHECK(v.metric_preserving());
  CHECK(v.min_metric_eigenvalue > 0.0);
  CHECK(v.trace_zero());
  CHECK_THROWS_AS(build_su2_pair(0.0), ModelError);
  CHECK_THROWS_AS(build_su2_pair(-1.0), ModelError);
}

TEST_CASE("every shipped model validates") {
  for (const auto& name : shipped_model_names()) {
    CAPTURE(name);
    const auto v = validate(build_model(name));
    CHECK(v.structural_ok());
    CHECK(v.jacobi_residual <= 1e-12);
  }
}

TEST_CASE("JSON round trip") {
  for (const auto& name : shipped_model_names()) {
    const LieModel m = build_model(name);
    const nlohmann::json j = m;
    const LieModel back = model_from_json(j);
    CHECK(back.structure_constants() == m.structure_constants());
    CHECK(back.frame_metric() == m.frame_metric());
    CHECK(back.declared().has_value() == m.declared().has_value());
  }
}

TEST_CASE("unknown model names are rejected") {
  CHECK_THROWS_AS(build_model("nope"), ModelError);
  CHECK_THROWS_AS(build_model("free_nilpotent:x"), ModelError);
}
