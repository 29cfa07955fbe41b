#include <cmath>
#include <numbers>

#include <doctest.h>

#include "srlab/heat_engine.hpp"
#include "srlab/rng.hpp"

using namespace srlab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd random_point(SplitMix64& rng, int d, double half) {
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = half * (2.0 * rng.uniform() - 1.0);
  return x;
}

McSettings small_mc(std::uint64_t seed, int paths = 4000) {
  McSettings s;
  s.paths = paths;
  s.steps = 50;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("group law: associativity, identity and inverses") {
  SplitMix64 rng(1);
  for (const auto& name : {"heisenberg", "free_nilpotent:3", "engel", "su2_pair:1"}) {
    CAPTURE(name);
    const LieModel m = build_model(name);
    const auto law = make_group_law(m);
    const double w = m.nilpotency_step() > 0 ? 1.0 : 0.3;
    for (int i = 0; i < 5; ++i) {
      const auto a = law->from_coordinates(random_point(rng, m.dim(), w));
      const auto b = law->from_coordinates(random_point(rng, m.dim(), w));
      const auto c = law->from_coordinates(random_point(rng, m.dim(), w));
      const auto lhs = law->coordinates(law->multiply(law->multiply(a, b), c));
      const auto rhs = law->coordinates(law->multiply(a, law->multiply(b, c)));
      CHECK((lhs - rhs).norm() <= 1e-10);
      CHECK((law->coordinates(law->multiply(a, law->identity())) - law->coordinates(a)).norm() <= 1e-12);
    }
    const Eigen::VectorXd u = random_point(rng, m.dim(), w);
    const auto prod = law->multiply(law->from_coordinates(u), law->from_coordinates(law->inverse_coordinates(u)));
    CHECK(law->coordinates(prod).norm() <= 1e-12);
  }
}

TEST_CASE("Heisenberg group law in coordinates") {
  const auto law = make_group_law(build_heisenberg());
  const auto p = law->multiply(law->from_coordinates(vec({1, 2, 3})), law->from_coordinates(vec({-0.5, 4, 1})));
  // z + z' + (x y' - y x') / 2
  CHECK((law->coordinates(p) - vec({0.5, 6, 4 + 0.5 * (4 + 1)})).norm() <= 1e-14);
}

TEST_CASE("Monte Carlo semigroup: exact and first-moment cases") {
  const LieModel m = build_heisenberg();
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(3);
  const auto one = mc_semigroup(m, TestFunction::constant(3, 1.0), o, 0.7, small_mc(1));
  CHECK(one.value == 1.0);
  CHECK(one.std_error == 0.0);
  const auto f = TestFunction::random_polynomial(3, 3, 9);
  const Eigen::VectorXd x = vec({0.3, -0.2, 0.1});
  CHECK(mc_semigroup(m, f, x, 0.0, small_mc(2)).value == doctest::Approx(f(x)));
  // P_t x^2 = x^2 + t with P_t = exp(t L / 2).
  for (double t : {0.5, 1.0}) {
    const auto e = mc_semigroup(m, TestFunction::monomial(3, {2, 0, 0}), o, t, small_mc(3, 20000));
    CHECK(std::abs(e.value - t) <= 4.0 * e.std_error);
  }
  // Linear functions of the horizontal coordinates are harmonic.
  const auto lin = mc_semigroup(m, TestFunction::coordinate(3, 1), x, 1.0, small_mc(4));
  CHECK(std::abs(lin.value - x(1)) <= 4.0 * lin.std_error + 1e-12);
}

TEST_CASE("Monte Carlo results do not depend on the thread count") {
  const LieModel m = build_heisenberg();
  auto s = small_mc(5, 2000);
  const auto f = TestFunction::gaussian_bump(Eigen::VectorXd::Zero(3), 0.7);
  const auto a = mc_semigroup(m, f, Eigen::VectorXd::Zero(3), 0.5, s);
  s.jobs = 3;
  const auto b = mc_semigroup(m, f, Eigen::VectorXd::Zero(3), 0.5, s);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("Monte Carlo gradient of a coordinate") {
  const LieModel m = build_heisenberg();
  const Eigen::VectorXd x = vec({0.4, 0.1, -0.3});
  const auto h = mc_gradient(m, TestFunction::coordinate(3, 0), x, 0.5, Which::h, small_mc(6));
  CHECK(h.value == doctest::Approx(1.0).epsilon(1e-6));
  const auto v = mc_gradient(m, TestFunction::coordinate(3, 0), x, 0.5, Which::v, small_mc(6));
  CHECK(std::abs(v.value) <= 1e-6);
}

TEST_CASE("PDE solver: initial data, mass and agreement with Monte Carlo") {
  const LieModel m = build_heisenberg();
  PdeSettings ps;
  const auto f = TestFunction::gaussian_bump(Eigen::VectorXd::Zero(3), 0.5);
  const auto fields = pde_evolve(m, sample_field(f, ps.grid), {0.0, 0.25, 0.5}, ps);
  REQUIRE(fields.size() == 3);
  const Eigen::VectorXd node = vec({ps.grid.x(25), ps.grid.y(25), ps.grid.z(28)});
  CHECK(fields[0].at(node) == doctest::Approx(f(node)));
  CHECK(fields[1].mass() <= fields[0].mass() + 1e-12);
  CHECK(fields[2].mass() <= fields[1].mass() + 1e-12);
  CHECK(fields[2].flux <= ps.max_flux);

  const Eigen::VectorXd x = vec({0.2, -0.1, 0.1});
  const auto pde = pde_value(m, f, x, 0.5, ps);
  const auto mc = mc_semigroup(m, f, x, 0.5, small_mc(7, 20000));
  CHECK(std::abs(pde.value - mc.value) <= 4.0 * (pde.std_error + mc.std_error));
}

TEST_CASE("PDE solver rejects non-Heisenberg models") {
  PdeSettings ps;
  const auto f = TestFunction::gaussian_bump(Eigen::VectorXd::Zero(4), 0.5);
  CHECK_THROWS_AS(pde_value(build_engel(), f, Eigen::VectorXd::Zero(4), 0.5, ps), HeatError);
}

TEST_CASE("heat kernel: symmetry, monotone decay and the on-diagonal value") {
  const LieModel m = build_heisenberg();
  HeatKernelSettings s;
  s.estimate_error = false;
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(3), y = vec({0.3, 0.0, 0.2});
  const auto a = heat_kernel(m, o, y, 0.8, s), b = heat_kernel(m, y, o, 0.8, s);
  CHECK(a.value == doctest::Approx(b.value).epsilon(0.03));
  const auto series = heat_kernel_series(m, {o}, o, {0.5, 0.75, 1.0}, s);
  CHECK(series[0][0].value > series[1][0].value);
  CHECK(series[1][0].value > series[2][0].value);
  // p_t(0, 0) = 1 / (4 t^2) for this normalization; smoothing by the bump only lowers it.
  CHECK(series[2][0].value <= 0.25 * 1.02);
  // The smoothed kernel is E[bump(W_t)] / integral of the bump.
  const double w = s.bump_width;
  const double integral = std::pow(2.0 * std::numbers::pi, 1.5) * w * w * w;
  const auto mc = mc_semigroup(m, TestFunction::gaussian_bump(o, w), o, 1.0, small_mc(11, 40000));
  CHECK(std::abs(series[2][0].value - mc.value / integral) <= 0.05 * series[2][0].value + 4.0 * mc.std_error / integral);
}

TEST_CASE("Heisenberg distance: closed-form values") {
  const LieModel m = build_heisenberg();
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(3);
  CHECK(cc_distance(m, o, vec({1, 0, 0})).value == doctest::Approx(1.0));
  CHECK(cc_distance(m, o, vec({0, 0, 1})).value == doctest::Approx(std::sqrt(4.0 * std::numbers::pi)));
  CHECK(cc_distance(m, o, o).value == 0.0);
}

TEST_CASE("Heisenberg distance: circle-arc geodesics") {
  // A horizontal circle arc of radius r and angle theta < 2 pi is length minimizing.
  // Its endpoint is (r sin th, r (1 - cos th), r^2 (th - sin th) / 2), obtained here by RK4 on z' = (x y' - y x') / 2.
  const LieModel m = build_heisenberg();
  for (double r : {0.5, 1.0, 2.0})
    for (double theta : {0.5, 2.0, 4.0, 6.0}) {
      const int n = 2000;
      const double L = r * theta, h = L / n;
      auto zdot = [r](double s) {
        const double x = r * std::sin(s / r), y = r * (1.0 - std::cos(s / r));
        const double dx = std::cos(s / r), dy = std::sin(s / r);
        return 0.5 * (x * dy - y * dx);
      };
      double z = 0.0;
      for (int i = 0; i < n; ++i) {
        const double s = i * h;
        z += h / 6.0 * (zdot(s) + 4.0 * zdot(s + 0.5 * h) + zdot(s + h));
      }
      const Eigen::VectorXd end = vec({r * std::sin(theta), r * (1.0 - std::cos(theta)), z});
      CAPTURE(r);
      CAPTURE(theta);
      CHECK(cc_distance(m, Eigen::VectorXd::Zero(3), end).value == doctest::Approx(L).epsilon(1e-8));
    }
}

TEST_CASE("Heisenberg distance: metric properties") {
  const LieModel m = build_heisenberg();
  const auto law = make_group_law(m);
  SplitMix64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd a = random_point(rng, 3, 1.5), b = random_point(rng, 3, 1.5), c = random_point(rng, 3, 1.5);
    const double ab = cc_distance(m, a, b).value, bc = cc_distance(m, b, c).value, ac = cc_distance(m, a, c).value;
    CHECK(ac <= ab + bc + 1e-9);
    CHECK(ab == doctest::Approx(cc_distance(m, b, a).value).epsilon(1e-9));
    const Eigen::VectorXd ga = law->coordinates(law->multiply(law->from_coordinates(c), law->from_coordinates(a)));
    const Eigen::VectorXd gb = law->coordinates(law->multiply(law->from_coordinates(c), law->from_coordinates(b)));
    CHECK(cc_distance(m, ga, gb).value == doctest::Approx(ab).epsilon(1e-9));
    const double lam = 1.7;
    const Eigen::VectorXd da = vec({lam * a(0), lam * a(1), lam * lam * a(2)});
    const Eigen::VectorXd db = vec({lam * b(0), lam * b(1), lam * lam * b(2)});
    CHECK(cc_distance(m, da, db).value == doctest::Approx(lam * ab).epsilon(1e-9));
  }
}

TEST_CASE("graph distance on Engel") {
  const LieModel m = build_engel();
  const auto law = make_group_law(m);
  // A horizontal segment of length 0.5 is minimizing: the lower bound is its horizontal length.
  Eigen::VectorXd end = law->identity();
  law->right_multiply_exp(end, 0.5 * m.orthonormalizer().row(0).transpose());
  const auto d = cc_distance(m, Eigen::VectorXd::Zero(4), law->coordinates(end));
  CHECK(d.method == "graph");
  CHECK(d.value == doctest::Approx(0.5).epsilon(1e-9));
  const auto far = cc_distance(m, Eigen::VectorXd::Zero(4), vec({0.2, 0.1, 0.05, 0.02}));
  CHECK(far.lower <= far.value);
  CHECK(far.value <= far.upper + 1e-12);
}
