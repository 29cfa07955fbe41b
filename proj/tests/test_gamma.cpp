#include <cmath>

#include <doctest.h>

#include "srlab/gamma_calculus.hpp"
#include "srlab/geometry_invariants.hpp"
#include "srlab/rng.hpp"

using namespace srlab;

namespace {

Eigen::VectorXd random_point(SplitMix64& rng, int d, double half) {
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = half * (2.0 * rng.uniform() - 1.0);
  return x;
}

double window_for(const LieModel& m) { return m.nilpotency_step() > 0 ? 1.0 : 0.3; }

// Heisenberg sub-Laplacian in coordinates, by central differences.
double heisenberg_L_fd(const TestFunction& f, const Eigen::Vector3d& p) {
  const double h = 1e-3;
  auto at = [&](double dx, double dy, double dz) {
    Eigen::Vector3d q = p + Eigen::Vector3d(dx, dy, dz);
    return f(q);
  };
  const double f0 = at(0, 0, 0);
  const double fxx = (at(h, 0, 0) - 2 * f0 + at(-h, 0, 0)) / (h * h);
  const double fyy = (at(0, h, 0) - 2 * f0 + at(0, -h, 0)) / (h * h);
  const double fzz = (at(0, 0, h) - 2 * f0 + at(0, 0, -h)) / (h * h);
  const double fxz = (at(h, 0, h) - at(h, 0, -h) - at(-h, 0, h) + at(-h, 0, -h)) / (4 * h * h);
  const double fyz = (at(0, h, h) - at(0, h, -h) - at(0, -h, h) + at(0, -h, -h)) / (4 * h * h);
  const double x = p(0), y = p(1);
  return fxx + fyy + 0.25 * (x * x + y * y) * fzz - y * fxz + x * fyz;
}

}  // namespace

TEST_CASE("Heisenberg sub-Laplacian on simple functions") {
  const LieModel m = build_heisenberg();
  SplitMix64 rng(1);
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd x = random_point(rng, 3, 2.0);
    CHECK(sublaplacian(m, TestFunction::monomial(3, {2, 0, 0}), x) == doctest::Approx(2.0));
    CHECK(std::abs(sublaplacian(m, TestFunction::coordinate(3, 2), x)) < 1e-14);
    CHECK(sublaplacian(m, TestFunction::constant(3, 4.0), x) == 0.0);
  }
}

TEST_CASE("Heisenberg sub-Laplacian matches the coordinate operator") {
  const LieModel m = build_heisenberg();
  SplitMix64 rng(2);
  for (int i = 0; i < 10; ++i) {
    const auto f = TestFunction::random_polynomial(3, 4, 50 + i);
    const Eigen::Vector3d x = random_point(rng, 3, 1.0);
    const double want = heisenberg_L_fd(f, x);
    CHECK(sublaplacian(m, f, x) == doctest::Approx(want).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("carre du champ values") {
  const LieModel m = build_heisenberg();
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(3);
  const auto z = TestFunction::coordinate(3, 2), x = TestFunction::coordinate(3, 0);
  CHECK(gamma(m, z, z, o, Which::h) == doctest::Approx(0.0));
  CHECK(gamma(m, z, z, o, Which::v) == doctest::Approx(1.0));
  SplitMix64 rng(3);
  const Eigen::VectorXd p = random_point(rng, 3, 2.0);
  CHECK(gamma(m, x, x, p, Which::h) == doctest::Approx(1.0));
  CHECK(gamma(m, x, x, p, Which::v) == doctest::Approx(0.0));
  // Gamma^h(z) = (x^2 + y^2) / 4.
  CHECK(gamma(m, z, z, p, Which::h) == doctest::Approx(0.25 * (p(0) * p(0) + p(1) * p(1))));
  CHECK(gamma(m, TestFunction::random_polynomial(3, 3, 1), TestFunction::constant(3, 2.0), p, Which::h) == 0.0);
}

TEST_CASE("Gamma_2 values") {
  const LieModel m = build_heisenberg();
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(3);
  const auto z = TestFunction::coordinate(3, 2);
  CHECK(gamma2(m, z, o, Which::h) == doctest::Approx(0.5));
  CHECK(gamma2(m, z, o, Which::v) == doctest::Approx(0.0));
  CHECK(gamma2(m, TestFunction::coordinate(3, 0), o, Which::h) == doctest::Approx(0.0));
  const LieModel flat = build_abelian(2, 1);
  SplitMix64 rng(4);
  CHECK(gamma2(flat, TestFunction::coordinate(3, 1), random_point(rng, 3, 1.0), Which::h) == 0.0);
}

TEST_CASE("CD residual examples") {
  const LieModel m = build_heisenberg();
  const DeclaredConstants k{2, 0.0, 0.5, 0.0};
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(3);
  for (double ell : log_grid(-2, 2, 9)) {
    CHECK(std::abs(cd_residual(m, TestFunction::coordinate(3, 2), o, ell, k).value()) < 1e-14);
    CHECK(cd_residual(m, TestFunction::constant(3, 1.0), o, ell, k).value() == 0.0);
  }
  CHECK(cd_residual(m, TestFunction::coordinate(3, 0), o, 1.0, k).value() == doctest::Approx(1.0));
}

TEST_CASE("CD residual is quadratic in f") {
  const LieModel m = build_heisenberg();
  const DeclaredConstants k{2, 0.0, 0.5, 0.0};
  SplitMix64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const auto f = TestFunction::random_polynomial(3, 4, 200 + i);
    const Eigen::VectorXd x = random_point(rng, 3, 1.0);
    const double lam = 3.7;
    const double a = cd_residual(m, f.scaled(lam), x, 0.5, k).value();
    const double b = cd_residual(m, f, x, 0.5, k).value();
    CHECK(a == doctest::Approx(lam * lam * b).epsilon(1e-10));
  }
}

TEST_CASE("operator and frame-sum carre du champ agree") {
  SplitMix64 rng(6);
  for (const auto& name : shipped_model_names()) {
    CAPTURE(name);
    const LieModel m = build_model(name);
    for (int i = 0; i < 5; ++i) {
      const Eigen::VectorXd x = random_point(rng, m.dim(), window_for(m));
      const GammaEvaluator ev(m, x);
      const Jet f = lift(TestFunction::random_polynomial(m.dim(), 4, 300 + i), x, ev.order());
      const double a = ev.gamma_qform(f, f).value(), b = ev.gamma(f, Which::h).value();
      CHECK(std::abs(a - b) <= 1e-10 * (1.0 + std::abs(b)));
    }
  }
}

TEST_CASE("declared constants are never beaten on step-2 models") {
  SplitMix64 rng(7);
  for (const auto& name : {"heisenberg", "free_nilpotent:3", "free_nilpotent:4"}) {
    CAPTURE(name);
    const LieModel raw = build_model(name);
    const LieModel m = normalize_vertical(raw);
    const auto k = *raw.declared();
    const auto ells = log_grid(-1, 1, 9);
    double worst = 1.0;
    for (int i = 0; i < 5; ++i) {
      const Eigen::VectorXd x = random_point(rng, m.dim(), 1.0);
      const GammaEvaluator ev(m, x);
      for (int s = 0; s < 40; ++s) {
        const auto rep = gamma_report(ev, lift(TestFunction::random_polynomial(m.dim(), 4, 1000 * i + s), x, 4), ells);
        for (double ell : ells) {
          const auto r = cd_residual(rep, ell, k);
          worst = std::min(worst, r.value() / r.scale());
        }
      }
    }
    CHECK(worst >= -1e-9);
  }
}

TEST_CASE("condition B") {
  SplitMix64 rng(8);
  const LieModel h = build_heisenberg();
  for (int i = 0; i < 20; ++i)
    CHECK(condB_residual(h, TestFunction::random_polynomial(3, 3, i).scaled(0.1), random_point(rng, 3, 1.0)) <= 1e-12);
  CHECK(condB_residual(h, TestFunction::constant(3, 1.0), random_point(rng, 3, 1.0)) == 0.0);
  const LieModel e = build_engel();
  int above = 0;
  for (int i = 0; i < 20; ++i)
    if (condB_residual(e, TestFunction::random_polynomial(4, 4, i), random_point(rng, 4, 1.0)) > 1e-6) ++above;
  CHECK(above > 0);
}

TEST_CASE("commutation of the sub-Laplacian and the Laplacian") {
  SplitMix64 rng(9);
  const LieModel flat = build_abelian(2, 2);
  CHECK(commutation_residual(flat, TestFunction::random_polynomial(4, 4, 1), random_point(rng, 4, 1.0)) <= 1e-12);
  const LieModel h = build_heisenberg();
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = random_point(rng, 3, 1.0);
    const GammaEvaluator ev(h, x);
    const auto r = commutation_residual(ev, lift(TestFunction::random_polynomial(3, 4, i), x, 4));
    CHECK(std::abs(r.value()) <= 1e-9 * r.scale());
  }
}

TEST_CASE("double Gamma bounds") {
  const LieModel h = build_heisenberg();
  const DoubleGammaInputs in{0.0, 0.0};
  const Eigen::VectorXd o = Eigen::VectorXd::Zero(3);
  const auto [a0, b0] = double_gamma_residuals(h, TestFunction::constant(3, 1.0), o, 1.0, 1.0, in);
  CHECK(a0.value() == 0.0);
  CHECK(b0.value() == 0.0);
  const auto [az, bz] = double_gamma_residuals(h, TestFunction::coordinate(3, 2), o, 1.0, 1.0, in);
  CHECK(std::abs(bz.value()) < 1e-14);
  SplitMix64 rng(10);
  for (int i = 0; i < 100; ++i) {
    const auto [a, b] = double_gamma_residuals(h, TestFunction::random_polynomial(3, 3, i), random_point(rng, 3, 1.0),
                                               0.5, 2.0, in);
    CHECK(a.value() >= -1e-9 * a.scale());
    CHECK(b.value() >= -1e-9 * b.scale());
  }
}
