#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>

#include "srlab/gamma_calculus.hpp"
#include "srlab/jet_engine.hpp"
#include "srlab/rng.hpp"
#include "srlab/test_function.hpp"
#include "srlab/verify_suite.hpp"

namespace srlab {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "fail";
}

Verdict decide(double margin, double tolerance, double error) {
  if (margin >= -tolerance) return Verdict::pass;
  if (error > std::abs(margin)) return Verdict::inconclusive;
  return Verdict::fail;
}

CheckResult make_result(std::string id, std::string anchor, std::string model, double margin, double tolerance,
                        double error) {
  CheckResult r;
  r.check_id = std::move(id);
  r.anchor = std::move(anchor);
  r.model = std::move(model);
  r.margin = margin;
  r.tolerance = tolerance;
  r.error = error;
  r.verdict = decide(margin, tolerance, error);
  return r;
}

namespace {

// Orthonormal frame derivatives A_a f(u), a = 0..d-1.
Eigen::VectorXd frame_derivatives(const LieModel& m, const TestFunction& f, const Eigen::VectorXd& u) {
  const Jet j = lift(f, u, 1);
  Eigen::VectorXd grad(m.dim());
  for (int k = 0; k < m.dim(); ++k) grad(k) = j.derivative(k).value();
  return m.orthonormalizer() * (frame_matrix(m, u).transpose() * grad);
}

double gamma_mixed_at(const LieModel& m, const TestFunction& f, const Eigen::VectorXd& u, double ell) {
  const Eigen::VectorXd a = frame_derivatives(m, f, u);
  return a.head(m.dim_h()).squaredNorm() + ell * a.tail(m.dim_v()).squaredNorm();
}

// Mean of f^2 minus squared mean of f with a delta-method standard error.
SampleStats variance_stats(const std::vector<double>& v) {
  const auto n = v.size();
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = v[i] * v[i];
  const auto m1 = sample_stats(v), m2 = sample_stats(sq);
  SampleStats out;
  out.mean = m2.mean - m1.mean * m1.mean;
  if (n < 2) return out;
  // Gradient (1, -2 m1) on (E f^2, E f).
  std::vector<double> lin(n);
  for (std::size_t i = 0; i < n; ++i) lin[i] = sq[i] - 2.0 * m1.mean * v[i];
  out.std_error = sample_stats(lin).std_error;
  return out;
}

}  // namespace

CheckResult check_gradient_bounds(const LieModel& model, const CDConstants& k, const TestFunction& f,
                                  const Eigen::Ref<const Eigen::VectorXd>& x, double t, char variant,
                                  const GradientSettings& s) {
  const std::string anchor = std::string("GradBound(") + variant + ")";
  const double r1 = k.rho1, r20 = k.rho20, r21 = k.rho21;
  std::string hypothesis;
  if (variant == 'b' && !(r20 > 0.0)) hypothesis = "requires rho20 > 0";
  if (variant == 'c' && !(r1 >= 0.0 && r21 >= 0.0 && r20 > 0.0)) hypothesis = "requires rho1, rho21 >= 0, rho20 > 0";
  if (variant == 'd' && !(r1 >= 0.0 && r20 >= 0.0 && r21 >= 0.0)) hypothesis = "requires rho1, rho20, rho21 >= 0";
  if (variant < 'a' || variant > 'd') throw std::invalid_argument("gradient bound variant must be a..d");
  if (!hypothesis.empty()) {
    auto r = make_result("gradient_bounds", anchor, model.name(), 0.0, 0.0);
    r.verdict = Verdict::inconclusive;
    r.detail = {{"hypothesis", hypothesis}};
    return r;
  }
  const double ell = s.ell;
  const Eigen::VectorXd x0 = x;
  auto gh = [&] { return mc_gradient(model, f, x0, t, Which::h, s.mc); };
  auto gv = [&] { return mc_gradient(model, f, x0, t, Which::v, s.mc); };
  auto pt_gamma = [&](double l) {
    return mc_expectation(model, [&](const Eigen::VectorXd& u) { return gamma_mixed_at(model, f, u, l); }, x0, t, s.mc);
  };
  auto var = [&] {
    return variance_stats(mc_path_values(model, [&f](const Eigen::VectorXd& u) { return f(u); }, x0, t, s.mc));
  };

  double lhs = 0.0, lhs_err = 0.0, rhs = 0.0, rhs_err = 0.0;
  nlohmann::json detail;
  if (variant == 'a') {
    const double alpha = std::min(r1 - 1.0 / ell, r21 + r20 / ell);
    const auto a = gh(), b = gv();
    lhs = a.value + ell * b.value;
    lhs_err = std::hypot(a.std_error, ell * b.std_error);
    const auto p = pt_gamma(ell);
    rhs = std::exp(-alpha * t) * p.value;
    rhs_err = std::exp(-alpha * t) * p.std_error;
    detail["alpha_ell"] = alpha;
  } else if (variant == 'b') {
    const double k1 = std::max(0.0, -r1), k2 = std::max(0.0, -r21);
    const auto a = gh();
    const auto v = var();
    const double factor = 1.0 + 2.0 / r20 + (k1 + k2 / r20) * t;
    lhs = t * a.value;
    lhs_err = t * a.std_error;
    rhs = factor * v.mean;
    rhs_err = factor * v.std_error;
    detail["factor"] = factor;
  } else if (variant == 'c') {
    const double w = r1 == 0.0 ? t : -std::expm1(-r1 * t) / r1;
    const auto a = gh();
    const auto v = var();
    lhs = w * a.value;
    lhs_err = w * a.std_error;
    rhs = (1.0 + 2.0 / r20) * v.mean;
    rhs_err = (1.0 + 2.0 / r20) * v.std_error;
  } else {
    const auto v = var();
    lhs = ell / (ell + t) * v.mean;
    lhs_err = ell / (ell + t) * v.std_error;
    const auto p = pt_gamma(ell + t);
    rhs = t * p.value;
    rhs_err = t * p.std_error;
  }
  const double err = std::hypot(lhs_err, rhs_err);
  auto r = make_result("gradient_bounds", anchor, model.name(), rhs - lhs, 3.0 * err, err);
  detail["lhs"] = lhs;
  detail["rhs"] = rhs;
  detail["t"] = t;
  detail["x"] = std::vector<double>(x0.data(), x0.data() + x0.size());
  detail["ell"] = ell;
  detail["paths"] = s.mc.paths;
  detail["steps"] = s.mc.steps;
  r.detail = detail;
  if (s.mc.paths < 1000 && r.verdict == Verdict::pass && err > 0.0) r.verdict = Verdict::inconclusive;
  return r;
}

CheckResult check_vertical_gradient(const LieModel& model, const TestFunction& f,
                                    const Eigen::Ref<const Eigen::VectorXd>& x, double t, const McSettings& s) {
  const Eigen::VectorXd x0 = x;
  const auto gv = mc_gradient(model, f, x0, t, Which::v, s);
  const double lhs = std::sqrt(std::max(0.0, gv.value));
  const double lhs_err = lhs > 0.0 ? std::min(gv.std_error / (2.0 * lhs), std::sqrt(gv.std_error)) : std::sqrt(gv.std_error);
  const auto p = mc_expectation(
      model,
      [&](const Eigen::VectorXd& u) {
        return frame_derivatives(model, f, u).tail(model.dim_v()).norm();
      },
      x0, t, s);
  const double err = std::hypot(lhs_err, p.std_error);
  auto r = make_result("gradient_bounds", "CondARiemann", model.name(), p.value - lhs, 3.0 * err, err);
  r.detail = {{"lhs", lhs}, {"rhs", p.value}, {"t", t}, {"x", std::vector<double>(x0.data(), x0.data() + x0.size())}};
  return r;
}

// ---- PDE based checks --------------------------------------------------------

namespace {

struct NodeBox {
  int i0, i1, j0, j1, k0, k1;
};

NodeBox window(const PdeGrid& g, double wxy, double wz) {
  auto lo = [](double half, double h, double w, int n) {
    return std::clamp(static_cast<int>(std::ceil((half - w) / h)), 1, n - 2);
  };
  auto hi = [](double half, double h, double w, int n) {
    return std::clamp(static_cast<int>(std::floor((half + w) / h)), 1, n - 2);
  };
  return {lo(g.half_xy, g.hx(), wxy, g.nx), hi(g.half_xy, g.hx(), wxy, g.nx),
          lo(g.half_xy, g.hy(), wxy, g.ny), hi(g.half_xy, g.hy(), wxy, g.ny),
          lo(g.half_z, g.hz(), wz, g.nz),   hi(g.half_z, g.hz(), wz, g.nz)};
}

template <class F>
void for_nodes(const NodeBox& b, F fn) {
  for (int k = b.k0; k <= b.k1; ++k)
    for (int j = b.j0; j <= b.j1; ++j)
      for (int i = b.i0; i <= b.i1; ++i) fn(i, j, k);
}

PdeField transformed(PdeField f, const std::function<double(double)>& g) {
  for (double& v : f.u) v = g(v);
  return f;
}

}  // namespace

std::vector<CheckResult> check_entropy_liyau(const LieModel& model, const CDConstants& k, const LiYauSettings& s) {
  if (!is_heisenberg(model)) throw HeatError("Li-Yau checks need the Heisenberg PDE");
  if (!(k.rho20 > 0.0)) throw std::invalid_argument("Li-Yau checks need rho2 > 0");
  const double eps = s.epsilon;
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(3);
  const PdeField bump = sample_field(TestFunction::gaussian_bump(origin, s.bump_width), s.pde.grid);
  const double eps_log = eps * std::log(eps);
  // f log f - eps log eps vanishes off the support, so P_t(f log f) = eps log eps + P_t(that).
  const PdeField flogf = transformed(bump, [&](double b) { return (eps + b) * std::log(eps + b) - eps_log; });

  std::vector<double> times = s.times;
  const double t_diag = times[times.size() / 2];
  times.push_back(t_diag - s.pde.dt);
  std::sort(times.begin(), times.end());
  const auto fields = pde_evolve(model, bump, times, s.pde);
  const auto fields_log = pde_evolve(model, flogf, times, s.pde);
  auto field_at = [&](double t) -> std::size_t {
    return static_cast<std::size_t>(std::find(times.begin(), times.end(), t) - times.begin());
  };

  const double n = k.n, r1 = k.rho1, r2 = k.rho20;
  const auto box = window(s.pde.grid, s.window_xy, s.window_z);
  std::vector<CheckResult> out;

  // LY2 with N, D from the constants.
  {
    double worst = std::numeric_limits<double>::infinity();
    nlohmann::json per_t = nlohmann::json::array();
    for (double t : s.times) {
      const auto& F = fields[field_at(t)];
      const double rhs = k.N / t;
      double w = std::numeric_limits<double>::infinity();
      for_nodes(box, [&](int i, int j, int kk) {
        const double u = eps + F.u[F.grid.index(i, j, kk)];
        const double lhs = F.gamma_h(i, j, kk) / (k.D * u * u) - F.L(i, j, kk) / u;
        w = std::min(w, (rhs - lhs) / rhs);
      });
      per_t.push_back({{"t", t}, {"relative_margin", w}, {"rhs", rhs}});
      worst = std::min(worst, w);
    }
    auto r = make_result("li_yau", "LY2", model.name(), worst, s.relative_tolerance);
    r.detail = {{"N", k.N}, {"D", k.D}, {"per_t", per_t}, {"margin_units", "fraction of N/t"}};
    out.push_back(std::move(r));
  }

  // LY over the beta grid.
  for (double beta : s.betas) {
    const double ab = (r2 + beta) / r2, bb = (beta - 1.0) / beta;
    double worst = std::numeric_limits<double>::infinity();
    for (double t : s.times) {
      const auto& F = fields[field_at(t)];
      const double rhs = n / (4.0 * t) * (ab * ab / ((2.0 - beta) * (beta - 1.0)) - r1 * t * (2.0 * ab - bb * r1 * t));
      for_nodes(box, [&](int i, int j, int kk) {
        const double u = eps + F.u[F.grid.index(i, j, kk)];
        const double lhs = F.gamma_h(i, j, kk) / (u * u) - (ab - bb * r1 * t) * F.L(i, j, kk) / u;
        worst = std::min(worst, (rhs - lhs) / std::abs(rhs));
      });
    }
    auto r = make_result("li_yau", "LY", model.name(), worst, s.relative_tolerance);
    r.detail = {{"beta", beta}, {"a_beta", ab}, {"b_beta", bb}, {"margin_units", "fraction of the right side"}};
    out.push_back(std::move(r));
  }

  // Entropy bound.
  if (r1 >= 0.0) {
    const double C = 1.0 + 2.0 / r2;
    double worst = std::numeric_limits<double>::infinity();
    for (double t : s.times) {
      const auto& F = fields[field_at(t)];
      const auto& G = fields_log[field_at(t)];
      const double w = r1 == 0.0 ? 0.5 * t : -std::expm1(-r1 * t) / (2.0 * r1);
      for_nodes(box, [&](int i, int j, int kk) {
        const auto idx = F.grid.index(i, j, kk);
        const double u = eps + F.u[idx];
        const double lhs = w * F.gamma_h(i, j, kk) / (u * u);
        const double rhs = C * ((eps_log + G.u[idx]) / u - std::log(u));
        worst = std::min(worst, (rhs - lhs) / (std::abs(rhs) + std::abs(lhs) + 1e-300));
      });
    }
    auto r = make_result("li_yau", "EntropyLY(a)", model.name(), worst, s.relative_tolerance);
    r.detail = {{"margin_units", "fraction of |lhs| + |rhs|"}};
    out.push_back(std::move(r));
  }

  // Diagnostic: (L/2 - d/dt)(u log u) = u Gamma(log u) / 2 on the grid.
  {
    const auto& F = fields[field_at(t_diag)];
    const auto& P = fields[field_at(t_diag - s.pde.dt)];
    auto ulogu = [&](double v) { return (eps + v) * std::log(eps + v); };
    const PdeField w = transformed(F, ulogu);
    double worst = 0.0;
    for_nodes(box, [&](int i, int j, int kk) {
      const auto idx = F.grid.index(i, j, kk);
      const double u = eps + F.u[idx];
      const double a = 0.5 * w.L(i, j, kk), b = (w.u[idx] - ulogu(P.u[idx])) / s.pde.dt;
      const double c = 0.5 * F.gamma_h(i, j, kk) / u;
      worst = std::max(worst, std::abs(a - b - c) / (1.0 + std::abs(a) + std::abs(b) + std::abs(c)));
    });
    out.back().detail["partialtL_residual"] = worst;
    out.back().detail["partialtL_t"] = t_diag;
  }
  return out;
}

std::vector<CheckResult> check_harnack(const LieModel& model, const CDConstants& k, const HarnackSettings& s) {
  if (!is_heisenberg(model)) throw HeatError("Harnack checks need the Heisenberg PDE");
  if (!(s.t0 > 0.0 && s.t1 > s.t0)) throw std::invalid_argument("Harnack: need 0 < t0 < t1");
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(3);
  const auto fields = pde_evolve(model, sample_field(TestFunction::gaussian_bump(origin, s.bump_width), s.pde.grid),
                                 {s.t0, s.t1}, s.pde);
  const double dt = s.t1 - s.t0;
  const double time_factor = std::pow(s.t1 / s.t0, 0.5 * k.N);
  SplitMix64 rng(stream_seed(s.seed, 0x4861726eULL));
  std::vector<CheckResult> out;
  double worst = std::numeric_limits<double>::infinity(), worst_upper = worst;
  nlohmann::json samples = nlohmann::json::array();
  int drawn = 0;
  const auto law = make_group_law(model);
  while (drawn < s.samples) {
    Eigen::VectorXd x(3), step(3);
    x << 1.2 * (2 * rng.uniform() - 1), 1.2 * (2 * rng.uniform() - 1), 0.6 * (2 * rng.uniform() - 1);
    step << 0.8 * (2 * rng.uniform() - 1), 0.8 * (2 * rng.uniform() - 1), 0.3 * (2 * rng.uniform() - 1);
    const Eigen::VectorXd y = law->multiply(x, step);
    const auto d = cc_distance(model, x, y);
    if (d.value > s.max_distance) continue;
    ++drawn;
    const double lhs = fields[0].at(x);
    const double p1 = fields[1].at(y);
    const double rhs = p1 * time_factor * std::exp(k.D * d.lower * d.lower / (2.0 * dt));
    const double rhs_upper = p1 * time_factor * std::exp(k.D * d.upper * d.upper / (2.0 * dt));
    worst = std::min(worst, (rhs - lhs) / rhs);
    worst_upper = std::min(worst_upper, (rhs_upper - lhs) / rhs_upper);
    samples.push_back({{"lhs", lhs}, {"rhs", rhs}, {"d_lower", d.lower}, {"d", d.value}, {"d_upper", d.upper}});
  }
  auto r = make_result("harnack", "ParabolHarnack", model.name(), worst, s.relative_tolerance);
  r.detail = {{"t0", s.t0},
              {"t1", s.t1},
              {"distance_bound", "lower"},
              {"relative_margin_with_upper_bound", worst_upper},
              {"verdict_with_upper_bound", to_string(decide(worst_upper, s.relative_tolerance))},
              {"samples", samples}};
  out.push_back(std::move(r));

  // Heat-kernel form on three (y, z) pairs with x at the origin.
  std::vector<Eigen::VectorXd> pts;
  for (const auto& p : {std::array<double, 3>{0.3, 0.0, 0.1}, std::array<double, 3>{-0.2, 0.4, 0.0},
                        std::array<double, 3>{0.0, -0.5, -0.2}}) {
    Eigen::VectorXd v(3);
    v << p[0], p[1], p[2];
    pts.push_back(v);
  }
  std::vector<Eigen::VectorXd> xs{origin};
  for (const auto& p : pts) xs.push_back(p);
  auto ks = s.kernel;
  ks.pde = s.pde;
  const auto kern = heat_kernel_series(model, xs, origin, {s.t0, s.t1}, ks);
  double kworst = std::numeric_limits<double>::infinity();
  nlohmann::json kd = nlohmann::json::array();
  for (std::size_t a = 0; a < xs.size(); ++a) {
    const std::size_t b = (a + 1) % xs.size();
    const double lhs = kern[0][a].value;
    const auto d = cc_distance(model, xs[a], xs[b]);
    const double rhs = kern[1][b].value * time_factor * std::exp(k.D * d.lower * d.lower / (2.0 * dt));
    kworst = std::min(kworst, (rhs - lhs) / rhs);
    kd.push_back({{"lhs", lhs}, {"rhs", rhs}, {"d_lower", d.lower}});
    if (a + 1 == 3) break;
  }
  auto rk = make_result("harnack", "ParabolHarnack", model.name(), kworst, s.relative_tolerance);
  rk.detail = {{"form", "heat kernel"}, {"pairs", kd}};
  out.push_back(std::move(rk));
  return out;
}

std::vector<CheckResult> check_heat_kernel_decay(const LieModel& model, const CDConstants& k,
                                                 const std::vector<double>& times, const HeatKernelSettings& s) {
  if (times.size() < 2) throw std::invalid_argument("heat kernel decay needs at least two times");
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(3);
  const auto ser = heat_kernel_series(model, {origin}, origin, times, s);
  std::vector<double> p;
  for (const auto& row : ser) p.push_back(row[0].value);
  double scaled = std::numeric_limits<double>::infinity(), decreasing = scaled, bound = scaled;
  const double p_last = p.back(), t_last = times.back();
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double g0 = std::pow(times[i], 0.5 * k.N) * p[i], g1 = std::pow(times[i + 1], 0.5 * k.N) * p[i + 1];
    scaled = std::min(scaled, (g0 - g1) / g0);
    decreasing = std::min(decreasing, (p[i] - p[i + 1]) / p[i]);
  }
  // p_t <= (t / t_last)^{-N/2} p_{t_last}, with t_last = 1 in the acceptance setting.
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double b = std::pow(times[i] / t_last, -0.5 * k.N) * p_last;
    bound = std::min(bound, (b - p[i]) / b);
  }
  const nlohmann::json detail = {{"times", times}, {"p_t_00", p}, {"N", k.N}, {"bump_width", s.bump_width}};
  std::vector<CheckResult> out;
  auto r1 = make_result("heat_kernel_decay", "LY2", model.name(), scaled, 0.0);
  r1.detail = detail;
  r1.detail["claim"] = "t^{N/2} p_t(0,0) non-increasing";
  auto r2 = make_result("heat_kernel_decay", "LY2", model.name(), bound, 0.0);
  r2.detail = detail;
  r2.detail["claim"] = "p_t(0,0) <= t^{-N/2} p_1(0,0)";
  auto r3 = make_result("heat_kernel_decay", "LY2", model.name(), decreasing, 0.0);
  r3.detail = detail;
  r3.detail["claim"] = "p_t(0,0) decreasing";
  out.push_back(std::move(r1));
  out.push_back(std::move(r2));
  out.push_back(std::move(r3));
  return out;
}

CheckResult check_poincare_decay(const LieModel& model, const CDConstants& k, const TestFunction& f,
                                 const PoincareSettings& s) {
  if (s.variant != 'a' && s.variant != 'b') throw std::invalid_argument("Poincare decay variant must be a or b");
  const std::string anchor = std::string("Poincare(") + s.variant + ")";
  double rate = std::min(k.rho1, k.rho21);
  if (s.variant == 'b') {
    if (!(k.rho1 >= k.rho21 && k.rho20 > -1.0)) {
      auto r = make_result("poincare", anchor, model.name(), 0.0, 0.0);
      r.verdict = Verdict::inconclusive;
      r.detail = {{"hypothesis", "requires rho1 >= rho21 and rho20 > -1"}};
      return r;
    }
    rate = k.alpha;
  }
  const auto fields = pde_evolve(model, sample_field(f, s.pde.grid), s.times, s.pde);
  const double g0 = fields.front().gamma_h_l1();
  std::vector<double> norms;
  double worst = std::numeric_limits<double>::infinity(), monotone = worst;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const double g = fields[i].gamma_h_l1();
    norms.push_back(g);
    const double bound = std::exp(-rate * (s.times[i] - s.times.front())) * g0;
    worst = std::min(worst, g0 > 0.0 ? (bound - g) / g0 : bound - g);
    if (i > 0) monotone = std::min(monotone, g0 > 0.0 ? (norms[i - 1] - g) / g0 : norms[i - 1] - g);
  }
  auto r = make_result("poincare", anchor, model.name(), worst, s.relative_tolerance);
  r.detail = {{"rate", rate}, {"times", s.times}, {"gamma_l1", norms}, {"monotone_margin", monotone},
              {"max_flux", fields.back().flux}};
  return r;
}

}  // namespace srlab
