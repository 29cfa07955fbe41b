#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "srlab/verify_suite.hpp"

namespace srlab {

Dual exp(Dual a) {
  const double e = std::exp(a.v);
  return {e, e * a.d};
}

Dual pow(Dual a, double p) { return {std::pow(a.v, p), p * std::pow(a.v, p - 1.0) * a.d}; }

Dual one_minus_exp_neg(Dual x) { return {-std::expm1(-x.v), std::exp(-x.v) * x.d}; }

Dual exp_neg_tail(Dual x) {
  const double v = std::abs(x.v) < 1e-3
                       ? x.v * x.v * (0.5 - x.v / 6.0 + x.v * x.v / 24.0 - x.v * x.v * x.v / 120.0)
                       : std::expm1(-x.v) + x.v;
  return {v, -std::expm1(-x.v) * x.d};
}

Schedule::Samples Schedule::sample(int points) const {
  Samples s;
  for (int i = 0; i < points; ++i) {
    const double t = T * i / (points - 1);
    s.t.push_back(t);
    s.a.push_back(a(Dual(t)).v);
    s.ell.push_back(ell(Dual(t)).v);
    s.b.push_back(b ? b(Dual(t)).v : 0.0);
  }
  return s;
}

namespace {

struct GridMargins {
  double cond1 = std::numeric_limits<double>::infinity();
  double cond2 = std::numeric_limits<double>::infinity();
  double ratio_slope = std::numeric_limits<double>::infinity();
  double derivative_error = 0.0;
  bool positive = true;
};

GridMargins scan(const Schedule& s, const CDConstants& k, int points) {
  GridMargins m;
  const double h = s.T / (points - 1);
  const double rho2 = k.rho20;
  for (int i = 1; i < points - 1; ++i) {
    const double t = h * i;
    const Dual a = s.a(Dual(t, 1.0));
    const Dual l = s.ell(Dual(t, 1.0));
    const double b = s.b ? s.b(Dual(t)).v : 0.0;
    if (!(a.v > 0.0) || !(l.v > 0.0)) {
      m.positive = false;
      continue;
    }
    double c1 = 0.0, c2 = 0.0;
    if (s.kind == ScheduleKind::a_lambda_c) {
      c1 = a.d + (k.rho1 - 1.0 / l.v) * a.v + s.C;
      c2 = l.d + k.rho20 + (k.rho21 + a.d / a.v) * l.v;
    } else {
      c1 = a.d + (k.rho1 - 1.0 / l.v - 2.0 * b) * a.v + s.C;
      c2 = l.d + rho2 + (a.d / a.v) * l.v;
    }
    m.cond1 = std::min(m.cond1, c1);
    m.cond2 = std::min(m.cond2, c2);
    m.ratio_slope = std::min(m.ratio_slope, (a / l).d);
    // Central differences on the same grid, compared with the exact derivatives.
    const double fa = (s.a(Dual(t + h)).v - s.a(Dual(t - h)).v) / (2 * h);
    const double fl = (s.ell(Dual(t + h)).v - s.ell(Dual(t - h)).v) / (2 * h);
    if (i > 1 && i < points - 2)
      m.derivative_error = std::max({m.derivative_error, std::abs(fa - a.d) / (1 + std::abs(a.d)),
                                     std::abs(fl - l.d) / (1 + std::abs(l.d))});
  }
  return m;
}

}  // namespace

CheckResult check_schedule_admissible(const Schedule& s, const CDConstants& k, const ScheduleGrid& g) {
  if (g.points < 4) throw std::invalid_argument("schedule grid needs at least 4 points");
  const auto coarse = scan(s, k, g.points);
  const auto fine = scan(s, k, 2 * g.points);
  double margin = std::min({coarse.cond1, coarse.cond2, fine.cond1, fine.cond2});
  if (s.check_monotone_ratio) margin = std::min({margin, coarse.ratio_slope, fine.ratio_slope});
  const bool positive = coarse.positive && fine.positive;
  if (!positive) margin = -std::numeric_limits<double>::infinity();
  auto r = make_result("schedule", s.provenance.rfind("EntropyLY", 0) == 0 ? "ABLambda" : "ALambdaC", "", margin,
                       g.tolerance);
  r.detail = {{"schedule", s.name},
              {"provenance", s.provenance},
              {"T", s.T},
              {"C", s.C},
              {"points", g.points},
              {"cond1_min", coarse.cond1},
              {"cond2_min", coarse.cond2},
              {"cond1_min_refined", fine.cond1},
              {"cond2_min_refined", fine.cond2},
              {"fd_derivative_error", coarse.derivative_error},
              {"fd_derivative_error_refined", fine.derivative_error},
              {"positive", positive}};
  if (s.check_monotone_ratio) r.detail["ratio_slope_min"] = std::min(coarse.ratio_slope, fine.ratio_slope);
  return r;
}

std::vector<double> li_yau_alphas(double rho2) {
  std::vector<double> out{0.5, 1.0, 2.0, 4.0};
  const double beta = std::sqrt((2.0 + rho2) * (1.0 + rho2)) - rho2;
  if (beta > 1.0 && beta < 2.0) out.push_back((2.0 - beta) / (beta - 1.0));
  return out;
}

ScheduleSet builtin_schedules(const CDConstants& k, double T, double ell_a, double ell_d) {
  if (!(T > 0.0)) throw std::invalid_argument("builtin_schedules: T must be positive");
  ScheduleSet out;
  const double r1 = k.rho1, r20 = k.rho20, r21 = k.rho21;
  auto zero = [](Dual) { return Dual(0.0); };
  auto omit = [&](const std::string& name, const std::string& why) { out.omitted.emplace_back(name, why); };
  auto fmt = [](double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  };

  {
    Schedule s;
    const double alpha = std::min(r1 - 1.0 / ell_a, r21 + r20 / ell_a);
    s.name = "GradBound(a) ell=" + fmt(ell_a);
    s.provenance = "GradBound(a)";
    s.T = T;
    s.a = [alpha](Dual t) { return exp(-(Dual(alpha) * t)); };
    s.ell = [ell_a](Dual) { return Dual(ell_a); };
    s.b = zero;
    out.schedules.push_back(std::move(s));
  }

  if (r20 > 0.0) {
    const double k1 = std::max(0.0, -r1), k2 = std::max(0.0, -r21);
    Schedule s;
    s.name = "GradBound(b)";
    s.provenance = "GradBound(b)";
    s.T = T;
    s.C = 1.0 + k1 * T + (T * k2 + 2.0) / r20;
    s.a = [T](Dual t) { return Dual(T) - t; };
    s.ell = [T, r20, k2](Dual t) { return Dual(r20 / (T * k2 + 2.0)) * (Dual(T) - t); };
    s.b = zero;
    out.schedules.push_back(std::move(s));
  } else {
    omit("GradBound(b)", "requires rho20 > 0");
  }

  auto c_a = [T, r1](Dual t) { return one_minus_exp_neg(Dual(r1) * (Dual(T) - t)) / Dual(r1); };
  auto c_ell = [T, r1](double r2) {
    return [T, r1, r2](Dual t) {
      const Dual x = Dual(r1) * (Dual(T) - t);
      return Dual(r2) * exp_neg_tail(x) / (Dual(r1) * one_minus_exp_neg(x));
    };
  };

  if (r1 == 0.0) {
    omit("GradBound(c)", "rho1 = 0: (1 - exp(-rho1 t)) / rho1 is read as t and the schedule is GradBound(b)");
  } else if (r1 > 0.0 && r21 >= 0.0 && r20 > 0.0) {
    Schedule s;
    s.name = "GradBound(c)";
    s.provenance = "GradBound(c)";
    s.T = T;
    s.C = 1.0 + 2.0 / r20;
    s.a = c_a;
    s.ell = c_ell(r20);
    s.b = zero;
    s.check_monotone_ratio = true;
    out.schedules.push_back(std::move(s));
  } else {
    omit("GradBound(c)", "requires rho1 >= 0, rho21 >= 0, rho20 > 0");
  }

  if (r1 >= 0.0 && r20 >= 0.0 && r21 >= 0.0) {
    Schedule s;
    s.name = "GradBound(d) ell=" + fmt(ell_d);
    s.provenance = "GradBound(d)";
    s.T = T;
    s.C = -ell_d / (ell_d + T);
    s.a = [](Dual t) { return t; };
    s.ell = [T, ell_d](Dual t) { return Dual((ell_d + T) / T) * t; };
    s.b = zero;
    out.schedules.push_back(std::move(s));
  } else {
    omit("GradBound(d)", "requires rho1, rho20, rho21 >= 0");
  }

  // The entropy and Li-Yau constructions assume the single-constant form rho21 = 0.
  const bool cd_form = std::abs(r21) <= 1e-12 && r20 > 0.0;
  if (cd_form && r1 >= 0.0) {
    Schedule s;
    s.name = "EntropyLY(a)";
    s.provenance = "EntropyLY(a)";
    s.kind = ScheduleKind::a_b_lambda;
    s.T = T;
    s.C = 1.0 + 2.0 / r20;
    if (r1 > 0.0) {
      s.a = c_a;
      s.ell = c_ell(r20);
    } else {
      s.a = [T](Dual t) { return Dual(T) - t; };
      s.ell = [T, r20](Dual t) { return Dual(0.5 * r20) * (Dual(T) - t); };
    }
    s.b = zero;
    out.schedules.push_back(std::move(s));
  } else {
    omit("EntropyLY(a)", "requires rho21 = 0, rho2 > 0, rho1 >= 0");
  }

  if (cd_form) {
    for (double alpha : li_yau_alphas(r20)) {
      Schedule s;
      s.name = "EntropyLY(b) alpha=" + fmt(alpha);
      s.provenance = "EntropyLY(b)";
      s.kind = ScheduleKind::a_b_lambda;
      s.T = T;
      s.C = 0.0;
      s.a = [T, alpha](Dual t) { return pow(Dual(T) - t, alpha + 1.0); };
      s.ell = [T, alpha, r20](Dual t) { return Dual(r20 / (alpha + 2.0)) * (Dual(T) - t); };
      s.b = [T, alpha, r1, r20](Dual t) {
        return Dual(0.5) * (Dual(r1) - Dual(alpha + 1.0 + (alpha + 2.0) / r20) / (Dual(T) - t));
      };
      out.schedules.push_back(std::move(s));
    }
  } else {
    omit("EntropyLY(b)", "requires rho21 = 0, rho2 > 0");
  }
  return out;
}

}  // namespace srlab
