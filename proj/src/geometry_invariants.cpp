#include "srlab/geometry_invariants.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>

#include "srlab/frame_geometry.hpp"

namespace srlab {

namespace {

double sym_min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
}

/// Components (nabla_e R)^c_{ab} of the curvature 2-form R(a, b) = pr_V [pr_H a, pr_H b].
std::vector<double> curvature_form_derivative(const LieModel& m, const FrameConnection& conn) {
  const int d = m.dim();
  const int n = m.dim_h();
  auto R = [&](int a, int b, int c) { return (a < n && b < n && c >= n) ? m.c_on(a, b, c) : 0.0; };
  std::vector<double> out(static_cast<std::size_t>(d * d * d * d), 0.0);
  for (int e = 0; e < d; ++e) {
    const auto& G = conn[static_cast<std::size_t>(e)];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c) {
          double v = 0.0;
          for (int k = 0; k < d; ++k) v += G(c, k) * R(a, b, k) - G(k, a) * R(k, b, c) - G(k, b) * R(a, k, c);
          out[static_cast<std::size_t>(((e * d + a) * d + b) * d + c)] = v;
        }
  }
  return out;
}

/// sup over unit z_h in H, z_v in V of -(z^T F z) / (2 |z_h| |z_v|) for a symmetric form F.
double mixed_lower_constant(const Eigen::MatrixXd& F, int n) {
  const int d = static_cast<int>(F.rows());
  const int nu = d - n;
  if (nu == 0) return 0.0;
  const Eigen::MatrixXd P = F.topLeftCorner(n, n);
  const Eigen::MatrixXd Q = F.bottomRightCorner(nu, nu);
  const Eigen::MatrixXd K = F.topRightCorner(n, nu);
  const double pure = std::max(P.cwiseAbs().maxCoeff(), Q.cwiseAbs().maxCoeff());
  if (pure <= 1e-14) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  }
  if (sym_min_eigenvalue(P) < -1e-14 || sym_min_eigenvalue(Q) < -1e-14) return kInfinity;
  // With t = tan(theta): -(p + 2 t k + t^2 q) / (2t) is maximized at t = sqrt(p/q), giving -k - sqrt(p q).
  // Multistart projected ascent over the product of spheres.
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  auto objective = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    return -u.dot(K * w) - std::sqrt(std::max(0.0, u.dot(P * u)) * std::max(0.0, w.dot(Q * w)));
  };
  double best = 0.0;
  for (int start = 0; start < 500; ++start) {
    Eigen::VectorXd u(n), w(nu);
    for (auto& v : u) v = normal(rng);
    for (auto& v : w) v = normal(rng);
    u.normalize();
    w.normalize();
    double step = 0.1;
    double val = objective(u, w);
    for (int it = 0; it < 200 && step > 1e-12; ++it) {
      const double pu = std::max(1e-300, u.dot(P * u));
      const double qw = std::max(1e-300, w.dot(Q * w));
      const double root = std::sqrt(pu * qw);
      Eigen::VectorXd gu = -K * w - (qw / root) * (P * u);
      Eigen::VectorXd gw = -K.transpose() * u - (pu / root) * (Q * w);
      Eigen::VectorXd nu_ = (u + step * gu).normalized();
      Eigen::VectorXd nw = (w + step * gw).normalized();
      const double nval = objective(nu_, nw);
      if (nval > val) {
        u = nu_;
        w = nw;
        val = nval;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    best = std::max(best, val);
  }
  return best;
}

}  // namespace

CurvatureBounds curvature_bounds(const LieModel& m) {
  const int d = m.dim();
  const int n = m.dim_h();
  CurvatureBounds b;
  if (m.dim_v() == 0) return b;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int ip = 0; ip < n; ++ip)
      for (int j = 0; j < n; ++j)
        for (int s = n; s < d; ++s) Q(i, ip) += m.c_on(i, j, s) * m.c_on(ip, j, s);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qs(Q);
  b.M_R = std::sqrt(std::max(0.0, qs.eigenvalues().maxCoeff()));
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m.dim_v(), m.dim_v());
  for (int s = n; s < d; ++s)
    for (int t = n; t < d; ++t)
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) G(s - n, t - n) += m.c_on(i, j, s) * m.c_on(i, j, t);
  b.m_R = std::sqrt(std::max(0.0, sym_min_eigenvalue(G)));
  return b;
}

LieModel normalize_vertical(const LieModel& m) {
  const auto b = curvature_bounds(m);
  if (!(b.M_R > 0.0)) throw ModelError(m.name() + ": cannot normalize the vertical metric when M_R = 0");
  return m.with_vertical_scale(1.0 / (b.M_R * b.M_R), m.name());
}

RicciH ricci_h(const LieModel& m) {
  const int d = m.dim();
  const int n = m.dim_h();
  const auto conn = adapted_connection(m);
  RicciH r;
  r.form = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < n; ++i)
    for (int z1 = 0; z1 < d; ++z1) {
      const Eigen::MatrixXd R = curvature(m, conn, i, z1);
      for (int z2 = 0; z2 < d; ++z2) r.form(z1, z2) += R(i, z2);
    }
  r.rho_H = sym_min_eigenvalue(r.form.topLeftCorner(n, n));
  return r;
}

MixedBounds mixed_bounds(const LieModel& m) {
  const int d = m.dim();
  const int n = m.dim_h();
  const auto conn = adapted_connection(m);
  MixedBounds out;

  const auto dR = curvature_form_derivative(m, conn);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int z = 0; z < d; ++z)
      for (int e = 0; e < d; ++e) B(a, z) += dR[static_cast<std::size_t>(((e * d + e) * d + z) * d + a)];
  out.ric_hv = 0.5 * (B + B.transpose());
  out.M_HV = mixed_lower_constant(out.ric_hv, n);

  const Eigen::MatrixXd PV = vertical_projector(m);
  double sq = 0.0;
  for (int e = 0; e < d; ++e) sq += tensor_derivative(conn[static_cast<std::size_t>(e)], PV).squaredNorm();
  out.M_grad_v = std::sqrt(sq);

  Eigen::VectorXd drift = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) drift += conn[static_cast<std::size_t>(i)].col(i);
  Eigen::MatrixXd drift_conn = Eigen::MatrixXd::Zero(d, d);
  for (int c = 0; c < d; ++c) drift_conn += drift(c) * conn[static_cast<std::size_t>(c)];
  Eigen::MatrixXd lap = -tensor_derivative(drift_conn, PV);
  for (int i = 0; i < n; ++i) {
    const auto& G = conn[static_cast<std::size_t>(i)];
    lap += tensor_derivative(G, tensor_derivative(G, PV));
  }
  out.rho_Lv = m.dim_v() > 0 ? sym_min_eigenvalue(lap.bottomRightCorner(m.dim_v(), m.dim_v())) : 0.0;
  return out;
}

GeometryReport geometry_report(const LieModel& model, bool raw) {
  static std::shared_mutex mutex;
  static std::map<std::pair<std::uint64_t, bool>, GeometryReport> cache;
  const auto key = std::make_pair(model.id(), raw);
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  GeometryReport g;
  g.model = model.name();
  g.n = model.dim_h();
  const auto raw_bounds = curvature_bounds(model);
  std::optional<LieModel> normalized;
  if (!raw && raw_bounds.M_R > 0.0) {
    normalized = normalize_vertical(model);
    g.normalized = true;
    g.vertical_scale = 1.0 / (raw_bounds.M_R * raw_bounds.M_R);
  }
  const LieModel& m = normalized ? *normalized : model;
  const auto b = normalized ? curvature_bounds(m) : raw_bounds;
  g.M_R = b.M_R;
  g.m_R = b.m_R;
  g.rho_H = ricci_h(m).rho_H;
  const auto mb = mixed_bounds(m);
  g.M_HV = mb.M_HV;
  g.M_grad_v = mb.M_grad_v;
  g.rho_Lv = mb.rho_Lv;
  std::unique_lock lock(mutex);
  cache.emplace(key, g);
  return g;
}

Objective objective_from_string(const std::string& s) {
  if (s == "max_rho2") return Objective::max_rho2;
  if (s == "max_alpha") return Objective::max_alpha;
  if (s == "rho1_zero") return Objective::rho1_zero;
  throw std::invalid_argument("unknown objective: " + s);
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::max_rho2: return "max_rho2";
    case Objective::max_alpha: return "max_alpha";
    case Objective::rho1_zero: return "rho1_zero";
  }
  return "?";
}

double li_yau_N(int n, double rho2) {
  if (!(rho2 > 0.0)) return kInfinity;
  const double s = std::sqrt(2.0 + rho2) + std::sqrt(1.0 + rho2);
  return n / 4.0 * s * s / rho2;
}

double li_yau_D(double rho2) {
  if (!(rho2 > 0.0)) return kInfinity;
  return std::sqrt((2.0 + rho2) * (1.0 + rho2)) / rho2;
}

CDConstants constants_for_c(const GeometryReport& g, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("coupling constant c must be positive");
  const double coupling = g.M_HV + g.M_grad_v;
  if (std::isinf(c) && coupling > 0.0)
    throw std::invalid_argument("c = infinity requires M_HV + M_grad_v = 0");
  CDConstants k;
  k.n = g.n;
  k.c = c;
  k.rho1 = g.rho_H - (std::isinf(c) ? 0.0 : 1.0 / c);
  k.rho20 = 0.5 * g.m_R * g.m_R - (coupling == 0.0 ? 0.0 : c * coupling * coupling);
  k.rho21 = 0.5 * g.rho_Lv - g.M_grad_v * g.M_grad_v;
  k.kappa = 0.5 * g.m_R * g.m_R * g.rho_H - g.M_HV * g.M_HV;
  k.N = li_yau_N(k.n, k.rho20);
  k.D = li_yau_D(k.rho20);
  // The rate is only established for rho1 >= rho21 and rho20 > -1.
  k.alpha = (k.rho1 >= k.rho21 && k.rho20 > -1.0) ? (k.rho20 * k.rho1 + k.rho21) / (k.rho20 + 1.0) : -kInfinity;
  if (k.kappa > 0.0) {
    const double den = 2.0 * g.M_HV + g.m_R * std::sqrt(2.0 * g.rho_H + 2.0 * k.kappa);
    k.alpha_closed_form = std::pow(2.0 * k.kappa / den, 2);
  }
  if (k.rho20 > 0.0) {
    const double k2 = std::max(0.0, -k.rho21);
    const int n = k.n;
    k.spectral_gap_bound = n * k.rho20 / (n + k.rho20 * (n - 1)) * (k.rho1 - k2 / k.rho20);
  } else {
    k.spectral_gap_bound = -kInfinity;
  }
  return k;
}

CDConstants assemble_constants(const GeometryReport& g, std::optional<double> c, Objective objective) {
  const double coupling = g.M_HV + g.M_grad_v;
  CDConstants k;
  if (c) {
    k = constants_for_c(g, *c);
  } else {
    switch (objective) {
      case Objective::max_rho2:
        if (coupling > 0.0)
          throw std::invalid_argument("max_rho2: rho20 has no maximizer in c when M_HV + M_grad_v > 0; pass c");
        k = constants_for_c(g, kInfinity);
        break;
      case Objective::rho1_zero:
        if (g.rho_H < 0.0) throw std::invalid_argument("rho1_zero: needs rho_H >= 0");
        if (g.rho_H == 0.0 && coupling > 0.0)
          throw std::invalid_argument("rho1_zero: rho_H = 0 requires M_HV + M_grad_v = 0");
        k = constants_for_c(g, g.rho_H > 0.0 ? 1.0 / g.rho_H : kInfinity);
        break;
      case Objective::max_alpha: {
        // Search s = 1/c; s = 0 is admissible only without coupling. Where the rate alpha is not
        // available the decay rate min(rho1, rho21) still holds, so maximize the better of the two.
        // Ties (flat stretches of that rate) go to the larger rho20, i.e. the larger s.
        auto rate = [&](double s) {
          const auto kc = constants_for_c(g, s == 0.0 ? kInfinity : 1.0 / s);
          return std::max(kc.alpha, std::min(kc.rho1, kc.rho21));
        };
        const double hi = std::max(g.rho_H, 0.0) + 1.0 + 4.0 * coupling * coupling;
        std::vector<double> grid;
        if (coupling == 0.0) grid.push_back(0.0);
        const int scan = 400;
        for (int i = 0; i <= scan; ++i) grid.push_back(hi * std::pow(10.0, -8.0 * (scan - i) / scan));
        std::size_t best = 0;
        double best_rate = rate(grid[0]);
        for (std::size_t i = 1; i < grid.size(); ++i) {
          const double r = rate(grid[i]);
          if (r >= best_rate - 1e-12 * (1.0 + std::abs(best_rate))) {
            best = i;
            best_rate = std::max(best_rate, r);
          }
        }
        // Golden-section refinement inside the neighbouring grid cells.
        double a = grid[best == 0 ? 0 : best - 1], b = grid[std::min(best + 1, grid.size() - 1)];
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
        double f1 = rate(x1), f2 = rate(x2);
        for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + hi); ++it) {
          if (f1 <= f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = rate(x2);
          } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = rate(x1);
          }
        }
        double best_s = grid[best];
        if (rate(0.5 * (a + b)) > rate(best_s)) best_s = 0.5 * (a + b);
        k = constants_for_c(g, best_s == 0.0 ? kInfinity : 1.0 / best_s);
        break;
      }
    }
  }
  k.objective = objective;
  return k;
}

double ricci_bracket_formula(const LieModel& m, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const int d = m.dim();
  auto bracket_on = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        const double uv = u(a) * v(b);
        if (uv == 0.0) continue;
        for (int k = 0; k < d; ++k) w(k) += uv * m.c_on(a, b, k);
      }
    return w;
  };
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd ady(d, d);
  for (int b = 0; b < d; ++b) ady.col(b) = bracket_on(y, I.col(b));
  double term1 = 0.0;
  for (int i = 0; i < d; ++i) term1 += ady.col(i).squaredNorm();
  const double killing = (ady * ady).trace();
  double term3 = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double v = bracket_on(I.col(i), I.col(j)).dot(y);
      term3 += v * v;
    }
  // Mean curvature vector: <Z, X> = tr ad_X.
  Eigen::VectorXd Z(d);
  for (int a = 0; a < d; ++a) {
    double tr = 0.0;
    for (int b = 0; b < d; ++b) tr += m.c_on(a, b, b);
    Z(a) = tr;
  }
  const double term4 = bracket_on(Z, y).dot(y);
  return -0.5 * term1 - 0.5 * killing + 0.25 * term3 - term4;
}

RicciComparison riemann_ricci_compare(const LieModel& m, const Eigen::MatrixXd& directions) {
  const int d = m.dim();
  const int n = m.dim_h();
  const auto lc = levi_civita_connection(m);
  const auto conn = adapted_connection(m);
  std::vector<Eigen::MatrixXd> Rlc, Rad;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      Rlc.push_back(curvature(m, lc, a, b));
      Rad.push_back(curvature(m, conn, a, b));
    }
  const auto ric_hv = mixed_bounds(m).ric_hv;
  const Eigen::MatrixXd ric_h = ricci_h(m).form;

  RicciComparison out;
  for (Eigen::Index col = 0; col < directions.cols(); ++col) {
    const Eigen::VectorXd y = directions.col(col);
    // Ric_g from the curvature matrices of the Levi-Civita connection.
    double ric_matrix = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) ric_matrix += y(b) * (Rlc[static_cast<std::size_t>(a * d + b)] * y)(a);
    const double lhs = ricci_bracket_formula(m, y);
    out.pipeline_agreement = std::max(out.pipeline_agreement, std::abs(lhs - ric_matrix));

    const double term_h = y.dot(ric_h * y);
    const double term_hv = y.dot(ric_hv * y);
    double term_form = 0.0;  // |g(Y, R(., .))|^2 over pairs a < b
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        double w = 0.0;
        for (int s = n; s < d; ++s) w += y(s) * m.c_on(a, b, s);
        term_form += w * w;
      }
    double term_v = 0.0;
    for (int s = n; s < d; ++s)
      for (int b = 0; b < d; ++b) term_v += y(b) * (Rad[static_cast<std::size_t>(s * d + b)] * y)(s);
    double term_r = 0.0;  // |R(Y, .)|^2
    for (int w = 0; w < n; ++w)
      for (int s = n; s < d; ++s) {
        double v = 0.0;
        for (int i = 0; i < n; ++i) v += y(i) * m.c_on(i, w, s);
        term_r += v * v;
      }
    const double common = term_h + term_hv + 0.5 * term_form + term_v;
    const double rhs = common - 0.75 * term_r;
    out.lhs.push_back(lhs);
    out.rhs.push_back(rhs);
    out.max_residual = std::max(out.max_residual, std::abs(lhs - rhs));
    out.max_residual_half = std::max(out.max_residual_half, std::abs(lhs - (common - 0.5 * term_r)));
  }
  return out;
}

namespace {
nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}
}  // namespace

void to_json(nlohmann::json& j, const GeometryReport& g) {
  j = nlohmann::json{{"model", g.model},       {"M_R", g.M_R},       {"m_R", g.m_R},
                     {"rho_H", g.rho_H},       {"M_HV", g.M_HV},     {"M_grad_v", number(g.M_grad_v)},
                     {"rho_Lv", g.rho_Lv},     {"normalized", g.normalized},
                     {"vertical_scale", g.vertical_scale}, {"n", g.n}};
  j["M_HV"] = number(g.M_HV);
}

void to_json(nlohmann::json& j, const CDConstants& k) {
  j = nlohmann::json{{"n", k.n},
                     {"rho1", number(k.rho1)},
                     {"rho20", number(k.rho20)},
                     {"rho21", number(k.rho21)},
                     {"c", number(k.c)},
                     {"kappa", number(k.kappa)},
                     {"N", number(k.N)},
                     {"D", number(k.D)},
                     {"alpha", number(k.alpha)},
                     {"alpha_closed_form", number(k.alpha_closed_form)},
                     {"spectral_gap_bound", number(k.spectral_gap_bound)},
                     {"objective", to_string(k.objective)}};
}

}  // namespace srlab
