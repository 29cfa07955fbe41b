#include "srlab/gamma_calculus.hpp"

#include <cmath>
#include <stdexcept>

#include "srlab/frame_geometry.hpp"

namespace srlab {

namespace {

void require_order(const Jet& f, int needed, const char* what) {
  if (f.order() < needed)
    throw JetOrderError(std::string(what) + " needs a jet of order >= " + std::to_string(needed) + ", got " +
                        std::to_string(f.order()));
}

Eigen::VectorXd drift(const FrameConnection& conn, int count) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(conn.empty() ? 0 : conn[0].rows());
  for (int i = 0; i < count; ++i) b += conn[static_cast<std::size_t>(i)].col(i);
  return b;
}

}  // namespace

GammaEvaluator::GammaEvaluator(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int order)
    : ctx_(model, x, std::max(order - 1, 0)), order_(order) {
  drift_h_ = drift(adapted_connection(model), model.dim_h());
  drift_full_ = drift(levi_civita_connection(model), model.dim());
}

Jet GammaEvaluator::L(const Jet& f) const {
  require_order(f, 2, "L");
  const auto& m = model();
  Jet out(m.dim(), f.order() - 2);
  for (int i = 0; i < m.dim_h(); ++i) out += ctx_.apply(i, ctx_.apply(i, f));
  for (int c = 0; c < m.dim(); ++c)
    if (drift_h_(c) != 0.0) out.axpy(-drift_h_(c), ctx_.apply(c, f));
  return out;
}

Jet GammaEvaluator::Delta(const Jet& f) const {
  require_order(f, 2, "Delta");
  const auto& m = model();
  Jet out(m.dim(), f.order() - 2);
  for (int a = 0; a < m.dim(); ++a) out += ctx_.apply(a, ctx_.apply(a, f));
  for (int c = 0; c < m.dim(); ++c)
    if (drift_full_(c) != 0.0) out.axpy(-drift_full_(c), ctx_.apply(c, f));
  return out;
}

Jet GammaEvaluator::gamma(const Jet& f, const Jet& g, Which which) const {
  require_order(f, 1, "Gamma");
  require_order(g, 1, "Gamma");
  const auto& m = model();
  const int lo = which == Which::h ? 0 : m.dim_h();
  const int hi = which == Which::h ? m.dim_h() : m.dim();
  Jet out(m.dim(), std::min(f.order(), g.order()) - 1);
  for (int a = lo; a < hi; ++a) {
    const Jet af = ctx_.apply(a, f);
    if (&f == &g) {
      multiply_accumulate(out, af, af);
    } else {
      multiply_accumulate(out, af, ctx_.apply(a, g));
    }
  }
  return out;
}

Jet GammaEvaluator::gamma_qform(const Jet& f, const Jet& g) const {
  Jet out = L(f * g);
  out.axpy(-1.0, f * L(g));
  out.axpy(-1.0, g * L(f));
  return out * 0.5;
}

Jet GammaEvaluator::gamma2(const Jet& f, Which which) const {
  require_order(f, 3, "Gamma_2");
  Jet out = L(gamma(f, which));
  out.axpy(-2.0, gamma(f, L(f), which));
  return out * 0.5;
}

std::vector<double> log_grid(double lo_exp, double hi_exp, int points) {
  std::vector<double> g;
  if (points == 1) return {std::pow(10.0, lo_exp)};
  for (int k = 0; k < points; ++k) g.push_back(std::pow(10.0, lo_exp + (hi_exp - lo_exp) * k / (points - 1)));
  return g;
}

GammaPointReport gamma_report(const GammaEvaluator& ev, const Jet& f, const std::vector<double>& ell_grid) {
  require_order(f, 3, "gamma_report");
  GammaPointReport r;
  const Jet Lf = ev.L(f);
  const Jet gh = ev.gamma(f, Which::h);
  const Jet gv = ev.gamma(f, Which::v);
  r.Lf = Lf.value();
  r.gamma_h = gh.value();
  r.gamma_v = gv.value();
  r.gamma2_h = 0.5 * (ev.L(gh).value() - 2.0 * ev.gamma(f, Lf, Which::h).value());
  r.gamma2_v = 0.5 * (ev.L(gv).value() - 2.0 * ev.gamma(f, Lf, Which::v).value());
  r.ell = ell_grid;
  for (double ell : ell_grid) r.gamma2_mixed.push_back(r.gamma2_h + ell * r.gamma2_v);
  return r;
}

double Residual::scale() const { return 1.0 + std::abs(lhs) + std::abs(rhs); }

Residual cd_residual(const GammaPointReport& r, double ell, const DeclaredConstants& k) {
  if (!(ell > 0.0)) throw std::invalid_argument("cd_residual: ell must be positive");
  Residual res;
  res.lhs = r.gamma2_h + ell * r.gamma2_v;
  res.rhs = r.Lf * r.Lf / k.n + (k.rho1 - 1.0 / ell) * r.gamma_h + (k.rho20 + ell * k.rho21) * r.gamma_v;
  return res;
}

Residual cd_residual(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double ell, const DeclaredConstants& constants) {
  GammaEvaluator ev(model, x, 3);
  return cd_residual(gamma_report(ev, lift(f, x, 3), {ell}), ell, constants);
}

std::pair<Residual, Residual> double_gamma_residuals(const GammaEvaluator& ev, const Jet& f, double ell, double c,
                                                     const DoubleGammaInputs& in) {
  if (!(ell > 0.0) || !(c > 0.0)) throw std::invalid_argument("double_gamma_residuals: ell and c must be positive");
  require_order(f, 3, "double_gamma_residuals");
  const auto r = gamma_report(ev, f, {ell});
  const double varrho1 = in.rho_H - 1.0 / c;
  const double varrho2 = -c * in.M_HV * in.M_HV;
  const Jet gh = ev.gamma(f, Which::h);
  const Jet gv = ev.gamma(f, Which::v);
  Residual first;
  first.lhs = 0.25 * ev.gamma(gh, Which::h).value();
  first.rhs = r.gamma_h * (r.gamma2_mixed[0] - (varrho1 - 1.0 / ell) * r.gamma_h - varrho2 * r.gamma_v);
  Residual second;
  second.lhs = 0.25 * ev.gamma(gv, Which::h).value();
  second.rhs = r.gamma_v * r.gamma2_v;
  // Report RHS - LHS: swap so value() is nonnegative when the bound holds.
  std::swap(first.lhs, first.rhs);
  std::swap(second.lhs, second.rhs);
  return {first, second};
}

std::pair<Residual, Residual> double_gamma_residuals(const LieModel& model, const TestFunction& f,
                                                     const Eigen::Ref<const Eigen::VectorXd>& x, double ell,
                                                     double c, const DoubleGammaInputs& in) {
  GammaEvaluator ev(model, x, 3);
  return double_gamma_residuals(ev, lift(f, x, 3), ell, c, in);
}

Residual condB_residual(const GammaEvaluator& ev, const Jet& f) {
  require_order(f, 2, "condB_residual");
  Residual r;
  r.lhs = ev.gamma(f, ev.gamma(f, Which::v), Which::h).value();
  r.rhs = ev.gamma(f, ev.gamma(f, Which::h), Which::v).value();
  return r;
}

double condB_residual(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  GammaEvaluator ev(model, x, 2);
  return std::abs(condB_residual(ev, lift(f, x, 2)).value());
}

Residual commutation_residual(const GammaEvaluator& ev, const Jet& f) {
  require_order(f, 4, "commutation_residual");
  Residual r;
  r.lhs = ev.L(ev.Delta(f)).value();
  r.rhs = ev.Delta(ev.L(f)).value();
  return r;
}

double commutation_residual(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  GammaEvaluator ev(model, x, 4);
  return std::abs(commutation_residual(ev, lift(f, x, 4)).value());
}

double sublaplacian(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  GammaEvaluator ev(model, x, 2);
  return ev.L(lift(f, x, 2)).value();
}

double gamma(const LieModel& model, const TestFunction& f, const TestFunction& g,
             const Eigen::Ref<const Eigen::VectorXd>& x, Which which) {
  GammaEvaluator ev(model, x, 1);
  return ev.gamma(lift(f, x, 1), lift(g, x, 1), which).value();
}

double gamma2(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x, Which which) {
  GammaEvaluator ev(model, x, 3);
  return ev.gamma2(lift(f, x, 3), which).value();
}

double gamma2_mixed(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x, double ell) {
  if (!(ell > 0.0)) throw std::invalid_argument("gamma2_mixed: ell must be positive");
  GammaEvaluator ev(model, x, 3);
  const Jet j = lift(f, x, 3);
  return ev.gamma2(j, Which::h).value() + ell * ev.gamma2(j, Which::v).value();
}

void to_json(nlohmann::json& j, const GammaPointReport& r) {
  j = nlohmann::json{{"Lf", r.Lf},           {"gamma_h", r.gamma_h}, {"gamma_v", r.gamma_v},
                     {"gamma2_h", r.gamma2_h}, {"gamma2_v", r.gamma2_v}, {"ell", r.ell},
                     {"gamma2_mixed", r.gamma2_mixed}};
}

}  // namespace srlab
