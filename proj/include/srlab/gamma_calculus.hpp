#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "srlab/jet_engine.hpp"
#include "srlab/model_zoo.hpp"

namespace srlab {

enum class Which { h, v };

/// Frame-sum evaluation of L, Gamma and Gamma_2 on jets at one base point.
///
/// L is the sub-Laplacian tr_H of the adapted connection's Hessian, i.e.
/// sum_i A_i^2 minus the horizontal drift sum_i nabla_{A_i} A_i (zero on
/// unimodular metric-parallel models). Gamma^v uses the orthonormal vertical frame.
class GammaEvaluator {
 public:
  /// Jets handed to this evaluator must be taken at x and have order <= `order`.
  GammaEvaluator(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int order = kDefaultJetOrder);

  const PointContext& context() const { return ctx_; }
  const LieModel& model() const { return ctx_.model(); }
  int order() const { return order_; }

  /// Sub-Laplacian; order drops by two.
  Jet L(const Jet& f) const;
  /// Laplace-Beltrami operator of the full metric g; order drops by two.
  Jet Delta(const Jet& f) const;
  /// Gamma^s(f, g) = sum (S f)(S g) over the orthonormal frame of H or V; order drops by one.
  Jet gamma(const Jet& f, const Jet& g, Which which) const;
  Jet gamma(const Jet& f, Which which) const { return gamma(f, f, which); }
  /// Carre du champ through the operator: (L(fg) - f Lg - g Lf) / 2.
  Jet gamma_qform(const Jet& f, const Jet& g) const;
  /// Gamma_2^s(f) = (L Gamma^s(f) - 2 Gamma^s(f, Lf)) / 2; order drops by three.
  Jet gamma2(const Jet& f, Which which) const;

 private:
  PointContext ctx_;
  int order_;
  Eigen::VectorXd drift_h_;
  Eigen::VectorXd drift_full_;
};

/// Pointwise values for one function at one point.
struct GammaPointReport {
  double Lf = 0.0;
  double gamma_h = 0.0;
  double gamma_v = 0.0;
  double gamma2_h = 0.0;
  double gamma2_v = 0.0;
  std::vector<double> ell;
  std::vector<double> gamma2_mixed;  // gamma2_h + ell * gamma2_v per ell
};

/// Logarithmic ell-grid 10^k, k uniformly spaced in [lo, hi].
std::vector<double> log_grid(double lo_exp, double hi_exp, int points);

GammaPointReport gamma_report(const GammaEvaluator& ev, const Jet& f, const std::vector<double>& ell_grid);

/// LHS - RHS of a scalar inequality, with the tolerance scale 1 + |LHS| + |RHS|.
struct Residual {
  double lhs = 0.0;
  double rhs = 0.0;
  double value() const { return lhs - rhs; }
  double scale() const;
};

/// Generalized curvature-dimension inequality for constants (n, rho1, rho20, rho21).
Residual cd_residual(const GammaPointReport& r, double ell, const DeclaredConstants& constants);
Residual cd_residual(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double ell, const DeclaredConstants& constants);

/// Inputs of the double-Gamma bounds: rho_H and M_HV of the (normalized) model.
struct DoubleGammaInputs {
  double rho_H = 0.0;
  double M_HV = 0.0;
};

/// (RHS - LHS) of the two double-Gamma inequalities:
///   Gamma^h(f) (Gamma_2^{h+ell v}(f) - (rho_H - 1/c - 1/ell) Gamma^h(f) + c M_HV^2 Gamma^v(f)) - Gamma^h(Gamma^h f)/4
///   Gamma^v(f) Gamma_2^v(f) - Gamma^h(Gamma^v f)/4
std::pair<Residual, Residual> double_gamma_residuals(const GammaEvaluator& ev, const Jet& f, double ell, double c,
                                                     const DoubleGammaInputs& in);
std::pair<Residual, Residual> double_gamma_residuals(const LieModel& model, const TestFunction& f,
                                                     const Eigen::Ref<const Eigen::VectorXd>& x, double ell,
                                                     double c, const DoubleGammaInputs& in);

/// |Gamma^h(f, Gamma^v f) - Gamma^v(f, Gamma^h f)|.
Residual condB_residual(const GammaEvaluator& ev, const Jet& f);
double condB_residual(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x);

/// |L Delta f - Delta L f|.
Residual commutation_residual(const GammaEvaluator& ev, const Jet& f);
double commutation_residual(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x);

double sublaplacian(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x);
double gamma(const LieModel& model, const TestFunction& f, const TestFunction& g,
             const Eigen::Ref<const Eigen::VectorXd>& x, Which which);
double gamma2(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x, Which which);
/// Gamma_2^h + ell Gamma_2^v.
double gamma2_mixed(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x, double ell);

void to_json(nlohmann::json& j, const GammaPointReport& r);

}  // namespace srlab
