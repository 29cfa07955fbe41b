#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "srlab/model_zoo.hpp"

namespace srlab {

struct CurvatureBounds {
  /// sup over unit horizontal v of the Hilbert-Schmidt norm of R(v, .).
  double M_R = 0.0;
  /// sqrt of the smallest eigenvalue of G_st = sum_{i<j} c^s_ij c^t_ij.
  double m_R = 0.0;
};

CurvatureBounds curvature_bounds(const LieModel& model);

/// Copy with the vertical metric divided by M_R^2, so that M_R = 1 afterwards.
LieModel normalize_vertical(const LieModel& model);

struct RicciH {
  double rho_H = 0.0;
  /// Ric_H(A_a, A_b) in the orthonormal frame, d x d.
  Eigen::MatrixXd form;
};

RicciH ricci_h(const LieModel& model);

struct MixedBounds {
  double M_HV = 0.0;
  double M_grad_v = 0.0;
  double rho_Lv = 0.0;
  /// Ric_HV(A_a, A_b) in the orthonormal frame.
  Eigen::MatrixXd ric_hv;
};

MixedBounds mixed_bounds(const LieModel& model);

struct GeometryReport {
  std::string model;
  double M_R = 0.0;
  double m_R = 0.0;
  double rho_H = 0.0;
  double M_HV = 0.0;
  double M_grad_v = 0.0;
  double rho_Lv = 0.0;
  bool normalized = false;
  /// Factor applied to the vertical metric block (1 when not normalized).
  double vertical_scale = 1.0;
  int n = 0;
};

/// Invariants of the model, computed on the normalized model unless `raw`.
/// Results are cached per model identity.
GeometryReport geometry_report(const LieModel& model, bool raw = false);

enum class Objective { max_rho2, max_alpha, rho1_zero };

Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct CDConstants {
  int n = 0;
  double rho1 = 0.0;
  double rho20 = 0.0;
  double rho21 = 0.0;
  /// Coupling constant used; +infinity when the 1/c terms were dropped.
  double c = kInfinity;
  double kappa = 0.0;
  double N = kInfinity;
  double D = kInfinity;
  /// Poincare rate (rho20 rho1 + rho21) / (rho20 + 1).
  double alpha = 0.0;
  /// Closed-form rate (2 kappa / (2 M_HV + m_R sqrt(2 rho_H + 2 kappa)))^2, NaN when kappa <= 0.
  double alpha_closed_form = std::numeric_limits<double>::quiet_NaN();
  double spectral_gap_bound = 0.0;
  Objective objective = Objective::max_rho2;

  DeclaredConstants as_declared() const { return {n, rho1, rho20, rho21}; }
};

/// rho1 = rho_H - 1/c, rho20 = m_R^2/2 - c (M_HV + M_grad_v)^2, rho21 = rho_Lv/2 - M_grad_v^2.
/// An explicit `c` may be +infinity, which requires M_HV + M_grad_v = 0.
CDConstants constants_for_c(const GeometryReport& g, double c);

/// `c` = nullopt selects c by the objective:
///   max_rho2  c = infinity (requires M_HV + M_grad_v = 0; otherwise no maximizer exists)
///   rho1_zero c = 1/rho_H (infinity when rho_H = 0)
///   max_alpha golden-section search of the Poincare rate over c
CDConstants assemble_constants(const GeometryReport& g, std::optional<double> c, Objective objective);

/// N and D of the Li-Yau specialization for a given rho2.
double li_yau_N(int n, double rho2);
double li_yau_D(double rho2);

struct RicciComparison {
  /// max |Ric_g(Y,Y) - stated five-term sum| over the directions.
  double max_residual = 0.0;
  /// Same with the last coefficient -1/2 in place of -3/4.
  double max_residual_half = 0.0;
  /// max |Ric_g from the Levi-Civita curvature matrices - Ric_g from the bracket formula|.
  double pipeline_agreement = 0.0;
  std::vector<double> lhs;
  std::vector<double> rhs;
};

/// Directions are columns of `directions` in the orthonormal frame of the (unnormalized) model.
RicciComparison riemann_ricci_compare(const LieModel& model, const Eigen::MatrixXd& directions);

/// Ric_g(Y, Y) through the bracket formula for left-invariant metrics.
double ricci_bracket_formula(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& y);

void to_json(nlohmann::json& j, const GeometryReport& g);
void to_json(nlohmann::json& j, const CDConstants& k);

}  // namespace srlab
