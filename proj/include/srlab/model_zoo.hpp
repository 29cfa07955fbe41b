#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace srlab {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Curvature-dimension constants (n, rho1, rho20, rho21) attached to a model for cross-checking.
struct DeclaredConstants {
  int n = 0;
  double rho1 = 0.0;
  double rho20 = 0.0;
  double rho21 = 0.0;
};

/// A left-invariant sub-Riemannian structure on a simply connected Lie group.
///
/// The frame E_1..E_d is a basis of the Lie algebra; the first dim_h elements
/// span H and the remaining dim_v span V. The frame metric is block diagonal
/// (H orthogonal to V). Immutable after construction.
class LieModel {
 public:
  /// `structure_constants[(i*d + j)*d + k]` is c^k_{ij}, i.e. [E_i, E_j] = sum_k c^k_{ij} E_k.
  LieModel(std::string name, int dim_h, int dim_v, std::vector<double> structure_constants,
           Eigen::MatrixXd frame_metric, std::optional<DeclaredConstants> declared = std::nullopt);

  const std::string& name() const { return name_; }
  int dim_h() const { return dim_h_; }
  int dim_v() const { return dim_v_; }
  int dim() const { return dim_h_ + dim_v_; }
  std::uint64_t id() const { return id_; }

  double c(int i, int j, int k) const { return c_[static_cast<std::size_t>((i * dim() + j) * dim() + k)]; }
  const std::vector<double>& structure_constants() const { return c_; }
  const Eigen::MatrixXd& frame_metric() const { return metric_; }
  const std::optional<DeclaredConstants>& declared() const { return declared_; }

  /// Matrix of ad_{E_i}: column j holds the coordinates of [E_i, E_j].
  const Eigen::MatrixXd& ad(int i) const { return ad_[static_cast<std::size_t>(i)]; }
  Eigen::MatrixXd ad(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  Eigen::VectorXd bracket(const Eigen::Ref<const Eigen::VectorXd>& u, const Eigen::Ref<const Eigen::VectorXd>& v) const;

  /// s with g^(s+1) = 0 in the lower central series, or 0 when the algebra is not nilpotent.
  int nilpotency_step() const { return nilpotency_step_; }

  /// Basis change to a frame that is orthonormal for the frame metric:
  /// A_a = sum_i T(a, i) E_i, block diagonal (horizontal A's mix only horizontal E's).
  const Eigen::MatrixXd& orthonormalizer() const { return T_; }
  /// Structure constants in the orthonormal frame, same index convention as c().
  double c_on(int a, int b, int k) const { return c_on_[static_cast<std::size_t>((a * dim() + b) * dim() + k)]; }
  const std::vector<double>& structure_constants_on() const { return c_on_; }

  /// Copy with the vertical block of the frame metric multiplied by `scale`.
  LieModel with_vertical_scale(double scale, std::string new_name) const;

 private:
  std::string name_;
  int dim_h_;
  int dim_v_;
  std::vector<double> c_;
  Eigen::MatrixXd metric_;
  std::optional<DeclaredConstants> declared_;
  std::uint64_t id_;
  std::vector<Eigen::MatrixXd> ad_;
  int nilpotency_step_ = 0;
  Eigen::MatrixXd T_;
  std::vector<double> c_on_;
};

LieModel build_heisenberg();
/// Free step-2 nilpotent algebra on n generators: [A_i, A_j] = V_ij (i < j, lexicographic).
LieModel build_free_nilpotent(int n);
/// [X1, X2] = X3, [X1, X3] = X4; H = span(X1, X2).
LieModel build_engel();
/// su(2) + su(2) with H = {(A, 2A)} and V = {(A, 0)}, frame (H_1..H_3, W_1..W_3) orthonormal.
LieModel build_su2_pair(double rho);
/// All structure constants zero; dim_h horizontal and dim_v vertical directions.
LieModel build_abelian(int dim_h, int dim_v);

/// Model by name: "heisenberg", "free_nilpotent:<n>", "engel", "su2_pair:<rho>", "abelian:<h>:<v>".
LieModel build_model(const std::string& spec);
/// Names of the models built by default (the ones with checks in the suite).
std::vector<std::string> shipped_model_names();

struct ValidationReport {
  double jacobi_residual = 0.0;
  bool antisymmetric = true;
  /// Smallest r such that H and its brackets of depth < r span the algebra; -1 if never.
  int bracket_step = -1;
  double min_metric_eigenvalue = 0.0;
  /// max |nabla h*|, the metric-preserving predicate.
  double grad_h_residual = 0.0;
  /// max |nabla v*|.
  double grad_v_residual = 0.0;
  /// max |pr_H [V, V]|; zero iff V is integrable.
  double integrability_residual = 0.0;
  /// max |tr Rbar(v, R(v, .))| over v; only meaningful when V is not integrable.
  double trace_zero_residual = 0.0;

  static constexpr double kTol = 1e-12;
  bool metric_preserving() const { return grad_h_residual <= kTol; }
  bool vertical_parallel() const { return grad_v_residual <= kTol; }
  bool v_integrable() const { return integrability_residual <= kTol; }
  bool trace_zero() const { return v_integrable() || trace_zero_residual <= kTol; }
  bool structural_ok() const {
    return jacobi_residual <= kTol && antisymmetric && bracket_step > 0 && min_metric_eigenvalue > 0.0;
  }
};

ValidationReport validate(const LieModel& model);

void to_json(nlohmann::json& j, const LieModel& model);
LieModel model_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const ValidationReport& r);

}  // namespace srlab
