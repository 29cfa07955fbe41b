#pragma once

#include <vector>

#include <Eigen/Dense>

#include "srlab/jet.hpp"
#include "srlab/model_zoo.hpp"
#include "srlab/test_function.hpp"

namespace srlab {

/// Default jet order for Gamma-calculus evaluations.
inline constexpr int kDefaultJetOrder = 4;

/// Taylor coefficients of psi(z) = z / (1 - exp(-z)) = sum_k beta_k z^k, k = 0..count-1.
std::vector<double> dexp_inverse_series(int count);

/// Frame fields of a model at one base point, in exponential coordinates of the first kind.
///
/// At exp(u) the left-invariant field of the algebra element e is
/// psi(ad_u) e in coordinates. The context holds the coefficient jets of
/// every declared field and of the orthonormal frame A_1..A_d built from the
/// frame metric, expanded to `order` around the base point.
class PointContext {
 public:
  /// Throws ModelError when the series for a non-nilpotent model would not converge at x.
  PointContext(const LieModel& model, Eigen::VectorXd x, int order);

  const LieModel& model() const { return *model_; }
  const Eigen::VectorXd& point() const { return x_; }
  int order() const { return order_; }

  /// d/du_j coefficient of the declared field E_i.
  const Jet& component(int i, int j) const { return comp_[static_cast<std::size_t>(i * dim() + j)]; }
  /// d/du_j coefficient of the orthonormal field A_a.
  const Jet& component_on(int a, int j) const { return comp_on_[static_cast<std::size_t>(a * dim() + j)]; }

  /// E_i f; order drops by one.
  Jet apply_declared(int i, const Jet& f) const;
  /// A_a f; order drops by one.
  Jet apply(int a, const Jet& f) const;

 private:
  int dim() const { return model_->dim(); }
  Jet apply_with(const std::vector<Jet>& comps, int row, const Jet& f) const;

  const LieModel* model_;
  Eigen::VectorXd x_;
  int order_;
  std::vector<Jet> comp_;
  std::vector<Jet> comp_on_;
};

/// Applies the declared frame field E_i to the jet f taken at ctx.point().
Jet apply_field(const PointContext& ctx, int i, const Jet& f);

/// Plain values of the declared frame fields at x: column i holds E_i in coordinates.
Eigen::MatrixXd frame_matrix(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace srlab
