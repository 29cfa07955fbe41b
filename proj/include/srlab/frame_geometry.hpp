#pragma once

#include <vector>

#include <Eigen/Dense>

#include "srlab/model_zoo.hpp"

namespace srlab {

/// Connections on left-invariant fields, written in the orthonormal frame A_1..A_d.
///
/// conn[a](c, b) is the A_c component of nabla_{A_a} A_b. For a field with
/// constant frame coefficients z, nabla_{A_a} Z has coefficients conn[a] * z.
using FrameConnection = std::vector<Eigen::MatrixXd>;

FrameConnection levi_civita_connection(const LieModel& model);
/// H-H: pr_H LC, V-V: pr_V LC, V on H: pr_H [V, H], H on V: pr_V [H, V].
FrameConnection adapted_connection(const LieModel& model);

/// R(A_a, A_b) as a matrix acting on frame coefficients.
Eigen::MatrixXd curvature(const LieModel& model, const FrameConnection& conn, int a, int b);

/// Covariant derivative along A_a of a (2,0)-tensor with constant frame components S.
inline Eigen::MatrixXd tensor_derivative(const Eigen::MatrixXd& conn_a, const Eigen::MatrixXd& S) {
  return conn_a * S + S * conn_a.transpose();
}

/// Orthogonal projections onto H and V in the orthonormal frame.
Eigen::MatrixXd horizontal_projector(const LieModel& model);
Eigen::MatrixXd vertical_projector(const LieModel& model);

}  // namespace srlab
