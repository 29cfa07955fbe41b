#include "srlab/frame_geometry.hpp"

namespace srlab {

FrameConnection levi_civita_connection(const LieModel& m) {
  const int d = m.dim();
  FrameConnection conn(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
  // Koszul formula for an orthonormal frame with constant structure functions.
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        conn[static_cast<std::size_t>(a)](c, b) = 0.5 * (m.c_on(a, b, c) - m.c_on(b, c, a) + m.c_on(c, a, b));
  return conn;
}

FrameConnection adapted_connection(const LieModel& m) {
  const int d = m.dim();
  const int n = m.dim_h();
  const auto lc = levi_civita_connection(m);
  FrameConnection conn(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
  for (int a = 0; a < d; ++a) {
    const bool a_h = a < n;
    for (int b = 0; b < d; ++b) {
      const bool b_h = b < n;
      for (int c = 0; c < d; ++c) {
        const bool c_h = c < n;
        double v = 0.0;
        if (a_h && b_h && c_h) v = lc[static_cast<std::size_t>(a)](c, b);
        else if (!a_h && !b_h && !c_h) v = lc[static_cast<std::size_t>(a)](c, b);
        else if (!a_h && b_h && c_h) v = m.c_on(a, b, c);
        else if (a_h && !b_h && !c_h) v = m.c_on(a, b, c);
        conn[static_cast<std::size_t>(a)](c, b) = v;
      }
    }
  }
  return conn;
}

Eigen::MatrixXd curvature(const LieModel& m, const FrameConnection& conn, int a, int b) {
  const auto& Ga = conn[static_cast<std::size_t>(a)];
  const auto& Gb = conn[static_cast<std::size_t>(b)];
  Eigen::MatrixXd R = Ga * Gb - Gb * Ga;
  for (int k = 0; k < m.dim(); ++k) {
    const double ck = m.c_on(a, b, k);
    if (ck != 0.0) R -= ck * conn[static_cast<std::size_t>(k)];
  }
  return R;
}

Eigen::MatrixXd horizontal_projector(const LieModel& m) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m.dim(), m.dim());
  P.topLeftCorner(m.dim_h(), m.dim_h()).setIdentity();
  return P;
}

Eigen::MatrixXd vertical_projector(const LieModel& m) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m.dim(), m.dim());
  P.bottomRightCorner(m.dim_v(), m.dim_v()).setIdentity();
  return P;
}

}  // namespace srlab
