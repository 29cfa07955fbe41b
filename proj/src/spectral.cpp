#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

#include "srlab/verify_suite.hpp"

namespace srlab {

namespace {

using Cplx = std::complex<double>;

// Spin-j matrices J_x, J_y, J_z in the basis m = j, j-1, ..., -j.
std::array<Eigen::MatrixXcd, 3> spin_matrices(int two_j) {
  const int dim = two_j + 1;
  const double j = 0.5 * two_j;
  Eigen::MatrixXcd jp = Eigen::MatrixXcd::Zero(dim, dim), jz = Eigen::MatrixXcd::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const double m = j - r;
    jz(r, r) = m;
    if (r > 0) jp(r - 1, r) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  const Eigen::MatrixXcd jm = jp.adjoint();
  return {(jp + jm) * 0.5, (jp - jm) * Cplx(0.0, -0.5), jz};
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double smallest_nonzero(const std::vector<double>& ev) {
  double best = 0.0;
  for (double v : ev)
    if (std::abs(v) > 1e-9 && (best == 0.0 || std::abs(v) < std::abs(best))) best = v;
  return best;
}

}  // namespace

std::vector<double> su2_pair_horizontal_spectrum(double rho, double j_max) {
  // Orthonormal horizontal frame H_a = k (L_a, 2 L_a) with [L_a, L_b] = eps_abc L_c; read k from the model.
  const LieModel model = build_su2_pair(rho);
  const double k = model.c(0, 4, 5);
  const int two_max = static_cast<int>(std::lround(2.0 * j_max));
  std::vector<double> out;
  for (int a = 0; a <= two_max; ++a)
    for (int b = 0; b <= two_max; ++b) {
      const auto j1 = spin_matrices(a), j2 = spin_matrices(b);
      const auto i1 = Eigen::MatrixXcd::Identity(a + 1, a + 1), i2 = Eigen::MatrixXcd::Identity(b + 1, b + 1);
      Eigen::MatrixXcd casimir = Eigen::MatrixXcd::Zero((a + 1) * (b + 1), (a + 1) * (b + 1));
      for (int c = 0; c < 3; ++c) {
        // L_a acts as -i J_a, so H_a^2 acts as -k^2 (J_a (x) 1 + 2 (1 (x) J_a))^2.
        const Eigen::MatrixXcd h = kron(j1[c], i2) + 2.0 * kron(i1, j2[c]);
        casimir += h * h;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(casimir, Eigen::EigenvaluesOnly);
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(-k * k * es.eigenvalues()(i));
    }
  std::sort(out.begin(), out.end());
  return out;
}

SpectralResult spectral_gap_su2_pair(double rho, double j_max) {
  if (j_max < 1.0) throw std::invalid_argument("spectral: j_max must be at least 1");
  SpectralResult r;
  r.eigenvalues = su2_pair_horizontal_spectrum(rho, j_max);
  r.lambda1 = smallest_nonzero(r.eigenvalues);
  r.lambda1_next = smallest_nonzero(su2_pair_horizontal_spectrum(rho, j_max + 1.0));
  r.stable = std::abs(r.lambda1 - r.lambda1_next) <= 1e-9;

  const LieModel model = build_su2_pair(rho);
  const auto k = assemble_constants(geometry_report(model), std::nullopt, Objective::max_rho2);
  // Unresolved gap: the margin is reported but cannot be certified.
  const double unresolved = r.stable ? 0.0 : std::numeric_limits<double>::infinity();
  r.poincare = make_result("spectral_gap", "Poincare(c)", model.name(), -r.lambda1 - k.alpha, 1e-12, unresolved);
  r.gap_bound =
      make_result("spectral_gap", "SpectralGap", model.name(), -r.lambda1 - k.spectral_gap_bound, 1e-12, unresolved);
  if (!r.stable) {
    r.poincare.verdict = Verdict::inconclusive;
    r.gap_bound.verdict = Verdict::inconclusive;
  }
  const nlohmann::json detail = {{"rho", rho},
                                 {"j_max", j_max},
                                 {"lambda1", r.lambda1},
                                 {"lambda1_next", r.lambda1_next},
                                 {"stable", r.stable},
                                 {"convention", "eigenvalue of the unhalved sub-Laplacian"}};
  r.poincare.detail = detail;
  r.poincare.detail["alpha"] = k.alpha;
  r.gap_bound.detail = detail;
  r.gap_bound.detail["bound"] = k.spectral_gap_bound;
  return r;
}

}  // namespace srlab
