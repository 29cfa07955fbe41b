#include "srlab/model_zoo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "srlab/frame_geometry.hpp"

namespace srlab {

namespace {

std::uint64_t next_model_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

/// Orthonormal basis (columns) of the span of the given columns.
Eigen::MatrixXd span_basis(const Eigen::MatrixXd& columns, double tol = 1e-10) {
  if (columns.cols() == 0) return Eigen::MatrixXd(columns.rows(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(columns, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double scale = std::max(1.0, s.size() > 0 ? s(0) : 0.0);
  int rank = 0;
  while (rank < s.size() && s(rank) > tol * scale) ++rank;
  return svd.matrixU().leftCols(rank);
}

/// Columns [b_i, s] for all basis vectors b_i of `left` and columns s of `right`.
Eigen::MatrixXd brackets(const LieModel& m, const Eigen::MatrixXd& left, const Eigen::MatrixXd& right) {
  Eigen::MatrixXd out(m.dim(), left.cols() * right.cols());
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < left.cols(); ++i)
    for (Eigen::Index j = 0; j < right.cols(); ++j) out.col(col++) = m.bracket(left.col(i), right.col(j));
  return out;
}

int compute_nilpotency_step(const LieModel& m) {
  const int d = m.dim();
  Eigen::MatrixXd full = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd current = full;
  for (int s = 1; s <= d; ++s) {
    current = span_basis(brackets(m, full, current));
    if (current.cols() == 0) return s;
  }
  return 0;
}

std::vector<double> zeros(int d) { return std::vector<double>(static_cast<std::size_t>(d * d * d), 0.0); }

void set_bracket(std::vector<double>& c, int d, int i, int j, int k, double v) {
  c[static_cast<std::size_t>((i * d + j) * d + k)] += v;
  c[static_cast<std::size_t>((j * d + i) * d + k)] -= v;
}

int levi_civita_symbol(int a, int b, int c) {
  if (a == b || b == c || a == c) return 0;
  return ((a + 1) % 3 == b) ? 1 : -1;
}

}  // namespace

LieModel::LieModel(std::string name, int dim_h, int dim_v, std::vector<double> structure_constants,
                   Eigen::MatrixXd frame_metric, std::optional<DeclaredConstants> declared)
    : name_(std::move(name)),
      dim_h_(dim_h),
      dim_v_(dim_v),
      c_(std::move(structure_constants)),
      metric_(std::move(frame_metric)),
      declared_(declared),
      id_(next_model_id()) {
  const int d = dim_h + dim_v;
  if (dim_h < 1 || dim_v < 0) throw ModelError(name_ + ": dim_h must be >= 1 and dim_v >= 0");
  if (c_.size() != static_cast<std::size_t>(d * d * d))
    throw ModelError(name_ + ": structure constants must have d^3 entries");
  if (metric_.rows() != d || metric_.cols() != d) throw ModelError(name_ + ": frame metric must be d x d");
  if ((metric_ - metric_.transpose()).cwiseAbs().maxCoeff() > 1e-14)
    throw ModelError(name_ + ": frame metric is not symmetric");
  if (dim_v > 0 && metric_.topRightCorner(dim_h, dim_v).cwiseAbs().maxCoeff() != 0.0)
    throw ModelError(name_ + ": frame metric must make H and V orthogonal");

  ad_.assign(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) ad_[static_cast<std::size_t>(i)](k, j) = c(i, j, k);
  nilpotency_step_ = compute_nilpotency_step(*this);

  T_ = Eigen::MatrixXd::Zero(d, d);
  auto orthonormalize = [&](int offset, int size) {
    if (size == 0) return;
    Eigen::LLT<Eigen::MatrixXd> llt(metric_.block(offset, offset, size, size));
    if (llt.info() != Eigen::Success) throw ModelError(name_ + ": frame metric is not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    T_.block(offset, offset, size, size) =
        L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(size, size));
  };
  orthonormalize(0, dim_h);
  orthonormalize(dim_h, dim_v);
  const Eigen::MatrixXd Tinv = T_.inverse();
  c_on_ = zeros(d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      Eigen::VectorXd v = bracket(T_.row(a).transpose(), T_.row(b).transpose());
      // v holds E-coordinates; E_k = sum_m Tinv(k, m) A_m.
      Eigen::VectorXd w = Tinv.transpose() * v;
      for (int m = 0; m < d; ++m) c_on_[static_cast<std::size_t>((a * d + b) * d + m)] = w(m);
    }
}

Eigen::MatrixXd LieModel::ad(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i)
    if (u(i) != 0.0) m += u(i) * ad_[static_cast<std::size_t>(i)];
  return m;
}

Eigen::VectorXd LieModel::bracket(const Eigen::Ref<const Eigen::VectorXd>& u,
                                  const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return ad(u) * v;
}

LieModel LieModel::with_vertical_scale(double scale, std::string new_name) const {
  if (!(scale > 0.0)) throw ModelError("vertical metric scale must be positive");
  Eigen::MatrixXd m = metric_;
  m.bottomRightCorner(dim_v_, dim_v_) *= scale;
  return LieModel(std::move(new_name), dim_h_, dim_v_, c_, std::move(m), declared_);
}

LieModel build_heisenberg() {
  auto c = zeros(3);
  set_bracket(c, 3, 0, 1, 2, 1.0);
  return LieModel("heisenberg", 2, 1, std::move(c), Eigen::MatrixXd::Identity(3, 3), DeclaredConstants{2, 0.0, 0.5, 0.0});
}

LieModel build_free_nilpotent(int n) {
  if (n < 2) throw ModelError("free_nilpotent: n must be >= 2");
  const int nu = n * (n - 1) / 2;
  const int d = n + nu;
  auto c = zeros(d);
  int k = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) set_bracket(c, d, i, j, k++, 1.0);
  return LieModel("free_nilpotent:" + std::to_string(n), n, nu, std::move(c), Eigen::MatrixXd::Identity(d, d),
                  DeclaredConstants{n, 0.0, 1.0 / (2.0 * (n - 1)), 0.0});
}

LieModel build_engel() {
  auto c = zeros(4);
  set_bracket(c, 4, 0, 1, 2, 1.0);
  set_bracket(c, 4, 0, 2, 3, 1.0);
  return LieModel("engel", 2, 2, std::move(c), Eigen::MatrixXd::Identity(4, 4));
}

LieModel build_su2_pair(double rho) {
  if (!(rho > 0.0)) throw ModelError("su2_pair: rho must be positive");
  // X_a orthonormal in su(2) for <A,B> = -tr(ad A ad B)/(4 rho): [X_a, X_b] = k eps_abc X_c.
  // H_a = (X_a, 2X_a), W_a = sqrt(4 rho) (X_a, 0).
  const double k = std::sqrt(2.0 * rho);
  const double s = std::sqrt(4.0 * rho);
  auto c = zeros(6);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      const int cc = 3 - a - b;
      const double e = levi_civita_symbol(a, b, cc);
      set_bracket(c, 6, a, b, cc, 2.0 * k * e);
      set_bracket(c, 6, a, b, 3 + cc, -k * e / s);
      set_bracket(c, 6, 3 + a, 3 + b, 3 + cc, s * k * e);
    }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      const int cc = 3 - a - b;
      c[static_cast<std::size_t>((a * 6 + 3 + b) * 6 + 3 + cc)] = k * levi_civita_symbol(a, b, cc);
      c[static_cast<std::size_t>(((3 + b) * 6 + a) * 6 + 3 + cc)] = -k * levi_civita_symbol(a, b, cc);
    }
  std::ostringstream name;
  name << "su2_pair:" << rho;
  return LieModel(name.str(), 3, 3, std::move(c), Eigen::MatrixXd::Identity(6, 6),
                  DeclaredConstants{3, 4.0 * rho, 0.25, 0.0});
}

LieModel build_abelian(int dim_h, int dim_v) {
  const int d = dim_h + dim_v;
  return LieModel("abelian:" + std::to_string(dim_h) + ":" + std::to_string(dim_v), dim_h, dim_v, zeros(d),
                  Eigen::MatrixXd::Identity(d, d));
}

LieModel build_model(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.empty()) throw ModelError("empty model name");
  const auto& kind = parts[0];
  try {
    if (kind == "heisenberg" && parts.size() == 1) return build_heisenberg();
    if (kind == "engel" && parts.size() == 1) return build_engel();
    if (kind == "free_nilpotent" && parts.size() == 2) return build_free_nilpotent(std::stoi(parts[1]));
    if (kind == "su2_pair" && parts.size() <= 2) return build_su2_pair(parts.size() == 2 ? std::stod(parts[1]) : 1.0);
    if (kind == "abelian" && parts.size() == 3) return build_abelian(std::stoi(parts[1]), std::stoi(parts[2]));
  } catch (const std::logic_error&) {
    throw ModelError("malformed model name: " + spec);
  }
  throw ModelError("unknown model: " + spec);
}

std::vector<std::string> shipped_model_names() {
  return {"heisenberg", "free_nilpotent:2", "free_nilpotent:3", "free_nilpotent:4", "engel", "su2_pair:1"};
}

ValidationReport validate(const LieModel& m) {
  ValidationReport r;
  const int d = m.dim();
  const int n = m.dim_h();

  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        if (m.c(i, j, k) != -m.c(j, i, k)) r.antisymmetric = false;

  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int q = 0; q < d; ++q) {
          // [[E_i,E_j],E_k] + cyclic, component q.
          double s = 0.0;
          for (int l = 0; l < d; ++l)
            s += m.c(i, j, l) * m.c(l, k, q) + m.c(j, k, l) * m.c(l, i, q) + m.c(k, i, l) * m.c(l, j, q);
          r.jacobi_residual = std::max(r.jacobi_residual, std::abs(s));
        }

  Eigen::MatrixXd h_basis = Eigen::MatrixXd::Identity(d, d).leftCols(n);
  Eigen::MatrixXd span = span_basis(h_basis);
  for (int step = 1; step <= d; ++step) {
    if (span.cols() == d) {
      r.bracket_step = step;
      break;
    }
    Eigen::MatrixXd next(d, span.cols() + n * span.cols());
    next << span, brackets(m, h_basis, span);
    Eigen::MatrixXd grown = span_basis(next);
    if (grown.cols() == span.cols()) break;
    span = grown;
  }

  r.min_metric_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.frame_metric()).eigenvalues().minCoeff();

  const auto conn = adapted_connection(m);
  const Eigen::MatrixXd PH = horizontal_projector(m);
  const Eigen::MatrixXd PV = vertical_projector(m);
  for (int a = 0; a < d; ++a) {
    const auto& G = conn[static_cast<std::size_t>(a)];
    r.grad_h_residual = std::max(r.grad_h_residual, tensor_derivative(G, PH).cwiseAbs().maxCoeff());
    r.grad_v_residual = std::max(r.grad_v_residual, tensor_derivative(G, PV).cwiseAbs().maxCoeff());
  }

  for (int a = n; a < d; ++a)
    for (int b = n; b < d; ++b)
      for (int k = 0; k < n; ++k) r.integrability_residual = std::max(r.integrability_residual, std::abs(m.c_on(a, b, k)));

  // Q(a, b) = tr(w -> Rbar(A_a, R(A_b, w))), R = pr_V [pr_H, pr_H], Rbar = pr_H [pr_V, pr_V].
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d, d);
  for (int a = n; a < d; ++a)
    for (int b = 0; b < n; ++b)
      for (int w = 0; w < n; ++w)
        for (int s = n; s < d; ++s) Q(a, b) += m.c_on(a, s, w) * m.c_on(b, w, s);
  r.trace_zero_residual = (0.5 * (Q + Q.transpose())).cwiseAbs().maxCoeff();
  return r;
}

void to_json(nlohmann::json& j, const LieModel& m) {
  const int d = m.dim();
  nlohmann::json c = nlohmann::json::array();
  for (int i = 0; i < d; ++i) {
    nlohmann::json ci = nlohmann::json::array();
    for (int jj = 0; jj < d; ++jj) {
      nlohmann::json cij = nlohmann::json::array();
      for (int k = 0; k < d; ++k) cij.push_back(m.c(i, jj, k));
      ci.push_back(std::move(cij));
    }
    c.push_back(std::move(ci));
  }
  nlohmann::json metric = nlohmann::json::array();
  for (int i = 0; i < d; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < d; ++k) row.push_back(m.frame_metric()(i, k));
    metric.push_back(std::move(row));
  }
  j = nlohmann::json{{"name", m.name()},
                     {"dim_h", m.dim_h()},
                     {"dim_v", m.dim_v()},
                     {"structure_constants", std::move(c)},
                     {"frame_metric", std::move(metric)}};
  if (m.declared()) {
    const auto& dc = *m.declared();
    j["declared_constants"] = {{"n", dc.n}, {"rho1", dc.rho1}, {"rho20", dc.rho20}, {"rho21", dc.rho21}};
  } else {
    j["declared_constants"] = nullptr;
  }
}

LieModel model_from_json(const nlohmann::json& j) {
  try {
    const int dh = j.at("dim_h").get<int>();
    const int dv = j.at("dim_v").get<int>();
    const int d = dh + dv;
    const auto& cj = j.at("structure_constants");
    if (static_cast<int>(cj.size()) != d) throw ModelError("structure_constants: expected d x d x d array");
    std::vector<double> c;
    c.reserve(static_cast<std::size_t>(d * d * d));
    for (const auto& ci : cj) {
      if (static_cast<int>(ci.size()) != d) throw ModelError("structure_constants: expected d x d x d array");
      for (const auto& cij : ci) {
        if (static_cast<int>(cij.size()) != d) throw ModelError("structure_constants: expected d x d x d array");
        for (const auto& v : cij) c.push_back(v.get<double>());
      }
    }
    const auto& mj = j.at("frame_metric");
    if (static_cast<int>(mj.size()) != d) throw ModelError("frame_metric: expected d x d array");
    Eigen::MatrixXd metric(d, d);
    for (int r = 0; r < d; ++r) {
      if (static_cast<int>(mj[static_cast<std::size_t>(r)].size()) != d) throw ModelError("frame_metric: expected d x d array");
      for (int k = 0; k < d; ++k) metric(r, k) = mj[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)].get<double>();
    }
    std::optional<DeclaredConstants> declared;
    if (j.contains("declared_constants") && !j["declared_constants"].is_null()) {
      const auto& dc = j["declared_constants"];
      declared = DeclaredConstants{dc.at("n").get<int>(), dc.at("rho1").get<double>(), dc.at("rho20").get<double>(),
                                   dc.at("rho21").get<double>()};
    }
    return LieModel(j.at("name").get<std::string>(), dh, dv, std::move(c), std::move(metric), declared);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model document: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const ValidationReport& r) {
  j = nlohmann::json{{"jacobi_residual", r.jacobi_residual},
                     {"antisymmetric", r.antisymmetric},
                     {"bracket_step", r.bracket_step},
                     {"min_metric_eigenvalue", r.min_metric_eigenvalue},
                     {"metric_preserving", r.metric_preserving()},
                     {"grad_h_residual", r.grad_h_residual},
                     {"vertical_parallel", r.vertical_parallel()},
                     {"grad_v_residual", r.grad_v_residual},
                     {"v_integrable", r.v_integrable()},
                     {"trace_zero", r.trace_zero()},
                     {"trace_zero_residual", r.trace_zero_residual},
                     {"structural_ok", r.structural_ok()}};
}

}  // namespace srlab
