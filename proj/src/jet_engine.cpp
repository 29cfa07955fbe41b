#include "srlab/jet_engine.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/zeta.hpp>

namespace srlab {

std::vector<double> dexp_inverse_series(int count) {
  std::vector<double> beta(static_cast<std::size_t>(std::max(count, 0)), 0.0);
  if (count > 0) beta[0] = 1.0;
  if (count > 1) beta[1] = 0.5;
  // beta_{2m} = B_{2m} / (2m)! = (-1)^(m+1) 2 zeta(2m) / (2 pi)^(2m).
  for (int k = 2; k < count; k += 2) {
    const int m = k / 2;
    const double sign = (m % 2 == 1) ? 1.0 : -1.0;
    beta[static_cast<std::size_t>(k)] = sign * 2.0 * boost::math::zeta(static_cast<double>(k)) * std::pow(2.0 * M_PI, -k);
  }
  return beta;
}

namespace {

/// Number of series terms so that every Taylor coefficient up to `order` is converged.
int series_terms(const LieModel& model, const Eigen::VectorXd& x, int order) {
  if (model.nilpotency_step() > 0) return model.nilpotency_step();
  const double r = model.ad(x).operatorNorm();
  double s = 0.0;
  for (int l = 0; l < model.dim(); ++l) s = std::max(s, model.ad(l).operatorNorm());
  s *= std::sqrt(static_cast<double>(model.dim()));
  if (r >= 0.9 * 2.0 * M_PI)
    throw ModelError("chart point too far from the identity for the exponential-coordinate series");
  // Bound on the k-th term's contribution to coefficients of degree <= order.
  auto bound = [&](int k) {
    double sum = 0.0;
    double binom = 1.0;
    for (int p = 0; p <= std::min(k, order); ++p) {
      if (p > 0) binom = binom * (k - p + 1) / p;
      sum += binom * std::pow(r, k - p) * std::pow(s, p);
    }
    return 2.0 * std::pow(2.0 * M_PI, -k) * sum;
  };
  int k = 2;
  while (k < 2000) {
    if (k > order + 2 && bound(k) < 1e-18 && bound(k + 2) < bound(k)) break;
    k += 2;
  }
  if (k >= 2000) throw ModelError("exponential-coordinate series does not converge at this point");
  return k + 1;
}

}  // namespace

PointContext::PointContext(const LieModel& model, Eigen::VectorXd x, int order)
    : model_(&model), x_(std::move(x)), order_(order) {
  const int d = model.dim();
  if (x_.size() != d) throw ModelError("point dimension does not match the model");
  if (order < 0) throw JetOrderError("negative jet order");
  const int terms = series_terms(model, x_, order);
  const auto beta = dexp_inverse_series(terms);
  const Eigen::MatrixXd adx = model.ad(x_);

  comp_.assign(static_cast<std::size_t>(d * d), Jet(d, order));
  for (int i = 0; i < d; ++i) {
    // Horner: v <- ad_{x+delta} v + beta_k e_i.
    std::vector<Jet> v(static_cast<std::size_t>(d), Jet(d, order));
    v[static_cast<std::size_t>(i)][0] = beta[static_cast<std::size_t>(terms - 1)];
    for (int k = terms - 2; k >= 0; --k) {
      std::vector<Jet> next(static_cast<std::size_t>(d), Jet(d, order));
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q)
          if (adx(p, q) != 0.0) next[static_cast<std::size_t>(p)].axpy(adx(p, q), v[static_cast<std::size_t>(q)]);
      for (int l = 0; l < d; ++l) {
        const auto& adl = model.ad(l);
        for (int p = 0; p < d; ++p) {
          Jet w(d, order);
          bool any = false;
          for (int q = 0; q < d; ++q)
            if (adl(p, q) != 0.0) {
              w.axpy(adl(p, q), v[static_cast<std::size_t>(q)]);
              any = true;
            }
          if (any) next[static_cast<std::size_t>(p)] += w.times_displacement(l);
        }
      }
      next[static_cast<std::size_t>(i)][0] += beta[static_cast<std::size_t>(k)];
      v = std::move(next);
    }
    for (int j = 0; j < d; ++j) comp_[static_cast<std::size_t>(i * d + j)] = std::move(v[static_cast<std::size_t>(j)]);
  }

  const auto& T = model.orthonormalizer();
  comp_on_.assign(static_cast<std::size_t>(d * d), Jet(d, order));
  for (int a = 0; a < d; ++a)
    for (int i = 0; i < d; ++i) {
      if (T(a, i) == 0.0) continue;
      for (int j = 0; j < d; ++j) comp_on_[static_cast<std::size_t>(a * d + j)].axpy(T(a, i), component(i, j));
    }
}

Jet PointContext::apply_with(const std::vector<Jet>& comps, int row, const Jet& f) const {
  if (f.order() < 1) throw JetOrderError("cannot apply a vector field to an order-0 jet");
  const int d = dim();
  const int out_order = std::min(f.order() - 1, order_);
  Jet out(d, out_order);
  for (int j = 0; j < d; ++j) {
    const Jet& cj = comps[static_cast<std::size_t>(row * d + j)];
    if (cj.max_abs() == 0.0) continue;
    multiply_accumulate(out, cj, f.derivative(j));
  }
  return out;
}

Jet PointContext::apply_declared(int i, const Jet& f) const { return apply_with(comp_, i, f); }
Jet PointContext::apply(int a, const Jet& f) const { return apply_with(comp_on_, a, f); }

Jet apply_field(const PointContext& ctx, int i, const Jet& f) { return ctx.apply_declared(i, f); }

Eigen::MatrixXd frame_matrix(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  PointContext ctx(model, x, 0);
  Eigen::MatrixXd m(model.dim(), model.dim());
  for (int i = 0; i < model.dim(); ++i)
    for (int j = 0; j < model.dim(); ++j) m(j, i) = ctx.component(i, j).value();
  return m;
}

}  // namespace srlab
