#include "srlab/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace srlab {

namespace {

void enumerate_degree(int nvars, int degree, int var, std::vector<int>& current,
                      std::vector<std::vector<int>>& out) {
  if (var == nvars - 1) {
    current[static_cast<std::size_t>(var)] = degree;
    out.push_back(current);
    return;
  }
  for (int k = degree; k >= 0; --k) {
    current[static_cast<std::size_t>(var)] = k;
    enumerate_degree(nvars, degree - k, var + 1, current, out);
  }
  current[static_cast<std::size_t>(var)] = 0;
}

}  // namespace

std::shared_ptr<const JetLayout> JetLayout::get(int nvars, int order) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const JetLayout>> cache;
  if (nvars < 1 || nvars > 20) throw std::invalid_argument("JetLayout: nvars must be in [1, 20]");
  std::lock_guard lock(mutex);
  auto& slot = cache[nvars];
  if (!slot || slot->max_order_ < order) slot = std::shared_ptr<const JetLayout>(new JetLayout(nvars, std::max(order, 1)));
  return slot;
}

std::uint64_t JetLayout::key(std::span<const int> alpha) const {
  std::uint64_t k = 0;
  for (int a : alpha) k = k * (kMaxOrder + 1) + static_cast<std::uint64_t>(a);
  return k;
}

long JetLayout::index_of(std::span<const int> alpha) const {
  int deg = 0;
  for (int a : alpha) {
    if (a < 0) return -1;
    deg += a;
  }
  if (deg > max_order_) return -1;
  const auto k = key(alpha);
  auto it = std::lower_bound(lookup_.begin(), lookup_.end(), std::make_pair(k, std::uint32_t{0}));
  if (it == lookup_.end() || it->first != k) return -1;
  return static_cast<long>(it->second);
}

JetLayout::JetLayout(int nvars, int max_order) : nvars_(nvars), max_order_(max_order) {
  degree_offset_.push_back(0);
  std::vector<int> current(static_cast<std::size_t>(nvars), 0);
  for (int d = 0; d <= max_order_; ++d) {
    enumerate_degree(nvars, d, 0, current, exps_);
    degree_.resize(exps_.size(), d);
    degree_offset_.push_back(exps_.size());
  }
  lookup_.reserve(exps_.size());
  for (std::size_t m = 0; m < exps_.size(); ++m) lookup_.emplace_back(key(exps_[m]), static_cast<std::uint32_t>(m));
  std::sort(lookup_.begin(), lookup_.end());

  // Product table grouped by the degree of the result.
  std::vector<std::vector<Triple>> by_degree(static_cast<std::size_t>(max_order_) + 1);
  std::vector<int> sum(static_cast<std::size_t>(nvars));
  for (std::size_t a = 0; a < exps_.size(); ++a) {
    for (std::size_t b = 0; b < degree_offset_[static_cast<std::size_t>(max_order_ - degree_[a]) + 1]; ++b) {
      for (int v = 0; v < nvars; ++v) sum[static_cast<std::size_t>(v)] = exps_[a][static_cast<std::size_t>(v)] + exps_[b][static_cast<std::size_t>(v)];
      const long c = index_of(sum);
      by_degree[static_cast<std::size_t>(degree_[a] + degree_[b])].push_back(
          {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)});
    }
  }
  product_offset_.push_back(0);
  for (auto& group : by_degree) {
    products_.insert(products_.end(), group.begin(), group.end());
    product_offset_.push_back(products_.size());
  }

  shifts_.resize(static_cast<std::size_t>(nvars));
  shift_offset_.resize(static_cast<std::size_t>(nvars));
  for (int v = 0; v < nvars; ++v) {
    auto& list = shifts_[static_cast<std::size_t>(v)];
    auto& offsets = shift_offset_[static_cast<std::size_t>(v)];
    offsets.push_back(0);
    for (int d = 0; d <= max_order_; ++d) {
      for (std::size_t m = degree_offset_[static_cast<std::size_t>(d)]; m < degree_offset_[static_cast<std::size_t>(d) + 1]; ++m) {
        const int e = exps_[m][static_cast<std::size_t>(v)];
        if (e == 0) continue;
        std::vector<int> lowered = exps_[m];
        lowered[static_cast<std::size_t>(v)] -= 1;
        list.push_back({static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(index_of(lowered)), static_cast<double>(e)});
      }
      offsets.push_back(list.size());
    }
  }
}

std::span<const JetLayout::Shift> JetLayout::derivative(int var, int order) const {
  const auto& list = shifts_[static_cast<std::size_t>(var)];
  return {list.data(), shift_offset_[static_cast<std::size_t>(var)][static_cast<std::size_t>(order) + 1]};
}

Jet::Jet(int nvars, int order) : order_(order) {
  if (order < 0 || order > JetLayout::kMaxOrder) throw JetOrderError("jet order out of range");
  layout_ = JetLayout::get(nvars, order);
  c_.assign(layout_->count(order), 0.0);
}

Jet Jet::constant(int nvars, int order, double value) {
  Jet j(nvars, order);
  j.c_[0] = value;
  return j;
}

Jet Jet::coordinate(int nvars, int order, int var, double base_value) {
  Jet j(nvars, order);
  j.c_[0] = base_value;
  if (order >= 1) j.c_[1 + static_cast<std::size_t>(var)] = 1.0;
  return j;
}

double Jet::coefficient(std::span<const int> alpha) const {
  const long m = layout_->index_of(alpha);
  if (m < 0 || static_cast<std::size_t>(m) >= c_.size()) return 0.0;
  return c_[static_cast<std::size_t>(m)];
}

Jet Jet::truncated(int order) const {
  if (order >= order_) return *this;
  if (order < 0) throw JetOrderError("cannot truncate below order 0");
  Jet j = *this;
  j.order_ = order;
  j.c_.resize(layout_->count(order));
  return j;
}

Jet Jet::derivative(int var) const {
  if (order_ < 1) throw JetOrderError("derivative requested from an order-0 jet");
  Jet out(nvars(), order_ - 1);
  for (const auto& s : layout_->derivative(var, order_)) out.c_[s.dst] += s.factor * c_[s.src];
  return out;
}

Jet Jet::times_displacement(int var) const {
  Jet out(nvars(), order_);
  if (order_ == 0) return out;
  for (const auto& s : layout_->derivative(var, order_)) out.c_[s.src] += c_[s.dst];
  return out;
}

Jet& Jet::operator+=(const Jet& o) { return axpy(1.0, o); }
Jet& Jet::operator-=(const Jet& o) { return axpy(-1.0, o); }

Jet& Jet::axpy(double s, const Jet& o) {
  if (o.order_ < order_) *this = truncated(o.order_);
  for (std::size_t m = 0; m < c_.size(); ++m) c_[m] += s * o.c_[m];
  return *this;
}

Jet& Jet::operator*=(double s) {
  for (auto& v : c_) v *= s;
  return *this;
}

void multiply_accumulate(Jet& out, const Jet& a, const Jet& b, double scale) {
  const int order = std::min({out.order(), a.order(), b.order()});
  if (order < out.order()) out = out.truncated(order);
  auto oc = out.coeffs();
  auto ac = a.coeffs();
  auto bc = b.coeffs();
  for (const auto& t : a.layout().products(order)) oc[t.c] += scale * ac[t.a] * bc[t.b];
}

Jet operator*(const Jet& a, const Jet& b) {
  Jet out(a.nvars(), std::min(a.order(), b.order()));
  multiply_accumulate(out, a, b);
  return out;
}

Jet Jet::compose(std::span<const double> taylor) const {
  // g(v + e) = sum_k g_k e^k with e the nilpotent part (truncation makes e^(order+1) = 0).
  Jet e = *this;
  e.c_[0] = 0.0;
  Jet result = Jet::constant(nvars(), order_, taylor.empty() ? 0.0 : taylor[0]);
  Jet power = Jet::constant(nvars(), order_, 1.0);
  for (int k = 1; k <= order_ && static_cast<std::size_t>(k) < taylor.size(); ++k) {
    power = power * e;
    result.axpy(taylor[static_cast<std::size_t>(k)], power);
  }
  return result;
}

double Jet::max_abs() const {
  double m = 0.0;
  for (double v : c_) m = std::max(m, std::abs(v));
  return m;
}

Jet exp(const Jet& j) {
  std::vector<double> t(static_cast<std::size_t>(j.order()) + 1);
  double e = std::exp(j.value());
  double fact = 1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k > 0) fact *= static_cast<double>(k);
    t[k] = e / fact;
  }
  return j.compose(t);
}

namespace {
Jet trig(const Jet& j, double phase_shift) {
  // k-th derivative of sin(v + s) is sin(v + s + k*pi/2).
  std::vector<double> t(static_cast<std::size_t>(j.order()) + 1);
  double fact = 1.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (k > 0) fact *= static_cast<double>(k);
    t[k] = std::sin(j.value() + phase_shift + static_cast<double>(k) * M_PI / 2.0) / fact;
  }
  return j.compose(t);
}
}  // namespace

Jet sin(const Jet& j) { return trig(j, 0.0); }
Jet cos(const Jet& j) { return trig(j, M_PI / 2.0); }

}  // namespace srlab
