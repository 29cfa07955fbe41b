#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace srlab {

/// Graded enumeration of multi-indices in `nvars` variables up to `max_order`.
///
/// Monomials are stored degree by degree, so the layout for a lower order is
/// always a prefix of the layout for a higher one. Truncating a jet is a
/// resize of its coefficient vector.
class JetLayout {
 public:
  static constexpr int kMaxOrder = 6;

  /// Shared layout for `nvars` variables covering at least `order` (thread-safe).
  /// Tables are built only up to the highest order requested so far.
  static std::shared_ptr<const JetLayout> get(int nvars, int order = kMaxOrder);

  int nvars() const { return nvars_; }
  int max_order() const { return max_order_; }
  /// Number of monomials of total degree <= order.
  std::size_t count(int order) const { return degree_offset_[static_cast<std::size_t>(order) + 1]; }
  const std::vector<int>& exponents(std::size_t m) const { return exps_[m]; }
  int degree(std::size_t m) const { return degree_[m]; }
  /// Index of a multi-index, or -1 when its degree exceeds kMaxOrder.
  long index_of(std::span<const int> alpha) const;

  struct Triple {
    std::uint32_t a, b, c;
  };
  /// Products u^a * u^b = u^c sorted by deg(c); prefix up to `order` is the truncated table.
  std::span<const Triple> products(int order) const {
    return {products_.data(), product_offset_[static_cast<std::size_t>(order) + 1]};
  }

  struct Shift {
    std::uint32_t src, dst;
    double factor;
  };
  /// d/du_j: coefficient at src (degree k) times factor lands on dst (degree k-1), sorted by deg(src).
  std::span<const Shift> derivative(int var, int order) const;

 private:
  JetLayout(int nvars, int max_order);
  std::uint64_t key(std::span<const int> alpha) const;

  int nvars_;
  int max_order_;
  std::vector<std::vector<int>> exps_;
  std::vector<int> degree_;
  std::vector<std::size_t> degree_offset_;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> lookup_;  // sorted by key
  std::vector<Triple> products_;
  std::vector<std::size_t> product_offset_;
  std::vector<std::vector<Shift>> shifts_;
  std::vector<std::vector<std::size_t>> shift_offset_;
};

class JetOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Truncated multivariate Taylor expansion at an (implicit) base point.
///
/// coefficient(alpha) is d^alpha f(x) / alpha!, the expansion variable being
/// the displacement from the base point.
class Jet {
 public:
  Jet() = default;
  Jet(int nvars, int order);

  static Jet constant(int nvars, int order, double value);
  /// The jet of x_var + delta_var at a base point with coordinate `base_value`.
  static Jet coordinate(int nvars, int order, int var, double base_value);

  int nvars() const { return layout_ ? layout_->nvars() : 0; }
  int order() const { return order_; }
  const JetLayout& layout() const { return *layout_; }
  std::span<const double> coeffs() const { return c_; }
  std::span<double> coeffs() { return c_; }

  double value() const { return c_.empty() ? 0.0 : c_[0]; }
  double coefficient(std::span<const int> alpha) const;
  double& operator[](std::size_t m) { return c_[m]; }
  double operator[](std::size_t m) const { return c_[m]; }

  /// Drops all terms above `order` (no-op when order >= current order).
  Jet truncated(int order) const;
  /// d/du_var; the result has order one less.
  Jet derivative(int var) const;
  /// (u_var - x_var) * this, truncated to the same order.
  Jet times_displacement(int var) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(double s);
  /// this += s * o, on the common order.
  Jet& axpy(double s, const Jet& o);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator*(const Jet& a, const Jet& b);

  /// g(J) given the Taylor coefficients g^(k)(J.value())/k!, k = 0..order.
  Jet compose(std::span<const double> taylor) const;

  double max_abs() const;

 private:
  std::shared_ptr<const JetLayout> layout_;
  int order_ = 0;
  std::vector<double> c_;
};

/// Accumulates out += a * b truncated to out.order().
void multiply_accumulate(Jet& out, const Jet& a, const Jet& b, double scale = 1.0);

Jet exp(const Jet& j);
Jet sin(const Jet& j);
Jet cos(const Jet& j);

}  // namespace srlab
