#include "srlab/heat_engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <unordered_map>

#include <Eigen/Geometry>
#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <boost/math/tools/roots.hpp>

#include "srlab/geometry_invariants.hpp"
#include "srlab/rng.hpp"

namespace srlab {

namespace {

using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 32, 1>;

struct BracketEntry {
  int i, j, k;
  double c;
};

class NilpotentLaw final : public GroupLaw {
 public:
  explicit NilpotentLaw(const LieModel& m) : d_(m.dim()), step_(m.nilpotency_step()) {
    if (step_ < 1 || step_ > 4) throw HeatError("group law: nilpotent step must be 1..4 for " + m.name());
    if (d_ > 32) throw HeatError("group law: dimension above 32");
    for (int i = 0; i < d_; ++i)
      for (int j = i + 1; j < d_; ++j)
        for (int k = 0; k < d_; ++k)
          if (m.c(i, j, k) != 0.0) entries_.push_back({i, j, k, m.c(i, j, k)});
  }

  Eigen::VectorXd identity() const override { return Eigen::VectorXd::Zero(d_); }
  Eigen::VectorXd from_coordinates(const Eigen::Ref<const Eigen::VectorXd>& u) const override { return u; }
  Eigen::VectorXd coordinates(const Eigen::Ref<const Eigen::VectorXd>& s) const override { return s; }

  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b) const override {
    SmallVec z(d_);
    bch(a, b, z);
    return z;
  }

  void right_multiply_exp(Eigen::Ref<Eigen::VectorXd> state, const Eigen::Ref<const Eigen::VectorXd>& v) const override {
    SmallVec z(d_);
    bch(state, v, z);
    state = z;
  }

 private:
  template <class A, class B, class Out>
  void bracket(const A& a, const B& b, Out& out) const {
    out.setZero();
    for (const auto& e : entries_) out(e.k) += e.c * (a(e.i) * b(e.j) - a(e.j) * b(e.i));
  }

  // log(exp a exp b), exact through degree 4.
  template <class A, class B>
  void bch(const A& a, const B& b, SmallVec& z) const {
    z = a + b;
    if (step_ < 2) return;
    SmallVec ab(d_);
    bracket(a, b, ab);
    z += 0.5 * ab;
    if (step_ < 3) return;
    SmallVec aab(d_), bab(d_);
    bracket(a, ab, aab);
    bracket(b, ab, bab);
    z += (aab - bab) / 12.0;
    if (step_ < 4) return;
    SmallVec baab(d_);
    bracket(b, aab, baab);
    z -= baab / 24.0;
  }

  int d_;
  int step_;
  std::vector<BracketEntry> entries_;
};

Eigen::Matrix3d rotation(const Eigen::Vector3d& w) {
  const double th = w.norm();
  if (th == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

// su(2)+su(2) through its so(3)+so(3) image: H_a -> k (L_a, 2 L_a), W_a -> s k (L_a, 0).
class Su2PairLaw final : public GroupLaw {
 public:
  explicit Su2PairLaw(const LieModel& m) {
    if (m.dim_h() != 3 || m.dim_v() != 3) throw HeatError("group law: no law for " + m.name());
    k_ = m.c(0, 4, 5);
    sk_ = m.c(3, 4, 5);
    if (k_ == 0.0 || sk_ == 0.0) throw HeatError("group law: no law for " + m.name());
    phi_.setZero();
    for (int a = 0; a < 3; ++a) {
      phi_(a, a) = k_;
      phi_(3 + a, a) = 2.0 * k_;
      phi_(a, 3 + a) = sk_;
    }
    // Homomorphism check against the model's own brackets.
    auto so3_bracket = [](const Eigen::Matrix<double, 6, 1>& p, const Eigen::Matrix<double, 6, 1>& q) {
      Eigen::Matrix<double, 6, 1> r;
      r.head<3>() = p.head<3>().cross(q.head<3>());
      r.tail<3>() = p.tail<3>().cross(q.tail<3>());
      return r;
    };
    double err = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        Eigen::VectorXd ei = Eigen::VectorXd::Unit(6, i), ej = Eigen::VectorXd::Unit(6, j);
        const Eigen::Matrix<double, 6, 1> lhs = phi_ * m.bracket(ei, ej);
        err = std::max(err, (lhs - so3_bracket(phi_.col(i), phi_.col(j))).cwiseAbs().maxCoeff());
      }
    if (err > 1e-10) throw HeatError("group law: no law for " + m.name());
    phi_inv_ = phi_.inverse();
  }

  Eigen::VectorXd identity() const override { return pack(Eigen::Matrix3d::Identity(), Eigen::Matrix3d::Identity()); }

  Eigen::VectorXd from_coordinates(const Eigen::Ref<const Eigen::VectorXd>& u) const override {
    const Eigen::Matrix<double, 6, 1> pq = phi_ * u;
    return pack(rotation(pq.head<3>()), rotation(pq.tail<3>()));
  }

  Eigen::VectorXd coordinates(const Eigen::Ref<const Eigen::VectorXd>& s) const override {
    Eigen::Matrix<double, 6, 1> pq;
    pq.head<3>() = rotation_log(first(s));
    pq.tail<3>() = rotation_log(second(s));
    return phi_inv_ * pq;
  }

  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b) const override {
    return pack(first(a) * first(b), second(a) * second(b));
  }

  void right_multiply_exp(Eigen::Ref<Eigen::VectorXd> state, const Eigen::Ref<const Eigen::VectorXd>& v) const override {
    const Eigen::Matrix<double, 6, 1> pq = phi_ * v;
    state = pack(first(state) * rotation(pq.head<3>()), second(state) * rotation(pq.tail<3>()));
  }

 private:
  static Eigen::VectorXd pack(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    Eigen::VectorXd s(18);
    s.head<9>() = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(a.data());
    s.tail<9>() = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(b.data());
    return s;
  }
  static Eigen::Matrix3d first(const Eigen::Ref<const Eigen::VectorXd>& s) {
    return Eigen::Map<const Eigen::Matrix3d>(s.data());
  }
  static Eigen::Matrix3d second(const Eigen::Ref<const Eigen::VectorXd>& s) {
    return Eigen::Map<const Eigen::Matrix3d>(s.data() + 9);
  }

  double k_ = 0.0;
  double sk_ = 0.0;
  Eigen::Matrix<double, 6, 6> phi_;
  Eigen::Matrix<double, 6, 6> phi_inv_;
};

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

void check_mc(double t, const McSettings& s) {
  if (!(t >= 0.0)) throw std::invalid_argument("mc: t must be nonnegative");
  if (s.paths < 1 || s.steps < 1) throw std::invalid_argument("mc: paths and steps must be positive");
}

}  // namespace

std::unique_ptr<GroupLaw> make_group_law(const LieModel& model) {
  if (model.nilpotency_step() > 0) return std::make_unique<NilpotentLaw>(model);
  return std::make_unique<Su2PairLaw>(model);
}

SampleStats sample_stats(const std::vector<double>& values) {
  SampleStats st;
  const auto n = values.size();
  if (n == 0) return st;
  st.mean = pairwise_sum(values) / static_cast<double>(n);
  if (n < 2) return st;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - st.mean) * (values[i] - st.mean);
  st.std_error = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1) / static_cast<double>(n));
  return st;
}

void simulate_increments(const LieModel& model, double t, const McSettings& s,
                         const std::function<void(std::size_t, const Eigen::VectorXd&)>& visit) {
  check_mc(t, s);
  const auto law = make_group_law(model);
  const Eigen::MatrixXd frame = model.orthonormalizer().topRows(model.dim_h());
  const double sqh = std::sqrt(t / s.steps);
  const long paths = s.paths;
#pragma omp parallel for num_threads(std::max(1, s.jobs)) schedule(static)
  for (long p = 0; p < paths; ++p) {
    SplitMix64 rng(stream_seed(s.seed, static_cast<std::uint64_t>(p)));
    std::normal_distribution<double> normal;
    Eigen::VectorXd state = law->identity();
    Eigen::VectorXd xi(model.dim_h());
    Eigen::VectorXd v(model.dim());
    if (t > 0.0) {
      for (int k = 0; k < s.steps; ++k) {
        for (int i = 0; i < model.dim_h(); ++i) xi(i) = normal(rng);
        v.noalias() = sqh * frame.transpose() * xi;
        law->right_multiply_exp(state, v);
      }
    }
    visit(static_cast<std::size_t>(p), state);
  }
}

std::vector<double> mc_path_values(const LieModel& model, const std::function<double(const Eigen::VectorXd&)>& g,
                                   const Eigen::Ref<const Eigen::VectorXd>& x, double t, const McSettings& s) {
  const auto law = make_group_law(model);
  const Eigen::VectorXd start = law->from_coordinates(x);
  std::vector<double> values(static_cast<std::size_t>(s.paths));
  simulate_increments(model, t, s, [&](std::size_t p, const Eigen::VectorXd& w) {
    values[p] = g(law->coordinates(law->multiply(start, w)));
  });
  return values;
}

SemigroupEstimate mc_expectation(const LieModel& model, const std::function<double(const Eigen::VectorXd&)>& g,
                                 const Eigen::Ref<const Eigen::VectorXd>& x, double t, const McSettings& s) {
  const auto st = sample_stats(mc_path_values(model, g, x, t, s));
  SemigroupEstimate e;
  e.value = st.mean;
  e.std_error = st.std_error;
  e.t = t;
  e.x = x;
  e.method = "mc";
  e.settings = s;
  e.seed = s.seed;
  return e;
}

SemigroupEstimate mc_semigroup(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                               double t, const McSettings& s) {
  check_mc(t, s);
  if (t == 0.0 || f.is_constant()) {
    SemigroupEstimate e;
    e.value = f(x);
    e.t = t;
    e.x = x;
    e.method = "mc";
    e.settings = s;
    e.seed = s.seed;
    return e;
  }
  return mc_expectation(model, [&f](const Eigen::VectorXd& u) { return f(u); }, x, t, s);
}

GradientEstimate mc_gradient(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                             double t, Which which, const McSettings& s) {
  check_mc(t, s);
  const int lo = which == Which::h ? 0 : model.dim_h();
  const int hi = which == Which::h ? model.dim_h() : model.dim();
  const int k = hi - lo;
  GradientEstimate out;
  out.derivative.assign(static_cast<std::size_t>(k), 0.0);
  out.derivative_error.assign(static_cast<std::size_t>(k), 0.0);
  if (f.is_constant() || k == 0) return out;

  const auto law = make_group_law(model);
  const Eigen::VectorXd start = law->from_coordinates(x);
  std::vector<Eigen::VectorXd> plus, minus;
  for (int a = lo; a < hi; ++a) {
    const Eigen::VectorXd dir = s.delta * model.orthonormalizer().row(a).transpose();
    plus.push_back(law->multiply(start, law->from_coordinates(dir)));
    minus.push_back(law->multiply(start, law->from_coordinates(-dir)));
  }
  // d[p * k + a]: per-path central difference along A_a.
  std::vector<double> d(static_cast<std::size_t>(s.paths) * static_cast<std::size_t>(k));
  simulate_increments(model, t, s, [&](std::size_t p, const Eigen::VectorXd& w) {
    for (int a = 0; a < k; ++a) {
      const double fp = f(law->coordinates(law->multiply(plus[static_cast<std::size_t>(a)], w)));
      const double fm = f(law->coordinates(law->multiply(minus[static_cast<std::size_t>(a)], w)));
      d[p * static_cast<std::size_t>(k) + static_cast<std::size_t>(a)] = (fp - fm) / (2.0 * s.delta);
    }
  });
  const auto n = static_cast<std::size_t>(s.paths);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
  std::vector<double> col(n);
  for (int a = 0; a < k; ++a) {
    for (std::size_t p = 0; p < n; ++p) col[p] = d[p * static_cast<std::size_t>(k) + static_cast<std::size_t>(a)];
    const auto st = sample_stats(col);
    out.derivative[static_cast<std::size_t>(a)] = st.mean;
    out.derivative_error[static_cast<std::size_t>(a)] = st.std_error;
  }
  if (n > 1) {
    for (int a = 0; a < k; ++a)
      for (int b = a; b < k; ++b) {
        for (std::size_t p = 0; p < n; ++p)
          col[p] = (d[p * k + a] - out.derivative[a]) * (d[p * k + b] - out.derivative[b]);
        cov(a, b) = cov(b, a) = pairwise_sum(col) / static_cast<double>(n - 1) / static_cast<double>(n);
      }
  }
  Eigen::VectorXd g(k);
  for (int a = 0; a < k; ++a) {
    out.value += out.derivative[a] * out.derivative[a];
    g(a) = 2.0 * out.derivative[a];
  }
  // Delta method.
  out.std_error = std::sqrt(std::max(0.0, g.dot(cov * g)));
  return out;
}

bool is_heisenberg(const LieModel& model) {
  static const LieModel ref = build_heisenberg();
  if (model.dim_h() != 2 || model.dim_v() != 1) return false;
  if (!model.frame_metric().topLeftCorner(2, 2).isApprox(Eigen::Matrix2d::Identity(), 1e-14)) return false;
  const auto& a = model.structure_constants();
  const auto& b = ref.structure_constants();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-14) return false;
  return true;
}

// ---- PDE -------------------------------------------------------------------

double PdeField::mass() const {
  return pairwise_sum(u) * grid.hx() * grid.hy() * grid.hz();
}

template <class F>
double PdeField::interpolate(const Eigen::Ref<const Eigen::VectorXd>& p, F node) const {
  const double fx = (p(0) + grid.half_xy) / grid.hx();
  const double fy = (p(1) + grid.half_xy) / grid.hy();
  const double fz = (p(2) + grid.half_z) / grid.hz();
  const int i0 = static_cast<int>(std::floor(fx)), j0 = static_cast<int>(std::floor(fy)),
            k0 = static_cast<int>(std::floor(fz));
  if (i0 < 0 || j0 < 0 || k0 < 0 || i0 >= grid.nx - 1 || j0 >= grid.ny - 1 || k0 >= grid.nz - 1) return 0.0;
  const double tx = fx - i0, ty = fy - j0, tz = fz - k0;
  double acc = 0.0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const double w = (di ? tx : 1 - tx) * (dj ? ty : 1 - ty) * (dk ? tz : 1 - tz);
        if (w != 0.0) acc += w * node(i0 + di, j0 + dj, k0 + dk);
      }
  return acc;
}

double PdeField::at(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  return interpolate(p, [this](int i, int j, int k) { return u[grid.index(i, j, k)]; });
}

namespace {
bool interior(const PdeGrid& g, int i, int j, int k) {
  return i > 0 && j > 0 && k > 0 && i < g.nx - 1 && j < g.ny - 1 && k < g.nz - 1;
}
}  // namespace

double PdeField::A1(int i, int j, int k) const {
  const auto& g = grid;
  const double ux = (u[g.index(i + 1, j, k)] - u[g.index(i - 1, j, k)]) / (2 * g.hx());
  const double uz = (u[g.index(i, j, k + 1)] - u[g.index(i, j, k - 1)]) / (2 * g.hz());
  return ux - 0.5 * g.y(j) * uz;
}

double PdeField::A2(int i, int j, int k) const {
  const auto& g = grid;
  const double uy = (u[g.index(i, j + 1, k)] - u[g.index(i, j - 1, k)]) / (2 * g.hy());
  const double uz = (u[g.index(i, j, k + 1)] - u[g.index(i, j, k - 1)]) / (2 * g.hz());
  return uy + 0.5 * g.x(i) * uz;
}

double PdeField::L(int i, int j, int k) const {
  const auto& g = grid;
  auto v = [&](int a, int b, int c) { return u[g.index(a, b, c)]; };
  const double x = g.x(i), y = g.y(j);
  const double c0 = v(i, j, k);
  const double uxx = (v(i + 1, j, k) - 2 * c0 + v(i - 1, j, k)) / (g.hx() * g.hx());
  const double uyy = (v(i, j + 1, k) - 2 * c0 + v(i, j - 1, k)) / (g.hy() * g.hy());
  const double uzz = (v(i, j, k + 1) - 2 * c0 + v(i, j, k - 1)) / (g.hz() * g.hz());
  const double uxz = (v(i + 1, j, k + 1) - v(i + 1, j, k - 1) - v(i - 1, j, k + 1) + v(i - 1, j, k - 1)) /
                     (4 * g.hx() * g.hz());
  const double uyz = (v(i, j + 1, k + 1) - v(i, j + 1, k - 1) - v(i, j - 1, k + 1) + v(i, j - 1, k - 1)) /
                     (4 * g.hy() * g.hz());
  return uxx + uyy + 0.25 * (x * x + y * y) * uzz - y * uxz + x * uyz;
}

double PdeField::gamma_h_at(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  return interpolate(p, [this](int i, int j, int k) { return interior(grid, i, j, k) ? gamma_h(i, j, k) : 0.0; });
}

double PdeField::L_at(const Eigen::Ref<const Eigen::VectorXd>& p) const {
  return interpolate(p, [this](int i, int j, int k) { return interior(grid, i, j, k) ? L(i, j, k) : 0.0; });
}

double PdeField::gamma_h_l1() const {
  std::vector<double> vals;
  vals.reserve(grid.size());
  for (int k = 1; k < grid.nz - 1; ++k)
    for (int j = 1; j < grid.ny - 1; ++j)
      for (int i = 1; i < grid.nx - 1; ++i) vals.push_back(gamma_h(i, j, k));
  return pairwise_sum(vals) * grid.hx() * grid.hy() * grid.hz();
}

void PdeField::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw HeatError("cannot write " + path);
  out << "x,y,z,u\n" << std::setprecision(10);
  for (int k = 0; k < grid.nz; ++k)
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i)
        out << grid.x(i) << ',' << grid.y(j) << ',' << grid.z(k) << ',' << u[grid.index(i, j, k)] << '\n';
}

PdeField sample_field(const TestFunction& f, const PdeGrid& grid) {
  if (grid.nx < 3 || grid.ny < 3 || grid.nz < 3) throw HeatError("pde: grid needs at least 3 nodes per axis");
  PdeField fld;
  fld.grid = grid;
  fld.u.assign(grid.size(), 0.0);
  Eigen::VectorXd p(3);
  for (int k = 1; k < grid.nz - 1; ++k)
    for (int j = 1; j < grid.ny - 1; ++j)
      for (int i = 1; i < grid.nx - 1; ++i) {
        p << grid.x(i), grid.y(j), grid.z(k);
        fld.u[grid.index(i, j, k)] = f(p);
      }
  return fld;
}

namespace {

double abs_mass(const PdeField& f) {
  double s = 0.0;
  for (double v : f.u) s += std::abs(v);
  return s * f.grid.hx() * f.grid.hy() * f.grid.hz();
}

// I - tau * (A1^2 + A2^2) / 2 on interior unknowns.
Eigen::SparseMatrix<double> implicit_matrix(const PdeGrid& g, double tau) {
  const int mx = g.nx - 2, my = g.ny - 2, mz = g.nz - 2;
  auto id = [&](int i, int j, int k) { return ((k - 1) * my + (j - 1)) * mx + (i - 1); };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mx) * my * mz * 15);
  const double hx2 = g.hx() * g.hx(), hy2 = g.hy() * g.hy(), hz2 = g.hz() * g.hz();
  const double cxz = 1.0 / (4 * g.hx() * g.hz()), cyz = 1.0 / (4 * g.hy() * g.hz());
  const double s = 0.5 * tau;
  for (int k = 1; k <= mz; ++k)
    for (int j = 1; j <= my; ++j)
      for (int i = 1; i <= mx; ++i) {
        const int row = id(i, j, k);
        const double x = g.x(i), y = g.y(j);
        const double a = 0.25 * (x * x + y * y);
        auto add = [&](int a2, int b2, int c2, double w) {
          if (interior(g, a2, b2, c2)) trip.emplace_back(row, id(a2, b2, c2), -s * w);
        };
        trip.emplace_back(row, row, 1.0 + s * (2 / hx2 + 2 / hy2 + 2 * a / hz2));
        add(i + 1, j, k, 1 / hx2);
        add(i - 1, j, k, 1 / hx2);
        add(i, j + 1, k, 1 / hy2);
        add(i, j - 1, k, 1 / hy2);
        add(i, j, k + 1, a / hz2);
        add(i, j, k - 1, a / hz2);
        add(i + 1, j, k + 1, -y * cxz);
        add(i + 1, j, k - 1, y * cxz);
        add(i - 1, j, k + 1, y * cxz);
        add(i - 1, j, k - 1, -y * cxz);
        add(i, j + 1, k + 1, x * cyz);
        add(i, j + 1, k - 1, -x * cyz);
        add(i, j - 1, k + 1, -x * cyz);
        add(i, j - 1, k - 1, x * cyz);
      }
  Eigen::SparseMatrix<double> m(mx * my * mz, mx * my * mz);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

void gather(const PdeField& f, Eigen::VectorXd& v) {
  const auto& g = f.grid;
  v.resize((g.nx - 2) * (g.ny - 2) * (g.nz - 2));
  Eigen::Index r = 0;
  for (int k = 1; k < g.nz - 1; ++k)
    for (int j = 1; j < g.ny - 1; ++j)
      for (int i = 1; i < g.nx - 1; ++i) v(r++) = f.u[g.index(i, j, k)];
}

void scatter(const Eigen::VectorXd& v, PdeField& f) {
  const auto& g = f.grid;
  Eigen::Index r = 0;
  for (int k = 1; k < g.nz - 1; ++k)
    for (int j = 1; j < g.ny - 1; ++j)
      for (int i = 1; i < g.nx - 1; ++i) f.u[g.index(i, j, k)] = v(r++);
}

}  // namespace

std::vector<PdeField> pde_evolve(const LieModel& model, PdeField initial, const std::vector<double>& times,
                                 const PdeSettings& s) {
  if (!is_heisenberg(model)) throw HeatError("pde: only the Heisenberg model is supported, got " + model.name());
  if (!(s.dt > 0.0)) throw HeatError("pde: dt must be positive");
  if (!std::is_sorted(times.begin(), times.end()) || (!times.empty() && times.front() < 0.0))
    throw HeatError("pde: times must be sorted and nonnegative");
  const double m0 = initial.mass();
  const double abs0 = abs_mass(initial);
  initial.initial_mass = m0;
  std::vector<PdeField> out;
  PdeField cur = std::move(initial);
  Eigen::VectorXd b, x;
  gather(cur, x);
  double current_tau = -1.0;
  Eigen::SparseMatrix<double> mat;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-10);
  for (double target : times) {
    const double span = target - cur.t;
    if (span > 0.0) {
      const int steps = static_cast<int>(std::ceil(span / s.dt - 1e-9));
      const double tau = span / steps;
      if (tau != current_tau) {
        mat = implicit_matrix(cur.grid, tau);
        cg.compute(mat);
        current_tau = tau;
      }
      for (int n = 0; n < steps; ++n) {
        b = x;
        x = cg.solveWithGuess(b, x);
        if (cg.info() != Eigen::Success) throw HeatError("pde: linear solve did not converge");
      }
      scatter(x, cur);
      cur.t = target;
    }
    cur.flux = abs0 > 0.0 ? std::abs(m0 - cur.mass()) / abs0 : 0.0;
    if (cur.flux > s.max_flux)
      throw HeatError("pde: boundary flux " + std::to_string(cur.flux) + " exceeds tolerance; enlarge the box");
    out.push_back(cur);
  }
  return out;
}

PdeField pde_semigroup(const LieModel& model, const TestFunction& f, double t, const PdeSettings& s) {
  return pde_evolve(model, sample_field(f, s.grid), {t}, s).front();
}

namespace {
PdeGrid coarser(const PdeGrid& g) {
  PdeGrid c = g;
  c.nx = (g.nx - 1) * 3 / 4 + 1;
  c.ny = (g.ny - 1) * 3 / 4 + 1;
  c.nz = (g.nz - 1) * 3 / 4 + 1;
  return c;
}
}  // namespace

SemigroupEstimate pde_value(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                            double t, const PdeSettings& s) {
  const double fine = pde_semigroup(model, f, t, s).at(x);
  PdeSettings sc = s;
  sc.grid = coarser(s.grid);
  const double coarse = pde_semigroup(model, f, t, sc).at(x);
  PdeSettings st = s;
  st.dt = 2.0 * s.dt;
  const double slow = pde_semigroup(model, f, t, st).at(x);
  SemigroupEstimate e;
  e.value = fine;
  e.std_error = std::abs(fine - coarse) + std::abs(fine - slow);
  e.t = t;
  e.x = x;
  e.method = "pde";
  e.settings = s;
  return e;
}

namespace {
PdeField normalized_bump(const PdeGrid& grid, const Eigen::Ref<const Eigen::VectorXd>& y, double width) {
  auto fld = sample_field(TestFunction::gaussian_bump(y, width), grid);
  const double m = fld.mass();
  if (!(m > 0.0)) throw HeatError("heat kernel: bump does not meet the grid");
  for (double& v : fld.u) v /= m;
  return fld;
}
}  // namespace

std::vector<std::vector<SemigroupEstimate>> heat_kernel_series(const LieModel& model,
                                                               const std::vector<Eigen::VectorXd>& xs,
                                                               const Eigen::Ref<const Eigen::VectorXd>& y,
                                                               const std::vector<double>& times,
                                                               const HeatKernelSettings& s) {
  if (!(s.bump_width > 0.0)) throw HeatError("heat kernel: bump width must be positive");
  const auto fields = pde_evolve(model, normalized_bump(s.pde.grid, y, s.bump_width), times, s.pde);
  std::vector<PdeField> wide, coarse;
  if (s.estimate_error) {
    wide = pde_evolve(model, normalized_bump(s.pde.grid, y, s.bump_width * std::sqrt(2.0)), times, s.pde);
    PdeSettings sc = s.pde;
    sc.grid = coarser(s.pde.grid);
    coarse = pde_evolve(model, normalized_bump(sc.grid, y, s.bump_width), times, sc);
  }
  nlohmann::json settings = s.pde;
  settings["bump_width"] = s.bump_width;
  std::vector<std::vector<SemigroupEstimate>> out;
  for (std::size_t j = 0; j < fields.size(); ++j) {
    std::vector<SemigroupEstimate> row;
    for (const auto& x : xs) {
      SemigroupEstimate e;
      e.value = fields[j].at(x);
      e.std_error = s.estimate_error ? std::abs(e.value - wide[j].at(x)) + std::abs(e.value - coarse[j].at(x)) : 0.0;
      e.t = times[j];
      e.x = x;
      e.method = "pde";
      e.settings = settings;
      row.push_back(std::move(e));
    }
    out.push_back(std::move(row));
  }
  return out;
}

SemigroupEstimate heat_kernel(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& y, double t, const HeatKernelSettings& s) {
  return heat_kernel_series(model, {Eigen::VectorXd(x)}, y, {t}, s).front().front();
}

// ---- distance --------------------------------------------------------------

namespace {

// Horizontal part in orthonormal coordinates of a relative element.
Eigen::VectorXd horizontal_on(const LieModel& m, const Eigen::VectorXd& u) {
  const Eigen::MatrixXd th = m.orthonormalizer().topLeftCorner(m.dim_h(), m.dim_h());
  // u_H = T_H^T a  =>  a = T_H^{-T} u_H
  return th.transpose().fullPivLu().solve(u.head(m.dim_h()));
}

double heisenberg_length(double r, double z) {
  z = std::abs(z);
  if (z == 0.0) return r;
  if (r == 0.0) return std::sqrt(4.0 * std::numbers::pi * z);
  const double target = z / (r * r);
  auto mu = [target](double th) {
    if (th < 1e-4) return th / 12.0 + th * th * th / 720.0 - target;
    const double sh = std::sin(0.5 * th);
    return (th - std::sin(th)) / (8.0 * sh * sh) - target;
  };
  const double two_pi = 2.0 * std::numbers::pi;
  double gap = 1e-1;
  while (mu(two_pi - gap) < 0.0) {
    gap *= 0.5;
    if (gap < 1e-14) throw std::runtime_error("bracket");
  }
  boost::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(mu, 0.0, two_pi - gap,
                                                        boost::math::tools::eps_tolerance<double>(50), iters);
  if (iters >= 200) throw std::runtime_error("root");
  const double th = 0.5 * (a + b);
  if (th < 1e-8) return r;
  return r * th / (2.0 * std::sin(0.5 * th));
}

// Admissible curve for step-2 nilpotent models: horizontal segment, then square loops.
double loop_upper_bound(const LieModel& m, const Eigen::VectorXd& rel) {
  if (m.nilpotency_step() != 2 && m.nilpotency_step() != 1) return kInfinity;
  const int n = m.dim_h();
  const Eigen::MatrixXd T = m.orthonormalizer();
  double len = horizontal_on(m, rel).norm();
  const Eigen::VectorXd w = rel.tail(m.dim_v());
  if (w.norm() == 0.0) return len;
  std::vector<std::pair<int, int>> pairs;
  Eigen::MatrixXd B(m.dim_v(), n * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      B.col(static_cast<Eigen::Index>(pairs.size())) =
          m.bracket(T.row(i).transpose(), T.row(j).transpose()).tail(m.dim_v());
      pairs.emplace_back(i, j);
    }
  const Eigen::VectorXd coef = B.completeOrthogonalDecomposition().solve(w);
  if ((B * coef - w).norm() > 1e-9 * (1.0 + w.norm())) return kInfinity;
  for (Eigen::Index c = 0; c < coef.size(); ++c) len += 4.0 * std::sqrt(std::abs(coef(c)));
  return len;
}

double quasi_norm(const LieModel& m, const Eigen::VectorXd& rel) {
  double q = horizontal_on(m, rel).norm();
  for (int k = m.dim_h(); k < m.dim(); ++k) q += std::sqrt(std::abs(rel(k)));
  return q;
}

struct KeyHash {
  std::size_t operator()(const std::vector<long long>& k) const {
    std::size_t h = 0;
    for (long long v : k) h = h * 0x9e3779b97f4a7c15ULL + static_cast<std::size_t>(v);
    return h;
  }
};

}  // namespace

DistanceEstimate cc_distance(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& y, const GraphSettings& gs) {
  const auto law = make_group_law(model);
  const Eigen::VectorXd rel =
      law->coordinates(law->multiply(law->from_coordinates(-x), law->from_coordinates(y)));
  DistanceEstimate d;
  d.lower = horizontal_on(model, rel).norm();
  d.upper = loop_upper_bound(model, rel);
  if (is_heisenberg(model)) {
    const double r = rel.head(2).norm();
    d.upper = std::min(d.upper, r + std::sqrt(4.0 * std::numbers::pi * std::abs(rel(2))));
    try {
      d.value = std::clamp(heisenberg_length(r, rel(2)), d.lower, d.upper);
      d.method = "geodesic-shooting";
      return d;
    } catch (const std::runtime_error&) {
      // fall through to the graph search
    }
  }
  // Breadth-first search over words in exp(+-eps A_i); all edges have length eps.
  const double eps = gs.epsilon;
  d.epsilon = eps;
  d.method = "graph";
  const Eigen::MatrixXd T = model.orthonormalizer();
  const Eigen::VectorXd target = law->from_coordinates(rel);
  auto key = [&](const Eigen::VectorXd& state) {
    std::vector<long long> k(static_cast<std::size_t>(state.size()));
    for (Eigen::Index i = 0; i < state.size(); ++i) k[static_cast<std::size_t>(i)] = std::llround(state(i) * 1e8);
    return k;
  };
  std::unordered_map<std::vector<long long>, int, KeyHash> seen;
  std::deque<std::pair<Eigen::VectorXd, int>> queue;
  queue.emplace_back(law->identity(), 0);
  seen.emplace(key(queue.front().first), 0);
  double best = kInfinity;
  while (!queue.empty() && seen.size() < gs.max_nodes) {
    auto [state, depth] = std::move(queue.front());
    queue.pop_front();
    if (depth * eps >= best) break;
    const Eigen::VectorXd left = law->coordinates(law->multiply(law->from_coordinates(-law->coordinates(state)),
                                                               target));
    const double q = quasi_norm(model, left);
    if (q <= eps) best = std::min(best, depth * eps + q);
    for (int i = 0; i < model.dim_h(); ++i)
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd next = state;
        law->right_multiply_exp(next, sgn * eps * T.row(i).transpose());
        if (seen.emplace(key(next), depth + 1).second) queue.emplace_back(std::move(next), depth + 1);
      }
  }
  if (std::isfinite(best)) {
    d.value = std::clamp(best, d.lower, std::max(d.lower, d.upper));
  } else {
    d.method = "graph-unresolved";
    d.value = std::isfinite(d.upper) ? d.upper : d.lower;
  }
  return d;
}

void to_json(nlohmann::json& j, const McSettings& s) {
  j = nlohmann::json{{"paths", s.paths}, {"steps", s.steps}, {"seed", s.seed}, {"delta", s.delta}};
}

void to_json(nlohmann::json& j, const PdeSettings& s) {
  j = nlohmann::json{{"grid", {s.grid.nx, s.grid.ny, s.grid.nz}},
                     {"half_xy", s.grid.half_xy},
                     {"half_z", s.grid.half_z},
                     {"dt", s.dt}};
}

void to_json(nlohmann::json& j, const SemigroupEstimate& e) {
  j = nlohmann::json{{"x", std::vector<double>(e.x.data(), e.x.data() + e.x.size())},
                     {"t", e.t},
                     {"method", e.method},
                     {"value", e.value},
                     {"error", e.std_error},
                     {"seed", e.seed},
                     {"settings", e.settings}};
}

void to_json(nlohmann::json& j, const DistanceEstimate& e) {
  j = nlohmann::json{{"value", e.value}, {"lower", e.lower}, {"upper", e.upper}, {"method", e.method}};
  if (e.epsilon > 0.0) j["epsilon"] = e.epsilon;
}

}  // namespace srlab
