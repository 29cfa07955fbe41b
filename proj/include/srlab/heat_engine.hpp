#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "srlab/gamma_calculus.hpp"
#include "srlab/model_zoo.hpp"
#include "srlab/test_function.hpp"

namespace srlab {

class HeatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Group multiplication on a model's simply connected group.
///
/// A state is an opaque vector representing a group element: chart coordinates
/// for nilpotent models, a pair of rotation matrices for su2_pair.
class GroupLaw {
 public:
  virtual ~GroupLaw() = default;
  virtual Eigen::VectorXd identity() const = 0;
  virtual Eigen::VectorXd from_coordinates(const Eigen::Ref<const Eigen::VectorXd>& u) const = 0;
  virtual Eigen::VectorXd coordinates(const Eigen::Ref<const Eigen::VectorXd>& state) const = 0;
  virtual Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& a,
                                   const Eigen::Ref<const Eigen::VectorXd>& b) const = 0;
  /// state <- state * exp(v), v in declared-frame coordinates.
  virtual void right_multiply_exp(Eigen::Ref<Eigen::VectorXd> state, const Eigen::Ref<const Eigen::VectorXd>& v) const = 0;
  Eigen::VectorXd inverse_coordinates(const Eigen::Ref<const Eigen::VectorXd>& u) const { return -u; }
};

/// Nilpotent models of step <= 4 (exact BCH) and su2_pair.
std::unique_ptr<GroupLaw> make_group_law(const LieModel& model);

struct McSettings {
  int paths = 10000;
  int steps = 100;
  std::uint64_t seed = 1;
  /// OpenMP threads; results do not depend on it.
  int jobs = 1;
  /// Finite-difference step of mc_gradient.
  double delta = 1e-3;
};

struct SemigroupEstimate {
  double value = 0.0;
  /// Standard error (mc) or discretization-error estimate (pde); always >= 0.
  double std_error = 0.0;
  double t = 0.0;
  Eigen::VectorXd x;
  std::string method;
  nlohmann::json settings;
  std::uint64_t seed = 0;
};

/// Mean and standard error with pairwise summation.
struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
};
SampleStats sample_stats(const std::vector<double>& values);

/// Runs `paths` increments W_t (from the identity) and calls visit(path, state)
/// for each endpoint. visit may run concurrently for distinct paths.
void simulate_increments(const LieModel& model, double t, const McSettings& s,
                         const std::function<void(std::size_t, const Eigen::VectorXd&)>& visit);

/// E[g(x W_t)] per path value; g receives chart coordinates.
std::vector<double> mc_path_values(const LieModel& model, const std::function<double(const Eigen::VectorXd&)>& g,
                                   const Eigen::Ref<const Eigen::VectorXd>& x, double t, const McSettings& s);

SemigroupEstimate mc_semigroup(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                               double t, const McSettings& s);
SemigroupEstimate mc_expectation(const LieModel& model, const std::function<double(const Eigen::VectorXd&)>& g,
                                 const Eigen::Ref<const Eigen::VectorXd>& x, double t, const McSettings& s);

/// Gamma^which(P_t f)(x) from central differences along the orthonormal frame,
/// with the same increments across the stencil.
struct GradientEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Frame derivatives A_a P_t f(x) and their standard errors.
  std::vector<double> derivative;
  std::vector<double> derivative_error;
};
GradientEstimate mc_gradient(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                             double t, Which which, const McSettings& s);

/// True when the model's structure constants and metric are those of the Heisenberg model.
bool is_heisenberg(const LieModel& model);

struct PdeGrid {
  int nx = 51;
  int ny = 51;
  int nz = 57;
  double half_xy = 5.0;
  double half_z = 4.0;

  double hx() const { return 2.0 * half_xy / (nx - 1); }
  double hy() const { return 2.0 * half_xy / (ny - 1); }
  double hz() const { return 2.0 * half_z / (nz - 1); }
  double x(int i) const { return -half_xy + i * hx(); }
  double y(int j) const { return -half_xy + j * hy(); }
  double z(int k) const { return -half_z + k * hz(); }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
};

struct PdeSettings {
  PdeGrid grid;
  double dt = 0.01;
  /// Relative mass loss through the boundary above which the solve is rejected.
  double max_flux = 1e-3;
};

/// Grid function on the Heisenberg box with finite-difference evaluation.
struct PdeField {
  PdeGrid grid;
  double t = 0.0;
  std::vector<double> u;
  double initial_mass = 0.0;
  /// Relative mass lost through the boundary so far.
  double flux = 0.0;

  double mass() const;
  /// Trilinear interpolation; zero outside the box.
  double at(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  /// Centered differences at interior nodes (1 <= i < n-1).
  double A1(int i, int j, int k) const;
  double A2(int i, int j, int k) const;
  double L(int i, int j, int k) const;
  double gamma_h(int i, int j, int k) const { return A1(i, j, k) * A1(i, j, k) + A2(i, j, k) * A2(i, j, k); }
  /// Interpolated Gamma^h and L at an arbitrary interior point (trilinear over node values).
  double gamma_h_at(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  double L_at(const Eigen::Ref<const Eigen::VectorXd>& p) const;
  /// Riemann sum of Gamma^h(u) over interior nodes.
  double gamma_h_l1() const;
  /// Rows x,y,z,u.
  void write_csv(const std::string& path) const;

 private:
  template <class F>
  double interpolate(const Eigen::Ref<const Eigen::VectorXd>& p, F node) const;
};

PdeField sample_field(const TestFunction& f, const PdeGrid& grid);

/// Implicit Euler for du/dt = (A1^2 + A2^2) u / 2 with zero Dirichlet data.
/// Returns the fields at the requested (sorted, nonnegative) times.
std::vector<PdeField> pde_evolve(const LieModel& model, PdeField initial, const std::vector<double>& times,
                                 const PdeSettings& s);
PdeField pde_semigroup(const LieModel& model, const TestFunction& f, double t, const PdeSettings& s);

/// PDE estimate of P_t f(x); the error adds the changes under a 3/4 coarser grid and a doubled dt.
SemigroupEstimate pde_value(const LieModel& model, const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x,
                            double t, const PdeSettings& s);

struct HeatKernelSettings {
  PdeSettings pde;
  double bump_width = 0.2;
  /// Error = change under width * sqrt(2) plus change under a 3/4 coarser grid.
  /// The value is the kernel smoothed by the bump, so small t needs a small width.
  bool estimate_error = true;
};

/// p_t(x_i, y) for each x_i and t_j: result[j][i].
std::vector<std::vector<SemigroupEstimate>> heat_kernel_series(const LieModel& model,
                                                               const std::vector<Eigen::VectorXd>& xs,
                                                               const Eigen::Ref<const Eigen::VectorXd>& y,
                                                               const std::vector<double>& times,
                                                               const HeatKernelSettings& s);
SemigroupEstimate heat_kernel(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& y, double t, const HeatKernelSettings& s);

struct DistanceEstimate {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::string method;
  /// Graph step; 0 for geodesic shooting.
  double epsilon = 0.0;
};

struct GraphSettings {
  double epsilon = 0.1;
  std::size_t max_nodes = 400000;
};

/// Carnot-Caratheodory distance: exact on Heisenberg, graph search otherwise.
DistanceEstimate cc_distance(const LieModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& y, const GraphSettings& g = {});

void to_json(nlohmann::json& j, const SemigroupEstimate& e);
void to_json(nlohmann::json& j, const DistanceEstimate& e);
void to_json(nlohmann::json& j, const McSettings& s);
void to_json(nlohmann::json& j, const PdeSettings& s);

}  // namespace srlab
