#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "srlab/geometry_invariants.hpp"
#include "srlab/heat_engine.hpp"

namespace srlab {

/// Forward-mode dual number; schedules are written once and differentiated exactly.
struct Dual {
  double v = 0.0;
  double d = 0.0;
  Dual() = default;
  Dual(double value, double deriv = 0.0) : v(value), d(deriv) {}
};
inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
Dual exp(Dual a);
Dual pow(Dual a, double p);
/// 1 - exp(-x)
Dual one_minus_exp_neg(Dual x);
/// exp(-x) - 1 + x, accurate for small x.
Dual exp_neg_tail(Dual x);

enum class ScheduleKind { a_lambda_c, a_b_lambda };

/// Functions a, ell, b on [0, T] and a constant C for one of the two submartingale lemmas.
struct Schedule {
  std::string name;
  /// Anchor of the construction, e.g. "GradBound(b)".
  std::string provenance;
  ScheduleKind kind = ScheduleKind::a_lambda_c;
  double T = 1.0;
  double C = 0.0;
  std::function<Dual(Dual)> a;
  std::function<Dual(Dual)> ell;
  /// Zero for a_lambda_c schedules.
  std::function<Dual(Dual)> b;
  /// Require d/dt (a / ell) > 0 on the grid.
  bool check_monotone_ratio = false;

  struct Samples {
    std::vector<double> t, a, ell, b;
  };
  /// Uniform grid of `points` nodes over [0, T].
  Samples sample(int points) const;
};

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct CheckResult {
  std::string check_id;
  std::string anchor;
  std::string model;
  std::string inputs_digest;
  double margin = 0.0;
  double tolerance = 0.0;
  /// Statistical or discretization error behind the margin (0 for exact checks).
  double error = 0.0;
  Verdict verdict = Verdict::fail;
  double runtime = 0.0;
  nlohmann::json detail = nlohmann::json::object();
};

/// pass iff margin >= -tolerance; otherwise inconclusive when `error` exceeds |margin|, else fail.
Verdict decide(double margin, double tolerance, double error = 0.0);
CheckResult make_result(std::string id, std::string anchor, std::string model, double margin, double tolerance,
                        double error = 0.0);

struct ScheduleGrid {
  int points = 2048;
  /// Acceptance threshold on the margins.
  double tolerance = 1e-8;
};

/// Minimum over the interior grid of both conditions, at `points` and 2 * `points`.
CheckResult check_schedule_admissible(const Schedule& s, const CDConstants& k, const ScheduleGrid& g = {});

struct ScheduleSet {
  std::vector<Schedule> schedules;
  /// Constructions whose hypotheses fail, with the reason.
  std::vector<std::pair<std::string, std::string>> omitted;
};

/// GradBound (a)-(d), the entropy schedule and the Li-Yau family over alpha.
ScheduleSet builtin_schedules(const CDConstants& k, double T, double ell_a = 1.0, double ell_d = 1.0);

/// Li-Yau family parameters: alpha values and the optimal one.
std::vector<double> li_yau_alphas(double rho2);

struct SpectralResult {
  double lambda1 = 0.0;
  /// lambda1 with j_max + 1.
  double lambda1_next = 0.0;
  bool stable = false;
  std::vector<double> eigenvalues;
  CheckResult poincare;
  CheckResult gap_bound;
};

/// Eigenvalues of Delta_h on su2_pair(rho) over irreducible pairs (j1, j2), j_i <= j_max.
std::vector<double> su2_pair_horizontal_spectrum(double rho, double j_max);
SpectralResult spectral_gap_su2_pair(double rho, double j_max);

struct GradientSettings {
  McSettings mc;
  double ell = 1.0;
};

/// One (f, x, t) case of GradBound; variant in {'a','b','c','d'}.
CheckResult check_gradient_bounds(const LieModel& model, const CDConstants& k, const TestFunction& f,
                                  const Eigen::Ref<const Eigen::VectorXd>& x, double t, char variant,
                                  const GradientSettings& s);
/// sqrt Gamma^v(P_t f)(x) <= P_t sqrt Gamma^v(f)(x).
CheckResult check_vertical_gradient(const LieModel& model, const TestFunction& f,
                                    const Eigen::Ref<const Eigen::VectorXd>& x, double t, const McSettings& s);

struct LiYauSettings {
  PdeSettings pde;
  double bump_width = 0.5;
  double epsilon = 1e-3;
  std::vector<double> times{0.3, 0.5, 1.0};
  std::vector<double> betas{1.1, 1.3, 1.5, 1.7, 1.9};
  /// LY2 tolerance as a fraction of N / t.
  double relative_tolerance = 0.05;
  /// Sampling window |x|, |y| <= window_xy, |z| <= window_z.
  double window_xy = 2.0;
  double window_z = 1.5;
};

std::vector<CheckResult> check_entropy_liyau(const LieModel& model, const CDConstants& k, const LiYauSettings& s);

struct HarnackSettings {
  PdeSettings pde;
  double bump_width = 0.7;
  int samples = 20;
  double t0 = 0.4;
  double t1 = 0.8;
  double max_distance = 1.0;
  std::uint64_t seed = 1;
  double relative_tolerance = 0.05;
  HeatKernelSettings kernel;
};

std::vector<CheckResult> check_harnack(const LieModel& model, const CDConstants& k, const HarnackSettings& s);

/// p_t(0,0) t^{N/2} non-increasing, p_t(0,0) <= t^{-N/2} p_1(0,0), and p_t(0,0) decreasing.
std::vector<CheckResult> check_heat_kernel_decay(const LieModel& model, const CDConstants& k,
                                                 const std::vector<double>& times, const HeatKernelSettings& s);

struct PoincareSettings {
  PdeSettings pde;
  std::vector<double> times{0.0, 0.25, 0.5, 1.0};
  char variant = 'a';
  double relative_tolerance = 1e-3;
};

CheckResult check_poincare_decay(const LieModel& model, const CDConstants& k, const TestFunction& f,
                                 const PoincareSettings& s);

/// Suite configuration; see README for the schema.
struct SuiteConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  nlohmann::json checks = nlohmann::json::array();
  std::string json_path;
  std::string csv_dir;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SuiteConfig parse_config(const nlohmann::json& j);
SuiteConfig load_config(const std::string& path);
/// Configuration running every acceptance check.
nlohmann::json default_config();

/// Constants used by the suite: c = infinity when the coupling terms vanish, else the best Poincare rate.
CDConstants suite_constants(const LieModel& m);

/// Known check ids.
std::vector<std::string> check_ids();

/// One configured check; `seed` is the per-check stream seed.
std::vector<CheckResult> run_check(const nlohmann::json& check, std::uint64_t seed);

struct Report {
  std::vector<CheckResult> results;
  int passed = 0;
  int failed = 0;
  int inconclusive = 0;
  int exit_code() const { return failed > 0 ? 1 : 0; }
};

/// Runs the configured checks over `jobs` workers and writes the outputs named in the config.
Report run_suite(const SuiteConfig& config);

/// JSON array of results (runtime omitted so reruns are byte-identical).
nlohmann::json report_json(const Report& r);
void write_csv(const std::vector<CheckResult>& results, const std::string& path);

void to_json(nlohmann::json& j, const CheckResult& r);

}  // namespace srlab
