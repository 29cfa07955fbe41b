#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "srlab/gamma_calculus.hpp"
#include "srlab/rng.hpp"
#include "srlab/verify_suite.hpp"

namespace srlab {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Keys accepted by each check in addition to "id", "model" and "seed".
const std::map<std::string, std::set<std::string>>& check_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"cd_star", {"functions", "points", "degree", "ell_points", "ell_range", "window", "tolerance", "witness"}},
      {"constants", {"expected", "tolerance", "N_tolerance"}},
      {"cond_b", {"samples", "degree", "window", "expect", "threshold", "fraction", "normalize"}},
      {"commutation", {"functions", "degree", "window", "tolerance"}},
      {"ricci_compare", {"directions", "tolerance"}},
      {"double_gamma", {"functions", "degree", "window", "ell_points", "c", "tolerance"}},
      {"validate", {}},
      {"semigroup", {"t", "paths", "steps", "jobs"}},
      {"gradient_bounds", {"cases", "variants", "vertical", "paths", "steps", "jobs", "ell", "t_range", "window"}},
      {"li_yau", {"times", "betas", "epsilon", "bump_width", "relative_tolerance", "dt"}},
      {"harnack", {"samples", "t0", "t1", "max_distance", "bump_width", "relative_tolerance", "kernel_width"}},
      {"heat_kernel_decay", {"times", "bump_width", "estimate_error"}},
      {"poincare", {"times", "variant", "bump_width", "relative_tolerance"}},
      {"spectral_gap", {"rho", "j_max"}},
      {"schedule", {"models", "T", "points", "tolerance", "ell_a", "ell_d"}},
  };
  return keys;
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Eigen::VectorXd uniform_point(SplitMix64& rng, int d, double half) {
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = half * (2.0 * rng.uniform() - 1.0);
  return x;
}

// Sampling half-width; compact models stay inside the convergence region of the chart series.
double default_window(const json& c, const LieModel& m) {
  return c.value("window", m.nilpotency_step() > 0 ? 1.0 : 0.3);
}

double coefficient_norm(const TestFunction& f) {
  double s = 0.0;
  for (const auto& t : f.terms) s += t.coefficient * t.coefficient;
  return s > 0.0 ? std::sqrt(s) : 1.0;
}

bool metric_parallel(const LieModel& m) {
  const auto v = validate(m);
  return v.metric_preserving() && v.vertical_parallel();
}

}  // namespace

CDConstants suite_constants(const LieModel& m) {
  const auto g = geometry_report(m);
  const bool uncoupled = g.M_HV + g.M_grad_v <= 1e-12;
  return assemble_constants(g, std::nullopt, uncoupled ? Objective::max_rho2 : Objective::max_alpha);
}

namespace {

// ---- pointwise checks on jets ---------------------------------------------

std::vector<CheckResult> run_cd_star(const json& c, const LieModel& raw, std::uint64_t seed) {
  const LieModel model = normalize_vertical(raw);
  const int nfun = c.value("functions", 10000), npts = c.value("points", 20), degree = c.value("degree", 4);
  const double window = default_window(c, raw), tol = c.value("tolerance", 1e-9);
  const auto range = c.value("ell_range", std::vector<double>{-2.0, 2.0});
  if (range.size() != 2) throw ConfigError("cd_star: ell_range must have two entries");
  const auto ells = log_grid(range[0], range[1], c.value("ell_points", 9));
  const DeclaredConstants k = raw.declared() ? *raw.declared() : suite_constants(raw).as_declared();

  std::vector<TestFunction> fs;
  fs.reserve(static_cast<std::size_t>(nfun));
  for (int i = 0; i < nfun; ++i)
    fs.push_back(TestFunction::random_polynomial(model.dim(), degree, stream_seed(seed, static_cast<std::uint64_t>(i))));
  SplitMix64 rng(stream_seed(seed, 0xC0FFEEULL));
  double worst = kInf, worst_abs = 0.0;
  long evaluations = 0;
  for (int p = 0; p < npts; ++p) {
    const Eigen::VectorXd x = uniform_point(rng, model.dim(), window);
    const GammaEvaluator ev(model, x);
    for (const auto& f : fs) {
      const auto rep = gamma_report(ev, lift(f, x, ev.order()), ells);
      for (double ell : ells) {
        const auto r = cd_residual(rep, ell, k);
        worst = std::min(worst, r.value() / r.scale());
        worst_abs = std::min(worst_abs, r.value());
        ++evaluations;
      }
    }
  }
  std::vector<CheckResult> out;
  auto r = make_result("cd_star", "CDstar", raw.name(), worst, tol);
  r.detail = {{"evaluations", evaluations},
              {"min_scaled_residual", worst},
              {"min_residual", worst_abs},
              {"constants", {{"n", k.n}, {"rho1", k.rho1}, {"rho20", k.rho20}, {"rho21", k.rho21}}}};
  out.push_back(std::move(r));

  if (c.value("witness", raw.dim() == 3)) {
    // f = last coordinate at the origin attains equality.
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.dim());
    const auto f = TestFunction::coordinate(model.dim(), model.dim() - 1);
    const GammaEvaluator ev(model, x0);
    const auto rep = gamma_report(ev, lift(f, x0, ev.order()), ells);
    double worst_w = 0.0;
    json per_ell = json::array();
    for (double ell : ells) {
      const auto res = cd_residual(rep, ell, k);
      worst_w = std::max(worst_w, std::abs(res.value()));
      per_ell.push_back({{"ell", ell}, {"residual", res.value()}});
    }
    auto w = make_result("cd_star", "CDstar", raw.name(), -worst_w, 1e-12);
    w.detail = {{"witness", "last coordinate at the origin"}, {"per_ell", per_ell}};
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<CheckResult> run_constants(const json& c, const LieModel& model) {
  const auto g = geometry_report(model);
  const auto k = suite_constants(model);
  const double tol = c.value("tolerance", 1e-9);
  std::vector<CheckResult> out;

  json expected = c.value("expected", json::object());
  if (expected.empty() && model.declared()) {
    const auto& d = *model.declared();
    expected = {{"rho1", d.rho1}, {"rho20", d.rho20}, {"rho21", d.rho21}};
  }
  if (!expected.is_object()) throw ConfigError("constants: expected must be an object");
  const std::map<std::string, double> got = {{"rho1", k.rho1}, {"rho20", k.rho20}, {"rho21", k.rho21},
                                             {"N", k.N},       {"D", k.D},         {"alpha", k.alpha}};
  double worst = 0.0, worst_nd = 0.0;
  bool any_rho = false, any_nd = false;
  json diffs = json::object();
  for (const auto& [key, val] : expected.items()) {
    const auto it = got.find(key);
    if (it == got.end()) throw ConfigError("constants: unknown expected key " + key);
    const double d = std::abs(it->second - val.get<double>());
    diffs[key] = {{"computed", it->second}, {"expected", val}, {"difference", d}};
    if (key == "N" || key == "D") {
      any_nd = true;
      // D is checked to the rho tolerance; N against a rounded reference value.
      worst_nd = std::max(worst_nd, key == "N" ? d / c.value("N_tolerance", 5e-4) * tol : d);
    } else {
      any_rho = true;
      worst = std::max(worst, d);
    }
  }
  if (any_rho) {
    auto r = make_result("constants", "rhoSR2", model.name(), -worst, tol);
    r.detail = {{"comparison", diffs}, {"geometry", g}, {"constants", k}};
    out.push_back(std::move(r));
  }
  if (any_nd) {
    auto r = make_result("constants", "Ndim", model.name(), -worst_nd, tol);
    r.detail = {{"comparison", diffs}, {"N_tolerance", c.value("N_tolerance", 5e-4)}};
    out.push_back(std::move(r));
  }
  if (metric_parallel(model)) {
    const double m = std::max(std::abs(g.M_HV), std::abs(g.M_grad_v));
    auto r = make_result("constants", "rhoSR", model.name(), -m, tol);
    r.detail = {{"M_HV", g.M_HV}, {"M_grad_v", g.M_grad_v}};
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CheckResult> run_cond_b(const json& c, const LieModel& model, std::uint64_t seed) {
  const int n = c.value("samples", 1000), degree = c.value("degree", 4);
  const double window = default_window(c, model);
  const std::string expect = c.value("expect", metric_parallel(model) ? "zero" : "nonzero");
  if (expect != "zero" && expect != "nonzero") throw ConfigError("cond_b: expect must be zero or nonzero");
  const bool normalize = c.value("normalize", true);
  SplitMix64 rng(stream_seed(seed, 0xB0B0ULL));
  double worst = 0.0;
  int above = 0;
  const double threshold = c.value("threshold", 1e-6);
  for (int i = 0; i < n; ++i) {
    auto f = TestFunction::random_polynomial(model.dim(), degree, stream_seed(seed, static_cast<std::uint64_t>(i)));
    // The residual is cubic in f, so an absolute threshold needs a fixed normalization.
    if (normalize) f = f.scaled(1.0 / coefficient_norm(f));
    const Eigen::VectorXd x = uniform_point(rng, model.dim(), window);
    const double r = condB_residual(model, f, x);
    worst = std::max(worst, r);
    if (r > threshold) ++above;
  }
  const double frac = n > 0 ? static_cast<double>(above) / n : 0.0;
  CheckResult r = expect == "zero" ? make_result("cond_b", "CondB", model.name(), -worst, 1e-12)
                                   : make_result("cond_b", "CondB", model.name(), frac - c.value("fraction", 0.1), 0.0);
  r.detail = {{"expect", expect}, {"samples", n}, {"unit_coefficient_norm", normalize}, {"max_residual", worst}, {"fraction_above_threshold", frac},
              {"threshold", threshold}};
  return {r};
}

std::vector<CheckResult> run_commutation(const json& c, const LieModel& model, std::uint64_t seed) {
  const int n = c.value("functions", 1000), degree = c.value("degree", 4);
  const double window = default_window(c, model), tol = c.value("tolerance", 1e-9);
  SplitMix64 rng(stream_seed(seed, 0xCA11ULL));
  double worst = 0.0, worst_abs = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto f = TestFunction::random_polynomial(model.dim(), degree, stream_seed(seed, static_cast<std::uint64_t>(i)));
    const Eigen::VectorXd x = uniform_point(rng, model.dim(), window);
    const GammaEvaluator ev(model, x);
    const auto r = commutation_residual(ev, lift(f, x, ev.order()));
    worst = std::max(worst, std::abs(r.value()) / r.scale());
    worst_abs = std::max(worst_abs, std::abs(r.value()));
  }
  auto r = make_result("commutation", "srLDeltaCommute", model.name(), -worst, tol);
  r.detail = {{"functions", n}, {"max_scaled_residual", worst}, {"max_residual", worst_abs},
              {"metric_parallel", metric_parallel(model)}};
  return {r};
}

std::vector<CheckResult> run_ricci(const json& c, const LieModel& model, std::uint64_t seed) {
  const int n = c.value("directions", 50);
  SplitMix64 rng(stream_seed(seed, 0x41CC1ULL));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd dirs(model.dim(), n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < model.dim(); ++i) dirs(i, j) = normal(rng);
    dirs.col(j).normalize();
  }
  const auto cmp = riemann_ricci_compare(model, dirs);
  auto r = make_result("ricci_compare", "RiemannRicci", model.name(), -cmp.max_residual, c.value("tolerance", 1e-10));
  r.detail = {{"directions", n},
              {"max_residual", cmp.max_residual},
              {"max_residual_with_coefficient_one_half", cmp.max_residual_half},
              {"levi_civita_vs_bracket_formula", cmp.pipeline_agreement}};
  return {r};
}

std::vector<CheckResult> run_double_gamma(const json& c, const LieModel& raw, std::uint64_t seed) {
  const LieModel model = normalize_vertical(raw);
  const auto g = geometry_report(raw);
  const int n = c.value("functions", 200), degree = c.value("degree", 4);
  const double window = default_window(c, raw), tol = c.value("tolerance", 1e-9);
  const auto ells = log_grid(-2.0, 2.0, c.value("ell_points", 5));
  const auto cs = c.value("c", std::vector<double>{0.5, 1.0, 2.0});
  SplitMix64 rng(stream_seed(seed, 0xD6ULL));
  double w1 = kInf, w2 = kInf;
  for (int i = 0; i < n; ++i) {
    const auto f = TestFunction::random_polynomial(model.dim(), degree, stream_seed(seed, static_cast<std::uint64_t>(i)));
    const Eigen::VectorXd x = uniform_point(rng, model.dim(), window);
    const GammaEvaluator ev(model, x);
    const Jet j = lift(f, x, ev.order());
    for (double ell : ells)
      for (double cc : cs) {
        const auto [a, b] = double_gamma_residuals(ev, j, ell, cc, {g.rho_H, g.M_HV});
        w1 = std::min(w1, a.value() / a.scale());
        w2 = std::min(w2, b.value() / b.scale());
      }
  }
  auto r = make_result("double_gamma", "DoubleGamma", raw.name(), std::min(w1, w2), tol);
  r.detail = {{"min_scaled_first", w1}, {"min_scaled_second", w2}, {"functions", n}};
  return {r};
}

std::vector<CheckResult> run_validate(const LieModel& model) {
  const auto v = validate(model);
  const double tz = v.v_integrable() ? 0.0 : v.trace_zero_residual;
  auto r = make_result("validate", "traceZero", model.name(), -tz, ValidationReport::kTol);
  if (!v.structural_ok()) r.verdict = Verdict::fail;
  r.detail = v;
  r.detail["metric_preserving"] = v.metric_preserving();
  r.detail["vertical_parallel"] = v.vertical_parallel();
  return {r};
}

// ---- stochastic and PDE checks --------------------------------------------

McSettings mc_from(const json& c, std::uint64_t seed, int paths, int steps) {
  McSettings s;
  s.paths = c.value("paths", paths);
  s.steps = c.value("steps", steps);
  s.jobs = c.value("jobs", 1);
  s.seed = seed;
  return s;
}

std::vector<CheckResult> run_semigroup(const json& c, const LieModel& model, std::uint64_t seed) {
  const double t = c.value("t", 1.0);
  const auto s = mc_from(c, seed, 100000, 200);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(model.dim());
  std::vector<CheckResult> out;
  const auto one = mc_semigroup(model, TestFunction::constant(model.dim(), 1.0), x0, t, s);
  auto r1 = make_result("semigroup", "CondA", model.name(), -std::abs(one.value - 1.0), 0.0);
  r1.detail = {{"estimate", one}, {"claim", "P_t 1 = 1"}};
  out.push_back(std::move(r1));

  std::vector<int> e(static_cast<std::size_t>(model.dim()), 0);
  e[0] = 2;
  const auto sq = mc_semigroup(model, TestFunction::monomial(model.dim(), e), x0, t, s);
  auto r2 = make_result("semigroup", "LiftedL", model.name(), -std::abs(sq.value - t), 3.0 * sq.std_error, sq.std_error);
  r2.detail = {{"estimate", sq}, {"expected", t}, {"claim", "P_t(x_1^2)(0) = t"}};
  out.push_back(std::move(r2));
  return out;
}

std::vector<CheckResult> run_gradient(const json& c, const LieModel& model, std::uint64_t seed) {
  const auto k = suite_constants(model);
  const int cases = c.value("cases", 10);
  const auto variants = c.value("variants", std::string("ab"));
  const bool vertical = c.value("vertical", true);
  const auto tr = c.value("t_range", std::vector<double>{0.2, 1.0});
  if (tr.size() != 2) throw ConfigError("gradient_bounds: t_range must have two entries");
  const double window = default_window(c, model);
  GradientSettings gs;
  gs.ell = c.value("ell", 1.0);
  std::vector<CheckResult> out;
  SplitMix64 rng(stream_seed(seed, 0x6AD1ULL));
  for (int i = 0; i < cases; ++i) {
    const auto f = TestFunction::random_trig(model.dim(), 3, stream_seed(seed, static_cast<std::uint64_t>(i)));
    const Eigen::VectorXd x = uniform_point(rng, model.dim(), window);
    const double t = tr[0] + (tr[1] - tr[0]) * rng.uniform();
    gs.mc = mc_from(c, stream_seed(seed, 1000 + static_cast<std::uint64_t>(i)), 10000, 100);
    for (char v : variants) {
      auto r = check_gradient_bounds(model, k, f, x, t, v, gs);
      r.detail["case"] = i;
      out.push_back(std::move(r));
    }
    if (vertical) {
      auto r = check_vertical_gradient(model, f, x, t, gs.mc);
      r.detail["case"] = i;
      out.push_back(std::move(r));
    }
  }
  return out;
}

PdeSettings pde_from(const json& c) {
  PdeSettings p;
  p.dt = c.value("dt", p.dt);
  return p;
}

std::vector<CheckResult> run_li_yau(const json& c, const LieModel& model) {
  LiYauSettings s;
  s.pde = pde_from(c);
  s.times = c.value("times", s.times);
  s.betas = c.value("betas", s.betas);
  s.epsilon = c.value("epsilon", s.epsilon);
  s.bump_width = c.value("bump_width", s.bump_width);
  s.relative_tolerance = c.value("relative_tolerance", s.relative_tolerance);
  return check_entropy_liyau(model, suite_constants(model), s);
}

std::vector<CheckResult> run_harnack(const json& c, const LieModel& model, std::uint64_t seed) {
  HarnackSettings s;
  s.samples = c.value("samples", s.samples);
  s.t0 = c.value("t0", s.t0);
  s.t1 = c.value("t1", s.t1);
  s.max_distance = c.value("max_distance", s.max_distance);
  s.bump_width = c.value("bump_width", s.bump_width);
  s.relative_tolerance = c.value("relative_tolerance", s.relative_tolerance);
  s.kernel.bump_width = c.value("kernel_width", s.kernel.bump_width);
  s.kernel.estimate_error = false;
  s.seed = seed;
  return check_harnack(model, suite_constants(model), s);
}

std::vector<CheckResult> run_decay(const json& c, const LieModel& model) {
  HeatKernelSettings s;
  s.bump_width = c.value("bump_width", s.bump_width);
  s.estimate_error = c.value("estimate_error", false);
  std::vector<double> times;
  for (int i = 0; i <= 8; ++i) times.push_back(0.2 + 0.1 * i);
  times = c.value("times", times);
  return check_heat_kernel_decay(model, suite_constants(model), times, s);
}

std::vector<CheckResult> run_poincare(const json& c, const LieModel& model) {
  PoincareSettings s;
  s.times = c.value("times", s.times);
  const auto v = c.value("variant", std::string("a"));
  if (v.size() != 1) throw ConfigError("poincare: variant must be a or b");
  s.variant = v[0];
  s.relative_tolerance = c.value("relative_tolerance", s.relative_tolerance);
  const auto f = TestFunction::gaussian_bump(Eigen::VectorXd::Zero(model.dim()), c.value("bump_width", 0.5));
  return {check_poincare_decay(model, suite_constants(model), f, s)};
}

std::vector<CheckResult> run_spectral(const json& c) {
  const auto r = spectral_gap_su2_pair(c.value("rho", 1.0), c.value("j_max", 2.0));
  return {r.poincare, r.gap_bound};
}

std::vector<CheckResult> run_schedules(const json& c) {
  const auto models = c.value("models", shipped_model_names());
  ScheduleGrid grid;
  grid.points = c.value("points", grid.points);
  grid.tolerance = c.value("tolerance", grid.tolerance);
  const double T = c.value("T", 1.0);
  std::vector<CheckResult> out;
  for (const auto& name : models) {
    const LieModel m = build_model(name);
    const auto k = suite_constants(m);
    const auto set = builtin_schedules(k, T, c.value("ell_a", 1.0), c.value("ell_d", 1.0));
    json omitted = json::array();
    for (const auto& [n, why] : set.omitted) omitted.push_back({{"schedule", n}, {"reason", why}});
    for (const auto& s : set.schedules) {
      auto r = check_schedule_admissible(s, k, grid);
      r.model = m.name();
      r.detail["omitted"] = omitted;
      r.detail["constants"] = k;
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> check_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, keys] : check_keys()) ids.push_back(id);
  return ids;
}

std::vector<CheckResult> run_check(const json& check, std::uint64_t seed) {
  const std::string id = check.at("id").get<std::string>();
  const std::string model_name = check.value("model", std::string("heisenberg"));
  try {
    const LieModel model = build_model(model_name);
    if (id == "cd_star") return run_cd_star(check, model, seed);
    if (id == "constants") return run_constants(check, model);
    if (id == "cond_b") return run_cond_b(check, model, seed);
    if (id == "commutation") return run_commutation(check, model, seed);
    if (id == "ricci_compare") return run_ricci(check, model, seed);
    if (id == "double_gamma") return run_double_gamma(check, model, seed);
    if (id == "validate") return run_validate(model);
    if (id == "semigroup") return run_semigroup(check, model, seed);
    if (id == "gradient_bounds") return run_gradient(check, model, seed);
    if (id == "li_yau") return run_li_yau(check, model);
    if (id == "harnack") return run_harnack(check, model, seed);
    if (id == "heat_kernel_decay") return run_decay(check, model);
    if (id == "poincare") return run_poincare(check, model);
    if (id == "spectral_gap") return run_spectral(check);
    if (id == "schedule") return run_schedules(check);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(id + ": " + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(id + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(id + ": " + e.what());
  } catch (const HeatError& e) {
    auto r = make_result(id, "", model_name, 0.0, 0.0);
    r.verdict = Verdict::fail;
    r.detail = {{"error", e.what()}};
    return {r};
  }
  throw ConfigError("unknown check id: " + id);
}

SuiteConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> top = {"seed", "jobs", "checks", "output"};
  for (const auto& [key, val] : j.items())
    if (!top.count(key)) throw ConfigError("unknown config key: " + key);
  SuiteConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.jobs = j.value("jobs", 1);
    if (j.contains("output")) {
      const auto& o = j.at("output");
      if (!o.is_object()) throw ConfigError("output must be an object");
      for (const auto& [key, val] : o.items())
        if (key != "json" && key != "csv_dir") throw ConfigError("unknown output key: " + key);
      cfg.json_path = o.value("json", std::string());
      cfg.csv_dir = o.value("csv_dir", std::string());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  if (cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
  const json checks = j.value("checks", json::array());
  if (!checks.is_array()) throw ConfigError("checks must be an array");
  for (const auto& c : checks) {
    if (!c.is_object() || !c.contains("id") || !c.at("id").is_string())
      throw ConfigError("every check needs a string id");
    const auto id = c.at("id").get<std::string>();
    const auto it = check_keys().find(id);
    if (it == check_keys().end()) throw ConfigError("unknown check id: " + id);
    for (const auto& [key, val] : c.items()) {
      if (key == "id" || key == "seed") continue;
      if (key == "model") {
        if (!val.is_string()) throw ConfigError(id + ": model must be a string");
        try {
          build_model(val.get<std::string>());
        } catch (const ModelError& e) {
          throw ConfigError(id + ": " + e.what());
        }
        continue;
      }
      if (!it->second.count(key)) throw ConfigError(id + ": unknown key " + key);
    }
  }
  cfg.checks = checks;
  return cfg;
}

SuiteConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

json default_config() {
  json checks = json::array();
  checks.push_back({{"id", "cd_star"}, {"model", "heisenberg"}});
  for (int n : {2, 3, 4})
    checks.push_back({{"id", "constants"},
                      {"model", "free_nilpotent:" + std::to_string(n)},
                      {"expected", {{"rho1", 0.0}, {"rho20", 1.0 / (2.0 * (n - 1))}, {"rho21", 0.0}}}});
  checks.push_back({{"id", "constants"}, {"model", "su2_pair:1"}, {"expected", {{"rho1", 4.0}, {"rho20", 0.25}}}});
  checks.push_back(
      {{"id", "constants"}, {"model", "heisenberg"}, {"expected", {{"N", 7.873}, {"D", std::sqrt(15.0)}}}});
  for (const auto& m : shipped_model_names()) {
    const LieModel model = build_model(m);
    if (model.name() != "heisenberg" && !model.name().starts_with("free_nilpotent") &&
        !model.name().starts_with("su2_pair") && metric_parallel(model))
      checks.push_back({{"id", "constants"}, {"model", m}});
  }
  for (const auto& m : shipped_model_names()) {
    const LieModel model = build_model(m);
    const auto v = validate(model);
    if (v.bracket_step == 2) checks.push_back({{"id", "cond_b"}, {"model", m}, {"expect", "zero"}});
  }
  checks.push_back({{"id", "cond_b"}, {"model", "engel"}, {"expect", "nonzero"}});
  for (const auto& m : shipped_model_names())
    if (metric_parallel(build_model(m))) checks.push_back({{"id", "commutation"}, {"model", m}});
  checks.push_back({{"id", "ricci_compare"}, {"model", "heisenberg"}});
  checks.push_back({{"id", "ricci_compare"}, {"model", "su2_pair:1"}});
  checks.push_back({{"id", "spectral_gap"}, {"rho", 1.0}, {"j_max", 2.0}});
  checks.push_back({{"id", "semigroup"}, {"model", "heisenberg"}, {"t", 1.0}, {"paths", 100000}, {"steps", 200}});
  checks.push_back({{"id", "gradient_bounds"}, {"model", "heisenberg"}, {"cases", 10}});
  checks.push_back({{"id", "li_yau"}, {"model", "heisenberg"}});
  checks.push_back({{"id", "harnack"}, {"model", "heisenberg"}});
  checks.push_back({{"id", "heat_kernel_decay"}, {"model", "heisenberg"}});
  checks.push_back({{"id", "schedule"}});
  checks.push_back({{"id", "poincare"}, {"model", "heisenberg"}});
  for (const auto& m : shipped_model_names()) {
    checks.push_back({{"id", "validate"}, {"model", m}});
    if (metric_parallel(build_model(m))) checks.push_back({{"id", "double_gamma"}, {"model", m}});
  }
  return {{"seed", 1}, {"jobs", 1}, {"checks", checks}};
}

Report run_suite(const SuiteConfig& config) {
  const auto n = config.checks.size();
  std::vector<std::vector<CheckResult>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& c = config.checks[i];
      const std::uint64_t seed = c.value("seed", stream_seed(config.seed, i));
      const auto start = std::chrono::steady_clock::now();
      try {
        slots[i] = run_check(c, seed);
      } catch (...) {
        errors[i] = std::current_exception();
        continue;
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const auto digest = fnv1a(c.dump() + "#" + std::to_string(seed));
      for (auto& r : slots[i]) {
        r.runtime = secs;
        r.inputs_digest = digest;
      }
    }
  };
  const int workers = std::max(1, std::min<int>(config.jobs, static_cast<int>(n)));
  std::vector<std::jthread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Report rep;
  for (auto& s : slots)
    for (auto& r : s) {
      if (r.verdict == Verdict::pass) ++rep.passed;
      else if (r.verdict == Verdict::fail) ++rep.failed;
      else ++rep.inconclusive;
      rep.results.push_back(std::move(r));
    }
  if (!config.json_path.empty()) {
    std::ofstream out(config.json_path);
    if (!out) throw std::runtime_error("cannot write " + config.json_path);
    out << report_json(rep).dump(2) << '\n';
  }
  if (!config.csv_dir.empty()) {
    std::filesystem::create_directories(config.csv_dir);
    std::map<std::string, std::vector<CheckResult>> by_id;
    for (const auto& r : rep.results) by_id[r.check_id].push_back(r);
    for (const auto& [id, rs] : by_id) write_csv(rs, (std::filesystem::path(config.csv_dir) / (id + ".csv")).string());
  }
  return rep;
}

void to_json(json& j, const CheckResult& r) {
  j = {{"check_id", r.check_id}, {"anchor", r.anchor},       {"model", r.model},
       {"inputs_digest", r.inputs_digest}, {"margin", r.margin}, {"tolerance", r.tolerance},
       {"error", r.error},       {"verdict", to_string(r.verdict)}, {"detail", r.detail}};
}

json report_json(const Report& r) {
  json out = json::array();
  for (const auto& c : r.results) out.push_back(c);
  return out;
}

void write_csv(const std::vector<CheckResult>& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "check_id,anchor,model,margin,tolerance,error,verdict,runtime_s\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : results)
    out << r.check_id << ',' << r.anchor << ',' << r.model << ',' << num(r.margin) << ',' << num(r.tolerance) << ','
        << num(r.error) << ',' << to_string(r.verdict) << ',' << num(r.runtime) << '\n';
}

}  // namespace srlab
