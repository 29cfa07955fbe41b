#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "srlab/verify_suite.hpp"

using nlohmann::json;
using namespace srlab;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string json_path;
  std::string csv_dir;
  int jobs = 1;
};

Eigen::VectorXd parse_point(const std::string& s, int dim) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) v.push_back(std::stod(item));
  if (v.empty()) v.assign(static_cast<std::size_t>(dim), 0.0);
  if (static_cast<int>(v.size()) != dim) throw ConfigError("point needs " + std::to_string(dim) + " coordinates");
  return Eigen::Map<Eigen::VectorXd>(v.data(), dim);
}

// "bump:<width>", "coord:<k>", "monomial:<e1>,<e2>,...", "const:<c>", "trig:<seed>", "poly:<degree>:<seed>".
TestFunction parse_function(const std::string& spec, int dim) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "bump") return TestFunction::gaussian_bump(Eigen::VectorXd::Zero(dim), arg.empty() ? 0.5 : std::stod(arg));
  if (kind == "coord") return TestFunction::coordinate(dim, std::stoi(arg));
  if (kind == "const") return TestFunction::constant(dim, std::stod(arg));
  if (kind == "trig") return TestFunction::random_trig(dim, 3, std::stoull(arg));
  if (kind == "monomial") {
    std::vector<int> e;
    std::stringstream in(arg);
    std::string item;
    while (std::getline(in, item, ',')) e.push_back(std::stoi(item));
    if (static_cast<int>(e.size()) != dim) throw ConfigError("monomial needs one exponent per coordinate");
    return TestFunction::monomial(dim, e);
  }
  if (kind == "poly") {
    const auto c2 = arg.find(':');
    return TestFunction::random_polynomial(dim, std::stoi(arg.substr(0, c2)),
                                           c2 == std::string::npos ? 1 : std::stoull(arg.substr(c2 + 1)));
  }
  throw ConfigError("unknown function spec " + spec);
}

void emit(const json& j, const Globals& g) {
  if (g.json_path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(g.json_path);
  if (!out) throw std::runtime_error("cannot write " + g.json_path);
  out << j.dump(2) << '\n';
}

int report_exit(const std::vector<CheckResult>& rs) {
  for (const auto& r : rs)
    if (r.verdict == Verdict::fail) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-Riemannian curvature-dimension toolkit"};
  app.require_subcommand(1);
  // Global flags are accepted after the subcommand too.
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--json", g.json_path, "Write JSON output to this path instead of stdout");
  app.add_option("--csv-dir", g.csv_dir, "Directory for CSV tables");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* models = app.add_subcommand("models", "List shipped models with their validation reports");
  bool validate_all = false;
  models->add_flag("--validate", validate_all, "Include validation reports");

  auto* constants = app.add_subcommand("constants", "Geometric invariants and curvature-dimension constants");
  std::string model_name;
  std::string objective = "auto";
  double coupling = 0.0;
  constants->add_option("model", model_name, "Model spec, e.g. heisenberg or su2_pair:1")->required();
  constants->add_option("--objective", objective, "auto, max_rho2, max_alpha or rho1_zero");
  auto* c_opt = constants->add_option("--c", coupling, "Explicit coupling constant");

  auto* cd = app.add_subcommand("cd-check", "Sample the curvature-dimension inequality");
  int cd_functions = 1000, cd_points = 20;
  cd->add_option("model", model_name)->required();
  cd->add_option("--functions", cd_functions, "Random quartics");
  cd->add_option("--points", cd_points, "Sample points");

  auto* heat = app.add_subcommand("heat", "Estimate P_t f(x)");
  std::string fspec = "bump:0.5", xspec, method = "mc", field_csv;
  double t = 1.0;
  McSettings mc;
  heat->add_option("model", model_name)->required();
  heat->add_option("--f", fspec, "bump:<w>, coord:<k>, monomial:<e,..>, const:<c>, trig:<seed>, poly:<deg>:<seed>");
  heat->add_option("--x", xspec, "Comma-separated point (default origin)");
  heat->add_option("-t,--time", t, "Time")->check(CLI::NonNegativeNumber);
  heat->add_option("--method", method, "mc or pde")->check(CLI::IsMember({"mc", "pde"}));
  heat->add_option("--paths", mc.paths)->check(CLI::PositiveNumber);
  heat->add_option("--steps", mc.steps)->check(CLI::PositiveNumber);
  heat->add_option("--field-csv", field_csv, "Dump the PDE field (x,y,z,u)");

  auto* dist = app.add_subcommand("distance", "Carnot-Caratheodory distance");
  std::string yspec;
  dist->add_option("model", model_name)->required();
  dist->add_option("--x", xspec);
  dist->add_option("--y", yspec)->required();

  auto* spectral = app.add_subcommand("spectral", "Horizontal spectrum of su2_pair");
  double rho = 1.0, j_max = 2.0;
  spectral->add_option("--rho", rho)->check(CLI::PositiveNumber);
  spectral->add_option("--j-max", j_max);

  auto* suite = app.add_subcommand("suite", "Verification suite");
  suite->require_subcommand(1);
  auto* run = suite->add_subcommand("run", "Run the checks named in a config");
  std::string config_path;
  run->add_option("--config", config_path, "JSON config")->required();
  auto* defaults = suite->add_subcommand("default-config", "Print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*models) {
      json out = json::array();
      for (const auto& name : shipped_model_names()) {
        json row = {{"name", name}};
        const LieModel m = build_model(name);
        row["dim_h"] = m.dim_h();
        row["dim_v"] = m.dim_v();
        if (validate_all) row["validation"] = validate(m);
        out.push_back(row);
      }
      emit(out, g);
      return 0;
    }
    if (*constants) {
      const LieModel m = build_model(model_name);
      const auto rep = geometry_report(m);
      CDConstants k;
      if (*c_opt) k = constants_for_c(rep, coupling);
      else if (objective == "auto") k = suite_constants(m);
      else k = assemble_constants(rep, std::nullopt, objective_from_string(objective));
      emit({{"model", m.name()}, {"geometry", rep}, {"constants", k}}, g);
      return 0;
    }
    if (*cd) {
      const auto rs = run_check({{"id", "cd_star"}, {"model", model_name}, {"functions", cd_functions},
                                 {"points", cd_points}},
                                g.seed);
      emit(json(rs), g);
      if (!g.csv_dir.empty()) write_csv(rs, g.csv_dir + "/cd_star.csv");
      return report_exit(rs);
    }
    if (*heat) {
      const LieModel m = build_model(model_name);
      const auto f = parse_function(fspec, m.dim());
      const auto x = parse_point(xspec, m.dim());
      mc.seed = g.seed;
      mc.jobs = g.jobs;
      SemigroupEstimate e;
      if (method == "mc") {
        e = mc_semigroup(m, f, x, t, mc);
      } else {
        PdeSettings ps;
        e = pde_value(m, f, x, t, ps);
        if (!field_csv.empty()) pde_semigroup(m, f, t, ps).write_csv(field_csv);
      }
      json row = e;
      row["model"] = m.name();
      row["f"] = f;
      emit(row, g);
      return 0;
    }
    if (*dist) {
      const LieModel m = build_model(model_name);
      json row = cc_distance(m, parse_point(xspec, m.dim()), parse_point(yspec, m.dim()));
      row["model"] = m.name();
      emit(row, g);
      return 0;
    }
    if (*spectral) {
      const auto r = spectral_gap_su2_pair(rho, j_max);
      emit({{"rho", rho},
            {"j_max", j_max},
            {"lambda1", r.lambda1},
            {"lambda1_next", r.lambda1_next},
            {"stable", r.stable},
            {"checks", std::vector<CheckResult>{r.poincare, r.gap_bound}}},
           g);
      return report_exit({r.poincare, r.gap_bound});
    }
    if (*defaults) {
      emit(default_config(), g);
      return 0;
    }
    if (*run) {
      auto cfg = load_config(config_path);
      // Command-line flags override the config.
      if (app.get_option("--seed")->count()) cfg.seed = g.seed;
      if (app.get_option("--jobs")->count()) cfg.jobs = g.jobs;
      if (!g.json_path.empty()) cfg.json_path = g.json_path;
      if (!g.csv_dir.empty()) cfg.csv_dir = g.csv_dir;
      const auto rep = run_suite(cfg);
      if (cfg.json_path.empty()) std::cout << report_json(rep).dump(2) << '\n';
      std::cerr << "passed " << rep.passed << ", failed " << rep.failed << ", inconclusive " << rep.inconclusive
                << '\n';
      return rep.exit_code();
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
