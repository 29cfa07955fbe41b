// Acceptance run: executes the CLI suite twice on the default config and
// evaluates each acceptance criterion from the JSON report and CSV tables.
//
// usage: acceptance <srlab binary> <config.json> <output dir>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_suite(const std::string& exe, const std::string& config, const fs::path& json_out, const fs::path& csv_dir) {
  fs::create_directories(csv_dir);
  const std::string cmd = "\"" + exe + "\" suite run --config \"" + config + "\" --json \"" + json_out.string() +
                          "\" --csv-dir \"" + csv_dir.string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Runtime per (check_id, model) from one CSV table; results of one configured check share its runtime.
std::map<std::string, double> runtimes(const fs::path& csv) {
  std::map<std::string, double> out;
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream s(line);
    std::string item;
    while (std::getline(s, item, ',')) f.push_back(item);
    if (f.size() != 8) continue;
    auto& v = out[f[2]];
    v = std::max(v, std::stod(f[7]));
  }
  return out;
}

double total_runtime(const fs::path& csv) {
  double t = 0.0;
  for (const auto& [model, r] : runtimes(csv)) t += r;
  return t;
}

struct Criterion {
  int id;
  std::string name;
  bool ok = true;
  std::vector<std::string> notes;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back(what);
    }
  }
};

std::vector<json> select(const json& report, const std::string& check_id, const std::string& anchor = "") {
  std::vector<json> out;
  for (const auto& r : report)
    if (r.at("check_id") == check_id && (anchor.empty() || r.at("anchor") == anchor)) out.push_back(r);
  return out;
}

std::string describe(const json& r) {
  std::ostringstream s;
  s << r.at("check_id").get<std::string>() << "/" << r.at("anchor").get<std::string>() << "/"
    << r.at("model").get<std::string>() << " verdict=" << r.at("verdict").get<std::string>() << " margin=" << r.at("margin");
  return s.str();
}

void all_pass(Criterion& c, const std::vector<json>& rs, const std::string& what) {
  c.require(!rs.empty(), what + ": no results");
  for (const auto& r : rs) c.require(r.at("verdict") == "pass", describe(r));
}

double num(const json& j) {
  if (j.is_number()) return j.get<double>();
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: acceptance <srlab> <config.json> <output dir>\n";
    return 2;
  }
  const std::string exe = argv[1], config = argv[2];
  const fs::path out = argv[3];
  fs::remove_all(out);
  fs::create_directories(out);

  const int rc1 = run_suite(exe, config, out / "run1.json", out / "csv1");
  const int rc2 = run_suite(exe, config, out / "run2.json", out / "csv2");
  if (rc1 < 0 || rc1 > 1 || rc2 < 0 || rc2 > 1) {
    std::cerr << "suite run did not complete (exit " << rc1 << ", " << rc2 << ")\n";
    return 2;
  }
  const json report = json::parse(slurp(out / "run1.json"));
  const fs::path csv = out / "csv1";
  std::vector<Criterion> cs;

  {
    Criterion c{1, "CD* validity and equality witness on Heisenberg"};
    const auto rs = select(report, "cd_star");
    all_pass(c, rs, "cd_star");
    c.require(rs.size() == 2, "expected the sampled check and the witness");
    for (const auto& r : rs) {
      const auto& d = r.at("detail");
      if (d.contains("evaluations")) c.require(d.at("evaluations") == 10000L * 20 * 9, "evaluation count");
      if (d.contains("constants")) {
        const auto& k = d.at("constants");
        c.require(k.at("n") == 2 && num(k.at("rho1")) == 0.0 && num(k.at("rho20")) == 0.5 && num(k.at("rho21")) == 0.0,
                  "constants (2, 0, 1/2, 0)");
      }
    }
    const double t = total_runtime(csv / "cd_star.csv");
    c.require(t < 60.0, "runtime " + std::to_string(t) + " s");
    cs.push_back(c);
  }
  {
    Criterion c{2, "constants reproduction"};
    all_pass(c, select(report, "constants", "rhoSR2"), "rhoSR2");
    all_pass(c, select(report, "constants", "rhoSR"), "rhoSR");
    std::map<std::string, std::map<std::string, double>> want;
    for (int n : {2, 3, 4}) want["free_nilpotent:" + std::to_string(n)] = {{"rho20", 1.0 / (2.0 * (n - 1))}};
    want["su2_pair:1"] = {{"rho1", 4.0}, {"rho20", 0.25}};
    for (const auto& [model, vals] : want) {
      bool seen = false;
      for (const auto& r : select(report, "constants", "rhoSR2")) {
        if (r.at("model") != model) continue;
        seen = true;
        for (const auto& [key, v] : vals) {
          const double got = num(r.at("detail").at("comparison").at(key).at("computed"));
          c.require(std::abs(got - v) <= 1e-9, model + " " + key + " = " + std::to_string(got));
        }
      }
      c.require(seen, model + " not checked");
    }
    for (const std::string model : {"heisenberg", "free_nilpotent:2", "free_nilpotent:3", "free_nilpotent:4",
                                    "su2_pair:1"}) {
      bool seen = false;
      for (const auto& r : select(report, "constants", "rhoSR")) seen = seen || r.at("model") == model;
      c.require(seen, model + ": M_HV, M_grad_v not checked");
    }
    cs.push_back(c);
  }
  {
    Criterion c{3, "condition (B) on step-2 models and its failure on Engel"};
    const auto rs = select(report, "cond_b");
    all_pass(c, rs, "cond_b");
    bool engel = false;
    for (const auto& r : rs)
      if (r.at("model") == "engel") {
        engel = true;
        c.require(num(r.at("detail").at("fraction_above_threshold")) >= 0.1, "Engel fraction above 1e-6");
      }
    c.require(engel, "Engel not checked");
    const double t = total_runtime(csv / "cond_b.csv");
    c.require(t < 30.0, "runtime " + std::to_string(t) + " s");
    cs.push_back(c);
  }
  {
    Criterion c{4, "commutation of the sub-Laplacian with the Laplacian"};
    all_pass(c, select(report, "commutation"), "commutation");
    cs.push_back(c);
  }
  {
    Criterion c{5, "Ricci comparison, two pipelines"};
    const auto rs = select(report, "ricci_compare");
    all_pass(c, rs, "ricci_compare");
    c.require(rs.size() == 2, "expected Heisenberg and su2_pair:1");
    cs.push_back(c);
  }
  {
    Criterion c{6, "spectral gap of su2_pair(1)"};
    const auto rs = select(report, "spectral_gap");
    all_pass(c, rs, "spectral_gap");
    for (const auto& r : rs) {
      const auto& d = r.at("detail");
      const double lam = num(d.at("lambda1"));
      c.require(d.at("stable") == true && std::abs(lam - num(d.at("lambda1_next"))) <= 1e-9, "gap stability");
      c.require(-lam >= 6.0 / 7.0 && -lam >= 0.8, "-lambda1 = " + std::to_string(-lam));
    }
    const double t = total_runtime(csv / "spectral_gap.csv");
    c.require(t < 120.0, "runtime " + std::to_string(t) + " s");
    cs.push_back(c);
  }
  {
    Criterion c{7, "semigroup fidelity"};
    const auto rs = select(report, "semigroup");
    all_pass(c, rs, "semigroup");
    for (const auto& r : rs) {
      const auto& e = r.at("detail").at("estimate");
      if (r.at("anchor") == "CondA") c.require(num(e.at("value")) == 1.0, "P_t 1 = 1 exactly");
      if (r.at("anchor") == "LiftedL") {
        c.require(std::abs(num(e.at("value")) - 1.0) <= 3.0 * num(e.at("error")), "P_1 x^2 (0) = 1 within 3 se");
        c.require(e.at("settings").at("paths") == 100000 && e.at("settings").at("steps") == 200, "10^5 paths, 200 steps");
      }
    }
    const double t = total_runtime(csv / "semigroup.csv");
    c.require(t < 60.0, "runtime " + std::to_string(t) + " s");
    cs.push_back(c);
  }
  {
    Criterion c{8, "gradient bounds on 10 Heisenberg cases"};
    for (const std::string a : {"GradBound(a)", "GradBound(b)", "CondARiemann"}) {
      const auto rs = select(report, "gradient_bounds", a);
      all_pass(c, rs, a);
      c.require(rs.size() == 10, a + ": expected 10 cases");
    }
    cs.push_back(c);
  }
  {
    Criterion c{9, "Li-Yau, Harnack and heat-kernel decay"};
    const auto ly2 = select(report, "li_yau", "LY2");
    all_pass(c, ly2, "LY2");
    for (const auto& r : ly2) {
      c.require(std::abs(num(r.at("detail").at("N")) - 7.873) <= 5e-4, "N = 7.873");
      c.require(std::abs(num(r.at("detail").at("D")) - std::sqrt(15.0)) <= 1e-9, "D = sqrt 15");
    }
    const auto h = select(report, "harnack", "ParabolHarnack");
    c.require(!h.empty(), "no Harnack result");
    if (!h.empty()) {
      c.require(h.front().at("verdict") == "pass", describe(h.front()));
      c.require(h.front().at("detail").at("samples").size() == 20, "20 Harnack samples");
    }
    bool literal = false;
    for (const auto& r : select(report, "heat_kernel_decay"))
      if (r.at("detail").at("claim") == "t^{N/2} p_t(0,0) non-increasing") {
        literal = true;
        c.require(r.at("verdict") == "pass", describe(r));
      }
    c.require(literal, "decay claim not checked");
    cs.push_back(c);
  }
  {
    Criterion c{10, "schedule admissibility"};
    const auto rs = select(report, "schedule");
    all_pass(c, rs, "schedule");
    bool monotone = false;
    for (const auto& r : rs) {
      const auto& d = r.at("detail");
      c.require(d.at("points") == 2048, "2048-point grid");
      if (d.contains("ratio_slope_min")) monotone = monotone || num(d.at("ratio_slope_min")) > 0.0;
    }
    c.require(monotone, "d/dt (a / ell) > 0 not exercised");
    cs.push_back(c);
  }
  {
    Criterion c{11, "determinism of suite run"};
    c.require(slurp(out / "run1.json") == slurp(out / "run2.json"), "JSON reports differ");
    cs.push_back(c);
  }

  int failed = 0;
  for (const auto& c : cs) {
    std::cout << (c.ok ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << '\n';
    for (const auto& n : c.notes) std::cout << "        " << n << '\n';
    if (!c.ok) ++failed;
  }
  std::cout << cs.size() - failed << " of " << cs.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
