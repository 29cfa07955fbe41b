#include "srlab/test_function.hpp"

#include <cmath>
#include <stdexcept>

#include "srlab/rng.hpp"

namespace srlab {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

void enumerate_all(int nvars, int max_degree, std::vector<int>& current, int var, int remaining,
                   std::vector<std::vector<int>>& out) {
  if (var == nvars) {
    out.push_back(current);
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    current[static_cast<std::size_t>(var)] = k;
    enumerate_all(nvars, max_degree, current, var + 1, remaining - k, out);
  }
  current[static_cast<std::size_t>(var)] = 0;
}

// Adds c * (x + delta)^alpha into the jet.
void add_shifted_monomial(Jet& jet, double c, const std::vector<int>& alpha, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const int n = jet.nvars();
  const int order = jet.order();
  const auto& layout = jet.layout();
  std::vector<int> beta(static_cast<std::size_t>(n), 0);
  // Depth-first over beta <= alpha with |beta| <= order.
  auto recurse = [&](auto&& self, int var, int deg, double weight) -> void {
    if (weight == 0.0) return;
    if (var == n) {
      const long m = layout.index_of(beta);
      jet[static_cast<std::size_t>(m)] += c * weight;
      return;
    }
    const int a = alpha[static_cast<std::size_t>(var)];
    const double xv = x[var];
    for (int b = 0; b <= a && deg + b <= order; ++b) {
      beta[static_cast<std::size_t>(var)] = b;
      self(self, var + 1, deg + b, weight * binomial(a, b) * std::pow(xv, a - b));
    }
    beta[static_cast<std::size_t>(var)] = 0;
  };
  recurse(recurse, 0, 0, 1.0);
}

Jet lift_polynomial(const std::vector<Monomial>& terms, int nvars, const Eigen::Ref<const Eigen::VectorXd>& x, int order) {
  Jet jet(nvars, order);
  for (const auto& t : terms) add_shifted_monomial(jet, t.coefficient, t.exponents, x);
  return jet;
}

double eval_polynomial(const std::vector<Monomial>& terms, const Eigen::Ref<const Eigen::VectorXd>& u) {
  double s = 0.0;
  for (const auto& t : terms) {
    double v = t.coefficient;
    for (std::size_t j = 0; j < t.exponents.size(); ++j) {
      const int e = t.exponents[j];
      if (e == 0) continue;
      double p = u[static_cast<Eigen::Index>(j)];
      double r = p;
      for (int k = 1; k < e; ++k) r *= p;
      v *= r;
    }
    s += v;
  }
  return s;
}

}  // namespace

TestFunction TestFunction::constant(int nvars, double c) {
  TestFunction f;
  f.nvars = nvars;
  f.terms.push_back({c, std::vector<int>(static_cast<std::size_t>(nvars), 0)});
  return f;
}

TestFunction TestFunction::monomial(int nvars, std::vector<int> exponents, double coefficient) {
  if (static_cast<int>(exponents.size()) != nvars) throw std::invalid_argument("monomial: exponent size mismatch");
  TestFunction f;
  f.nvars = nvars;
  for (int e : exponents) f.degree += e;
  f.terms.push_back({coefficient, std::move(exponents)});
  return f;
}

TestFunction TestFunction::random_polynomial(int nvars, int degree, std::uint64_t seed) {
  TestFunction f;
  f.nvars = nvars;
  f.degree = degree;
  f.seed = seed;
  std::vector<std::vector<int>> exps;
  std::vector<int> current(static_cast<std::size_t>(nvars), 0);
  enumerate_all(nvars, degree, current, 0, degree, exps);
  SplitMix64 rng(stream_seed(seed, 0x706f6c79));
  for (auto& e : exps) f.terms.push_back({2.0 * rng.uniform() - 1.0, std::move(e)});
  return f;
}

TestFunction TestFunction::random_trig(int nvars, int nterms, std::uint64_t seed) {
  TestFunction f;
  f.kind = Kind::trig_polynomial;
  f.nvars = nvars;
  f.seed = seed;
  SplitMix64 rng(stream_seed(seed, 0x74726967));
  for (int t = 0; t < nterms; ++t) {
    TrigTerm term;
    term.coefficient = 2.0 * rng.uniform() - 1.0;
    term.frequency.resize(static_cast<std::size_t>(nvars));
    for (auto& k : term.frequency) k = 2.0 * rng.uniform() - 1.0;
    term.phase = 2.0 * M_PI * rng.uniform();
    f.trig_terms.push_back(std::move(term));
  }
  return f;
}

TestFunction TestFunction::gaussian_bump(Eigen::VectorXd center, double width, double amplitude, double offset) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian_bump: width must be positive");
  TestFunction f;
  f.kind = Kind::named;
  f.name = "gaussian_bump";
  f.nvars = static_cast<int>(center.size());
  f.center = std::move(center);
  f.width = width;
  f.amplitude = amplitude;
  f.offset = offset;
  return f;
}

TestFunction TestFunction::shifted_square(const TestFunction& poly, double epsilon) {
  if (poly.kind != Kind::polynomial) throw std::invalid_argument("shifted_square: inner function must be a polynomial");
  TestFunction f = poly;
  f.kind = Kind::named;
  f.name = "shifted_square";
  f.epsilon = epsilon;
  f.degree = 2 * poly.degree;
  return f;
}

TestFunction TestFunction::exp_poly(const TestFunction& poly) {
  if (poly.kind != Kind::polynomial) throw std::invalid_argument("exp_poly: inner function must be a polynomial");
  TestFunction f = poly;
  f.kind = Kind::named;
  f.name = "exp_poly";
  return f;
}

TestFunction TestFunction::scaled(double s) const {
  TestFunction f = *this;
  switch (kind) {
    case Kind::polynomial:
      for (auto& t : f.terms) t.coefficient *= s;
      break;
    case Kind::trig_polynomial:
      for (auto& t : f.trig_terms) t.coefficient *= s;
      break;
    case Kind::named:
      if (name != "gaussian_bump") throw std::invalid_argument("scaled: only polynomial, trig and gaussian_bump scale linearly");
      f.amplitude *= s;
      f.offset *= s;
      break;
  }
  return f;
}

bool TestFunction::is_constant() const {
  if (kind == Kind::polynomial) {
    for (const auto& t : terms) {
      if (t.coefficient == 0.0) continue;
      for (int e : t.exponents)
        if (e != 0) return false;
    }
    return true;
  }
  if (kind == Kind::named && name == "gaussian_bump") return amplitude == 0.0;
  return false;
}

double TestFunction::operator()(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  switch (kind) {
    case Kind::polynomial:
      return eval_polynomial(terms, u);
    case Kind::trig_polynomial: {
      double s = 0.0;
      for (const auto& t : trig_terms) {
        double arg = t.phase;
        for (std::size_t j = 0; j < t.frequency.size(); ++j) arg += t.frequency[j] * u[static_cast<Eigen::Index>(j)];
        s += t.coefficient * std::sin(arg);
      }
      return s;
    }
    case Kind::named:
      if (name == "gaussian_bump") return offset + amplitude * std::exp(-(u - center).squaredNorm() / (2.0 * width * width));
      if (name == "shifted_square") {
        const double p = eval_polynomial(terms, u);
        return p * p + epsilon;
      }
      if (name == "exp_poly") return std::exp(eval_polynomial(terms, u));
      break;
  }
  throw std::invalid_argument("unknown test function kind: " + name);
}

Jet lift(const TestFunction& f, const Eigen::Ref<const Eigen::VectorXd>& x, int order) {
  const int n = static_cast<int>(x.size());
  if (f.nvars != n) throw std::invalid_argument("lift: point dimension does not match the function");
  switch (f.kind) {
    case TestFunction::Kind::polynomial:
      return lift_polynomial(f.terms, n, x, order);
    case TestFunction::Kind::trig_polynomial: {
      Jet out(n, order);
      for (const auto& t : f.trig_terms) {
        Jet arg = Jet::constant(n, order, t.phase);
        for (int j = 0; j < n; ++j) arg.axpy(t.frequency[static_cast<std::size_t>(j)], Jet::coordinate(n, order, j, x[j]));
        out.axpy(t.coefficient, sin(arg));
      }
      return out;
    }
    case TestFunction::Kind::named: {
      if (f.name == "gaussian_bump") {
        Jet q(n, order);
        for (int j = 0; j < n; ++j) {
          Jet d = Jet::coordinate(n, order, j, x[j] - f.center[j]);
          multiply_accumulate(q, d, d);
        }
        Jet out = exp(q * (-1.0 / (2.0 * f.width * f.width))) * f.amplitude;
        out[0] += f.offset;
        return out;
      }
      if (f.name == "shifted_square") {
        Jet p = lift_polynomial(f.terms, n, x, order);
        Jet out = p * p;
        out[0] += f.epsilon;
        return out;
      }
      if (f.name == "exp_poly") return exp(lift_polynomial(f.terms, n, x, order));
      break;
    }
  }
  throw std::invalid_argument("lift: unknown test function " + f.name);
}

namespace {
const char* kind_name(TestFunction::Kind k) {
  switch (k) {
    case TestFunction::Kind::polynomial: return "polynomial";
    case TestFunction::Kind::trig_polynomial: return "trig-polynomial";
    case TestFunction::Kind::named: return "named";
  }
  return "?";
}
}  // namespace

void to_json(nlohmann::json& j, const TestFunction& f) {
  j = nlohmann::json{{"kind", kind_name(f.kind)}, {"nvars", f.nvars}, {"degree", f.degree}, {"seed", f.seed}};
  auto& coeffs = j["coefficients"] = nlohmann::json::array();
  for (const auto& t : f.terms) coeffs.push_back({{"c", t.coefficient}, {"exponents", t.exponents}});
  if (f.kind == TestFunction::Kind::trig_polynomial) {
    auto& trig = j["trig_terms"] = nlohmann::json::array();
    for (const auto& t : f.trig_terms) trig.push_back({{"c", t.coefficient}, {"frequency", t.frequency}, {"phase", t.phase}});
  }
  if (f.kind == TestFunction::Kind::named) {
    j["name"] = f.name;
    if (f.name == "gaussian_bump") {
      j["center"] = std::vector<double>(f.center.data(), f.center.data() + f.center.size());
      j["width"] = f.width;
      j["amplitude"] = f.amplitude;
      j["offset"] = f.offset;
    }
    if (f.name == "shifted_square") j["epsilon"] = f.epsilon;
  }
}

void from_json(const nlohmann::json& j, TestFunction& f) {
  f = TestFunction{};
  const auto kind = j.at("kind").get<std::string>();
  f.nvars = j.at("nvars").get<int>();
  f.degree = j.value("degree", 0);
  f.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("coefficients"))
    for (const auto& t : j.at("coefficients"))
      f.terms.push_back({t.at("c").get<double>(), t.at("exponents").get<std::vector<int>>()});
  if (kind == "polynomial") {
    f.kind = TestFunction::Kind::polynomial;
  } else if (kind == "trig-polynomial") {
    f.kind = TestFunction::Kind::trig_polynomial;
    for (const auto& t : j.at("trig_terms"))
      f.trig_terms.push_back({t.at("c").get<double>(), t.at("frequency").get<std::vector<double>>(), t.at("phase").get<double>()});
  } else if (kind == "named") {
    f.kind = TestFunction::Kind::named;
    f.name = j.at("name").get<std::string>();
    if (f.name == "gaussian_bump") {
      auto c = j.at("center").get<std::vector<double>>();
      f.center = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
      f.width = j.at("width").get<double>();
      f.amplitude = j.value("amplitude", 1.0);
      f.offset = j.value("offset", 0.0);
    }
    f.epsilon = j.value("epsilon", 0.0);
  } else {
    throw std::invalid_argument("unknown test function kind: " + kind);
  }
}

}  // namespace srlab
