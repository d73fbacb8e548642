#pragma once

// INI-style run configuration.  Sections group operator, boundary condition,
// grid, contour, and probe settings; unknown sections or keys are rejected
// with the offending line number so a typo cannot silently fall back to a
// default.

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "opcal/errors.hpp"
#include "opcal/fields.hpp"
#include "opcal/grid.hpp"
#include "opcal/hinfty.hpp"

namespace opcal {

class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path);
  }

  static ConfigFile parse_string(const std::string& text, const std::string& name = "<string>") {
    ConfigFile cfg;
    cfg.name_ = name;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = trim(strip_comment(line));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw config_error(where(name, lineno) + "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty()) throw config_error(where(name, lineno) + "empty section name");
        if (!kKnown().count(section))
          throw config_error(where(name, lineno) + "unknown section [" + section + "]");
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw config_error(where(name, lineno) + "expected key = value");
      std::string key = trim(s.substr(0, eq));
      std::string val = trim(s.substr(eq + 1));
      if (key.empty()) throw config_error(where(name, lineno) + "empty key");
      if (section.empty())
        throw config_error(where(name, lineno) + "key outside any section");
      const auto& allowed = kKnown().at(section);
      if (!allowed.count(key))
        throw config_error(where(name, lineno) + "unknown key '" + key + "' in [" + section + "]");
      cfg.values_[section + "." + key] = val;
    }
    return cfg;
  }

  bool has(const std::string& dotted) const { return values_.count(dotted) > 0; }

  std::string get_string(const std::string& dotted) const {
    auto it = values_.find(dotted);
    if (it == values_.end()) throw config_error(name_ + ": missing required key " + dotted);
    return it->second;
  }
  std::string get_string(const std::string& dotted, const std::string& dflt) const {
    auto it = values_.find(dotted);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& dotted) const { return to_double(dotted, get_string(dotted)); }
  double get_double(const std::string& dotted, double dflt) const {
    auto it = values_.find(dotted);
    return it == values_.end() ? dflt : to_double(dotted, it->second);
  }

  long get_int(const std::string& dotted) const { return to_int(dotted, get_string(dotted)); }
  long get_int(const std::string& dotted, long dflt) const {
    auto it = values_.find(dotted);
    return it == values_.end() ? dflt : to_int(dotted, it->second);
  }

  std::vector<double> get_list(const std::string& dotted) const {
    std::vector<double> out;
    std::string s = get_string(dotted);
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(to_double(dotted, trim(item)));
    if (out.empty()) throw config_error(name_ + ": empty list for " + dotted);
    return out;
  }

  const std::string& name() const { return name_; }

 private:
  static std::string strip_comment(const std::string& s) {
    for (size_t i = 0; i < s.size(); ++i)
      if (s[i] == '#' || s[i] == ';') return s.substr(0, i);
    return s;
  }
  static std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }
  static std::string where(const std::string& name, int lineno) {
    return name + ":" + std::to_string(lineno) + ": ";
  }
  double to_double(const std::string& key, const std::string& v) const {
    try {
      size_t pos = 0;
      double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw config_error(name_ + ": " + key + " is not a number: '" + v + "'");
    }
  }
  long to_int(const std::string& key, const std::string& v) const {
    try {
      size_t pos = 0;
      long d = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw config_error(name_ + ": " + key + " is not an integer: '" + v + "'");
    }
  }

  static const std::map<std::string, std::set<std::string>>& kKnown() {
    static const std::map<std::string, std::set<std::string>> k = {
        {"operator", {"dim", "preset", "diag", "c0", "shift"}},
        {"boundary", {"preset", "phi0", "phi1", "floor"}},
        {"grid",
         {"tangential_points", "tangential_length", "normal_points", "normal_length", "stretch",
          "p"}},
        {"contour", {"angle", "mu_min", "mu_max", "nodes"}},
        {"probe",
         {"name",      "seed",    "trials", "theta",        "thetas",    "mus",
          "mu_count",  "mu_lo",   "mu_hi",  "component",    "eps",       "members",
          "mu_tops",   "mu_floor", "lambda_theta", "lambda_mu", "input_field", "refine",
          "order",     "node_density"}},
    };
    return k;
  }

  std::string name_;
  std::map<std::string, std::string> values_;
};

inline EllipticOperatorSpec make_operator(const ConfigFile& cfg) {
  int n = static_cast<int>(cfg.get_int("operator.dim", 1));
  if (n < 1 || n > 4) throw config_error("operator.dim must be 1..4");
  std::string preset = cfg.get_string("operator.preset", "laplace");
  double c0 = cfg.get_double("operator.c0", 0.0);
  double shift = cfg.get_double("operator.shift", 1.0);
  EllipticOperatorSpec op;
  if (preset == "laplace") {
    op = EllipticOperatorSpec::laplace(n, c0, shift);
  } else if (preset == "diag") {
    std::vector<double> d = cfg.get_list("operator.diag");
    if (static_cast<int>(d.size()) != n)
      throw config_error("operator.diag needs exactly dim entries");
    op = EllipticOperatorSpec::diag(d, c0, shift);
  } else {
    throw config_error("operator.preset must be laplace or diag");
  }
  op.validate(coefficient_samples(n));
  return op;
}

inline BoundaryOperatorSpec make_boundary(const ConfigFile& cfg, int n) {
  int nx = n - 1;
  std::string preset = cfg.get_string("boundary.preset", "dirichlet");
  BoundaryOperatorSpec bc;
  if (preset == "dirichlet") {
    bc = BoundaryOperatorSpec::dirichlet(nx);
  } else if (preset == "neumann") {
    bc = BoundaryOperatorSpec::neumann(nx);
  } else if (preset == "robin") {
    bc = BoundaryOperatorSpec::robin(nx, cfg.get_double("boundary.phi0", 1.0),
                                     cfg.get_double("boundary.phi1", 1.0));
  } else if (preset == "degenerate_sin2") {
    bc = BoundaryOperatorSpec::degenerate_sin2(nx);
  } else {
    throw config_error("boundary.preset must be dirichlet, neumann, robin, or degenerate_sin2");
  }
  if (cfg.has("boundary.floor")) bc.floor_c = cfg.get_double("boundary.floor");
  bc.validate(coefficient_samples(nx));
  return bc;
}

// normal_length = 0 asks for the spectral default L = min(12 ln 10 / (omega mu), 1e4),
// which the caller resolves once omega and mu are known.
struct GridRequest {
  double Lp = 2.0 * 3.14159265358979323846;
  int Mp = 64;
  double Ln = 0.0;
  int Mn = 512;
  double stretch = 1.0;
  double p = 2.0;

  Grid resolve(double omega, double mu) const {
    double L = Ln;
    if (L <= 0.0) {
      if (!(omega > 0) || !(mu > 0))
        throw config_error("automatic normal_length needs positive decay margin and mu");
      L = std::min(12.0 * std::log(10.0) / (omega * mu), 1e4);
    }
    return Grid::make(Lp, Mp, L, Mn, stretch);
  }
};

inline GridRequest make_grid_request(const ConfigFile& cfg, int n) {
  GridRequest g;
  g.Mp = static_cast<int>(cfg.get_int("grid.tangential_points", n == 1 ? 1 : 64));
  g.Lp = cfg.get_double("grid.tangential_length", 2.0 * 3.14159265358979323846);
  g.Mn = static_cast<int>(cfg.get_int("grid.normal_points", 512));
  g.Ln = cfg.get_double("grid.normal_length", 0.0);
  g.stretch = cfg.get_double("grid.stretch", 1.0);
  g.p = cfg.get_double("grid.p", 2.0);
  if (n == 1 && g.Mp != 1) throw config_error("grid.tangential_points must be 1 when dim = 1");
  if (g.Mp < 1 || g.Mn < 8) throw config_error("grid needs tangential_points >= 1, normal_points >= 8");
  if (!(g.p >= 1.0)) throw config_error("grid.p must be >= 1");
  return g;
}

inline Contour make_contour(const ConfigFile& cfg) {
  double angle = cfg.get_double("contour.angle", 3.0 * 3.14159265358979323846 / 4.0);
  double mu_min = cfg.get_double("contour.mu_min", 1e-3);
  double mu_max = cfg.get_double("contour.mu_max", 1e3);
  int nodes = static_cast<int>(cfg.get_int("contour.nodes", 512));
  return build_contour(angle, mu_min, mu_max, nodes);
}

}  // namespace opcal
