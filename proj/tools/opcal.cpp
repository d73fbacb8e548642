// Configuration-driven front end.  One probe per invocation, selected by
// --probe or by the config's probe.name; every output lands in --out as CSV
// or JSON with stable headers and key names.  Exit codes: 0 success, 2 bad
// configuration or arguments, 3 numerical precondition failure, 4 probe
// instability.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "opcal/config.hpp"
#include "opcal/degenerate.hpp"
#include "opcal/fieldio.hpp"
#include "opcal/hinfty.hpp"
#include "opcal/resolvent.hpp"

namespace {

using namespace opcal;

constexpr double kPi = 3.14159265358979323846;

struct RunArgs {
  ConfigFile cfg;
  std::string out_dir;
  std::string probe;
  long seed = -1;  // < 0 means unset
};

std::string opath(const RunArgs& a, const std::string& leaf) {
  return (std::filesystem::path(a.out_dir) / leaf).string();
}

std::uint64_t require_seed(const RunArgs& a) {
  long s = a.seed >= 0 ? a.seed : a.cfg.get_int("probe.seed", -1);
  if (s < 0)
    throw config_error("this probe draws random fields; set probe.seed or pass --seed");
  return static_cast<std::uint64_t>(s);
}

void write_json(const RunArgs& a, const std::string& leaf, const nlohmann::json& j) {
  std::ofstream out(opath(a, leaf));
  if (!out) throw argument_error("cannot open for writing: " + opath(a, leaf));
  out << j.dump(2) << "\n";
}

std::vector<double> geometric(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2)
    throw config_error("geometric range needs 0 < mu_lo < mu_hi and mu_count >= 2");
  std::vector<double> v;
  for (int i = 0; i < count; ++i)
    v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return v;
}

Grid resolve_grid(const RunArgs& a, const EllipticOperatorSpec& op, double theta, double mu) {
  GridRequest gr = make_grid_request(a.cfg, op.n);
  if (gr.Ln > 0.0) return gr.resolve(0.0, 0.0);
  SymbolLattice lat = SymbolLattice::standard(op.n - 1);
  double omega = ellipticity_margin(op, theta, lat);
  return gr.resolve(omega, mu);
}

int cmd_resolvent(const RunArgs& a) {
  EllipticOperatorSpec op = make_operator(a.cfg);
  BoundaryOperatorSpec bc = make_boundary(a.cfg, op.n);
  double theta = a.cfg.get_double("probe.lambda_theta", 0.0);
  double mu = a.cfg.get_double("probe.lambda_mu", 1.0);
  SpectralPoint sp = spectral_point(theta, mu);

  DiscreteField f;
  std::string inpath = a.cfg.get_string("probe.input_field", "");
  if (!inpath.empty()) {
    f = read_field(inpath);
  } else {
    Grid g = resolve_grid(a, op, theta, mu);
    double p = a.cfg.get_double("grid.p", 2.0);
    f = random_field(g, p, require_seed(a));
  }

  ApplyResult r = apply_resolvent(op, bc, sp, f);
  double resid = boundary_residual(op, bc, sp, f);
  write_field(opath(a, "solution.fld"), r.u);

  nlohmann::json rep;
  rep["lambda_re"] = sp.lambda.real();
  rep["lambda_im"] = sp.lambda.imag();
  rep["theta"] = theta;
  rep["mu"] = mu;
  rep["boundary_residual"] = resid;
  rep["approximate"] = r.approximate;
  rep["input_norm"] = f.norm();
  rep["solution_norm"] = r.u.norm();
  write_json(a, "residual_report.json", rep);
  return 0;
}

int cmd_sector_scan(const RunArgs& a) {
  EllipticOperatorSpec op = make_operator(a.cfg);
  BoundaryOperatorSpec bc = make_boundary(a.cfg, op.n);
  std::vector<double> thetas = a.cfg.has("probe.thetas")
                                   ? a.cfg.get_list("probe.thetas")
                                   : std::vector<double>{kPi / 2, 3 * kPi / 4};
  std::vector<double> mus =
      a.cfg.has("probe.mus")
          ? a.cfg.get_list("probe.mus")
          : geometric(a.cfg.get_double("probe.mu_lo", 1.0), a.cfg.get_double("probe.mu_hi", 100.0),
                      static_cast<int>(a.cfg.get_int("probe.mu_count", 13)));
  int trials = static_cast<int>(a.cfg.get_int("probe.trials", 4));
  int refine = static_cast<int>(a.cfg.get_int("probe.refine", 1));
  std::uint64_t seed = require_seed(a);

  double theta_min = *std::min_element(thetas.begin(), thetas.end());
  double mu_min = *std::min_element(mus.begin(), mus.end());
  Grid g = resolve_grid(a, op, theta_min, mu_min);
  double p = a.cfg.get_double("grid.p", 2.0);

  auto rows = sector_scan(op, bc, thetas, mus, g, p, trials, refine, seed);
  CsvWriter csv(opath(a, "sector_scan.csv"), {"theta", "mu", "lambda_re", "lambda_im", "norm_est"});
  for (const auto& r : rows)
    csv.row({r.theta, r.mu, r.lambda.real(), r.lambda.imag(), r.norm_est});
  return 0;
}

int cmd_hinfty(const RunArgs& a) {
  EllipticOperatorSpec op = make_operator(a.cfg);
  BoundaryOperatorSpec bc = make_boundary(a.cfg, op.n);
  Contour contour = make_contour(a.cfg);
  double eps = a.cfg.get_double("probe.eps", 0.5);
  int members = static_cast<int>(a.cfg.get_int("probe.members", 20));
  int trials = static_cast<int>(a.cfg.get_int("probe.trials", 2));

  CsvWriter csv(opath(a, "hinfty.csv"), {"family_member", "eps", "sup_norm", "ratio"});
  nlohmann::json rep;
  rep["eps"] = eps;
  rep["members"] = members;
  rep["theta_prime"] = contour.theta_prime;
  rep["nodes_per_ray"] = contour.nodes_per_ray;
  if (members == 0) {
    rep["C_est"] = 0.0;
    rep["refine_delta"] = 0.0;
    write_json(a, "hinfty_summary.json", rep);
    return 0;
  }

  std::uint64_t seed = require_seed(a);
  Grid g = resolve_grid(a, op, kPi - contour.theta_prime, contour.mu_min);
  double p = a.cfg.get_double("grid.p", 2.0);
  auto fam = hstar_family(eps, contour.theta_prime, members);
  BoundProbe probe = hinfty_bound_probe(op, bc, fam, contour, g, p, trials, seed);

  for (size_t m = 0; m < fam.size(); ++m)
    csv.row({static_cast<double>(m), fam[m].eps, fam[m].sup_norm, probe.member_ratio[m]});
  rep["C_est"] = probe.C_est;
  rep["refine_delta"] = probe.refine_delta;
  write_json(a, "hinfty_summary.json", rep);
  return 0;
}

int cmd_decay_probe(const RunArgs& a) {
  EllipticOperatorSpec op = make_operator(a.cfg);
  double theta = a.cfg.get_double("probe.theta", kPi / 2);
  std::vector<double> mus =
      a.cfg.has("probe.mus")
          ? a.cfg.get_list("probe.mus")
          : geometric(a.cfg.get_double("probe.mu_lo", 1.0), a.cfg.get_double("probe.mu_hi", 100.0),
                      static_cast<int>(a.cfg.get_int("probe.mu_count", 13)));
  std::string comp_name = a.cfg.get_string("probe.component", "green");
  DecayComponent comp;
  if (comp_name == "pseudo")
    comp = DecayComponent::pseudo;
  else if (comp_name == "green")
    comp = DecayComponent::green;
  else if (comp_name == "poisson")
    comp = DecayComponent::poisson;
  else if (comp_name == "trace")
    comp = DecayComponent::trace;
  else
    throw config_error("probe.component must be pseudo, green, poisson, or trace");

  int nfreq = op.n == 1 ? 1 : 256;
  double Lp = a.cfg.get_double("grid.tangential_length", 2.0 * kPi);
  DecayProbe probe = decay_probe(op, theta, comp, mus, nfreq, Lp);

  CsvWriter csv(opath(a, "decay.csv"), {"mu", "norm_est"});
  for (size_t i = 0; i < probe.mus.size(); ++i) csv.row({probe.mus[i], probe.norms[i]});
  nlohmann::json rep;
  rep["component"] = comp_name;
  rep["theta"] = theta;
  rep["slope"] = probe.fit.slope;
  rep["intercept"] = probe.fit.intercept;
  rep["points_used"] = probe.fit.points_used;
  write_json(a, "decay_summary.json", rep);
  return 0;
}

int cmd_parametrix_report(const RunArgs& a) {
  EllipticOperatorSpec op = make_operator(a.cfg);
  BoundaryOperatorSpec bc = make_boundary(a.cfg, op.n);
  double theta = a.cfg.get_double("probe.theta", kPi / 2);
  int order = static_cast<int>(a.cfg.get_int("probe.order", 3));
  SymbolLattice lat = SymbolLattice::standard(op.n - 1);

  HypoReport cert = verify_hypoellipticity(op, bc, theta, lat);
  nlohmann::json rep;
  rep["pass"] = cert.pass;
  rep["radius"] = std::isfinite(cert.radius) ? cert.radius : -1.0;
  rep["lower_ok"] = cert.lower_ok;
  rep["lower_margin"] = cert.lower_margin;
  rep["stability"] = cert.stability;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : cert.rows) {
    nlohmann::json jr;
    jr["alpha"] = r.alpha;
    jr["beta"] = r.beta;
    jr["constant"] = r.constant;
    jr["finite"] = r.finite;
    jr["shell_sup"] = r.shell_sup;
    jr["cumulative_sup"] = r.cumulative_sup;
    rows.push_back(jr);
  }
  rep["rows"] = rows;

  if (cert.pass) {
    ParametrixResidual res = parametrix_residual(op, bc, theta, order, cert, lat);
    nlohmann::json jr;
    jr["order"] = order;
    jr["radii"] = res.radii;
    jr["sup"] = res.sup;
    jr["slope"] = res.fit.slope;
    jr["identically_zero"] = res.fit.identically_zero;
    rep["residual"] = jr;
  }
  write_json(a, "parametrix_report.json", rep);
  return 0;
}

int cmd_hilbert_probe(const RunArgs& a) {
  EllipticOperatorSpec op = make_operator(a.cfg);
  BoundaryOperatorSpec bc = make_boundary(a.cfg, op.n);
  double theta = a.cfg.get_double("probe.theta", kPi / 2);
  double mu_floor = a.cfg.get_double("probe.mu_floor", 1e-2);
  double node_density = a.cfg.get_double("probe.node_density", 8.0);
  std::vector<double> mu_tops = a.cfg.has("probe.mu_tops")
                                    ? a.cfg.get_list("probe.mu_tops")
                                    : std::vector<double>{16.0, 32.0, 64.0, 128.0};
  std::uint64_t seed = require_seed(a);

  Grid g = resolve_grid(a, op, theta, mu_floor);
  double p = a.cfg.get_double("grid.p", 2.0);
  DiscreteField u = random_field(g, p, seed);
  HilbertProbeResult probe = hilbert_probe(op, bc, theta, u, mu_floor, mu_tops, node_density);

  CsvWriter csv(opath(a, "hilbert.csv"), {"mu_top", "ratio"});
  for (size_t i = 0; i < probe.mu_tops.size(); ++i) csv.row({probe.mu_tops[i], probe.ratios[i]});

  nlohmann::json rep;
  rep["nodes_used"] = probe.nodes_used;
  rep["refine_delta"] = probe.refine_delta;
  if (probe.ratios.size() >= 2) {
    double a1 = probe.ratios[probe.ratios.size() - 2], a2 = probe.ratios.back();
    rep["stabilization"] = std::abs(a2 - a1) / std::max(a2, 1e-30);
  } else {
    rep["stabilization"] = 0.0;
  }
  write_json(a, "hilbert_summary.json", rep);
  return 0;
}

int dispatch(const RunArgs& a) {
  if (a.probe == "resolvent") return cmd_resolvent(a);
  if (a.probe == "sector-scan") return cmd_sector_scan(a);
  if (a.probe == "hinfty") return cmd_hinfty(a);
  if (a.probe == "decay-probe") return cmd_decay_probe(a);
  if (a.probe == "parametrix-report") return cmd_parametrix_report(a);
  if (a.probe == "hilbert-probe") return cmd_hilbert_probe(a);
  throw config_error("unknown probe '" + a.probe +
                     "'; expected resolvent, sector-scan, hinfty, decay-probe, "
                     "parametrix-report, or hilbert-probe");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"operator-calculus probes for half-space boundary value problems"};
  std::string config_path, out_dir = ".", probe;
  long seed = -1;
  int threads = 1;
  app.add_option("--config", config_path, "run configuration file")->required();
  app.add_option("--out", out_dir, "output directory (created if missing)");
  app.add_option("--seed", seed, "seed override for random fields");
  app.add_option("--threads", threads, "worker thread count");
  app.add_option("--probe", probe, "probe name override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    opcal::worker_threads() = std::max(1, threads);
    RunArgs a{ConfigFile::parse_file(config_path), out_dir, probe, seed};
    if (a.probe.empty()) a.probe = a.cfg.get_string("probe.name");
    std::filesystem::create_directories(out_dir);
    return dispatch(a);
  } catch (const opcal::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const opcal::argument_error& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const opcal::instability_error& e) {
    std::cerr << "probe instability: " << e.what() << "\n";
    return 4;
  } catch (const opcal::error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
