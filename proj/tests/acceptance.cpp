// Acceptance gate for the operator calculus engine.  Every numbered check
// prints exactly one [PASS] or [FAIL] line with its runtime, and the process
// exits with the number of failures so scripts can gate on the code.  The
// command line determinism check runs the opcal binary passed as argv[1] and
// fails with a note when the path is missing.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "opcal/degenerate.hpp"
#include "opcal/fd_oracle.hpp"
#include "opcal/hinfty.hpp"
#include "opcal/resolvent.hpp"
#include "opcal/rng.hpp"

using namespace opcal;
namespace fs = std::filesystem;

static const double kPi = 3.14159265358979323846;

namespace {

std::string notef(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

std::vector<double> geom(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return v;
}

std::vector<double> lin(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * double(i) / (n - 1));
  return v;
}

double rel_l2(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).norm() / b.norm();
}

struct Gate {
  int failures = 0;

  void run(const char* name, const std::function<std::string()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    std::string note;
    try {
      note = body();
    } catch (const std::exception& e) {
      note = notef("exception: %s", e.what());
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (note.empty()) {
      std::printf("[PASS] %s (%.1f s)\n", name, dt);
    } else {
      ++failures;
      std::printf("[FAIL] %s: %s (%.1f s)\n", name, note.c_str(), dt);
    }
    std::fflush(stdout);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 01: frozen boundary roots ------------------------------------------------

std::string check_roots() {
  auto t0 = std::chrono::steady_clock::now();

  // Pinned case with a hand-computable quadratic: kappa = sqrt(9 + 16) = 5.
  EllipticOperatorSpec lap = EllipticOperatorSpec::laplace(2);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd xi(1);
  xi << 3.0;
  KappaPair pin = kappa_roots(boundary_quadratic(lap, x0, xi, 4.0, 0.0));
  if (std::abs(pin.kplus - 5.0) > 1e-12 || std::abs(pin.kminus - 5.0) > 1e-12)
    return notef("pinned roots off: kplus %.3e kminus %.3e", std::abs(pin.kplus - 5.0),
                 std::abs(pin.kminus - 5.0));

  // Residuals of both roots across a 10 x 10 x 10 lattice on an anisotropic
  // operator with drift, scaled by the size of the quadratic's terms.
  EllipticOperatorSpec op = EllipticOperatorSpec::diag({1.5, 0.7}, 0.4);
  op.b[0] = ScalarFieldFn::constant(0.2);
  op.b[1] = ScalarFieldFn::constant(-0.3);
  double worst = 0.0;
  for (double theta : lin(-2.2, 2.2, 10))
    for (double xv : lin(-12.0, 12.0, 10))
      for (double zeta : geom(0.3, 30.0, 10)) {
        xi[0] = xv;
        QuadCoeffs q = boundary_quadratic(op, x0, xi, zeta, theta);
        KappaPair kp = kappa_roots(q);
        for (Cplx z : {Cplx(0, 1) * kp.kplus, Cplx(0, -1) * kp.kminus}) {
          double scale = std::abs(q.c2) * std::norm(z) + std::abs(q.c1) * std::abs(z) +
                         std::abs(q.c0);
          double res = std::abs((q.c2 * z + q.c1) * z + q.c0) / scale;
          worst = std::max(worst, res);
        }
      }
  if (worst > 1e-12) return notef("worst scaled root residual %.3e > 1e-12", worst);

  double dt = seconds_since(t0);
  if (dt >= 1.0) return notef("took %.2f s, budget 1 s", dt);
  return "";
}

// ---- 02: dirichlet trace annihilation ------------------------------------------

std::string check_trace_annihilation() {
  EllipticOperatorSpec lap = EllipticOperatorSpec::laplace(2);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd xi(1);
  static const double ys[] = {0.05, 0.3, 1.1, 2.7, 6.4};
  double worst = 0.0;
  int iy = 0;
  for (double theta : lin(-2.2, 2.2, 10))
    for (double xv : lin(-12.0, 12.0, 10))
      for (double zeta : geom(0.3, 30.0, 10)) {
        xi[0] = xv;
        QuadCoeffs q = boundary_quadratic(lap, x0, xi, zeta, theta);
        KappaPair kp = kappa_roots(q);
        FreeNormalKernel fk = free_kernel(kp, q.a_n);
        SeparableNormalKernel gd = dirichlet_correction(kp, q.a_n);
        double y = ys[iy++ % 5];
        double tr = std::abs(fk(0.0, y) + gd(0.0, y));
        worst = std::max(worst, tr / std::abs(fk.norm()));
        // The boundary value of the boundary-to-interior kernel is exactly 1.
        if (poisson_kernel(kp)(0.0) != Cplx(1.0, 0.0))
          return notef("poisson boundary value differs from 1 at theta %.2f", theta);
      }
  if (worst > 1e-12) return notef("worst relative boundary trace %.3e > 1e-12", worst);
  return "";
}

// ---- 03: boundary symbol order dichotomy ---------------------------------------

std::string check_order_dichotomy() {
  auto t0 = std::chrono::steady_clock::now();
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  SymbolLattice lat = SymbolLattice::standard(1);

  auto deg = BoundaryOperatorSpec::degenerate_sin2(1);
  HypoReport cd = verify_hypoellipticity(op, deg, kPi / 2, lat);
  OrderDichotomy dd = order_dichotomy(parametrix_sigma(op, deg, kPi / 2, 3, cd), deg, lat);

  auto neu = BoundaryOperatorSpec::neumann(1);
  HypoReport cn = verify_hypoellipticity(op, neu, kPi / 2, lat);
  OrderDichotomy dn = order_dichotomy(parametrix_sigma(op, neu, kPi / 2, 3, cn), neu, lat);

  if (!(dd.raw.slope >= -0.15))
    return notef("degenerate raw symbol decays (slope %.3f < -0.15)", dd.raw.slope);
  if (!(dd.composed.slope <= -0.85))
    return notef("degenerate composition does not gain an order (slope %.3f)", dd.composed.slope);
  if (!(dn.raw.slope <= -0.85))
    return notef("neumann control symbol does not decay (slope %.3f)", dn.raw.slope);
  double dt = seconds_since(t0);
  if (dt >= 30.0) return notef("took %.1f s, budget 30 s", dt);
  return "";
}

// ---- 04: hypoellipticity certificate -------------------------------------------

std::string check_hypoellipticity_certificate() {
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  SymbolLattice lat = SymbolLattice::standard(1);
  HypoReport rep = verify_hypoellipticity(op, BoundaryOperatorSpec::degenerate_sin2(1), kPi / 2,
                                          lat);
  if (rep.rows.empty()) return "certificate has no derivative rows";
  for (const auto& r : rep.rows)
    if (!r.finite) return "a scaled derivative quotient is not finite";
  if (!(rep.stability <= 0.10))
    return notef("top-shell sups still moving by %.1f%%", 100.0 * rep.stability);
  if (!std::isfinite(rep.radius)) return "no shell reaches the decay threshold";
  if (!rep.lower_ok || rep.lower_margin < -1e-12)
    return notef("pointwise lower bound fails (margin %.3e)", rep.lower_margin);
  if (!rep.pass) return "certificate reports failure";
  return "";
}

// ---- 05: resolvent vs finite difference oracle ----------------------------------

std::string check_oracle_equivalence() {
  auto t0 = std::chrono::steady_clock::now();
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  Grid g = Grid::make(2 * kPi, 256, 24.0, 256);
  DiscreteField f = smooth_field(g, 2.0, 21);
  SpectralPoint sp = spectral_point(0.0, 1.0);

  struct Case {
    const char* name;
    BoundaryOperatorSpec bc;
    double tol;
  };
  const Case cases[] = {{"dirichlet", BoundaryOperatorSpec::dirichlet(1), 0.02},
                        {"neumann", BoundaryOperatorSpec::neumann(1), 0.02},
                        {"robin", BoundaryOperatorSpec::robin(1, 0.3, 1.0), 0.02},
                        {"degenerate", BoundaryOperatorSpec::degenerate_sin2(1), 0.05}};
  for (const Case& c : cases) {
    ApplyResult r = apply_resolvent(op, c.bc, sp, f);
    FDOperator A = FDOperator::assemble(op, c.bc, FDGridSpec::from_grid(g));
    Eigen::VectorXcd ufd = A.solve_resolvent(sp.lambda, A.from_field(f));
    double rel = rel_l2(r.u.v, A.to_field(ufd, g).v);
    if (!(rel <= c.tol)) return notef("%s off by %.3e (tol %.2f)", c.name, rel, c.tol);
  }
  double dt = seconds_since(t0);
  if (dt >= 120.0) return notef("took %.1f s, budget 120 s", dt);
  return "";
}

// ---- 06: spectral decay slopes ---------------------------------------------------

std::string check_decay_slopes() {
  auto t0 = std::chrono::steady_clock::now();
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  auto mus = geom(1.0, 100.0, 9);
  DecayProbe green = decay_probe(op, kPi / 2, DecayComponent::green, mus, 64, 2 * kPi);
  DecayProbe poisson = decay_probe(op, kPi / 2, DecayComponent::poisson, mus, 64, 2 * kPi);
  DecayProbe trace = decay_probe(op, kPi / 2, DecayComponent::trace, mus, 64, 2 * kPi);
  if (std::abs(green.fit.slope + 2.0) > 0.15)
    return notef("dirichlet correction slope %.3f not within -2 +- 0.15", green.fit.slope);
  if (std::abs(poisson.fit.slope) > 0.15)
    return notef("boundary-to-interior slope %.3f not within 0 +- 0.15", poisson.fit.slope);
  if (std::abs(trace.fit.slope) > 0.15)
    return notef("interior-to-boundary slope %.3f not within 0 +- 0.15", trace.fit.slope);
  double dt = seconds_since(t0);
  if (dt >= 120.0) return notef("took %.1f s, budget 120 s", dt);
  return "";
}

// ---- 07: sector norm stability ----------------------------------------------------

std::string check_sector_stability() {
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  // Tangential size covers the amplified frequency window up to mu = 100;
  // the normal depth keeps low-mu modes dense.
  Grid g = Grid::make(2 * kPi, 256, 16.0, 128);
  std::vector<double> thetas = {kPi / 2, 3 * kPi / 4};
  auto mus = geom(1.0, 100.0, 13);
  struct Case {
    const char* name;
    BoundaryOperatorSpec bc;
  };
  const Case cases[] = {{"dirichlet", BoundaryOperatorSpec::dirichlet(1)},
                        {"neumann", BoundaryOperatorSpec::neumann(1)},
                        {"robin", BoundaryOperatorSpec::robin(1, 0.3, 1.0)},
                        {"degenerate", BoundaryOperatorSpec::degenerate_sin2(1)}};
  for (const Case& c : cases) {
    auto rows = sector_scan(op, c.bc, thetas, mus, g, 2.0, 3, 12, 1234);
    for (double theta : thetas) {
      std::vector<double> es;
      for (const auto& r : rows)
        if (r.theta == theta) es.push_back(r.norm_est);
      double lo = es[0], hi = es[0];
      for (double e : es) {
        lo = std::min(lo, e);
        hi = std::max(hi, e);
      }
      if (!(hi / lo <= 1.25))
        return notef("%s at theta %.2f varies %.1f%% over mu", c.name, theta,
                     100.0 * (hi / lo - 1.0));
      SlopeFit fit = loglog_fit(mus, es);
      if (!(std::abs(fit.slope) <= 0.1))
        return notef("%s at theta %.2f drifts with slope %.3f", c.name, theta, fit.slope);
    }
  }
  return "";
}

// ---- 08: bounded functional calculus constant --------------------------------------

std::string check_hinfty_bound() {
  auto t0 = std::chrono::steady_clock::now();
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  Grid g = Grid::make(2 * kPi, 16, 8.0, 64);
  Contour c = build_contour(kPi / 2, 1e-4, 1e4, 96);
  struct Case {
    const char* name;
    BoundaryOperatorSpec bc;
  };
  const Case cases[] = {{"dirichlet", BoundaryOperatorSpec::dirichlet(1)},
                        {"neumann", BoundaryOperatorSpec::neumann(1)},
                        {"robin", BoundaryOperatorSpec::robin(1, 0.3, 1.0)},
                        {"degenerate", BoundaryOperatorSpec::degenerate_sin2(1)}};
  for (const Case& cs : cases) {
    double lo = 0.0, hi = 0.0;
    for (double eps : {0.25, 0.5, 0.75}) {
      auto fam = hstar_family(eps, kPi / 2, 20);
      BoundProbe bp = hinfty_bound_probe(op, cs.bc, fam, c, g, 2.0, 2, 99);
      if (!std::isfinite(bp.C_est) || !(bp.C_est > 0))
        return notef("%s eps %.2f gives C_est %.3e", cs.name, eps, bp.C_est);
      if (!(bp.refine_delta <= 0.01))
        return notef("%s eps %.2f moves %.2f%% under node doubling", cs.name, eps,
                     100.0 * bp.refine_delta);
      lo = lo == 0.0 ? bp.C_est : std::min(lo, bp.C_est);
      hi = std::max(hi, bp.C_est);
    }
    if (!(hi / lo <= 2.0))
      return notef("%s constant spreads %.2fx across eps", cs.name, hi / lo);
  }
  double dt = seconds_since(t0);
  if (dt >= 300.0) return notef("took %.1f s, budget 300 s", dt);
  return "";
}

// ---- 09: function calculus cross checks --------------------------------------------

std::string check_function_calculus() {
  // The mass term keeps the spectrum away from zero, so the half-line kernels
  // and the capped-interval oracle describe the same operator to exponential
  // accuracy at every contour node.
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(1, 1.0);
  Grid g = Grid::make(2 * kPi, 1, 16.0, 512);
  BoundaryOperatorSpec bc = BoundaryOperatorSpec::dirichlet(0);
  DiscreteField f = smooth_field(g, 2.0, 9);

  Contour c1 = build_contour(3 * kPi / 4, 1e-4, 1e4, 512);
  ApplyResult fa = apply_function(op, bc, [](Cplx z) { return 1.0 / (1.0 + z); }, c1, f);
  ApplyResult ra = apply_resolvent(op, bc, spectral_point(0.0, 1.0), f);
  double r1 = rel_l2(fa.u.v, ra.u.v);
  if (!(r1 <= 1e-6)) return notef("resolvent reproduction off by %.3e", r1);

  FDOperator A = FDOperator::assemble(op, bc, FDGridSpec::line(512, 16.0));
  Eigen::VectorXcd ff(512);
  for (int j = 0; j < 512; ++j) ff[j] = f.v(0, j);

  auto ratfn = [](Cplx z) { return z / ((1.0 + z) * (1.0 + z)); };
  Contour c2 = build_contour(3 * kPi / 4, 1e-3, 1e3, 384);
  ApplyResult fb = apply_function(op, bc, ratfn, c2, f);
  Eigen::VectorXcd mb = A.matrix_function(ratfn, ff);
  double r2 = (fb.u.v.row(0).transpose() - mb).norm() / mb.norm();
  if (!(r2 <= 0.01)) return notef("rational function off by %.3e", r2);

  Contour c3 = build_contour(kPi / 3, 1e-3, 30.0, 384);
  ApplyResult fc = apply_function(op, bc, [](Cplx z) { return std::exp(-0.1 * z); }, c3, f);
  Eigen::VectorXcd sg = A.semigroup(0.1, ff, 128);
  double r3 = (fc.u.v.row(0).transpose() - sg).norm() / sg.norm();
  if (!(r3 <= 0.02)) return notef("heat value off by %.3e", r3);
  return "";
}

// ---- 10: scale integral stabilization ----------------------------------------------

std::string check_scale_integral() {
  EllipticOperatorSpec op1 = EllipticOperatorSpec::laplace(1);
  Grid g1 = Grid::make(2 * kPi, 1, 12.0, 256);
  DiscreteField u1 = smooth_field(g1, 2.0, 4);
  HilbertProbeResult h1 = hilbert_probe(op1, BoundaryOperatorSpec::neumann(0), kPi / 2, u1, 0.05,
                                        {64.0, 128.0}, 8.0);
  double s1 = std::abs(h1.ratios[1] - h1.ratios[0]) / std::max(h1.ratios[1], 1e-30);
  if (!(s1 <= 0.02)) return notef("neumann tail still moves %.2f%%", 100.0 * s1);

  EllipticOperatorSpec op2 = EllipticOperatorSpec::laplace(2);
  Grid g2 = Grid::make(2 * kPi, 16, 12.0, 96);
  DiscreteField u2 = smooth_field(g2, 2.0, 6);
  HilbertProbeResult h2 = hilbert_probe(op2, BoundaryOperatorSpec::degenerate_sin2(1), kPi / 2,
                                        u2, 0.05, {64.0, 128.0}, 8.0);
  double s2 = std::abs(h2.ratios[1] - h2.ratios[0]) / std::max(h2.ratios[1], 1e-30);
  if (!(s2 <= 0.02)) return notef("degenerate tail still moves %.2f%%", 100.0 * s2);
  return "";
}

// ---- 11: command line determinism ---------------------------------------------------

std::string g_cli;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

int run_cli(const fs::path& dir, const std::string& args) {
  std::string cmd = g_cli + " " + args + " >" + (dir / "run.log").string() + " 2>&1";
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string check_cli_determinism() {
  if (g_cli.empty()) return "path of the opcal binary was not passed as argv[1]";

  fs::path scratch = fs::absolute("acceptance_cli");
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  struct Probe {
    const char* name;
    const char* cfg;
  };
  const Probe probes[] = {
      {"resolvent",
       "[operator]\ndim = 2\npreset = laplace\n\n[boundary]\npreset = degenerate_sin2\n\n"
       "[grid]\ntangential_points = 16\nnormal_points = 32\nnormal_length = 8\n\n"
       "[probe]\nname = resolvent\nlambda_theta = 0\nlambda_mu = 1\nseed = 7\n"},
      {"sector-scan",
       "[operator]\ndim = 2\npreset = laplace\n\n[boundary]\npreset = neumann\n\n"
       "[grid]\ntangential_points = 8\nnormal_points = 32\nnormal_length = 6\n\n"
       "[probe]\nname = sector-scan\nthetas = 1.5707963267948966\nmus = 1, 2\n"
       "trials = 1\nrefine = 2\nseed = 11\n"},
      {"hinfty",
       "[operator]\ndim = 1\npreset = laplace\n\n[boundary]\npreset = dirichlet\n\n"
       "[grid]\ntangential_points = 1\nnormal_points = 64\nnormal_length = 8\n\n"
       "[contour]\nangle = 1.5707963267948966\nmu_min = 0.01\nmu_max = 100\nnodes = 24\n\n"
       "[probe]\nname = hinfty\nmembers = 4\neps = 0.5\ntrials = 1\nseed = 5\n"},
      {"decay-probe",
       "[operator]\ndim = 1\npreset = laplace\n\n"
       "[probe]\nname = decay-probe\ncomponent = green\ntheta = 1.5707963267948966\n"
       "mu_lo = 1\nmu_hi = 100\nmu_count = 5\n"},
      {"parametrix-report",
       "[operator]\ndim = 2\npreset = laplace\n\n[boundary]\npreset = degenerate_sin2\n\n"
       "[probe]\nname = parametrix-report\n"},
      {"hilbert-probe",
       "[operator]\ndim = 1\npreset = laplace\n\n[boundary]\npreset = neumann\n\n"
       "[grid]\ntangential_points = 1\nnormal_points = 64\nnormal_length = 10\n\n"
       "[probe]\nname = hilbert-probe\ntheta = 1.5707963267948966\nmu_floor = 0.05\n"
       "mu_tops = 4, 8\nnode_density = 8\nseed = 3\n"},
  };

  for (const Probe& p : probes) {
    fs::path cfg = scratch / (std::string(p.name) + ".cfg");
    std::ofstream(cfg, std::ios::binary) << p.cfg;
    fs::path out1 = scratch / (std::string(p.name) + "_a");
    fs::path out2 = scratch / (std::string(p.name) + "_b");
    for (const fs::path& out : {out1, out2}) {
      int rc = run_cli(scratch, "--config " + cfg.string() + " --out " + out.string());
      if (rc != 0) return notef("%s exited with %d", p.name, rc);
    }
    int compared = 0;
    for (const auto& e : fs::directory_iterator(out1)) {
      fs::path twin = out2 / e.path().filename();
      if (!fs::exists(twin)) return notef("%s rerun lacks %s", p.name, e.path().filename().c_str());
      if (slurp(e.path()) != slurp(twin))
        return notef("%s output %s differs between runs", p.name, e.path().filename().c_str());
      ++compared;
    }
    if (compared == 0) return notef("%s produced no output files", p.name);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli = argv[1];

  Gate gate;
  gate.run("01 frozen boundary roots", check_roots);
  gate.run("02 dirichlet trace annihilation", check_trace_annihilation);
  gate.run("03 boundary symbol order dichotomy", check_order_dichotomy);
  gate.run("04 hypoellipticity certificate", check_hypoellipticity_certificate);
  gate.run("05 resolvent vs finite difference oracle", check_oracle_equivalence);
  gate.run("06 spectral decay slopes", check_decay_slopes);
  gate.run("07 sector norm stability", check_sector_stability);
  gate.run("08 bounded functional calculus constant", check_hinfty_bound);
  gate.run("09 function calculus cross checks", check_function_calculus);
  gate.run("10 scale integral stabilization", check_scale_integral);
  gate.run("11 command line determinism", check_cli_determinism);
  return gate.failures;
}
