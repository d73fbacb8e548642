#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "opcal/fd_oracle.hpp"
#include "opcal/resolvent.hpp"

using namespace opcal;

namespace {
constexpr double kPi = 3.14159265358979323846;

double rel_l2(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).norm() / b.norm();
}

std::vector<double> geometric(double lo, double hi, int count) {
  std::vector<double> v;
  for (int i = 0; i < count; ++i) v.push_back(lo * std::pow(hi / lo, double(i) / (count - 1)));
  return v;
}
}  // namespace

TEST_CASE("line resolvent matches the difference oracle for classical conditions") {
  int Mn = 512;
  double Ln = 16.0;
  Grid g = Grid::make(2.0 * kPi, 1, Ln, Mn, 1.0);
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(1);
  SpectralPoint sp = spectral_point(0.0, 1.0);
  DiscreteField f = smooth_field(g, 2.0, 5);

  FDGridSpec gs = FDGridSpec::line(Mn, Ln);
  Eigen::VectorXcd fvec(Mn);
  for (int j = 0; j < Mn; ++j) fvec[j] = f.v(0, j);

  struct Case {
    BoundaryOperatorSpec bc;
    bool approx;
  };
  std::vector<Case> cases = {{BoundaryOperatorSpec::dirichlet(0), false},
                             {BoundaryOperatorSpec::neumann(0), false},
                             {BoundaryOperatorSpec::robin(0, 0.7, 1.0), false}};
  for (const auto& c : cases) {
    ApplyResult r = apply_resolvent(op, c.bc, sp, f);
    CHECK(r.approximate == c.approx);
    FDOperator A = FDOperator::assemble(op, c.bc, gs);
    Eigen::VectorXcd ufd = A.solve_resolvent(sp.lambda, fvec);
    Eigen::VectorXcd ueng(Mn);
    for (int j = 0; j < Mn; ++j) ueng[j] = r.u.v(0, j);
    CHECK((ueng - ufd).norm() / ufd.norm() < 0.02);
  }
}

TEST_CASE("plane resolvent matches the difference oracle with tangential coupling") {
  // The oracle caps the strip with a zero condition at Ln while the kernels
  // solve the half-line, so Ln must be deep enough that the far-end value of
  // the half-line solution is below the comparison tolerance.
  int Mp = 32, Mn = 96;
  double Ln = 16.0;
  Grid g = Grid::make(2.0 * kPi, Mp, Ln, Mn, 1.0);
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  SpectralPoint sp = spectral_point(0.0, 1.0);
  DiscreteField f = smooth_field(g, 2.0, 11);
  FDGridSpec gs = FDGridSpec::from_grid(g);

  BoundaryOperatorSpec robin = BoundaryOperatorSpec::robin(1, 0.5, 1.0);
  ApplyResult r = apply_resolvent(op, robin, sp, f);
  CHECK_FALSE(r.approximate);
  FDOperator A = FDOperator::assemble(op, robin, gs);
  Eigen::VectorXcd ufd = A.solve_resolvent(sp.lambda, A.from_field(f));
  CHECK(rel_l2(r.u.v, A.to_field(ufd, g).v) < 0.02);

  BoundaryOperatorSpec deg = BoundaryOperatorSpec::degenerate_sin2(1);
  ApplyResult rd = apply_resolvent(op, deg, sp, f);
  CHECK(rd.approximate);
  FDOperator Ad = FDOperator::assemble(op, deg, gs);
  Eigen::VectorXcd udf = Ad.solve_resolvent(sp.lambda, Ad.from_field(f));
  CHECK(rel_l2(rd.u.v, Ad.to_field(udf, g).v) < 0.03);
}

TEST_CASE("dirichlet trace of the corrected kernel vanishes identically") {
  Grid g = Grid::make(2.0 * kPi, 16, 12.0, 128, 1.0);
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  BoundaryOperatorSpec bc = BoundaryOperatorSpec::dirichlet(1);
  SpectralPoint sp = spectral_point(kPi / 2, 2.0);
  DiscreteField f = random_field(g, 2.0, 99);

  ApplyResult r = apply_resolvent(op, bc, sp, f);
  CHECK(r.u.v.col(0).norm() == 0.0);

  // phi1 = 0 makes the boundary part inert, not merely small
  ApplyResult two = apply_resolvent(op, bc, sp, f, kPartFree | kPartDirichlet);
  CHECK((r.u.v - two.u.v).norm() == 0.0);
}

TEST_CASE("analytic boundary traces cancel for every preset") {
  Grid g = Grid::make(2.0 * kPi, 16, 10.0, 64, 1.0);
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  SpectralPoint sp = spectral_point(3.0 * kPi / 4, 1.5);
  DiscreteField f = random_field(g, 2.0, 7);

  for (const auto& bc :
       {BoundaryOperatorSpec::dirichlet(1), BoundaryOperatorSpec::neumann(1),
        BoundaryOperatorSpec::robin(1, 0.3, 1.2), BoundaryOperatorSpec::degenerate_sin2(1)})
    CHECK(boundary_residual(op, bc, sp, f) < 1e-10);
}

TEST_CASE("resolvent identity defect shrinks at second order in the grid") {
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(1);
  BoundaryOperatorSpec bc = BoundaryOperatorSpec::neumann(0);
  SpectralPoint s1 = spectral_point(0.0, 1.0);
  SpectralPoint s2 = spectral_point(kPi / 2, 2.0);

  // Data localized mid-domain: the half-line kernels are truncated at Ln, and
  // that truncation error is grid-independent, so it must sit far below the
  // interpolation error at every Mn tested here.
  auto defect = [&](int Mn) {
    Grid g = Grid::make(2.0 * kPi, 1, 24.0, Mn, 1.0);
    DiscreteField f = DiscreteField::zeros(g, 2.0);
    for (int j = 0; j < g.Mn; ++j) {
      double y = g.xn[static_cast<size_t>(j)];
      f.v(0, j) = std::exp(-(y - 6.0) * (y - 6.0));
    }
    return resolvent_identity_defect(op, bc, s1, s2, f);
  };
  double d1 = defect(2048), d2 = defect(4096);
  CHECK(d2 < 5e-5);
  CHECK(std::log2(d1 / d2) > 1.8);
}

TEST_CASE("interior equation defect shrinks at second order in the grid") {
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2, 0.3);
  BoundaryOperatorSpec bc = BoundaryOperatorSpec::robin(1, 0.5, 1.0);
  SpectralPoint sp = spectral_point(0.0, 1.0);

  // The centered stencil is the measuring device and its truncation must
  // shrink in both directions, so the tangential grid refines with the normal
  // one; the band-limited field sees no aliasing at either resolution.
  auto defect = [&](int Mp, int Mn) {
    Grid g = Grid::make(2.0 * kPi, Mp, 12.0, Mn, 1.0);
    DiscreteField f = smooth_field(g, 2.0, 21);
    ApplyResult r = apply_resolvent(op, bc, sp, f);
    DiscreteField lhs = apply_operator_centered(op, r.u, sp.lambda);
    double num = 0.0, den = 0.0;
    for (int j = 1; j + 1 < g.Mn; ++j)
      for (int i = 0; i < g.Mp; ++i) {
        num += std::norm(lhs.v(i, j) - f.v(i, j));
        den += std::norm(f.v(i, j));
      }
    return std::sqrt(num / den);
  };
  double d1 = defect(16, 64), d2 = defect(32, 128);
  CHECK(d2 < 0.05);
  CHECK(std::log2(d1 / d2) > 1.7);
}

TEST_CASE("sector scan stays below the self adjoint bound on the imaginary axis") {
  Grid g = Grid::make(2.0 * kPi, 1, 16.0, 256, 1.0);
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(1);
  BoundaryOperatorSpec bc = BoundaryOperatorSpec::dirichlet(0);
  std::vector<double> thetas = {kPi / 2};
  std::vector<double> mus = {1.0, 4.0};

  std::vector<SectorSample> s = sector_scan(op, bc, thetas, mus, g, 2.0, 2, 1, 42);
  REQUIRE(s.size() == 2);
  for (const auto& row : s) {
    CHECK(row.theta == kPi / 2);
    CHECK(std::abs(row.lambda - spectral_point(row.theta, row.mu).lambda) == 0.0);
    CHECK(row.norm_est > 0.2);
    CHECK(row.norm_est < 1.05);
  }

  // identical arguments reproduce identical estimates
  std::vector<SectorSample> again = sector_scan(op, bc, thetas, mus, g, 2.0, 2, 1, 42);
  for (size_t i = 0; i < s.size(); ++i) CHECK(s[i].norm_est == again[i].norm_est);
}

TEST_CASE("closed form decay probes expose the expected orders in mu") {
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2);
  std::vector<double> mus = geometric(1.0, 100.0, 9);
  double theta = kPi / 2;

  DecayProbe ps = decay_probe(op, theta, DecayComponent::pseudo, mus, 64, 2.0 * kPi);
  DecayProbe gr = decay_probe(op, theta, DecayComponent::green, mus, 64, 2.0 * kPi);
  DecayProbe po = decay_probe(op, theta, DecayComponent::poisson, mus, 64, 2.0 * kPi);
  DecayProbe tr = decay_probe(op, theta, DecayComponent::trace, mus, 64, 2.0 * kPi);

  CHECK(std::abs(ps.fit.slope - (-2.0)) < 0.15);
  CHECK(std::abs(gr.fit.slope - (-2.0)) < 0.15);
  CHECK(std::abs(po.fit.slope) < 0.15);
  CHECK(std::abs(tr.fit.slope) < 0.15);

  EllipticOperatorSpec varop = EllipticOperatorSpec::laplace(2);
  varop.a[0] = cos_affine_field(0.3, 1.0, 0.0, 1.0);
  CHECK_THROWS_AS(decay_probe(varop, theta, DecayComponent::green, mus, 8, 2.0 * kPi),
                  precondition_error);
}

TEST_CASE("scale integrated boundary correction converges under node doubling") {
  Grid g = Grid::make(2.0 * kPi, 1, 12.0, 256, 1.0);
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(1);
  BoundaryOperatorSpec bc = BoundaryOperatorSpec::neumann(0);
  DiscreteField u = smooth_field(g, 2.0, 13);

  HilbertProbeResult r = hilbert_probe(op, bc, kPi / 2, u, 0.05, {8.0, 16.0}, 4.0);
  REQUIRE(r.ratios.size() == 2);
  for (double q : r.ratios) {
    CHECK(std::isfinite(q));
    CHECK(q > 0.0);
  }
  CHECK(r.refine_delta <= 0.05);
  CHECK(r.nodes_used > 0);
}

TEST_CASE("engine rejects layouts outside its reach") {
  EllipticOperatorSpec op3 = EllipticOperatorSpec::laplace(3);
  BoundaryOperatorSpec bc2 = BoundaryOperatorSpec::dirichlet(2);
  Grid g = Grid::make(2.0 * kPi, 4, 8.0, 16, 1.0);
  DiscreteField f = random_field(g, 2.0, 1);
  SpectralPoint sp = spectral_point(0.0, 1.0);
  CHECK_THROWS_AS(apply_resolvent(op3, bc2, sp, f), argument_error);

  EllipticOperatorSpec op1 = EllipticOperatorSpec::laplace(1);
  BoundaryOperatorSpec bc0 = BoundaryOperatorSpec::dirichlet(0);
  CHECK_THROWS_AS(apply_resolvent(op1, bc0, sp, f), argument_error);

  CHECK_THROWS_AS(spectral_point(kPi, 1.0), ellipticity_error);
  CHECK_THROWS_AS(spectral_point(0.0, -1.0), argument_error);
}

TEST_CASE("fully variable coefficients fall back to the pointwise frozen kernel") {
  Grid g = Grid::make(2.0 * kPi, 12, 10.0, 48, 1.0);
  EllipticOperatorSpec op = EllipticOperatorSpec::laplace(2, 0.2);
  op.a[0] = cos_affine_field(0.3, 1.0, 0.0, 1.0);
  BoundaryOperatorSpec bc = BoundaryOperatorSpec::neumann(1);
  SpectralPoint sp = spectral_point(0.0, 2.0);
  DiscreteField f = smooth_field(g, 2.0, 17);

  ApplyResult r = apply_resolvent(op, bc, sp, f);
  CHECK(r.approximate);
  CHECK(std::isfinite(r.u.norm()));
  CHECK(r.u.norm() > 0.0);

  // the frozen path coincides with the exact one when coefficients are constant
  EllipticOperatorSpec flat = EllipticOperatorSpec::laplace(2, 0.2);
  ApplyResult exact = apply_resolvent(flat, bc, sp, f);
  EllipticOperatorSpec flatvar = flat;
  flatvar.a[0] = ScalarFieldFn::make([](const Eigen::VectorXd&) { return 1.0; });
  ApplyResult frozen = apply_resolvent(flatvar, bc, sp, f);
  CHECK(frozen.approximate);
  CHECK(rel_l2(frozen.u.v, exact.u.v) < 1e-12);
}
