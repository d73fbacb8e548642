#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "opcal/fit.hpp"
#include "opcal/symbol.hpp"

using namespace opcal;

namespace {

TangentialSymbol poly_xi(int nx) {
  // p = xi_0
  return TangentialSymbol(expr_xi(0), nx, 1.0, HType{1.0, 0.0});
}

TangentialSymbol poly_x(int nx) {
  // q = x_0 (admissible as a zero-order test symbol on compact x sets)
  return TangentialSymbol(expr_x(0), nx, 0.0, HType{1.0, 0.0});
}

}  // namespace

TEST_CASE("truncated composition reproduces the first-order toy value") {
  TangentialSymbol p = poly_xi(1);
  TangentialSymbol q = poly_x(1);
  TangentialSymbol c = leibniz_truncate(p, q, 2);

  SymbolPoint pt = SymbolPoint::make(1);
  pt.xi[0] = 2.5;
  pt.x[0] = 1.5;
  // xi # x = x xi - i
  Cplx expect = Cplx(1.5 * 2.5, -1.0);
  CHECK(std::abs(c.eval(pt) - expect) < 1e-14);
  CHECK(c.order() == 1.0);
}

TEST_CASE("truncated composition is exact on polynomial symbols") {
  // p = xi^2, q = x^2: the composition is the full symbol of the operator
  // u -> -d^2(x^2 u), which is x^2 xi^2 - 4 i x xi - 2.
  TangentialSymbol p(expr_mul(expr_xi(0), expr_xi(0)), 1, 2.0, HType{1.0, 0.0});
  TangentialSymbol q(expr_mul(expr_x(0), expr_x(0)), 1, 0.0, HType{1.0, 0.0});
  TangentialSymbol c = leibniz_truncate(p, q, 3);

  for (double xv : {0.3, 1.0, -2.0})
    for (double xiv : {0.5, 4.0, -1.5}) {
      SymbolPoint pt = SymbolPoint::make(1);
      pt.x[0] = xv;
      pt.xi[0] = xiv;
      Cplx expect = Cplx(xv * xv * xiv * xiv - 2.0, -4.0 * xv * xiv);
      CHECK(std::abs(c.eval(pt) - expect) < 1e-12 * (1.0 + std::abs(expect)));
    }

  // truncating one order earlier drops exactly the -2
  TangentialSymbol c2 = leibniz_truncate(p, q, 2);
  SymbolPoint pt = SymbolPoint::make(1);
  pt.x[0] = 1.0;
  pt.xi[0] = 1.0;
  CHECK(std::abs(c2.eval(pt) - Cplx(1.0, -4.0)) < 1e-13);
}

TEST_CASE("composition metadata follows the calculus bookkeeping") {
  TangentialSymbol p(expr_xi(0), 1, 1.0, HType{1.0, 0.0});
  TangentialSymbol q(expr_x(0), 1, -1.0, HType{1.0, 0.5});
  TangentialSymbol c = leibniz_truncate(p, q, 2);
  CHECK(c.order() == 0.0);
  CHECK(c.type().rho == 1.0);
  CHECK(c.type().delta == 0.5);
  CHECK(c.supported_order() == std::min(p.supported_order(), q.supported_order()) - 1);
}

TEST_CASE("freezing the parameter commutes with truncated composition") {
  // p depends on xi and zeta, q on x; both have exact derivatives
  ExprPtr pn = expr_add(expr_mul(expr_xi(0), expr_xi(0)),
                        expr_scale(Cplx(0.0, 1.0), expr_mul(expr_zeta(), expr_zeta())));
  TangentialSymbol p(pn, 1, 2.0, HType{1.0, 0.0});
  TangentialSymbol q(expr_field(cos_affine_field(1.0, 1.0, 0.2, 0.0)), 1, 0.0, HType{1.0, 0.0});

  double mu = 3.0;
  TangentialSymbol lhs = agmon_restrict(leibniz_truncate(p, q, 3), mu);
  TangentialSymbol rhs = leibniz_truncate(agmon_restrict(p, mu), agmon_restrict(q, mu), 3);

  for (double xv : {0.0, 0.7, 2.2})
    for (double xiv : {0.4, -1.8, 5.0}) {
      SymbolPoint pt = SymbolPoint::make(1);
      pt.x[0] = xv;
      pt.xi[0] = xiv;
      pt.zeta = 9.99;  // must be ignored on both sides
      Cplx a = lhs.eval(pt);
      Cplx b = rhs.eval(pt);
      CHECK(std::abs(a - b) <= 1e-14 * (1.0 + std::abs(a)));
    }
}

TEST_CASE("seminorm estimates respect symbol class scaling") {
  // bracket symbol of order one in type (1,0): first xi-derivative has
  // scaled sup exactly sup |xi| / bracket^1 -> 1 at large radii
  TangentialSymbol s(expr_bracket_pow(1, 1.0), 1, 1.0, HType{1.0, 0.0});
  SymbolLattice lat = SymbolLattice::standard(1);
  double sem = estimate_seminorm(s, {1, 0}, {0}, lat);
  CHECK(sem <= 1.0 + 1e-12);
  CHECK(sem >= 0.99);
  // zeroth seminorm of the order-one symbol is 1 at every point
  double sem0 = estimate_seminorm(s, {0, 0}, {0}, lat);
  CHECK(sem0 == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("seminorm estimation reports non-finite evaluations") {
  TangentialSymbol s = TangentialSymbol::from_callable(
      1, 0.0, HType{1.0, 0.0},
      [](const SymbolPoint& p) {
        return std::abs(p.xi[0]) > 100.0 ? Cplx(std::numeric_limits<double>::infinity())
                                         : Cplx(1.0);
      });
  SymbolLattice lat = SymbolLattice::standard(1);
  CHECK_THROWS_AS(estimate_seminorm(s, {0, 0}, {0}, lat), numerical_error);
}

TEST_CASE("constant-coefficient parametrix is exact beyond the cutoff") {
  // p = 1 + xi^2 + zeta^2 has an x-independent inverse, so the iteration
  // terminates at the reciprocal and the composed defect vanishes.
  TangentialSymbol p(expr_add(expr_const(1.0), expr_radial_sq(1)), 1, 2.0, HType{1.0, 0.0});
  TangentialSymbol q = hypoelliptic_parametrix(p, 2, 0.5, 2.0);
  TangentialSymbol comp = leibniz_truncate(p, q, 3);

  SymbolPoint pt = SymbolPoint::make(1);
  pt.xi[0] = 5.0;  // beyond 2R = 4
  pt.zeta = 1.0;
  CHECK(std::abs(comp.eval(pt) - Cplx(1.0)) < 1e-13);
  CHECK(std::abs(q.eval(pt) - 1.0 / (1.0 + 26.0)) < 1e-14);
  // inside the cutoff the parametrix vanishes identically
  SymbolPoint in = SymbolPoint::make(1);
  in.xi[0] = 1.0;
  CHECK(q.eval(in) == Cplx(0.0));
}

TEST_CASE("parametrix defect decays at the composed order for variable symbols") {
  // elliptic order-two symbol with a smooth x-dependent perturbation
  ExprPtr pn = expr_add(expr_add(expr_const(1.0), expr_radial_sq(1)),
                        expr_mul(expr_field(cos_affine_field(0.3, 1.0, 0.0, 0.0)), expr_xi(0)));
  TangentialSymbol p(pn, 1, 2.0, HType{1.0, 0.0});
  SymbolLattice lat = SymbolLattice::standard(1);
  int N = 2;
  TangentialSymbol q = hypoelliptic_parametrix(p, N, 0.5, 2.0, &lat);
  TangentialSymbol comp = leibniz_truncate(p, q, N + 1);

  std::vector<double> sups(lat.radii.size(), 0.0);
  for (size_t ish = 0; ish < lat.radii.size(); ++ish)
    for (size_t idir = 0; idir < lat.directions.size(); ++idir) {
      Eigen::VectorXd xi;
      double zeta;
      lat.covars(static_cast<int>(ish), static_cast<int>(idir), xi, zeta);
      for (const auto& xp : lat.xpoints) {
        SymbolPoint pt;
        pt.x = xp;
        pt.xi = xi;
        pt.zeta = zeta;
        sups[ish] = std::max(sups[ish], std::abs(1.0 - comp.eval(pt)));
      }
    }
  SlopeFit fit = loglog_fit(lat.radii, sups);
  CHECK(fit.slope <= -1.5);
  CHECK(sups.back() < 1e-3);
}

TEST_CASE("composition order limits are enforced") {
  TangentialSymbol p = poly_xi(1);
  TangentialSymbol lim(expr_x(0), 1, 0.0, HType{1.0, 0.0}, 1);
  CHECK_THROWS_AS(leibniz_truncate(p, lim, 3), argument_error);
  CHECK_NOTHROW(leibniz_truncate(p, lim, 2));
}
