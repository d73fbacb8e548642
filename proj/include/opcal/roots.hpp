#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "opcal/expr.hpp"
#include "opcal/fields.hpp"
#include "opcal/lattice.hpp"
#include "opcal/symbol.hpp"

namespace opcal {

// Admissible rotation angles keep a fixed distance from the negative real
// axis of the spectral parameter.
inline void validate_theta(double theta) {
  const double pi = 3.14159265358979323846;
  if (!std::isfinite(theta) || std::abs(theta) > pi - 0.01)
    throw ellipticity_error("rotation angle " + std::to_string(theta) +
                            " leaves the admissible sector |theta| <= pi - 0.01");
}

// Restricts a field on full space to the boundary x_n = 0, as a field of the
// tangential variables.  Exact derivatives pass through with normal order 0.
inline ScalarFieldFn restrict_to_boundary(const ScalarFieldFn& f, int n) {
  ScalarFieldFn g;
  g.is_constant = f.is_constant;
  auto lift = [n](const Eigen::VectorXd& xp) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x.head(n - 1) = xp;
    return x;
  };
  auto fe = f.eval;
  g.eval = [fe, lift](const Eigen::VectorXd& xp) { return fe(lift(xp)); };
  if (f.deriv) {
    auto fd = f.deriv;
    g.deriv = [fd, lift, n](const Eigen::VectorXd& xp, const std::vector<int>& o) {
      std::vector<int> ofull(static_cast<size_t>(n), 0);
      for (size_t j = 0; j < o.size(); ++j) ofull[j] = o[j];
      return fd(lift(xp), ofull);
    };
  }
  return g;
}

// Coefficients of the boundary symbol as a quadratic in the normal
// covariable, after rotating the spectral parameter onto the ray
// -lambda = e^{i theta} mu^2 and absorbing mu as the zeta covariable:
//   a_theta(x', xi', xi_n, zeta) = c2 xi_n^2 + c1 xi_n + c0.
// principal_only keeps the degree-two part in (xi, zeta) and drops drift,
// zero-order term, and shift.
struct QuadCoeffs {
  Cplx c2, c1, c0;
  double a_n = 0.0;  // real leading coefficient a^{nn}(x', 0)
};

inline QuadCoeffs boundary_quadratic(const EllipticOperatorSpec& op,
                                     const Eigen::VectorXd& xprime,
                                     const Eigen::VectorXd& xiprime, double zeta, double theta,
                                     bool principal_only = false) {
  validate_theta(theta);
  int n = op.n;
  if (xprime.size() != n - 1 || xiprime.size() != n - 1)
    throw argument_error("boundary point dimensions do not match the operator");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  x.head(n - 1) = xprime;

  QuadCoeffs q;
  double ann = op.aij(n - 1, n - 1).eval(x);
  q.a_n = ann;
  q.c2 = ann;

  Cplx c1 = 0.0;
  for (int k = 0; k < n - 1; ++k)
    c1 += (op.aij(k, n - 1).eval(x) + op.aij(n - 1, k).eval(x)) * xiprime[k];
  if (!principal_only) c1 += op.b[static_cast<size_t>(n - 1)].eval(x);
  q.c1 = c1;

  Cplx c0 = 0.0;
  for (int k = 0; k < n - 1; ++k)
    for (int l = 0; l < n - 1; ++l) c0 += op.aij(k, l).eval(x) * xiprime[k] * xiprime[l];
  if (!principal_only) {
    for (int k = 0; k < n - 1; ++k) c0 += op.b[static_cast<size_t>(k)].eval(x) * xiprime[k];
    c0 += op.c0.eval(x) + op.shift;
  }
  c0 += std::polar(1.0, theta) * zeta * zeta;
  q.c0 = c0;
  return q;
}

// Exponential rates of the two half-plane roots of the boundary quadratic.
inline KappaPair kappa_roots(const QuadCoeffs& q) {
  auto [z1, z2] = quadratic_roots(q.c2, q.c1, q.c0);
  return classify_boundary_roots(z1, z2);
}

// The same quadratic as differentiable expressions over (x', xi', zeta).
struct QuadExprs {
  ExprPtr c2, c1, c0;
};

inline QuadExprs boundary_quadratic_exprs(const EllipticOperatorSpec& op, double theta,
                                          bool principal_only = false) {
  validate_theta(theta);
  int n = op.n;
  int nx = n - 1;
  QuadExprs e;
  e.c2 = expr_field(restrict_to_boundary(op.aij(n - 1, n - 1), n));

  std::vector<ExprPtr> c1;
  for (int k = 0; k < nx; ++k) {
    ScalarFieldFn akn = restrict_to_boundary(op.aij(k, n - 1), n);
    ScalarFieldFn ank = restrict_to_boundary(op.aij(n - 1, k), n);
    c1.push_back(expr_mul(expr_add(expr_field(akn), expr_field(ank)), expr_xi(k)));
  }
  if (!principal_only) c1.push_back(expr_field(restrict_to_boundary(op.b[static_cast<size_t>(n - 1)], n)));
  if (c1.empty()) c1.push_back(expr_const(0.0));
  e.c1 = expr_add(std::move(c1));

  std::vector<ExprPtr> c0;
  for (int k = 0; k < nx; ++k)
    for (int l = 0; l < nx; ++l) {
      ScalarFieldFn akl = restrict_to_boundary(op.aij(k, l), n);
      c0.push_back(expr_mul(expr_field(akl), expr_mul(expr_xi(k), expr_xi(l))));
    }
  if (!principal_only) {
    for (int k = 0; k < nx; ++k)
      c0.push_back(expr_mul(expr_field(restrict_to_boundary(op.b[static_cast<size_t>(k)], n)),
                            expr_xi(k)));
    c0.push_back(expr_field(restrict_to_boundary(op.c0, n)));
    c0.push_back(expr_const(op.shift));
  }
  c0.push_back(expr_scale(std::polar(1.0, theta), expr_mul(expr_zeta(), expr_zeta())));
  e.c0 = expr_add(std::move(c0));
  return e;
}

// kappa as a tangential symbol; sign +1 gives the decaying rate for x_n > 0.
// The principal rate is homogeneous of degree one, so it sits in order 1
// with type (1,0).
inline TangentialSymbol kappa_symbol(const EllipticOperatorSpec& op, double theta, int sign,
                                     bool principal_only = false) {
  QuadExprs q = boundary_quadratic_exprs(op, theta, principal_only);
  ExprPtr k = expr_kappa(q.c2, q.c1, q.c0, sign);
  return TangentialSymbol(std::move(k), op.n - 1, 1.0, HType{1.0, 0.0});
}

// Uniform ellipticity margin: one fifth of the smallest normalized decay
// rate of either root over the direction lattice, using the principal
// symbol, which is homogeneous, so unit directions suffice.
inline double ellipticity_margin(const EllipticOperatorSpec& op, double theta,
                                 const SymbolLattice& lat) {
  validate_theta(theta);
  if (lat.nx != op.n - 1) throw argument_error("lattice dimension does not match the operator");
  double worst = std::numeric_limits<double>::infinity();
  for (size_t idir = 0; idir < lat.directions.size(); ++idir) {
    Eigen::VectorXd xi;
    double zeta;
    lat.covars(0, static_cast<int>(idir), xi, zeta);
    double r = lat.radii[0];
    xi /= r;
    zeta /= r;
    for (const auto& xp : lat.xpoints) {
      QuadCoeffs q = boundary_quadratic(op, xp, xi, zeta, theta, true);
      KappaPair kp = kappa_roots(q);
      worst = std::min({worst, kp.kplus.real(), kp.kminus.real()});
    }
  }
  if (!(worst > 0)) throw ellipticity_error("principal boundary roots reach the real axis");
  return 0.2 * worst;
}

}  // namespace opcal
