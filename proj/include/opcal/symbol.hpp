#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "opcal/expr.hpp"
#include "opcal/lattice.hpp"
#include "opcal/multiindex.hpp"

namespace opcal {

// Symbol class exponents: |d_xi^a d_x^b s| <= C <(xi',zeta)>^{m - rho|a| + delta|b|}.
struct HType {
  double rho = 1.0;
  double delta = 0.0;
};

// A parameter-dependent tangential symbol s(x', xi', zeta) together with the
// metadata the calculus operations track: order, class type, and how many
// derivative orders its construction can be trusted for.
class TangentialSymbol {
 public:
  TangentialSymbol() = default;
  TangentialSymbol(ExprPtr node, int nx, double order, HType type, int supported = kMaxOrder)
      : node_(std::move(node)), nx_(nx), order_(order), type_(type), supported_(supported) {
    if (nx < 0 || nx > kMaxSlots - 1) throw argument_error("tangential dimension out of range");
    if (!node_) throw argument_error("symbol node must be non-null");
  }

  static TangentialSymbol from_callable(int nx, double order, HType type,
                                        std::function<Cplx(const SymbolPoint&)> fn,
                                        double rel_step = 1e-4, int supported = 4) {
    return TangentialSymbol(expr_user(std::move(fn), rel_step), nx, order, type, supported);
  }

  const ExprPtr& node() const { return node_; }
  int nx() const { return nx_; }
  double order() const { return order_; }
  HType type() const { return type_; }
  int supported_order() const { return supported_; }

  Cplx eval(const SymbolPoint& pt) const {
    Evaluator ev(node_, pt);
    return ev.value();
  }

  // alpha: nx tangential covariable orders then the zeta order; beta: nx
  // space-variable orders.
  Cplx deriv(const std::vector<int>& alpha, const std::vector<int>& beta,
             const SymbolPoint& pt) const {
    Evaluator ev(node_, pt);
    return ev.d(make_key(alpha, beta, nx_));
  }

  Evaluator evaluator(const SymbolPoint& pt) const { return Evaluator(node_, pt); }

 private:
  ExprPtr node_;
  int nx_ = 0;
  double order_ = 0.0;
  HType type_{};
  int supported_ = kMaxOrder;
};

// Scaled sup of one derivative over the lattice.  The estimate is a maximum
// over a growing sample set, so refining the lattice can only increase it.
inline double estimate_seminorm(const TangentialSymbol& s, const std::vector<int>& alpha,
                                const std::vector<int>& beta, const SymbolLattice& lat) {
  if (lat.nx != s.nx()) throw argument_error("lattice and symbol dimensions differ");
  DKey key = make_key(alpha, beta, s.nx());
  int atot = key.xi_total();
  int btot = key.x_total();
  double expo = -s.order() + s.type().rho * atot - s.type().delta * btot;
  double sup = 0.0;
  for (size_t ish = 0; ish < lat.radii.size(); ++ish) {
    for (size_t idir = 0; idir < lat.directions.size(); ++idir) {
      Eigen::VectorXd xi;
      double zeta;
      lat.covars(static_cast<int>(ish), static_cast<int>(idir), xi, zeta);
      for (const auto& xp : lat.xpoints) {
        SymbolPoint pt;
        pt.x = xp;
        pt.xi = xi;
        pt.zeta = zeta;
        Evaluator ev(s.node(), pt);
        Cplx v = ev.d(key);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
          throw numerical_error("seminorm evaluation is not finite at " + pt.describe());
        double scaled = std::abs(v) * std::pow(pt.bracket(), expo);
        sup = std::max(sup, scaled);
      }
    }
  }
  return sup;
}

// Truncated symbol composition sum_{|a|<N} (1/a!) d_xi^a p . (-i d_x)^a q.
// The sum runs over tangential multi-indices only: no symbol depends on the
// auxiliary space variable paired with zeta, so those terms vanish
// identically and freezing zeta commutes with this product exactly.
inline TangentialSymbol leibniz_truncate(const TangentialSymbol& p, const TangentialSymbol& q,
                                         int N) {
  if (p.nx() != q.nx()) throw argument_error("composition factors have different dimensions");
  if (N < 1) throw argument_error("composition truncation order must be at least 1");
  if (N - 1 > p.supported_order() || N - 1 > q.supported_order())
    throw argument_error("composition order exceeds a factor's supported derivative order");
  int nx = p.nx();

  std::vector<ExprPtr> terms;
  std::vector<int> a(static_cast<size_t>(std::max(nx, 1)), 0);
  // Enumerates all a in N^nx with |a| <= N-1.
  std::function<void(int, int)> rec = [&](int slot, int remaining) {
    if (slot == nx) {
      DKey kxi, kx;
      double fact = 1.0;
      int tot = 0;
      for (int j = 0; j < nx; ++j) {
        kxi.xi[j] = static_cast<std::uint8_t>(a[static_cast<size_t>(j)]);
        kx.x[j] = static_cast<std::uint8_t>(a[static_cast<size_t>(j)]);
        fact *= factorial(a[static_cast<size_t>(j)]);
        tot += a[static_cast<size_t>(j)];
      }
      // (-i)^tot / a!
      Cplx c = std::pow(Cplx(0.0, -1.0), tot) / fact;
      terms.push_back(
          expr_scale(c, expr_mul(expr_shift(p.node(), kxi), expr_shift(q.node(), kx))));
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      a[static_cast<size_t>(slot)] = v;
      rec(slot + 1, remaining - v);
    }
    a[static_cast<size_t>(slot)] = 0;
  };
  if (nx == 0) {
    terms.push_back(expr_mul(p.node(), q.node()));
  } else {
    rec(0, N - 1);
  }

  HType t{std::min(p.type().rho, q.type().rho), std::max(p.type().delta, q.type().delta)};
  int sup = std::min(p.supported_order(), q.supported_order()) - (N - 1);
  return TangentialSymbol(expr_add(std::move(terms)), nx, p.order() + q.order(), t,
                          std::max(sup, 0));
}

// Pins zeta to the Agmon parameter mu.  Derivatives in zeta of the result
// vanish; everything else evaluates on the frozen fiber.
inline TangentialSymbol agmon_restrict(const TangentialSymbol& p, double mu) {
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw argument_error("Agmon parameter must be finite and nonnegative");
  return TangentialSymbol(expr_freeze_zeta(p.node(), mu), p.nx(), p.order(), p.type(),
                          p.supported_order());
}

// N-step parametrix of p for symbols bounded away from zero outside radius R:
//   q_0 = chi_R / p,   q_{k+1} = q_k + q_k (1 - p # q_k truncated at k+1).
// The cutoff sits in front of 1/p so the product short-circuits where p may
// vanish.  When a lattice is given, |p| >= c is checked on every node with
// radius >= R before any algebra happens.
inline TangentialSymbol hypoelliptic_parametrix(const TangentialSymbol& p, int N, double c,
                                                double R,
                                                const SymbolLattice* precheck = nullptr) {
  if (N < 1) throw argument_error("parametrix needs at least one correction step");
  if (!(c > 0) || !(R > 0)) throw argument_error("parametrix bounds must be positive");
  if (precheck) {
    for (size_t ish = 0; ish < precheck->radii.size(); ++ish) {
      if (precheck->radii[ish] < R) continue;
      for (size_t idir = 0; idir < precheck->directions.size(); ++idir) {
        Eigen::VectorXd xi;
        double zeta;
        precheck->covars(static_cast<int>(ish), static_cast<int>(idir), xi, zeta);
        for (const auto& xp : precheck->xpoints) {
          SymbolPoint pt;
          pt.x = xp;
          pt.xi = xi;
          pt.zeta = zeta;
          Cplx v = p.eval(pt);
          if (!(std::abs(v) >= c))
            throw precondition_error("parametrix lower bound |p| >= " + std::to_string(c) +
                                     " fails at " + pt.describe());
        }
      }
    }
  }

  ExprPtr q0 = expr_mul(expr_radial_cutoff(p.nx(), R), expr_recip(p.node()));
  TangentialSymbol q(q0, p.nx(), -p.order(), p.type(),
                     std::max(p.supported_order() - N, 0));
  for (int k = 0; k < N; ++k) {
    TangentialSymbol comp = leibniz_truncate(p, q, k + 1);
    ExprPtr defect = expr_sub(expr_const(1.0), comp.node());
    ExprPtr next = expr_add(q.node(), expr_mul(q.node(), defect));
    q = TangentialSymbol(next, p.nx(), -p.order(), p.type(), q.supported_order());
  }
  return q;
}

}  // namespace opcal
