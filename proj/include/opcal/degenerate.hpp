#pragma once

// The degenerate boundary factor sigma = phi1 kappa_plus + phi0 and the
// machinery around it: a numerical hypoellipticity certificate, the
// parametrix built on that certificate, the order dichotomy between sigma's
// inverse alone and its composition with phi1, and the resulting boundary
// correction amplitude.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "opcal/fields.hpp"
#include "opcal/fit.hpp"
#include "opcal/lattice.hpp"
#include "opcal/normal_kernels.hpp"
#include "opcal/roots.hpp"
#include "opcal/symbol.hpp"

namespace opcal {

inline TangentialSymbol field_symbol(const ScalarFieldFn& f, int nx) {
  return TangentialSymbol(expr_field(f), nx, 0.0, HType{1.0, 0.0});
}

// sigma(x', xi', zeta) = phi1(x') kappa_plus(x', xi', zeta) + phi0(x').
// Tagged with type (1, 1/2): that is the class its parametrix lives in.
inline TangentialSymbol boundary_factor_symbol(const EllipticOperatorSpec& op,
                                               const BoundaryOperatorSpec& bc, double theta,
                                               bool principal_only = true) {
  if (bc.nx != op.n - 1) throw argument_error("boundary operator dimension does not match");
  TangentialSymbol kp = kappa_symbol(op, theta, +1, principal_only);
  ExprPtr s = expr_add(expr_mul(expr_field(bc.phi1), kp.node()), expr_field(bc.phi0));
  return TangentialSymbol(std::move(s), bc.nx, 1.0, HType{1.0, 0.5});
}

struct HypoRow {
  std::vector<int> alpha;  // tangential covariable orders, then zeta
  std::vector<int> beta;   // space orders
  std::vector<double> shell_sup;       // scaled sup per shell
  std::vector<double> cumulative_sup;  // running max across shells
  double constant = 0.0;
  bool finite = true;
};

struct HypoReport {
  double radius = std::numeric_limits<double>::infinity();  // shells >= radius carry the bound
  double lower_margin = 0.0;  // min of |sigma| - (phi0 + phi1) on those shells
  bool lower_ok = false;
  std::vector<HypoRow> rows;
  double stability = 0.0;  // worst relative step of the cumulative sups at the top shell
  bool pass = false;
};

// Checks the two halves of the hypoellipticity estimate on the lattice:
// the pointwise lower bound |sigma| >= phi0 + phi1 wherever the decay rate
// has reached Re kappa_plus >= 1, and boundedness of the scaled derivative
// quotients |d^beta_x d^alpha_xi sigma / sigma| <(xi',zeta)>^{|alpha|-|beta|/2}.
// Stability is judged on the cumulative sups: individual shells of estimates
// that are far from saturated keep decaying, which is consistent with the
// bound, not evidence against it.
inline HypoReport verify_hypoellipticity(const EllipticOperatorSpec& op,
                                         const BoundaryOperatorSpec& bc, double theta,
                                         const SymbolLattice& lat, int max_order = 3) {
  TangentialSymbol sigma = boundary_factor_symbol(op, bc, theta, true);
  TangentialSymbol kp = kappa_symbol(op, theta, +1, true);
  int nx = sigma.nx();
  size_t nshell = lat.radii.size();

  HypoReport rep;

  // Find the first shell index from which Re kappa_plus >= 1 everywhere.
  std::vector<double> min_rek(nshell, std::numeric_limits<double>::infinity());
  for (size_t ish = 0; ish < nshell; ++ish)
    for (size_t idir = 0; idir < lat.directions.size(); ++idir) {
      Eigen::VectorXd xi;
      double zeta;
      lat.covars(static_cast<int>(ish), static_cast<int>(idir), xi, zeta);
      for (const auto& xp : lat.xpoints) {
        SymbolPoint pt;
        pt.x = xp;
        pt.xi = xi;
        pt.zeta = zeta;
        min_rek[ish] = std::min(min_rek[ish], kp.eval(pt).real());
      }
    }
  size_t first_shell = nshell;
  for (size_t j = nshell; j-- > 0;) {
    if (min_rek[j] >= 1.0)
      first_shell = j;
    else
      break;
  }
  if (first_shell < nshell) rep.radius = lat.radii[first_shell];

  // Row layout: every nonzero (alpha, zeta order, beta) with total <= max_order.
  std::vector<DKey> keys;
  {
    std::vector<int> alpha(static_cast<size_t>(nx) + 1, 0), beta(static_cast<size_t>(nx), 0);
    std::function<void(int, int)> rec = [&](int slot, int remaining) {
      int nslots = 2 * nx + 1;
      if (slot == nslots) {
        DKey k = make_key(alpha, beta, nx);
        if (!k.zero()) {
          keys.push_back(k);
          HypoRow row;
          row.alpha = alpha;
          row.beta = beta;
          row.shell_sup.assign(nshell, 0.0);
          rep.rows.push_back(std::move(row));
        }
        return;
      }
      for (int v = 0; v <= remaining; ++v) {
        if (slot <= nx)
          alpha[static_cast<size_t>(slot)] = v;
        else
          beta[static_cast<size_t>(slot - nx - 1)] = v;
        rec(slot + 1, remaining - v);
      }
      if (slot <= nx)
        alpha[static_cast<size_t>(slot)] = 0;
      else
        beta[static_cast<size_t>(slot - nx - 1)] = 0;
    };
    rec(0, max_order);
  }

  double lower_margin = std::numeric_limits<double>::infinity();
  for (size_t ish = 0; ish < nshell; ++ish) {
    for (size_t idir = 0; idir < lat.directions.size(); ++idir) {
      Eigen::VectorXd xi;
      double zeta;
      lat.covars(static_cast<int>(ish), static_cast<int>(idir), xi, zeta);
      for (const auto& xp : lat.xpoints) {
        SymbolPoint pt;
        pt.x = xp;
        pt.xi = xi;
        pt.zeta = zeta;
        Evaluator ev(sigma.node(), pt);
        Cplx s0 = ev.value();
        double mag = std::abs(s0);
        if (ish >= first_shell && first_shell < nshell) {
          double floor_here = bc.phi0.eval(xp) + bc.phi1.eval(xp);
          lower_margin = std::min(lower_margin, mag - floor_here);
        }
        double br = pt.bracket();
        for (size_t r = 0; r < keys.size(); ++r) {
          Cplx dv = ev.d(keys[r]);
          double expo = keys[r].xi_total() - 0.5 * keys[r].x_total();
          double scaled = std::abs(dv) / mag * std::pow(br, expo);
          if (!std::isfinite(scaled)) {
            rep.rows[r].finite = false;
            continue;
          }
          rep.rows[r].shell_sup[ish] = std::max(rep.rows[r].shell_sup[ish], scaled);
        }
      }
    }
  }

  rep.lower_ok = first_shell < nshell && lower_margin >= -1e-12;
  rep.lower_margin = first_shell < nshell ? lower_margin : 0.0;

  bool all_finite = true;
  double stability = 0.0;
  for (auto& row : rep.rows) {
    row.cumulative_sup.assign(nshell, 0.0);
    double run = 0.0;
    for (size_t j = 0; j < nshell; ++j) {
      run = std::max(run, row.shell_sup[j]);
      row.cumulative_sup[j] = run;
    }
    row.constant = run;
    all_finite = all_finite && row.finite;
    if (nshell >= 2 && row.constant > 0) {
      double a = row.cumulative_sup[nshell - 2], b = row.cumulative_sup[nshell - 1];
      stability = std::max(stability, (b - a) / b);
    }
  }
  rep.stability = stability;
  rep.pass = rep.lower_ok && all_finite && stability <= 0.10;
  return rep;
}

// Parametrix of sigma in the (1, 1/2) class, of order -1, with the cutoff
// placed at half the certified radius so the transition region has finished
// before the first certified shell.
inline TangentialSymbol parametrix_sigma(const EllipticOperatorSpec& op,
                                         const BoundaryOperatorSpec& bc, double theta, int N,
                                         const HypoReport& cert) {
  if (!std::isfinite(cert.radius))
    throw precondition_error("hypoellipticity certificate has no valid radius");
  TangentialSymbol sigma = boundary_factor_symbol(op, bc, theta, true);
  double c = std::max(bc.floor_c, 1e-8);
  TangentialSymbol q = hypoelliptic_parametrix(sigma, N, c, 0.5 * cert.radius, nullptr);
  return TangentialSymbol(q.node(), q.nx(), -1.0, HType{1.0, 0.5}, q.supported_order());
}

struct ParametrixResidual {
  std::vector<double> radii;
  std::vector<double> sup;  // sup |1 - sigma # q| per shell
  SlopeFit fit;             // fitted over certified shells only
};

// Residual of the right parametrix under truncated composition.  Shells
// inside the certificate radius still see the cutoff transition, so only
// the certified shells enter the slope fit.
inline ParametrixResidual parametrix_residual(const EllipticOperatorSpec& op,
                                              const BoundaryOperatorSpec& bc, double theta,
                                              int N, const HypoReport& cert,
                                              const SymbolLattice& lat) {
  TangentialSymbol sigma = boundary_factor_symbol(op, bc, theta, true);
  TangentialSymbol q = parametrix_sigma(op, bc, theta, N, cert);
  TangentialSymbol sq = leibniz_truncate(sigma, q, N);

  ParametrixResidual out;
  out.radii = lat.radii;
  size_t nshell = lat.radii.size();
  out.sup.assign(nshell, 0.0);
  for (size_t ish = 0; ish < nshell; ++ish)
    for (size_t idir = 0; idir < lat.directions.size(); ++idir) {
      Eigen::VectorXd xi;
      double zeta;
      lat.covars(static_cast<int>(ish), static_cast<int>(idir), xi, zeta);
      for (const auto& xp : lat.xpoints) {
        SymbolPoint pt;
        pt.x = xp;
        pt.xi = xi;
        pt.zeta = zeta;
        double r = std::abs(1.0 - sq.eval(pt));
        out.sup[ish] = std::max(out.sup[ish], r);
      }
    }

  std::vector<double> fr, fv;
  for (size_t ish = 0; ish < nshell; ++ish)
    if (lat.radii[ish] >= cert.radius - 1e-12) {
      fr.push_back(lat.radii[ish]);
      fv.push_back(out.sup[ish]);
    }
  out.fit = loglog_fit(fr, fv);
  return out;
}

struct OrderDichotomy {
  std::vector<double> radii;
  std::vector<double> raw_sup;       // sup |s| per shell
  std::vector<double> composed_sup;  // sup |s # phi1| per shell
  SlopeFit raw;
  SlopeFit composed;
};

// Measures the decay order of an order -1 boundary symbol alone and of its
// truncated composition with the degenerate weight phi1.  For nondegenerate
// weights both decay one order; when phi1 vanishes somewhere, the raw sup
// stalls near order zero while the composition still gains a full order.
inline OrderDichotomy order_dichotomy(const TangentialSymbol& s, const BoundaryOperatorSpec& bc,
                                      const SymbolLattice& lat, int N = 3) {
  if (s.nx() != bc.nx) throw argument_error("symbol and boundary dimensions differ");
  TangentialSymbol phi1 = field_symbol(bc.phi1, bc.nx);
  TangentialSymbol comp = leibniz_truncate(s, phi1, N);

  OrderDichotomy out;
  out.radii = lat.radii;
  size_t nshell = lat.radii.size();
  out.raw_sup.assign(nshell, 0.0);
  out.composed_sup.assign(nshell, 0.0);
  for (size_t ish = 0; ish < nshell; ++ish)
    for (size_t idir = 0; idir < lat.directions.size(); ++idir) {
      Eigen::VectorXd xi;
      double zeta;
      lat.covars(static_cast<int>(ish), static_cast<int>(idir), xi, zeta);
      for (const auto& xp : lat.xpoints) {
        SymbolPoint pt;
        pt.x = xp;
        pt.xi = xi;
        pt.zeta = zeta;
        out.raw_sup[ish] = std::max(out.raw_sup[ish], std::abs(s.eval(pt)));
        out.composed_sup[ish] = std::max(out.composed_sup[ish], std::abs(comp.eval(pt)));
      }
    }
  out.raw = loglog_fit(out.radii, out.raw_sup);
  out.composed = loglog_fit(out.radii, out.composed_sup);
  return out;
}

// Amplitude of the boundary correction restoring T u = 0 at one frozen
// frequency: with tau the conormal trace of the Dirichlet part, the
// boundary equation sigma g + phi1 tau = 0 gives the rank-one kernel
// (phi1 / (a_n sigma)) exp(-kplus x) exp(-kminus y).
inline Cplx degenerate_amp(double phi0v, double phi1v, const KappaPair& kp, double a_n) {
  Cplx sigma = phi1v * kp.kplus + phi0v;
  if (std::abs(sigma) < 1e-14)
    throw ellipticity_error("boundary factor sigma vanishes at a frozen frequency");
  return phi1v / (a_n * sigma);
}

inline SeparableNormalKernel degenerate_correction(double phi0v, double phi1v,
                                                   const KappaPair& kp, double a_n) {
  return separable_kernel(degenerate_amp(phi0v, phi1v, kp, a_n), kp.kplus, kp.kminus);
}

}  // namespace opcal
