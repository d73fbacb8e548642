#pragma once

// The resolvent engine: applies (A_T - lambda)^{-1} as the sum of the free
// whole-line part, the rank-one correction enforcing the Dirichlet trace,
// and the rank-one correction restoring the actual boundary condition.  The
// tangential direction is handled by DFT; each frequency gets closed-form
// normal kernels.  Constant coefficients give the exact discrete composition;
// a variable boundary weight falls back to freezing the amplitude at each
// output point, which is flagged as approximate.

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <unordered_map>
#include <vector>

#include "opcal/degenerate.hpp"
#include "opcal/errors.hpp"
#include "opcal/fit.hpp"
#include "opcal/grid.hpp"
#include "opcal/normal_kernels.hpp"
#include "opcal/parallel.hpp"
#include "opcal/rng.hpp"
#include "opcal/roots.hpp"

namespace opcal {

struct SpectralPoint {
  double theta = 0.0;  // -lambda = e^{i theta} mu^2
  double mu = 1.0;
  Cplx lambda;
};

inline SpectralPoint spectral_point(double theta, double mu) {
  validate_theta(theta);
  if (!(mu > 0) || !std::isfinite(mu))
    throw argument_error("spectral scale mu must be positive and finite");
  SpectralPoint sp;
  sp.theta = theta;
  sp.mu = mu;
  sp.lambda = -std::polar(1.0, theta) * mu * mu;
  return sp;
}

inline constexpr unsigned kPartFree = 1u;
inline constexpr unsigned kPartDirichlet = 2u;
inline constexpr unsigned kPartBoundary = 4u;
inline constexpr unsigned kPartAll = kPartFree | kPartDirichlet | kPartBoundary;

struct ApplyResult {
  DiscreteField u;
  bool approximate = false;
};

namespace detail {

struct EngineCheck {
  int n;
  bool op_const;
  bool bc_const;
};

inline EngineCheck engine_check(const EllipticOperatorSpec& op, const BoundaryOperatorSpec& bc,
                                const Grid& g) {
  if (op.n != 1 && op.n != 2)
    throw argument_error("the kernel engine runs in dimension 1 or 2");
  if (bc.nx != op.n - 1) throw argument_error("boundary operator dimension does not match");
  if (op.n == 1 && g.Mp != 1)
    throw argument_error("dimension 1 needs a collapsed tangential grid (Mp = 1)");
  return {op.n, op.constant_coefficients(), bc.constant_coefficients()};
}

// Kernel data of one tangential frequency at one base point.
struct FreqKernels {
  QuadCoeffs quad;
  KappaPair kp;
  FreeNormalKernel freek;
  SeparableNormalKernel gd;
};

inline FreqKernels freq_kernels(const EllipticOperatorSpec& op, const Eigen::VectorXd& xprime,
                                const Eigen::VectorXd& xiprime, const SpectralPoint& sp) {
  FreqKernels fk;
  fk.quad = boundary_quadratic(op, xprime, xiprime, sp.mu, sp.theta, false);
  fk.kp = kappa_roots(fk.quad);
  fk.freek = free_kernel(fk.kp, fk.quad.a_n);
  fk.gd = dirichlet_correction(fk.kp, fk.quad.a_n);
  return fk;
}

}  // namespace detail

inline ApplyResult apply_resolvent(const EllipticOperatorSpec& op,
                                   const BoundaryOperatorSpec& bc, const SpectralPoint& sp,
                                   const DiscreteField& f, unsigned parts = kPartAll) {
  auto mode = detail::engine_check(op, bc, f.grid);
  const Grid& g = f.grid;
  int Mp = g.Mp, Mn = g.Mn;
  int nx = op.n - 1;

  Eigen::MatrixXcd fhat = f.v;
  dft_forward(fhat);

  ApplyResult out;
  out.u = DiscreteField::zeros(g, f.p);
  out.approximate = !(mode.op_const && mode.bc_const);

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nx);

  if (mode.op_const) {
    // One set of roots per frequency; the Dirichlet block is exact.
    Eigen::MatrixXcd uhat = Eigen::MatrixXcd::Zero(Mp, Mn);
    Eigen::VectorXcd moments(Mp);
    std::vector<KappaPair> kps(static_cast<size_t>(Mp));
    std::vector<double> ans(static_cast<size_t>(Mp));
    for (int k = 0; k < Mp; ++k) {
      Eigen::VectorXd xik(nx);
      if (nx == 1) xik[0] = g.freq(k);
      detail::FreqKernels fk = detail::freq_kernels(op, x0, xik, sp);
      kps[static_cast<size_t>(k)] = fk.kp;
      ans[static_cast<size_t>(k)] = fk.quad.a_n;
      Eigen::VectorXcd prof = fhat.row(k).transpose();
      Eigen::VectorXcd uf;
      Cplx mm;
      apply_free(fk.freek, g.xn, g.Ln, prof, uf, &mm);
      moments[k] = mm;
      if (parts & kPartFree) uhat.row(k) += uf.transpose();
      if (parts & kPartDirichlet) {
        Eigen::VectorXcd ud;
        apply_separable(fk.gd, g.xn, g.Ln, prof, ud, &mm);
        uhat.row(k) += ud.transpose();
      }
    }

    if (parts & kPartBoundary) {
      if (mode.bc_const) {
        double p0 = bc.phi0.eval(x0), p1 = bc.phi1.eval(x0);
        // Dirichlet (phi1 = 0) needs no correction beyond the trace killer.
        for (int k = 0; p1 != 0.0 && k < Mp; ++k) {
          SeparableNormalKernel gt =
              degenerate_correction(p0, p1, kps[static_cast<size_t>(k)], ans[static_cast<size_t>(k)]);
          Cplx gk = gt.amp * moments[k];
          for (int j = 0; j < Mn; ++j)
            uhat(k, j) += gk * std::exp(-gt.rate_x * g.xn[static_cast<size_t>(j)]);
        }
      } else {
        // Frozen-amplitude composition: P(i,k) = e^{i xi_k x_i} amp(x_i, xi_k)
        // m_k / Mp against the decay profiles E(k,j) = e^{-kplus_k x_j}.
        Eigen::MatrixXcd P(Mp, Mp), E(Mp, Mn);
        for (int k = 0; k < Mp; ++k)
          for (int j = 0; j < Mn; ++j)
            E(k, j) = std::exp(-kps[static_cast<size_t>(k)].kplus * g.xn[static_cast<size_t>(j)]);
        for (int i = 0; i < Mp; ++i) {
          Eigen::VectorXd xp(nx);
          if (nx == 1) xp[0] = g.xp(i);
          double p0 = bc.phi0.eval(xp), p1 = bc.phi1.eval(xp);
          for (int k = 0; k < Mp; ++k) {
            Cplx amp = p1 == 0.0
                           ? Cplx(0.0)
                           : degenerate_amp(p0, p1, kps[static_cast<size_t>(k)],
                                            ans[static_cast<size_t>(k)]);
            double ph = nx == 1 ? g.freq(k) * g.xp(i) : 0.0;
            P(i, k) = std::polar(1.0, ph) * amp * moments[k] / static_cast<double>(Mp);
          }
        }
        out.u.v += P * E;
      }
    }

    dft_inverse(uhat);
    out.u.v += uhat;
    return out;
  }

  // Fully variable coefficients: freeze the whole kernel at each output
  // point.  Quadratic in the tangential size; exact for constant input.
  for (int i = 0; i < Mp; ++i) {
    Eigen::VectorXd xp(nx);
    if (nx == 1) xp[0] = g.xp(i);
    double p0 = bc.phi0.eval(xp), p1 = bc.phi1.eval(xp);
    for (int k = 0; k < Mp; ++k) {
      Eigen::VectorXd xik(nx);
      if (nx == 1) xik[0] = g.freq(k);
      detail::FreqKernels fk = detail::freq_kernels(op, xp, xik, sp);
      Eigen::VectorXcd prof = fhat.row(k).transpose();
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(Mn);
      Eigen::VectorXcd tmp;
      Cplx mm;
      apply_free(fk.freek, g.xn, g.Ln, prof, tmp, &mm);
      if (parts & kPartFree) acc += tmp;
      if (parts & kPartDirichlet) {
        apply_separable(fk.gd, g.xn, g.Ln, prof, tmp, &mm);
        acc += tmp;
      }
      if ((parts & kPartBoundary) && p1 != 0.0) {
        SeparableNormalKernel gt = degenerate_correction(p0, p1, fk.kp, fk.quad.a_n);
        apply_separable(gt, g.xn, g.Ln, prof, tmp, &mm);
        acc += tmp;
      }
      double ph = nx == 1 ? g.freq(k) * g.xp(i) : 0.0;
      Cplx w = std::polar(1.0, ph) / static_cast<double>(Mp);
      out.u.v.row(i) += (w * acc).transpose();
    }
  }
  return out;
}

// Residual of the boundary condition T u = phi0 u + phi1 (conormal) at every
// tangential node, computed from the analytic per-frequency traces of the
// kernels, normalized by the size of the conormal data.  The three kernel
// traces cancel pointwise by construction, so this measures wiring, not
// discretization.
inline double boundary_residual(const EllipticOperatorSpec& op, const BoundaryOperatorSpec& bc,
                                const SpectralPoint& sp, const DiscreteField& f) {
  auto mode = detail::engine_check(op, bc, f.grid);
  const Grid& g = f.grid;
  int Mp = g.Mp;
  int nx = op.n - 1;

  Eigen::MatrixXcd fhat = f.v;
  dft_forward(fhat);

  double worst = 0.0, scale = 1e-30;
  std::vector<detail::FreqKernels> cached;
  for (int i = 0; i < Mp; ++i) {
    Eigen::VectorXd xp(nx);
    if (nx == 1) xp[0] = g.xp(i);
    double p0 = bc.phi0.eval(xp), p1 = bc.phi1.eval(xp);
    Cplx trace0 = 0.0, trace1 = 0.0;
    for (int k = 0; k < Mp; ++k) {
      // With constant coefficients the kernels of row 0 serve every row.
      const detail::FreqKernels* fk;
      detail::FreqKernels local;
      if (mode.op_const && i > 0) {
        fk = &cached[static_cast<size_t>(k)];
      } else {
        Eigen::VectorXd xik(nx);
        if (nx == 1) xik[0] = g.freq(k);
        local = detail::freq_kernels(op, xp, xik, sp);
        if (mode.op_const && i == 0) cached.push_back(local);
        fk = mode.op_const && i == 0 ? &cached.back() : &local;
      }
      Cplx mm = weighted_moment(fk->kp.kminus, g.xn, g.Ln, fhat.row(k).transpose());
      Cplx tau = -mm / fk->quad.a_n;  // conormal trace of free + Dirichlet parts
      scale = std::max(scale, std::abs(tau));
      Cplx gk = p1 != 0.0 ? degenerate_amp(p0, p1, fk->kp, fk->quad.a_n) * mm : Cplx(0.0);
      double ph = nx == 1 ? g.freq(k) * g.xp(i) : 0.0;
      Cplx w = std::polar(1.0, ph) / static_cast<double>(Mp);
      trace0 += w * gk;  // gamma0 of free + Dirichlet correction vanishes identically
      trace1 += w * (tau + fk->kp.kplus * gk);
    }
    worst = std::max(worst, std::abs(p0 * trace0 + p1 * trace1));
  }
  return worst / scale;
}

// Defect of the first resolvent identity
//   R(l1) - R(l2) = (l1 - l2) R(l1) R(l2)
// applied to f, relative to ||f||.
inline double resolvent_identity_defect(const EllipticOperatorSpec& op,
                                        const BoundaryOperatorSpec& bc, const SpectralPoint& s1,
                                        const SpectralPoint& s2, const DiscreteField& f) {
  ApplyResult r1 = apply_resolvent(op, bc, s1, f);
  ApplyResult r2 = apply_resolvent(op, bc, s2, f);
  ApplyResult r12 = apply_resolvent(op, bc, s1, r2.u);
  DiscreteField d = r1.u;
  d.v -= r2.u.v;
  d.v -= (s1.lambda - s2.lambda) * r12.u.v;
  return d.norm() / f.norm();
}

// Second-order centered differencing of (A - lambda) u on the engine grid.
// Rows j = 0 and j = Mn-1 are left zero; callers restrict comparisons to the
// interior.  Requires a uniform normal grid.
inline DiscreteField apply_operator_centered(const EllipticOperatorSpec& op,
                                             const DiscreteField& u, Cplx lambda) {
  const Grid& g = u.grid;
  if (g.stretch != 1.0) throw argument_error("centered differencing needs a uniform grid");
  if (op.n != 1 && op.n != 2) throw argument_error("centered differencing runs in dimension 1 or 2");
  double hn = g.Ln / g.Mn;
  double hp = g.hp();
  DiscreteField out = DiscreteField::zeros(g, u.p);
  for (int j = 1; j + 1 < g.Mn; ++j) {
    for (int i = 0; i < g.Mp; ++i) {
      Eigen::VectorXd x(op.n);
      if (op.n == 2) {
        x[0] = g.xp(i);
        x[1] = g.xn[static_cast<size_t>(j)];
      } else {
        x[0] = g.xn[static_cast<size_t>(j)];
      }
      Cplx acc = (op.c0.eval(x) + op.shift - lambda) * u.v(i, j);
      // normal direction
      {
        double ann = op.aij(op.n - 1, op.n - 1).eval(x);
        double bn = op.b[static_cast<size_t>(op.n - 1)].eval(x);
        acc += -ann * (u.v(i, j + 1) - 2.0 * u.v(i, j) + u.v(i, j - 1)) / (hn * hn);
        acc += Cplx(0, -bn) * (u.v(i, j + 1) - u.v(i, j - 1)) / (2.0 * hn);
      }
      if (op.n == 2 && g.Mp > 1) {
        int ip = (i + 1) % g.Mp, im = (i + g.Mp - 1) % g.Mp;
        double att = op.aij(0, 0).eval(x);
        double bt = op.b[0].eval(x);
        acc += -att * (u.v(ip, j) - 2.0 * u.v(i, j) + u.v(im, j)) / (hp * hp);
        acc += Cplx(0, -bt) * (u.v(ip, j) - u.v(im, j)) / (2.0 * hp);
      }
      out.v(i, j) = acc;
    }
  }
  return out;
}

// ---- sector scan ---------------------------------------------------------------

struct SectorSample {
  double theta, mu;
  Cplx lambda;
  double norm_est;
};

// sup estimate of ||lambda R(lambda)|| over random fields, refined by a
// Krylov subspace built from the best probe: the largest Ritz modulus of
// lambda R never exceeds the discrete operator norm and converges to it far
// faster than power iteration when the amplified spectral window is narrow.
// The estimate is a running maximum, so enlarging the trial set or the
// subspace can only push it up.  For p != 2 the refinement falls back to
// power steps measured in the p-norm.
inline std::vector<SectorSample> sector_scan(const EllipticOperatorSpec& op,
                                             const BoundaryOperatorSpec& bc,
                                             const std::vector<double>& thetas,
                                             const std::vector<double>& mus, const Grid& g,
                                             double p, int trials, int refine,
                                             std::uint64_t seed) {
  std::vector<SectorSample> out;
  for (size_t a = 0; a < thetas.size(); ++a)
    for (size_t b = 0; b < mus.size(); ++b) {
      SpectralPoint sp = spectral_point(thetas[a], mus[b]);
      double est = 0.0;
      DiscreteField best;
      double bestr = -1.0;
      for (int t = 0; t < trials; ++t) {
        std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (a * 1315423911u + b * 2654435761u + t + 1));
        DiscreteField f = random_field(g, p, s);
        ApplyResult r = apply_resolvent(op, bc, sp, f);
        double ratio = std::abs(sp.lambda) * r.u.norm() / f.norm();
        est = std::max(est, ratio);
        if (ratio > bestr) {
          bestr = ratio;
          best = r.u;
        }
      }
      if (refine > 0 && p == 2.0) {
        double nb = best.norm();
        if (nb > 0) {
          best.v /= nb;
          std::vector<DiscreteField> q;
          q.reserve(static_cast<size_t>(refine) + 1);
          q.push_back(best);
          Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(refine + 1, refine);
          int built = 0;
          for (int j = 0; j < refine; ++j) {
            ApplyResult r = apply_resolvent(op, bc, sp, q[static_cast<size_t>(j)]);
            DiscreteField w = r.u;
            w.v *= sp.lambda;
            for (int i = 0; i <= j; ++i) {
              Cplx hij = field_dot(q[static_cast<size_t>(i)], w);
              H(i, j) = hij;
              w.v -= hij * q[static_cast<size_t>(i)].v;
            }
            built = j + 1;
            double hw = w.norm();
            // A vanishing remainder means the subspace is invariant.
            if (!(hw > 1e-13 * std::max(est, 1.0))) break;
            H(j + 1, j) = hw;
            w.v /= hw;
            q.push_back(w);
          }
          Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(built, built));
          if (es.info() == Eigen::Success)
            for (int i = 0; i < built; ++i) est = std::max(est, std::abs(es.eigenvalues()[i]));
        }
      } else {
        for (int it = 0; it < refine; ++it) {
          double nb = best.norm();
          if (!(nb > 0)) break;
          best.v /= nb;
          ApplyResult r = apply_resolvent(op, bc, sp, best);
          double ratio = std::abs(sp.lambda) * r.u.norm();
          est = std::max(est, ratio);
          best = r.u;
        }
      }
      out.push_back({thetas[a], mus[b], sp.lambda, est});
    }
  return out;
}

// ---- closed-form decay probes -----------------------------------------------

enum class DecayComponent { pseudo, green, poisson, trace };

struct DecayProbe {
  std::vector<double> mus;
  std::vector<double> norms;
  SlopeFit fit;
};

// Per-frequency operator norms of the pieces of the parameter-dependent
// calculus at p = 2, maximized over a tangential frequency lattice.  The
// boundary pieces carry the parameter bracket <(xi', mu)>^{1/2} that their
// boundary space weighs them with.  All four have closed forms; the probe
// exists to expose their decay order in mu.
inline DecayProbe decay_probe(const EllipticOperatorSpec& op, double theta,
                              DecayComponent comp, const std::vector<double>& mus, int nfreq,
                              double Lp) {
  if (!op.constant_coefficients())
    throw precondition_error("decay probes require constant coefficients");
  if (op.n != 1 && op.n != 2) throw argument_error("decay probes run in dimension 1 or 2");
  int nx = op.n - 1;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nx);

  std::vector<double> freqs;
  if (nx == 0) {
    freqs.push_back(0.0);
  } else {
    for (int m = -nfreq / 2; m < nfreq / 2; ++m)
      freqs.push_back(2.0 * 3.14159265358979323846 * m / Lp);
  }

  DecayProbe out;
  out.mus = mus;
  for (double mu : mus) {
    double sup = 0.0;
    for (double xi : freqs) {
      Eigen::VectorXd xiv(nx);
      if (nx == 1) xiv[0] = xi;
      QuadCoeffs q = boundary_quadratic(op, x0, xiv, mu, theta, false);
      KappaPair kp = kappa_roots(q);
      double br = std::sqrt(1.0 + xi * xi + mu * mu);
      double val = 0.0;
      switch (comp) {
        case DecayComponent::pseudo: {
          // min over real xi_n of |quadratic|: dense scan plus golden refine.
          double S = 3.0 * (1.0 + std::abs(kp.kplus) + std::abs(kp.kminus));
          auto qv = [&](double t) { return std::abs((q.c2 * t + q.c1) * t + q.c0); };
          double bestt = 0.0, bestv = qv(0.0);
          int N = 2000;
          for (int it = -N; it <= N; ++it) {
            double t = S * it / N;
            double v = qv(t);
            if (v < bestv) {
              bestv = v;
              bestt = t;
            }
          }
          double lo = bestt - S / N, hi = bestt + S / N;
          for (int r = 0; r < 60; ++r) {
            double m1 = lo + (hi - lo) * 0.381966, m2 = hi - (hi - lo) * 0.381966;
            if (qv(m1) < qv(m2))
              hi = m2;
            else
              lo = m1;
          }
          bestv = std::min(bestv, qv(0.5 * (lo + hi)));
          val = 1.0 / bestv;
          break;
        }
        case DecayComponent::green:
          val = 1.0 / (q.a_n * std::abs(kp.kplus + kp.kminus) *
                       std::sqrt(2.0 * kp.kplus.real()) * std::sqrt(2.0 * kp.kminus.real()));
          break;
        case DecayComponent::poisson:
          val = std::sqrt(br) / std::sqrt(2.0 * kp.kplus.real());
          break;
        case DecayComponent::trace:
          val = std::sqrt(br) / (q.a_n * std::sqrt(2.0 * kp.kminus.real()));
          break;
      }
      sup = std::max(sup, val);
    }
    out.norms.push_back(sup);
  }
  out.fit = loglog_fit(out.mus, out.norms);
  return out;
}

// ---- scale-integrated boundary correction ------------------------------------

struct HilbertProbeResult {
  std::vector<double> mu_tops;
  std::vector<double> ratios;  // ||integral u|| / ||u||
  int nodes_used = 0;
  double refine_delta = 0.0;
};

// Integrates mu G^T_mu u over (0, mu_top] with geometric trapezoid nodes and
// a quadratic head correction, then repeats at doubled node density.  A
// relative change beyond instab_tol is reported as probe instability.
inline HilbertProbeResult hilbert_probe(const EllipticOperatorSpec& op,
                                        const BoundaryOperatorSpec& bc, double theta,
                                        const DiscreteField& u, double mu_min,
                                        const std::vector<double>& mu_tops,
                                        double node_density = 8.0, double instab_tol = 0.05) {
  if (!(mu_min > 0)) throw argument_error("scale integral needs mu_min > 0");
  if (mu_tops.empty()) throw argument_error("scale integral needs at least one upper limit");

  std::unordered_map<std::uint64_t, Eigen::MatrixXcd> cache;
  auto gt_at = [&](double mu) -> const Eigen::MatrixXcd& {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(mu));
    std::memcpy(&bits, &mu, sizeof(bits));
    auto it = cache.find(bits);
    if (it != cache.end()) return it->second;
    ApplyResult r = apply_resolvent(op, bc, spectral_point(theta, mu), u, kPartBoundary);
    return cache.emplace(bits, std::move(r.u.v)).first->second;
  };

  auto run = [&](double density, double top) {
    // nodes mu_min * 2^{j/density}, last node clamped to top
    std::vector<double> nodes;
    for (int j = 0;; ++j) {
      double m = mu_min * std::pow(2.0, j / density);
      if (m >= top) break;
      nodes.push_back(m);
    }
    nodes.push_back(top);
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(u.v.rows(), u.v.cols());
    for (size_t j = 0; j < nodes.size(); ++j) {
      double lo = j == 0 ? nodes[0] : nodes[j - 1];
      double hi = j + 1 == nodes.size() ? nodes[j] : nodes[j + 1];
      double w = 0.5 * (hi - lo);
      acc += (w * nodes[j]) * gt_at(nodes[j]);
    }
    // head: integral of mu G_mu over (0, mu_min] with G frozen at mu_min
    acc += (0.5 * mu_min * mu_min) * gt_at(mu_min);
    return acc;
  };

  HilbertProbeResult out;
  out.mu_tops = mu_tops;
  double un = u.norm();
  for (double top : mu_tops) {
    Eigen::MatrixXcd coarse = run(node_density, top);
    Eigen::MatrixXcd fine = run(2.0 * node_density, top);
    DiscreteField If = u;
    If.v = fine;
    double nf = If.norm();
    DiscreteField Dc = u;
    Dc.v = fine - coarse;
    double delta = Dc.norm() / std::max(nf, 1e-30);
    out.refine_delta = std::max(out.refine_delta, delta);
    if (delta > instab_tol)
      throw instability_error("scale integral fails to converge under node doubling (delta " +
                              std::to_string(delta) + ")");
    out.ratios.push_back(nf / un);
  }
  out.nodes_used = static_cast<int>(cache.size());
  return out;
}

}  // namespace opcal
