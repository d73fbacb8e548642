#pragma once

// Closed-form kernels of the model problem on the half-line, per frozen
// tangential frequency: the free resolvent kernel, the rank-one boundary
// corrections, the boundary-to-interior (Poisson) kernel, and the
// interior-to-boundary trace kernel.  The convention for the conormal is
// gamma1 u = -du/dx_n at x_n = 0 (exterior normal of the half-space).

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "opcal/errors.hpp"
#include "opcal/expr.hpp"

namespace opcal {

inline void require_decaying(Cplx rate, const char* what) {
  if (!(rate.real() > 0) || !std::isfinite(rate.real()) || !std::isfinite(rate.imag()))
    throw ellipticity_error(std::string(what) + " has non-decaying exponential rate");
}

// Kernel of (a_n (-d^2/dx^2 + ...) )^{-1} on the whole line, restricted to
// x, y >= 0: exp(-kplus (x-y)) above the diagonal, exp(-kminus (y-x)) below,
// both divided by a_n (kplus + kminus).
struct FreeNormalKernel {
  Cplx kplus, kminus;
  double a_n = 1.0;

  Cplx norm() const { return 1.0 / (a_n * (kplus + kminus)); }

  Cplx operator()(double x, double y) const {
    return norm() * (x >= y ? std::exp(-kplus * (x - y)) : std::exp(-kminus * (y - x)));
  }
};

inline FreeNormalKernel free_kernel(const KappaPair& kp, double a_n) {
  require_decaying(kp.kplus, "free kernel");
  require_decaying(kp.kminus, "free kernel");
  if (!(a_n > 0)) throw ellipticity_error("free kernel needs a positive leading coefficient");
  return FreeNormalKernel{kp.kplus, kp.kminus, a_n};
}

// amp * exp(-rate_x x) * exp(-rate_y y); the form of every boundary
// correction at one frequency.
struct SeparableNormalKernel {
  Cplx amp, rate_x, rate_y;

  Cplx operator()(double x, double y) const {
    return amp * std::exp(-rate_x * x - rate_y * y);
  }
};

inline SeparableNormalKernel separable_kernel(Cplx amp, Cplx rate_x, Cplx rate_y) {
  require_decaying(rate_x, "separable kernel");
  require_decaying(rate_y, "separable kernel");
  return SeparableNormalKernel{amp, rate_x, rate_y};
}

// Correction that cancels the free kernel's trace on x = 0, producing the
// Dirichlet resolvent kernel.
inline SeparableNormalKernel dirichlet_correction(const KappaPair& kp, double a_n) {
  return separable_kernel(-1.0 / (a_n * (kp.kplus + kp.kminus)), kp.kplus, kp.kminus);
}

// Solution of the frozen equation with boundary value one: exp(-kplus x).
struct PoissonNormalKernel {
  Cplx kplus;
  Cplx operator()(double x) const { return std::exp(-kplus * x); }
};

inline PoissonNormalKernel poisson_kernel(const KappaPair& kp) {
  require_decaying(kp.kplus, "boundary-to-interior kernel");
  return PoissonNormalKernel{kp.kplus};
}

// Principal symbol of the Dirichlet-to-conormal map of the frozen problem.
inline Cplx dtn_value(const KappaPair& kp) { return kp.kplus; }

// Conormal trace of the Dirichlet resolvent applied to f:
// gamma1 (Q + G) f = int t(y) f(y) dy with t(y) = -exp(-kminus y) / a_n.
struct TraceNormalKernel {
  Cplx kminus;
  double a_n = 1.0;
  Cplx operator()(double y) const { return -std::exp(-kminus * y) / a_n; }
};

inline TraceNormalKernel trace_kernel(const KappaPair& kp, double a_n) {
  require_decaying(kp.kminus, "trace kernel");
  return TraceNormalKernel{kp.kminus, a_n};
}

// ---- quadrature application on a normal grid ---------------------------------

// Product-integration weights of one panel: the integral of exp(-rate s)
// against the linear interpolant of (f0, f1) on [0, d] is w0 f0 + w1 f1.
// Exact in the rate, so the discrete kernels keep the uniform resolvent
// bounds at large |lambda|, where a trapezoid panel would overshoot the
// exponential mass by a factor of rate d / 2.
inline void exp_panel_weights(Cplx rate, double d, Cplx& w0, Cplx& w1) {
  Cplx z = rate * d;
  if (std::abs(z) < 0.5) {
    // Series in z; the closed forms below lose all digits as z -> 0.
    Cplx zk = 1.0, s0 = 0.0, s1 = 0.0;
    double kfact = 1.0;
    for (int k = 0; k <= 14; ++k) {
      if (k > 0) {
        zk *= -z;
        kfact *= k;
      }
      s0 += zk / (kfact * (k + 1.0) * (k + 2.0));
      s1 += zk / (kfact * (k + 2.0));
    }
    w0 = d * s0;
    w1 = d * s1;
    return;
  }
  Cplx E = std::exp(-z);
  w0 = d * (z - 1.0 + E) / (z * z);
  w1 = d * (1.0 - (1.0 + z) * E) / (z * z);
}

// int_0^Ln exp(-rate y) f(y) dy with f piecewise linear on the nodes and
// falling linearly to zero at y = Ln.
inline Cplx weighted_moment(Cplx rate, const std::vector<double>& xn, double Ln,
                            const Eigen::VectorXcd& f) {
  int M = static_cast<int>(xn.size());
  Cplx w0, w1;
  // Backward sweep keeps every partial product of panel factors bounded.
  double dtail = Ln - xn[static_cast<size_t>(M - 1)];
  exp_panel_weights(rate, dtail, w0, w1);
  Cplx em = w0 * f[M - 1];
  for (int i = M - 2; i >= 0; --i) {
    double dx = xn[static_cast<size_t>(i + 1)] - xn[static_cast<size_t>(i)];
    Cplx E = std::exp(-rate * dx);
    exp_panel_weights(rate, dx, w0, w1);
    em = E * em + (w0 * f[i] + w1 * f[i + 1]);
  }
  return em;
}

// Applies the free kernel to samples of f with product-integration panels
// in O(M): forward recurrence for the part below the diagonal, backward for
// the part above.  The backward accumulator at the first node is exactly the
// kminus-weighted moment, which the boundary corrections reuse; it is
// returned through moment_minus when requested.
inline void apply_free(const FreeNormalKernel& K, const std::vector<double>& xn, double Ln,
                       const Eigen::VectorXcd& f, Eigen::VectorXcd& out,
                       Cplx* moment_minus = nullptr) {
  int M = static_cast<int>(xn.size());
  if (M < 2 || xn[0] != 0.0) throw argument_error("normal grid must start at zero and have >= 2 nodes");
  Eigen::VectorXcd Ip(M), Im(M);
  Cplx w0, w1;
  Ip[0] = 0.0;
  for (int i = 1; i < M; ++i) {
    double dx = xn[static_cast<size_t>(i)] - xn[static_cast<size_t>(i - 1)];
    Cplx E = std::exp(-K.kplus * dx);
    exp_panel_weights(K.kplus, dx, w0, w1);
    Ip[i] = E * Ip[i - 1] + (w0 * f[i] + w1 * f[i - 1]);
  }
  // The backward sweep mirrors weighted_moment panel by panel, so the moment
  // handed to a separable correction is the accumulator at the first node and
  // the boundary traces cancel to a few ulps of either term.
  double dtail = Ln - xn[static_cast<size_t>(M - 1)];
  exp_panel_weights(K.kminus, dtail, w0, w1);
  Im[M - 1] = w0 * f[M - 1];
  for (int i = M - 2; i >= 0; --i) {
    double dx = xn[static_cast<size_t>(i + 1)] - xn[static_cast<size_t>(i)];
    Cplx E = std::exp(-K.kminus * dx);
    exp_panel_weights(K.kminus, dx, w0, w1);
    Im[i] = E * Im[i + 1] + (w0 * f[i] + w1 * f[i + 1]);
  }
  Cplx nrm = K.norm();
  out.resize(M);
  for (int i = 0; i < M; ++i) out[i] = nrm * (Ip[i] + Im[i]);
  if (moment_minus) *moment_minus = Im[0];
}

// Applies a separable kernel: rank one, so one moment and one profile.
inline void apply_separable(const SeparableNormalKernel& K, const std::vector<double>& xn,
                            double Ln, const Eigen::VectorXcd& f, Eigen::VectorXcd& out,
                            const Cplx* precomputed_moment = nullptr) {
  Cplx m = precomputed_moment ? *precomputed_moment : weighted_moment(K.rate_y, xn, Ln, f);
  int M = static_cast<int>(xn.size());
  out.resize(M);
  for (int i = 0; i < M; ++i)
    out[i] = K.amp * std::exp(-K.rate_x * xn[static_cast<size_t>(i)]) * m;
}

}  // namespace opcal
