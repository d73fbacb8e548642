#pragma once

// Product discretization of the half-space model domain: a periodic
// tangential torus times a truncated normal interval [0, Ln].  Tangential
// transforms are plain DFTs (radix-2 when the size allows); normal
// quadrature is trapezoid on optionally stretched nodes with the field
// extended by zero at Ln.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "opcal/errors.hpp"
#include "opcal/expr.hpp"

namespace opcal {

struct Grid {
  double Lp = 2.0 * 3.14159265358979323846;  // tangential period
  int Mp = 64;                               // tangential points (1 collapses the torus)
  double Ln = 10.0;                          // normal truncation length
  int Mn = 128;                              // normal points, node 0 at x_n = 0
  double stretch = 1.0;                      // last-to-first spacing ratio, 1 = uniform

  std::vector<double> xn;  // normal nodes, increasing, xn[0] = 0, xn.back() < Ln
  std::vector<double> wn;  // trapezoid weights incl. the zero-extension panel

  static Grid make(double Lp, int Mp, double Ln, int Mn, double stretch = 1.0) {
    if (Mp < 1 || Mn < 2) throw argument_error("grid needs Mp >= 1 and Mn >= 2");
    if (!(Lp > 0) || !(Ln > 0)) throw argument_error("grid lengths must be positive");
    if (!(stretch >= 1.0)) throw argument_error("grid stretch must be >= 1");
    Grid g;
    g.Lp = Lp;
    g.Mp = Mp;
    g.Ln = Ln;
    g.Mn = Mn;
    g.stretch = stretch;
    g.xn.resize(static_cast<size_t>(Mn));
    if (stretch == 1.0) {
      for (int j = 0; j < Mn; ++j) g.xn[static_cast<size_t>(j)] = Ln * j / Mn;
    } else {
      // Spacings grow geometrically by a total factor of `stretch` over the
      // Mn panels (the last panel reaches Ln, carrying the zero extension).
      double r = std::pow(stretch, 1.0 / (Mn - 1));
      double s = 0.0, p = 1.0;
      std::vector<double> h(static_cast<size_t>(Mn));
      for (int j = 0; j < Mn; ++j) {
        h[static_cast<size_t>(j)] = p;
        s += p;
        p *= r;
      }
      double cum = 0.0;
      for (int j = 0; j < Mn; ++j) {
        g.xn[static_cast<size_t>(j)] = Ln * cum / s;
        cum += h[static_cast<size_t>(j)];
      }
    }
    g.wn.assign(static_cast<size_t>(Mn), 0.0);
    for (int j = 0; j < Mn; ++j) {
      double lo = j == 0 ? 0.0 : 0.5 * (g.xn[static_cast<size_t>(j)] - g.xn[static_cast<size_t>(j - 1)]);
      double hi = j == Mn - 1 ? 0.5 * (Ln - g.xn[static_cast<size_t>(j)])
                              : 0.5 * (g.xn[static_cast<size_t>(j + 1)] - g.xn[static_cast<size_t>(j)]);
      g.wn[static_cast<size_t>(j)] = lo + hi;
    }
    return g;
  }

  double hp() const { return Lp / Mp; }
  double xp(int i) const { return Lp * i / Mp; }

  // Signed tangential frequency of DFT bin k: 2 pi / Lp times the centered
  // integer index.
  double freq(int k) const {
    int m = k <= Mp / 2 ? k : k - Mp;
    return 2.0 * 3.14159265358979323846 * m / Lp;
  }

  bool same_layout(const Grid& o) const {
    return Lp == o.Lp && Mp == o.Mp && Ln == o.Ln && Mn == o.Mn && stretch == o.stretch;
  }
};

// Tangential-major storage: entry (i, j) is tangential node i, normal node j.
// Columns are contiguous, so the tangential DFT walks unit-stride memory.
struct DiscreteField {
  Grid grid;
  double p = 2.0;  // Lebesgue exponent of norm()
  Eigen::MatrixXcd v;

  static DiscreteField zeros(const Grid& g, double p = 2.0) {
    DiscreteField f;
    f.grid = g;
    f.p = p;
    f.v = Eigen::MatrixXcd::Zero(g.Mp, g.Mn);
    return f;
  }

  // Discrete L^p norm with tangential spacing and normal trapezoid weights.
  double norm() const {
    if (!(p >= 1.0)) throw argument_error("Lebesgue exponent must be >= 1");
    double hp = grid.hp();
    double acc = 0.0;
    for (int j = 0; j < grid.Mn; ++j) {
      double w = grid.wn[static_cast<size_t>(j)] * hp;
      for (int i = 0; i < grid.Mp; ++i) acc += w * std::pow(std::abs(v(i, j)), p);
    }
    return std::pow(acc, 1.0 / p);
  }
};

// L^2 pairing with the same quadrature weights as DiscreteField::norm(),
// conjugate-linear in the first argument.
inline Cplx field_dot(const DiscreteField& a, const DiscreteField& b) {
  double hp = a.grid.hp();
  Cplx acc = 0.0;
  for (int j = 0; j < a.grid.Mn; ++j) {
    double w = a.grid.wn[static_cast<size_t>(j)] * hp;
    for (int i = 0; i < a.grid.Mp; ++i) acc += w * std::conj(a.v(i, j)) * b.v(i, j);
  }
  return acc;
}

namespace detail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place radix-2 transform; sign -1 forward (e^{-i x xi}), +1 inverse
// without the 1/N factor.
inline void fft_pow2(Cplx* a, int n, int sign) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    double ang = sign * 2.0 * 3.14159265358979323846 / len;
    Cplx wl(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      Cplx w(1.0);
      for (int k = 0; k < len / 2; ++k) {
        Cplx u = a[i + k];
        Cplx t = w * a[i + k + len / 2];
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
        w *= wl;
      }
    }
  }
}

inline void dft_naive(const Cplx* in, Cplx* out, int n, int sign) {
  for (int k = 0; k < n; ++k) {
    Cplx acc = 0.0;
    for (int i = 0; i < n; ++i) {
      double ang = sign * 2.0 * 3.14159265358979323846 * k * i / n;
      acc += in[i] * Cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
}

}  // namespace detail

// Forward DFT along the tangential index of every normal level:
// fhat(k, j) = sum_i f(i, j) exp(-2 pi i k i / Mp).
inline void dft_tangential(Eigen::MatrixXcd& v, int sign) {
  int n = static_cast<int>(v.rows());
  if (n == 1) return;
  if (detail::is_pow2(n)) {
    for (int j = 0; j < v.cols(); ++j) detail::fft_pow2(v.col(j).data(), n, sign);
  } else {
    Eigen::VectorXcd tmp(n);
    for (int j = 0; j < v.cols(); ++j) {
      detail::dft_naive(v.col(j).data(), tmp.data(), n, sign);
      v.col(j) = tmp;
    }
  }
}

inline void dft_forward(Eigen::MatrixXcd& v) { dft_tangential(v, -1); }

inline void dft_inverse(Eigen::MatrixXcd& v) {
  dft_tangential(v, +1);
  v /= static_cast<double>(v.rows());
}

}  // namespace opcal
