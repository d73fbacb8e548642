#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "opcal/errors.hpp"

namespace opcal {

// Smooth real scalar field on a slab of space coordinates.  Carries an
// optional exact-derivative callback; without one, derivatives fall back to
// nested central differences with a caller-chosen step.
struct ScalarFieldFn {
  std::function<double(const Eigen::VectorXd&)> eval;
  // orders[j] is the derivative order in slot j; null means FD fallback.
  std::function<double(const Eigen::VectorXd&, const std::vector<int>&)> deriv;
  bool is_constant = false;

  static ScalarFieldFn constant(double v) {
    ScalarFieldFn f;
    f.eval = [v](const Eigen::VectorXd&) { return v; };
    f.deriv = [v](const Eigen::VectorXd&, const std::vector<int>& o) {
      for (int k : o)
        if (k > 0) return 0.0;
      return v;
    };
    f.is_constant = true;
    return f;
  }

  static ScalarFieldFn make(std::function<double(const Eigen::VectorXd&)> e) {
    ScalarFieldFn f;
    f.eval = std::move(e);
    return f;
  }

  static ScalarFieldFn make_exact(
      std::function<double(const Eigen::VectorXd&)> e,
      std::function<double(const Eigen::VectorXd&, const std::vector<int>&)> d) {
    ScalarFieldFn f;
    f.eval = std::move(e);
    f.deriv = std::move(d);
    return f;
  }

  // Mixed partial; exact when available, else nested central differences of
  // step h per applied derivative.
  double d(const Eigen::VectorXd& x, const std::vector<int>& orders, double h) const {
    if (deriv) return deriv(x, orders);
    int slot = -1;
    for (size_t j = 0; j < orders.size(); ++j)
      if (orders[j] > 0) {
        slot = static_cast<int>(j);
        break;
      }
    if (slot < 0) return eval(x);
    std::vector<int> rest = orders;
    rest[slot] -= 1;
    Eigen::VectorXd xp = x, xm = x;
    xp[slot] += h;
    xm[slot] -= h;
    return (d(xp, rest, h) - d(xm, rest, h)) / (2.0 * h);
  }
};

// d^k/dx^k cos(w x + p) = w^k cos(w x + p + k pi/2); the preset boundary
// fields below are built from this so every derivative order is exact.
inline ScalarFieldFn cos_affine_field(double amp, double w, double phase, double offset,
                                      int slot = 0) {
  auto e = [=](const Eigen::VectorXd& x) { return offset + amp * std::cos(w * x[slot] + phase); };
  auto d = [=](const Eigen::VectorXd& x, const std::vector<int>& o) {
    int k = 0;
    for (size_t j = 0; j < o.size(); ++j) {
      if (static_cast<int>(j) == slot) {
        k = o[j];
      } else if (o[j] > 0) {
        return 0.0;
      }
    }
    if (k == 0) return offset + amp * std::cos(w * x[slot] + phase);
    return amp * std::pow(w, k) * std::cos(w * x[slot] + phase + k * 1.5707963267948966);
  };
  return ScalarFieldFn::make_exact(e, d);
}

// Second-order operator sum a^{kl} D_k D_l + sum b^k D_k + c0, written in
// non-divergence form with smooth coefficients, plus a constant spectral
// shift added to c0.
struct EllipticOperatorSpec {
  int n = 2;
  std::vector<ScalarFieldFn> a;  // n*n entries, row-major
  std::vector<ScalarFieldFn> b;  // n entries
  ScalarFieldFn c0 = ScalarFieldFn::constant(0.0);
  double shift = 0.0;

  const ScalarFieldFn& aij(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }

  bool constant_coefficients() const {
    for (const auto& f : a)
      if (!f.is_constant) return false;
    for (const auto& f : b)
      if (!f.is_constant) return false;
    return c0.is_constant;
  }

  static EllipticOperatorSpec laplace(int n, double c = 0.0, double shift = 0.0) {
    EllipticOperatorSpec s;
    s.n = n;
    s.a.reserve(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s.a.push_back(ScalarFieldFn::constant(i == j ? 1.0 : 0.0));
    s.b.assign(static_cast<size_t>(n), ScalarFieldFn::constant(0.0));
    s.c0 = ScalarFieldFn::constant(c);
    s.shift = shift;
    return s;
  }

  static EllipticOperatorSpec diag(const std::vector<double>& d, double c = 0.0,
                                   double shift = 0.0) {
    int n = static_cast<int>(d.size());
    EllipticOperatorSpec s = laplace(n, c, shift);
    for (int i = 0; i < n; ++i)
      s.a[static_cast<size_t>(i) * n + i] = ScalarFieldFn::constant(d[i]);
    return s;
  }

  // Checks symmetric-part positivity and finiteness on the given sample
  // points (full space coordinates, size n).
  void validate(const std::vector<Eigen::VectorXd>& samples, double a_min = 1e-10) const {
    if (n < 1 || n > 4) throw argument_error("space dimension must be in 1..4");
    if (static_cast<int>(a.size()) != n * n || static_cast<int>(b.size()) != n)
      throw argument_error("coefficient arrays do not match the dimension");
    for (const auto& x : samples) {
      Eigen::MatrixXd A(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = aij(i, j).eval(x);
      if (!A.allFinite()) throw numerical_error("non-finite diffusion coefficient at a sample point");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
      if (es.eigenvalues().minCoeff() < a_min)
        throw ellipticity_error("diffusion matrix loses positivity at a sample point (min eig " +
                                std::to_string(es.eigenvalues().minCoeff()) + ")");
      for (int i = 0; i < n; ++i)
        if (!std::isfinite(b[i].eval(x))) throw numerical_error("non-finite drift coefficient");
      if (!std::isfinite(c0.eval(x))) throw numerical_error("non-finite zero-order coefficient");
    }
  }
};

// Boundary operator phi0 * (trace) + phi1 * (exterior normal derivative),
// with phi1 >= 0 and phi0 + phi1 bounded below.  Fields live on the
// boundary, so they take nx = n-1 coordinates.
struct BoundaryOperatorSpec {
  int nx = 1;
  ScalarFieldFn phi0 = ScalarFieldFn::constant(1.0);
  ScalarFieldFn phi1 = ScalarFieldFn::constant(0.0);
  double floor_c = 0.05;

  bool constant_coefficients() const { return phi0.is_constant && phi1.is_constant; }

  static BoundaryOperatorSpec dirichlet(int nx) {
    BoundaryOperatorSpec s;
    s.nx = nx;
    s.phi0 = ScalarFieldFn::constant(1.0);
    s.phi1 = ScalarFieldFn::constant(0.0);
    return s;
  }

  static BoundaryOperatorSpec neumann(int nx) {
    BoundaryOperatorSpec s;
    s.nx = nx;
    s.phi0 = ScalarFieldFn::constant(0.0);
    s.phi1 = ScalarFieldFn::constant(1.0);
    return s;
  }

  static BoundaryOperatorSpec robin(int nx, double p0, double p1) {
    BoundaryOperatorSpec s;
    s.nx = nx;
    s.phi0 = ScalarFieldFn::constant(p0);
    s.phi1 = ScalarFieldFn::constant(p1);
    return s;
  }

  // phi1 = sin^2(x_1), phi0 = cos^2(x_1): the weight vanishes to second
  // order on a lattice of boundary points while phi0 + phi1 = 1.
  static BoundaryOperatorSpec degenerate_sin2(int nx) {
    BoundaryOperatorSpec s;
    s.nx = nx;
    s.phi1 = cos_affine_field(-0.5, 2.0, 0.0, 0.5);  // (1 - cos 2x)/2
    s.phi0 = cos_affine_field(0.5, 2.0, 0.0, 0.5);   // (1 + cos 2x)/2
    return s;
  }

  // Pointwise admissibility on boundary samples: nonnegative weight, lower
  // bound on phi0 + phi1, and the first-derivative bound that a nonnegative
  // C^2 function with bounded second derivative must satisfy,
  // |grad phi1|^2 <= 2 sup|phi1''| phi1.
  void validate(const std::vector<Eigen::VectorXd>& samples, double kato_slack = 1e-8) const {
    if (nx < 0 || nx > 3) throw argument_error("boundary dimension must be in 0..3");
    double h2sup = 0.0;
    const double h = 1e-5;
    for (const auto& x : samples) {
      for (int j = 0; j < nx; ++j) {
        std::vector<int> o(static_cast<size_t>(nx), 0);
        o[j] = 2;
        h2sup = std::max(h2sup, std::abs(phi1.d(x, o, h)));
      }
    }
    for (const auto& x : samples) {
      double p1 = phi1.eval(x), p0 = phi0.eval(x);
      if (!std::isfinite(p0) || !std::isfinite(p1))
        throw numerical_error("non-finite boundary coefficient");
      if (p1 < -1e-14) throw precondition_error("boundary weight phi1 is negative at a sample point");
      if (p0 + p1 < floor_c)
        throw precondition_error("phi0 + phi1 drops below its floor at a sample point");
      double g2 = 0.0;
      for (int j = 0; j < nx; ++j) {
        std::vector<int> o(static_cast<size_t>(nx), 0);
        o[j] = 1;
        double g = phi1.d(x, o, h);
        g2 += g * g;
      }
      if (g2 > 2.0 * h2sup * std::max(p1, 0.0) + kato_slack)
        throw precondition_error(
            "phi1 violates the gradient bound |grad phi1|^2 <= 2 sup|phi1''| phi1");
    }
  }
};

// Tensor sample grid over [0, 2pi]^dim for coefficient admissibility checks.
// dim = 0 yields the single empty point, so boundary checks in one space
// dimension still run once.
inline std::vector<Eigen::VectorXd> coefficient_samples(int dim, int per_axis = 7) {
  std::vector<Eigen::VectorXd> out;
  if (dim <= 0) {
    out.emplace_back(Eigen::VectorXd::Zero(0));
    return out;
  }
  long total = 1;
  for (int d = 0; d < dim; ++d) total *= per_axis;
  for (long idx = 0; idx < total; ++idx) {
    Eigen::VectorXd x(dim);
    long rem = idx;
    for (int d = 0; d < dim; ++d) {
      x[d] = 2.0 * 3.14159265358979323846 * (rem % per_axis) / per_axis;
      rem /= per_axis;
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace opcal
