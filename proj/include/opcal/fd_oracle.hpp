#pragma once

// Independent second-order finite-difference discretization of the boundary
// value problem on the truncated half-space: periodic tangential directions,
// uniform normal grid on [0, Ln] with a homogeneous Dirichlet condition at
// the far end, and a ghost-node elimination of the mixed boundary condition
// at x_n = 0 that never divides by the degenerate weight.  Everything here
// is deliberately plain; it exists to cross-check the kernel engine.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include "opcal/errors.hpp"
#include "opcal/fields.hpp"
#include "opcal/grid.hpp"

namespace opcal {

struct FDGridSpec {
  int n = 2;
  std::vector<int> Mt;     // tangential sizes, n-1 entries
  std::vector<double> Lt;  // tangential periods, n-1 entries
  int Mn = 128;
  double Ln = 10.0;

  static FDGridSpec line(int Mn, double Ln) {
    FDGridSpec s;
    s.n = 1;
    s.Mn = Mn;
    s.Ln = Ln;
    return s;
  }

  static FDGridSpec from_grid(const Grid& g) {
    FDGridSpec s;
    s.n = 2;
    s.Mt = {g.Mp};
    s.Lt = {g.Lp};
    s.Mn = g.Mn;
    s.Ln = g.Ln;
    if (g.stretch != 1.0)
      throw argument_error("finite-difference oracle needs a uniform normal grid");
    return s;
  }

  int tangential_count() const {
    int c = 1;
    for (int m : Mt) c *= m;
    return c;
  }
  double hn() const { return Ln / Mn; }
  int full_size() const { return tangential_count() * Mn; }

  // Full-grid flat index: tangential index runs fastest, matching
  // column-major field storage.
  int flat(int itang, int j) const { return itang + tangential_count() * j; }

  // Decompose a flat tangential index into per-direction indices.
  void tang_multi(int itang, int* idx) const {
    for (size_t d = 0; d < Mt.size(); ++d) {
      idx[d] = itang % Mt[d];
      itang /= Mt[d];
    }
  }

  Eigen::VectorXd point(int itang, int j) const {
    Eigen::VectorXd x(n);
    int id[3] = {0, 0, 0};
    tang_multi(itang, id);
    for (size_t d = 0; d < Mt.size(); ++d) x[static_cast<int>(d)] = Lt[d] * id[d] / Mt[d];
    x[n - 1] = hn() * j;
    return x;
  }
};

class FDOperator {
 public:
  using SpMat = Eigen::SparseMatrix<Cplx>;

  static FDOperator assemble(const EllipticOperatorSpec& op, const BoundaryOperatorSpec& bc,
                             const FDGridSpec& gs) {
    if (op.n != gs.n) throw argument_error("operator and grid dimensions differ");
    if (bc.nx != gs.n - 1) throw argument_error("boundary operator dimension does not match");
    if (gs.n < 1 || gs.n > 3) throw argument_error("oracle supports dimensions 1..3");
    // The 5/7-point stencil cannot represent mixed second derivatives.
    for (int i = 0; i < op.n; ++i)
      for (int j = 0; j < op.n; ++j)
        if (i != j) {
          Eigen::VectorXd probe = Eigen::VectorXd::Constant(op.n, 0.37);
          if (std::abs(op.aij(i, j).eval(probe)) > 0 ||
              std::abs(op.aij(i, j).eval(Eigen::VectorXd::Zero(op.n))) > 0)
            throw argument_error("oracle requires a diagonal diffusion matrix");
        }

    FDOperator A;
    A.gs_ = gs;
    int nt = gs.tangential_count();
    int full = gs.full_size();
    double h = gs.hn();

    // Keep every interior node; keep a base-boundary node only when its
    // weight phi1 is nonzero, otherwise the condition there is exactly
    // Dirichlet and the unknown is eliminated.
    A.kept_of_full_.assign(static_cast<size_t>(full), -1);
    std::vector<int> full_of_kept;
    for (int j = 0; j < gs.Mn; ++j)
      for (int it = 0; it < nt; ++it) {
        int f = gs.flat(it, j);
        if (j == 0) {
          Eigen::VectorXd xp = gs.point(it, 0).head(gs.n - 1);
          if (bc.phi1.eval(xp) == 0.0) continue;
        }
        A.kept_of_full_[static_cast<size_t>(f)] = static_cast<int>(full_of_kept.size());
        full_of_kept.push_back(f);
      }
    A.full_of_kept_ = std::move(full_of_kept);
    int nk = static_cast<int>(A.full_of_kept_.size());
    A.mass_.resize(nk);

    std::vector<Eigen::Triplet<Cplx>> trip;
    trip.reserve(static_cast<size_t>(nk) * (2 * gs.n + 1));
    auto add = [&](int row, int fullcol, Cplx val) {
      int col = A.kept_of_full_[static_cast<size_t>(fullcol)];
      if (col >= 0 && val != Cplx(0.0)) trip.emplace_back(row, col, val);
    };

    int id[3];
    for (int row = 0; row < nk; ++row) {
      int f = A.full_of_kept_[static_cast<size_t>(row)];
      int j = f / nt;
      int it = f % nt;
      gs.tang_multi(it, id);
      Eigen::VectorXd x = gs.point(it, j);

      double cval = op.c0.eval(x) + op.shift;
      Cplx diag = 0.0;

      // Tangential part, shared by interior and boundary rows.
      struct TangTerm {
        int plus, minus;
        Cplx cplus, cminus;
      };
      std::vector<TangTerm> tang;
      for (int d = 0; d < gs.n - 1; ++d) {
        double hd = gs.Lt[static_cast<size_t>(d)] / gs.Mt[static_cast<size_t>(d)];
        double ad = op.aij(d, d).eval(x);
        double bd = op.b[static_cast<size_t>(d)].eval(x);
        int stride = 1;
        for (int e = 0; e < d; ++e) stride *= gs.Mt[static_cast<size_t>(e)];
        int up = id[d] + 1 == gs.Mt[static_cast<size_t>(d)] ? it - (gs.Mt[static_cast<size_t>(d)] - 1) * stride
                                                            : it + stride;
        int dn = id[d] == 0 ? it + (gs.Mt[static_cast<size_t>(d)] - 1) * stride : it - stride;
        TangTerm t;
        t.plus = gs.flat(up, j);
        t.minus = gs.flat(dn, j);
        t.cplus = Cplx(-ad / (hd * hd), -bd / (2.0 * hd));
        t.cminus = Cplx(-ad / (hd * hd), bd / (2.0 * hd));
        tang.push_back(t);
        diag += 2.0 * ad / (hd * hd);
      }

      double ann = op.aij(gs.n - 1, gs.n - 1).eval(x);
      double bn = op.b[static_cast<size_t>(gs.n - 1)].eval(x);

      if (j > 0) {
        // Interior row (the far neighbor at j = Mn is the zero extension).
        for (const auto& t : tang) {
          add(row, t.plus, t.cplus);
          add(row, t.minus, t.cminus);
        }
        diag += 2.0 * ann / (h * h) + cval;
        add(row, f, diag);
        if (j + 1 < gs.Mn) add(row, gs.flat(it, j + 1), Cplx(-ann / (h * h), -bn / (2.0 * h)));
        add(row, gs.flat(it, j - 1), Cplx(-ann / (h * h), bn / (2.0 * h)));
        A.mass_[row] = 1.0;
      } else {
        // Base boundary row: ghost value u_{-1} = u_1 - 2h (phi0/phi1) u_0
        // substituted into the interior stencil, the row multiplied through
        // by phi1 and normalized by (phi0 + phi1).  No division by phi1.
        Eigen::VectorXd xp = x.head(gs.n - 1);
        double p0 = bc.phi0.eval(xp);
        double p1 = bc.phi1.eval(xp);
        double s = p0 + p1;
        Cplx u0 = p1 * (diag + cval) + 2.0 * ann * p1 / (h * h) + 2.0 * ann * p0 / h -
                  Cplx(0.0, bn * p0);
        add(row, f, u0 / s);
        add(row, gs.flat(it, 1), Cplx(-2.0 * ann * p1 / (h * h)) / s);
        for (const auto& t : tang) {
          add(row, t.plus, p1 * t.cplus / s);
          add(row, t.minus, p1 * t.cminus / s);
        }
        A.mass_[row] = p1 / s;
      }
    }

    A.SA_.resize(nk, nk);
    A.SA_.setFromTriplets(trip.begin(), trip.end());
    A.SA_.makeCompressed();
    return A;
  }

  int size() const { return static_cast<int>(full_of_kept_.size()); }
  const SpMat& scaled_matrix() const { return SA_; }
  const Eigen::VectorXd& mass() const { return mass_; }
  const FDGridSpec& gridspec() const { return gs_; }

  Eigen::VectorXcd restrict_full(const Eigen::VectorXcd& full) const {
    Eigen::VectorXcd k(size());
    for (int r = 0; r < size(); ++r) k[r] = full[full_of_kept_[static_cast<size_t>(r)]];
    return k;
  }

  Eigen::VectorXcd extend_kept(const Eigen::VectorXcd& kept) const {
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(gs_.full_size());
    for (int r = 0; r < size(); ++r) full[full_of_kept_[static_cast<size_t>(r)]] = kept[r];
    return full;
  }

  // Action of the standard (mass-normalized) operator on a full-grid vector.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& ufull) const {
    Eigen::VectorXcd y = SA_ * restrict_full(ufull);
    for (int r = 0; r < size(); ++r) y[r] /= mass_[r];
    return extend_kept(y);
  }

  // Solves (A_h - lambda) u = f in the scaled form (SA - lambda M) u = M f
  // so degenerate boundary rows stay well conditioned, then verifies the
  // residual of the solved system.
  Eigen::VectorXcd solve_resolvent(Cplx lambda, const Eigen::VectorXcd& ffull,
                                   double rtol = 1e-10) const {
    SpMat B = SA_;
    for (int r = 0; r < size(); ++r) B.coeffRef(r, r) -= lambda * mass_[r];
    B.makeCompressed();
    Eigen::SparseLU<SpMat> lu(B);
    if (lu.info() != Eigen::Success) throw numerical_error("sparse factorization failed");
    Eigen::VectorXcd rhs = restrict_full(ffull);
    for (int r = 0; r < size(); ++r) rhs[r] *= mass_[r];
    Eigen::VectorXcd u = lu.solve(rhs);
    double res = (B * u - rhs).norm();
    double den = rhs.norm();
    if (den > 0 && !(res / den <= rtol))
      throw numerical_error("resolvent solve residual " + std::to_string(res / den) +
                            " exceeds tolerance");
    return extend_kept(u);
  }

  // Implicit Euler for du/dt = -A_h u with Richardson extrapolation in the
  // step count: returns 2 E(2s) - E(s).
  Eigen::VectorXcd semigroup(double t, const Eigen::VectorXcd& u0full, int steps) const {
    auto run = [&](int s) {
      double dt = t / s;
      SpMat B = SA_;
      B *= dt;
      for (int r = 0; r < size(); ++r) B.coeffRef(r, r) += mass_[r];
      B.makeCompressed();
      Eigen::SparseLU<SpMat> lu(B);
      if (lu.info() != Eigen::Success) throw numerical_error("sparse factorization failed");
      Eigen::VectorXcd u = restrict_full(u0full);
      for (int k = 0; k < s; ++k) {
        Eigen::VectorXcd rhs = u;
        for (int r = 0; r < size(); ++r) rhs[r] *= mass_[r];
        u = lu.solve(rhs);
      }
      return u;
    };
    Eigen::VectorXcd c = run(steps), f = run(2 * steps);
    return extend_kept((2.0 * f - c).eval());
  }

  // Dense eigendecomposition of the standard operator; guarded by size and
  // by the 1-norm condition estimate of the eigenvector basis.
  struct Eig {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd V, Vinv;
    double cond1 = 0.0;
  };

  const Eig& eig(double cond_bound = 1e8) const {
    if (!eig_) {
      if (size() > 2048) throw argument_error("dense spectral path limited to 2048 unknowns");
      Eigen::MatrixXcd A = Eigen::MatrixXcd(SA_);
      for (int r = 0; r < size(); ++r) A.row(r) /= mass_[r];
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, true);
      if (es.info() != Eigen::Success) throw numerical_error("dense eigendecomposition failed");
      auto e = std::make_unique<Eig>();
      e->values = es.eigenvalues();
      e->V = es.eigenvectors();
      e->Vinv = e->V.partialPivLu().inverse();
      e->cond1 = e->V.cwiseAbs().colwise().sum().maxCoeff() *
                 e->Vinv.cwiseAbs().colwise().sum().maxCoeff();
      if (!(e->cond1 < cond_bound))
        throw numerical_error("eigenvector basis condition " + std::to_string(e->cond1) +
                              " beyond bound");
      eig_ = std::move(e);
    }
    return *eig_;
  }

  Eigen::VectorXcd matrix_function(const std::function<Cplx(Cplx)>& fn,
                                   const Eigen::VectorXcd& ufull,
                                   double cond_bound = 1e8) const {
    const Eig& e = eig(cond_bound);
    Eigen::VectorXcd c = e.Vinv * restrict_full(ufull);
    for (int r = 0; r < size(); ++r) c[r] *= fn(e.values[r]);
    return extend_kept((e.V * c).eval());
  }

  // Solves (A_h - lambda) u = 0 with prescribed trace g on x_n = 0 and zero
  // far condition, for a Dirichlet assembly (all base nodes eliminated).
  // The coupling of the first interior layer to the boundary moves to the
  // right-hand side.
  Eigen::VectorXcd extend_dirichlet(const EllipticOperatorSpec& op, Cplx lambda,
                                    const Eigen::VectorXcd& g) const {
    int nt = gs_.tangential_count();
    if (g.size() != nt) throw argument_error("boundary data size mismatch");
    double h = gs_.hn();
    SpMat B = SA_;
    for (int r = 0; r < size(); ++r) B.coeffRef(r, r) -= lambda * mass_[r];
    B.makeCompressed();
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(size());
    for (int it = 0; it < nt; ++it) {
      int f1 = gs_.flat(it, 1);
      int r = kept_of_full_[static_cast<size_t>(f1)];
      if (r < 0) continue;
      Eigen::VectorXd x = gs_.point(it, 1);
      double ann = op.aij(gs_.n - 1, gs_.n - 1).eval(x);
      double bn = op.b[static_cast<size_t>(gs_.n - 1)].eval(x);
      Cplx coupling(-ann / (h * h), bn / (2.0 * h));
      rhs[r] -= coupling * g[it];
    }
    Eigen::SparseLU<SpMat> lu(B);
    if (lu.info() != Eigen::Success) throw numerical_error("sparse factorization failed");
    return extend_kept(lu.solve(rhs).eval());
  }

  // Second-order one-sided conormal trace -du/dx_n at the base, given the
  // full solution and its boundary trace.
  Eigen::VectorXcd conormal_trace(const Eigen::VectorXcd& ufull,
                                  const Eigen::VectorXcd& g) const {
    int nt = gs_.tangential_count();
    double h = gs_.hn();
    Eigen::VectorXcd t(nt);
    for (int it = 0; it < nt; ++it) {
      Cplx u1 = ufull[gs_.flat(it, 1)];
      Cplx u2 = ufull[gs_.flat(it, 2)];
      t[it] = -(-1.5 * g[it] + 2.0 * u1 - 0.5 * u2) / h;
    }
    return t;
  }

  Eigen::VectorXcd from_field(const DiscreteField& f) const {
    if (gs_.n != 2 || f.grid.Mp != gs_.Mt[0] || f.grid.Mn != gs_.Mn)
      throw argument_error("field layout does not match the oracle grid");
    return Eigen::Map<const Eigen::VectorXcd>(f.v.data(), f.v.size());
  }

  DiscreteField to_field(const Eigen::VectorXcd& full, const Grid& grid, double p = 2.0) const {
    DiscreteField f = DiscreteField::zeros(grid, p);
    Eigen::Map<Eigen::VectorXcd>(f.v.data(), f.v.size()) = full;
    return f;
  }

 private:
  FDGridSpec gs_;
  SpMat SA_;
  Eigen::VectorXd mass_;
  std::vector<int> kept_of_full_;
  std::vector<int> full_of_kept_;
  mutable std::unique_ptr<Eig> eig_;
};

}  // namespace opcal
