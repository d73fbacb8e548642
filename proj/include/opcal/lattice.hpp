#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "opcal/errors.hpp"

namespace opcal {

// Sample set for seminorm and decay estimation: dyadic radial shells times a
// fixed set of unit directions in the (xi', zeta) covariables, evaluated at a
// fixed set of tangential base points.  The x points mix a coarse uniform
// grid with a geometric cluster approaching the origin, where degenerate
// boundary weights vanish; sups taken without the cluster miss the
// transition region entirely.
struct SymbolLattice {
  int nx = 1;
  std::vector<double> radii;
  std::vector<Eigen::VectorXd> directions;  // size nx+1, unit norm, last entry = zeta part
  std::vector<Eigen::VectorXd> xpoints;     // size nx

  static SymbolLattice standard(int nx, double r0 = 4.0, int shells = 6, int ndir = 16,
                                int nx_uniform = 8, int ncluster = 12) {
    if (nx < 0 || nx > 3) throw argument_error("tangential dimension must be in 0..3");
    SymbolLattice L;
    L.nx = nx;
    for (int j = 0; j < shells; ++j) L.radii.push_back(r0 * std::pow(2.0, j));

    const double pi = 3.14159265358979323846;
    if (nx == 0) {
      Eigen::VectorXd up(1), dn(1);
      up << 1.0;
      dn << -1.0;
      L.directions.push_back(up);
      L.directions.push_back(dn);
      L.xpoints.push_back(Eigen::VectorXd());
    } else if (nx == 1) {
      for (int k = 0; k < ndir; ++k) {
        double a = 2.0 * pi * k / ndir;
        Eigen::VectorXd d(2);
        d << std::cos(a), std::sin(a);
        L.directions.push_back(d);
      }
    } else {
      // Axes plus all sign patterns of two- and three-slot diagonals.
      int m = nx + 1;
      for (int j = 0; j < m; ++j)
        for (int s = -1; s <= 1; s += 2) {
          Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
          d[j] = s;
          L.directions.push_back(d);
        }
      for (int j = 0; j < m; ++j)
        for (int k = j + 1; k < m; ++k)
          for (int sj = -1; sj <= 1; sj += 2)
            for (int sk = -1; sk <= 1; sk += 2) {
              Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
              d[j] = sj;
              d[k] = sk;
              L.directions.push_back(d.normalized());
            }
    }

    if (nx >= 1) {
      for (int k = 0; k < nx_uniform; ++k) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);
        x[0] = 2.0 * pi * k / nx_uniform;
        L.xpoints.push_back(x);
      }
      for (int k = 0; k < ncluster; ++k) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(nx);
        x[0] = (pi / 4.0) * std::pow(2.0, -0.5 * k);
        L.xpoints.push_back(x);
      }
    }
    return L;
  }

  // (xi', zeta) of a lattice node.
  void covars(int ishell, int idir, Eigen::VectorXd& xi, double& zeta) const {
    const Eigen::VectorXd& d = directions[static_cast<size_t>(idir)];
    xi = radii[static_cast<size_t>(ishell)] * d.head(nx);
    zeta = radii[static_cast<size_t>(ishell)] * d[nx];
  }
};

}  // namespace opcal
