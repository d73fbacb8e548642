#pragma once

// Deterministic cross-platform randomness: splitmix64 streams feeding a
// Box-Muller normal generator.  Probe results must reproduce bit-for-bit
// from a seed on any build, which rules out std:: distributions.

#include <cmath>
#include <cstdint>

#include "opcal/grid.hpp"

namespace opcal {

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1]: 53 mantissa bits, never zero so logs stay finite.
  double uniform() {
    return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  Cplx cnormal() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    return Cplx(r * std::cos(a), r * std::sin(a));
  }
};

// Independent complex normals at every grid node.
inline DiscreteField random_field(const Grid& g, double p, std::uint64_t seed) {
  DiscreteField f = DiscreteField::zeros(g, p);
  SplitMix64 rng(seed);
  for (int i = 0; i < g.Mp; ++i)
    for (int j = 0; j < g.Mn; ++j) f.v(i, j) = rng.cnormal();
  return f;
}

// Smooth deterministic test field: a few tangential harmonics under a
// normal-direction bump that vanishes at both ends of [0, Ln].
inline DiscreteField smooth_field(const Grid& g, double p, std::uint64_t seed) {
  DiscreteField f = DiscreteField::zeros(g, p);
  SplitMix64 rng(seed);
  const double pi = 3.14159265358979323846;
  double a1 = rng.normal(), a2 = rng.normal(), a3 = rng.normal();
  for (int i = 0; i < g.Mp; ++i) {
    double x = g.xp(i);
    double tang = g.Mp == 1 ? 1.0
                            : 1.0 + 0.5 * a1 * std::cos(2.0 * pi * x / g.Lp) +
                                  0.3 * a2 * std::sin(4.0 * pi * x / g.Lp);
    for (int j = 0; j < g.Mn; ++j) {
      double y = g.xn[static_cast<size_t>(j)] / g.Ln;
      double bump = y * (1.0 - y);
      bump *= bump;
      f.v(i, j) = tang * (1.0 + 0.2 * a3) * 16.0 * bump;
    }
  }
  return f;
}

}  // namespace opcal
