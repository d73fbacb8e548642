#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "opcal/grid.hpp"
#include "opcal/rng.hpp"

using namespace opcal;

TEST_CASE("trapezoid weights integrate a constant with zero extension") {
  Grid g = Grid::make(2.0, 4, 8.0, 8);
  // nodes 0..7, last panel [7, 8] closes with the zero extension
  REQUIRE(g.xn.size() == 8);
  CHECK(g.xn[0] == 0.0);
  CHECK(g.xn[7] == Catch::Approx(7.0));
  double total = 0.0;
  for (double w : g.wn) total += w;
  CHECK(total == Catch::Approx(7.0 + 0.5).epsilon(1e-14));
}

TEST_CASE("stretched grids keep increasing nodes with the requested ratio") {
  Grid g = Grid::make(1.0, 1, 10.0, 64, 32.0);
  CHECK(g.xn[0] == 0.0);
  for (size_t j = 1; j < g.xn.size(); ++j) CHECK(g.xn[j] > g.xn[j - 1]);
  double h_first = g.xn[1] - g.xn[0];
  double h_last = g.xn[63] - g.xn[62];
  // stretch measures the full-range spacing growth
  CHECK(h_last / h_first == Catch::Approx(32.0 * std::pow(32.0, -1.0 / 63.0)).epsilon(1e-10));
}

TEST_CASE("tangential transform round-trips on both code paths") {
  for (int Mp : {16, 12}) {
    Grid g = Grid::make(2.0 * 3.14159265358979323846, Mp, 5.0, 6);
    DiscreteField f = random_field(g, 2.0, 99);
    Eigen::MatrixXcd orig = f.v;
    dft_forward(f.v);
    dft_inverse(f.v);
    CHECK((f.v - orig).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pure harmonics land on their own frequency bin") {
  int Mp = 16;
  Grid g = Grid::make(2.0 * 3.14159265358979323846, Mp, 5.0, 4);
  int m = 3;
  DiscreteField f = DiscreteField::zeros(g);
  for (int i = 0; i < Mp; ++i)
    for (int j = 0; j < 4; ++j) f.v(i, j) = std::polar(1.0, m * g.xp(i));
  dft_forward(f.v);
  for (int k = 0; k < Mp; ++k) {
    double expect = k == m ? static_cast<double>(Mp) : 0.0;
    CHECK(std::abs(f.v(k, 0) - Cplx(expect)) < 1e-12);
  }
}

TEST_CASE("frequency map is the centered integer lattice") {
  Grid g = Grid::make(2.0 * 3.14159265358979323846, 8, 5.0, 4);
  CHECK(g.freq(0) == 0.0);
  CHECK(g.freq(1) == Catch::Approx(1.0));
  CHECK(g.freq(4) == Catch::Approx(4.0));
  CHECK(g.freq(5) == Catch::Approx(-3.0));
  CHECK(g.freq(7) == Catch::Approx(-1.0));
}

TEST_CASE("random fields reproduce bit-for-bit from the seed") {
  Grid g = Grid::make(1.0, 4, 3.0, 8);
  DiscreteField a = random_field(g, 2.0, 1234);
  DiscreteField b = random_field(g, 2.0, 1234);
  DiscreteField c = random_field(g, 2.0, 1235);
  CHECK((a.v - b.v).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.v - c.v).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("norm matches the closed form for a constant field") {
  Grid g = Grid::make(2.0, 4, 8.0, 8);
  DiscreteField f = DiscreteField::zeros(g, 2.0);
  f.v.setConstant(Cplx(3.0, 0.0));
  // integral of 9 over the tangential period times the weighted normal line
  double expect = std::sqrt(9.0 * 2.0 * 7.5);
  CHECK(f.norm() == Catch::Approx(expect).epsilon(1e-14));
}

TEST_CASE("smooth test fields vanish at both ends of the normal line") {
  Grid g = Grid::make(2.0 * 3.14159265358979323846, 8, 6.0, 32);
  DiscreteField f = smooth_field(g, 2.0, 7);
  for (int i = 0; i < g.Mp; ++i) CHECK(std::abs(f.v(i, 0)) == 0.0);
  CHECK(f.norm() > 0.0);
}
