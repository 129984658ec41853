#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <complex>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mwell/complex_erf.hpp"

using mwell::special::erf;
using mwell::special::erfc;
using C = std::complex<double>;

namespace {

std::vector<std::vector<double>> read_csv(const std::string& name) {
  std::ifstream in(std::string(MWELL_TEST_DATA_DIR) + "/" + name);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'r') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

double rel(C got, C want) { return std::abs(got - want) / std::abs(want); }

}  // namespace

TEST(ComplexErf, MatchesReferenceTable) {
  const auto rows = read_csv("erf_reference.csv");
  ASSERT_GT(rows.size(), 400u);
  for (const auto& r : rows) {
    const C z(r[0], r[1]);
    const C e(r[2], r[3]), c(r[4], r[5]);
    EXPECT_LT(rel(erf(z), e), 1e-12) << "erf at " << z;
    EXPECT_LT(rel(erfc(z), c), 1e-12) << "erfc at " << z;
  }
}

TEST(ComplexErf, ErfcOnDiagonalRelative) {
  const auto rows = read_csv("erfc_diagonal.csv");
  ASSERT_GE(rows.size(), 12u);
  for (const auto& r : rows) {
    const C z(r[0], r[1]);
    // Condition number of erfc is about 2|z|^2; rounding z^2 alone costs that much.
    const double tol = std::max(1e-12, 1e-15 * std::norm(z));
    EXPECT_LT(rel(erfc(z), C(r[2], r[3])), tol) << "erfc at " << z;
  }
}

TEST(ComplexErf, RealAxisAgreesWithStd) {
  for (double x = -5.0; x <= 5.0; x += 0.37) {
    EXPECT_NEAR(erf(C(x, 0.0)).real(), std::erf(x), 1e-15);
    EXPECT_EQ(erf(C(x, 0.0)).imag(), 0.0);
  }
  EXPECT_NEAR(erf(C(1.0, 0.0)).real(), 0.8427007929497149, 2.5e-16);
}

TEST(ComplexErf, OddAndConjugateSymmetric) {
  for (const C z : {C(0.3, 0.7), C(2.5, -1.1), C(5.0, 4.0), C(8.0, 0.5)}) {
    EXPECT_LT(std::abs(erf(-z) + erf(z)), 1e-14 * std::abs(erf(z)));
    EXPECT_LT(std::abs(erf(std::conj(z)) - std::conj(erf(z))), 1e-14 * std::abs(erf(z)));
  }
}

TEST(ComplexErf, ErfPlusErfcIsOne) {
  for (const C z : {C(0.1, 0.2), C(1.5, 1.5), C(-3.0, 2.0), C(6.0, -6.0)}) {
    EXPECT_LT(std::abs(erf(z) + erfc(z) - 1.0), 1e-13 * std::max(1.0, std::abs(erf(z))));
  }
}
