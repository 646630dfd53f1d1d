#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "giet/numeric.hpp"

using namespace giet;

TEST(Numeric, GaussLegendreMatchesBoostNodes) {
  // boost tabulates the positive half of [-1,1]; map to [0,1]
  const auto [x, w] = gauss_legendre01<double>(20);
  const auto& ref_x = boost::math::quadrature::gauss<double, 20>::abscissa();
  const auto& ref_w = boost::math::quadrature::gauss<double, 20>::weights();
  for (std::size_t i = 0; i < ref_x.size(); ++i) {
    const double node = 0.5 + 0.5 * ref_x[i];
    auto it = std::find_if(x.begin(), x.end(), [&](double v) { return std::abs(v - node) < 1e-14; });
    ASSERT_NE(it, x.end()) << node;
    EXPECT_NEAR(w[it - x.begin()], 0.5 * ref_w[i], 1e-14);
  }
}

TEST(Numeric, GaussLegendreIsExactOnPolynomials) {
  set_precision_bits(256);
  const auto [x, w] = gauss_legendre01<Real>(16);
  // degree 31 is the highest exact degree for 16 nodes
  Real s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * pow(x[i], 31);
  EXPECT_LT(abs(s - Real(1) / 32), Real("1e-70"));
}

TEST(Numeric, QuadParsingKeepsAllBits) {
  const Quad third = from_decimal<Quad>("0.3333333333333333333333333333333333333333");
  EXPECT_LT(abs(third * 3 - 1), Quad(1e-33));
}

TEST(Numeric, PrecisionIsConfigurable) {
  set_precision_bits(512);
  EXPECT_EQ(precision_bits(), 512);
  const Real x = Real(1) / 3;
  EXPECT_GT(to_decimal(x).size(), 150u);
  set_precision_bits(256);
  EXPECT_THROW(set_precision_bits(16), Error);
}

TEST(Numeric, LinearFitRecoversLine) {
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(i);
    y.push_back(2.5 * i - 1);
  }
  const LinearFit f = linear_fit(x, y);
  EXPECT_NEAR(f.slope, 2.5, 1e-12);
  EXPECT_NEAR(f.intercept, -1, 1e-12);
  EXPECT_NEAR(f.rms, 0, 1e-12);
}

TEST(Numeric, LogAbsOfLargeIntegers) {
  const BigInt big = BigInt(1) << 3000;
  EXPECT_NEAR(log_abs(big), 3000 * std::log(2.0), 1e-9);
  EXPECT_NEAR(log_abs(BigInt(-7)), std::log(7.0), 1e-15);
}

TEST(Numeric, ErrorKindsHaveNames) {
  EXPECT_STREQ(to_string(ErrorKind::Hypothesis), "hypothesis_violation");
  EXPECT_STREQ(to_string(ErrorKind::CombinatoricsMismatch), "combinatorics_mismatch");
  const Error e(ErrorKind::Precision, "x");
  EXPECT_EQ(e.kind(), ErrorKind::Precision);
}
