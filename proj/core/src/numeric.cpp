#include "giet/numeric.hpp"

#include <cstdlib>
#include <iomanip>
#include <sstream>

#include <boost/math/constants/constants.hpp>

namespace giet {

namespace {
int g_bits = 0;

int digits10_for(int bits) { return static_cast<int>(std::ceil(bits * 0.30102999566398120)) + 1; }
}  // namespace

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid_input";
    case ErrorKind::Hypothesis: return "hypothesis_violation";
    case ErrorKind::Precision: return "precision_exhausted";
    case ErrorKind::CombinatoricsMismatch: return "combinatorics_mismatch";
    case ErrorKind::Connection: return "connection_suspected";
    case ErrorKind::Numerical: return "numerical_failure";
  }
  return "unknown";
}

int default_precision_bits() {
  if (const char* env = std::getenv("GIET_PRECISION_BITS")) {
    int b = std::atoi(env);
    if (b >= 64) return b;
  }
  return 256;
}

void set_precision_bits(int bits) {
  if (bits < 64) throw Error(ErrorKind::InvalidInput, "precision below 64 bits is not supported");
  g_bits = bits;
  Real::default_precision(digits10_for(bits));
}

int precision_bits() {
  if (g_bits == 0) set_precision_bits(default_precision_bits());
  return g_bits;
}

namespace {
template <class T>
std::string fixed_expansion(const T& x, int digits10) {
  if (x == 0) return "0";
  int e = static_cast<int>(floor(log10(abs(x))));
  int decimals = std::max(0, digits10 - 1 - e);
  std::ostringstream os;
  os << std::fixed << std::setprecision(decimals) << x;
  return os.str();
}
}  // namespace

std::string to_decimal(const Real& x) {
  return fixed_expansion(x, digits10_for(precision_bits()));
}
std::string to_decimal(const Quad& x) { return fixed_expansion(x, 34); }
std::string to_decimal(double x) {
  if (x == 0) return "0";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}
std::string to_decimal(const BigInt& x) { return x.str(); }

template <>
Quad from_decimal<Quad>(const std::string& s) {
  // Parse through MPFR so that decimal strings keep all 113 bits.
  mp::number<mp::mpfr_float_backend<40>, mp::et_off> tmp(s);
  return static_cast<Quad>(tmp);
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> gauss_legendre01(int n) {
  const T pi = boost::math::constants::pi<T>();
  std::vector<T> x(n), w(n);
  const T tol = pow2m<T>(scalar_bits<T>() - 4);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    T z = cos(pi * (i + T(0.75)) / (n + T(0.5)));
    T dp = 0;
    for (int it = 0; it < 100; ++it) {
      T p0 = 1, p1 = z;
      for (int k = 2; k <= n; ++k) {
        T p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1;
      dp = n * (z * p1 - p0) / (z * z - 1);
      T dz = p1 / dp;
      z -= dz;
      if (abs(dz) < tol) break;
    }
    T p0 = 1, p1 = z;
    for (int k = 2; k <= n; ++k) {
      T p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (z * p1 - p0) / (z * z - 1);
    T wi = 2 / ((1 - z * z) * dp * dp);
    // map [-1,1] -> [0,1]
    x[i] = (1 - z) / 2;
    x[n - 1 - i] = (1 + z) / 2;
    w[i] = wi / 2;
    w[n - 1 - i] = wi / 2;
  }
  return {x, w};
}

template std::pair<std::vector<Real>, std::vector<Real>> gauss_legendre01<Real>(int);
template std::pair<std::vector<Quad>, std::vector<Quad>> gauss_legendre01<Quad>(int);
template std::pair<std::vector<double>, std::vector<double>> gauss_legendre01<double>(int);

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error(ErrorKind::InvalidInput, "linear_fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

double log_abs(const BigInt& x) {
  if (x == 0) throw Error(ErrorKind::InvalidInput, "log of zero");
  BigInt a = abs(x);
  std::size_t bits = mp::msb(a);
  if (bits < 1000) return std::log(static_cast<double>(a));
  std::size_t shift = bits - 60;
  BigInt top = a >> shift;
  return std::log(static_cast<double>(top)) + static_cast<double>(shift) * std::log(2.0);
}

}  // namespace giet
