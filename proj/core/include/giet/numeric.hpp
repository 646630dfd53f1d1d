#pragma once

#include <boost/multiprecision/float128.hpp>
#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace giet {

namespace mp = boost::multiprecision;

using BigInt = mp::mpz_int;
using Rational = mp::mpq_rational;
// Variable precision MPFR; expression templates off, they cost more than they save here.
using Real = mp::number<mp::mpfr_float_backend<0>, mp::et_off>;
using Quad = mp::float128;

enum class ErrorKind {
  InvalidInput,
  Hypothesis,
  Precision,
  CombinatoricsMismatch,
  Connection,
  Numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind);

// Working precision of Real, in bits. Default 256, overridable by GIET_PRECISION_BITS.
void set_precision_bits(int bits);
int precision_bits();
int default_precision_bits();

template <class T>
int scalar_bits();
template <>
inline int scalar_bits<Real>() {
  return precision_bits();
}
template <>
inline int scalar_bits<Quad>() {
  return 113;
}
template <>
inline int scalar_bits<double>() {
  return 53;
}

// 2^-e in the scalar type.
template <class T>
T pow2m(int e) {
  return ldexp(T(1), -e);
}

template <class T>
double to_double(const T& x) {
  return static_cast<double>(x);
}

std::string to_decimal(const Real& x);
std::string to_decimal(const Quad& x);
std::string to_decimal(double x);
std::string to_decimal(const BigInt& x);

template <class T>
T from_decimal(const std::string& s) {
  return T(s);
}
template <>
Quad from_decimal<Quad>(const std::string& s);

// Gauss-Legendre nodes and weights on [0,1], computed by Newton iteration on P_n.
template <class T>
std::pair<std::vector<T>, std::vector<T>> gauss_legendre01(int n);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double rms = 0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double log_abs(const BigInt& x);  // ln|x|, x != 0

}  // namespace giet
