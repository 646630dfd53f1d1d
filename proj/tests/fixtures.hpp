#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "giet/affine.hpp"
#include "giet/giem.hpp"
#include "giet/rigidity.hpp"

namespace fixtures {

using namespace giet;

inline const double phi = (1 + std::sqrt(5.0)) / 2;

inline CombinatorialData golden_pi() { return make_pi("AB", "BA"); }
inline CombinatorialData symmetric_pi() { return make_pi("ABC", "CBA"); }
// ABC/CAB: the genus-one d=3 class used for the smooth fixtures.
inline CombinatorialData p1_pi() { return make_pi("ABC", "CAB"); }

inline std::vector<std::string> golden_lengths() {
  return {"0.6180339887498948482045868343656381177203091798057628621354486227052604628189024497",
          "0.3819660112501051517954131656343618822796908201942371378645513772947395371810975503"};
}

inline GiemConfig golden_config() {
  GiemConfig c;
  c.pi = golden_pi();
  c.domain_lengths = golden_lengths();
  return c;
}

// Alternating types, starting with `first`.
inline CombinatoricsSequence alternating(const CombinatorialData& pi, std::size_t n, int first = 0) {
  std::vector<int> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = static_cast<int>((i + first) % 2);
  return make_sequence(pi, eps);
}

// Fibonacci numbers F_0 = 0, F_1 = 1, computed by plain recursion.
inline std::vector<std::uint64_t> fibonacci(int n) {
  std::vector<std::uint64_t> f{0, 1};
  while (static_cast<int>(f.size()) <= n) f.push_back(f[f.size() - 1] + f[f.size() - 2]);
  return f;
}

inline CombinatoricsSequence seed_loop() { return make_sequence(p1_pi(), {1, 0, 1, 0, 0, 1, 0}); }

// Central vector of the loop, scaled to max-norm 0.3.
inline VecD seed_omega() {
  const PsiResult psi = psi_p(seed_loop());
  double m = 0;
  for (const auto& x : psi.central_basis[0]) m = std::max(m, std::abs(static_cast<double>(x)));
  VecD w;
  for (const auto& x : psi.central_basis[0]) w.push_back(0.3 * static_cast<double>(x) / m);
  return w;
}

inline const AffineIem& seed_model() {
  static const AffineIem g = model_from_prefix(seed_loop(), seed_omega()).model;
  return g;
}

inline GiemConfig charted_config(const std::string& c2, const std::string& c3, const std::string& c4) {
  GiemConfig c = to_config(seed_model());
  c.chart = std::array<std::string, 3>{c2, c3, c4};
  return c;
}

template <class T>
std::shared_ptr<const Giem<T>> share(const GiemConfig& c) {
  return std::make_shared<const Giem<T>>(build_giem<T>(c));
}

// Break-equivalent pair with first-order chart terms and its c4-only sibling.
template <class T>
std::shared_ptr<const Giem<T>> pair_f() {
  return share<T>(charted_config("0.1", "0.2", "0"));
}
template <class T>
std::shared_ptr<const Giem<T>> pair_g() {
  return share<T>(charted_config("-0.05", "-0.1", "0.5"));
}
template <class T>
std::shared_ptr<const Giem<T>> rigid_f() {
  return share<T>(charted_config("0", "0", "2"));
}
template <class T>
std::shared_ptr<const Giem<T>> rigid_g() {
  return share<T>(charted_config("0", "0", "-3"));
}

inline std::vector<std::pair<double, double>> window(const std::vector<double>& v, std::size_t from, std::size_t to) {
  std::vector<std::pair<double, double>> s;
  for (std::size_t n = from; n <= to && n < v.size(); ++n) s.emplace_back(static_cast<double>(n), v[n]);
  return s;
}

}  // namespace fixtures
