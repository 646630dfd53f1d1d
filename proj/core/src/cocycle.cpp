#include "giet/cocycle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace giet {

IntMatrix IntMatrix::identity(int n) {
  IntMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

IntMatrix IntMatrix::transpose() const {
  IntMatrix t(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

BigInt IntMatrix::determinant() const {
  // Bareiss fraction-free elimination
  std::vector<BigInt> m = a_;
  const int n = n_;
  auto at = [&](int i, int j) -> BigInt& { return m[static_cast<std::size_t>(i) * n + j]; };
  BigInt sign = 1, prev = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (at(k, k) == 0) {
      int r = k + 1;
      while (r < n && at(r, k) == 0) ++r;
      if (r == n) return 0;
      for (int j = 0; j < n; ++j) std::swap(at(k, j), at(r, j));
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j) at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
    prev = at(k, k);
  }
  return n == 0 ? BigInt(1) : BigInt(sign * at(n - 1, n - 1));
}

bool IntMatrix::nonnegative() const {
  return std::all_of(a_.begin(), a_.end(), [](const BigInt& x) { return x >= 0; });
}

bool IntMatrix::positive() const {
  return std::all_of(a_.begin(), a_.end(), [](const BigInt& x) { return x > 0; });
}

IntMatrix operator*(const IntMatrix& a, const IntMatrix& b) {
  const int n = a.size();
  IntMatrix c(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      if (a(i, k) == 0) continue;
      for (int j = 0; j < n; ++j) c(i, j) += a(i, k) * b(k, j);
    }
  return c;
}

IntVector operator*(const IntMatrix& a, const IntVector& v) {
  IntVector r(a.size());
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < a.size(); ++j) r[i] += a(i, j) * v[j];
  return r;
}

RatVector operator*(const IntMatrix& a, const RatVector& v) {
  RatVector r(a.size());
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < a.size(); ++j)
      if (a(i, j) != 0) r[i] += Rational(a(i, j)) * v[j];
  return r;
}

namespace exact {

namespace {
// Reduced row echelon form in place; returns pivot columns.
std::vector<int> rref(RatMatrix& m, int ncols) {
  std::vector<int> pivots;
  int row = 0;
  const int nrows = static_cast<int>(m.size());
  for (int col = 0; col < ncols && row < nrows; ++col) {
    int p = row;
    while (p < nrows && m[p][col] == 0) ++p;
    if (p == nrows) continue;
    std::swap(m[p], m[row]);
    Rational inv = 1 / m[row][col];
    for (auto& x : m[row]) x *= inv;
    for (int r = 0; r < nrows; ++r) {
      if (r == row || m[r][col] == 0) continue;
      Rational f = m[r][col];
      for (std::size_t j = 0; j < m[r].size(); ++j) m[r][j] -= f * m[row][j];
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}
}  // namespace

int rank(RatMatrix m) {
  if (m.empty()) return 0;
  return static_cast<int>(rref(m, static_cast<int>(m[0].size())).size());
}

std::vector<RatVector> nullspace(RatMatrix m) {
  if (m.empty()) return {};
  const int n = static_cast<int>(m[0].size());
  auto piv = rref(m, n);
  std::vector<bool> is_piv(n, false);
  for (int p : piv) is_piv[p] = true;
  std::vector<RatVector> out;
  for (int free = 0; free < n; ++free) {
    if (is_piv[free]) continue;
    RatVector v(n);
    v[free] = 1;
    for (std::size_t r = 0; r < piv.size(); ++r) v[piv[r]] = -m[r][free];
    out.push_back(v);
  }
  return out;
}

std::optional<RatVector> solve(RatMatrix m, RatVector b) {
  const int nrows = static_cast<int>(m.size());
  if (nrows == 0) return RatVector{};
  const int n = static_cast<int>(m[0].size());
  for (int r = 0; r < nrows; ++r) m[r].push_back(b[r]);
  auto piv = rref(m, n);
  for (int r = static_cast<int>(piv.size()); r < nrows; ++r)
    if (m[r][n] != 0) return std::nullopt;
  RatVector x(n);
  for (std::size_t r = 0; r < piv.size(); ++r) x[piv[r]] = m[r][n];
  return x;
}

RatMatrix to_rat(const IntMatrix& m) {
  RatMatrix r(m.size(), RatVector(m.size()));
  for (int i = 0; i < m.size(); ++i)
    for (int j = 0; j < m.size(); ++j) r[i][j] = Rational(m(i, j));
  return r;
}

RatVector to_rat(const IntVector& v) {
  RatVector r;
  r.reserve(v.size());
  for (const auto& x : v) r.emplace_back(x);
  return r;
}

bool strictly_feasible(std::vector<RatVector> a, RatVector c) {
  const std::size_t nvars = a.empty() ? 0 : a[0].size();
  for (std::size_t var = nvars; var-- > 0;) {
    std::vector<RatVector> na;
    RatVector nc;
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i][var] > 0)
        pos.push_back(i);
      else if (a[i][var] < 0)
        neg.push_back(i);
      else {
        na.push_back(a[i]);
        nc.push_back(c[i]);
      }
    }
    // a_p t + c_p > 0 with a_p[var] > 0 and a_n t + c_n > 0 with a_n[var] < 0 combine to
    // (-a_n[var]) (a_p t + c_p) + a_p[var] (a_n t + c_n) > 0, free of var.
    for (auto p : pos)
      for (auto q : neg) {
        Rational wp = -a[q][var], wq = a[p][var];
        RatVector row(nvars);
        for (std::size_t j = 0; j < nvars; ++j) row[j] = wp * a[p][j] + wq * a[q][j];
        row[var] = 0;
        na.push_back(row);
        nc.push_back(wp * c[p] + wq * c[q]);
      }
    a = std::move(na);
    c = std::move(nc);
  }
  return std::all_of(c.begin(), c.end(), [](const Rational& x) { return x > 0; });
}

}  // namespace exact

IntMatrix omega_matrix(const CombinatorialData& pi) {
  require_valid(pi);
  const int d = pi.d();
  IntMatrix m(d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      if (pi.pi1[a] > pi.pi1[b] && pi.pi0[a] < pi.pi0[b])
        m(a, b) = 1;
      else if (pi.pi1[a] < pi.pi1[b] && pi.pi0[a] > pi.pi0[b])
        m(a, b) = -1;
    }
  return m;
}

IntMatrix theta_matrix(const RauzyStep& step) {
  IntMatrix m = IntMatrix::identity(step.pi.d());
  m(step.loser, step.winner) = 1;
  return m;
}

IntMatrix theta_transpose_inverse(const RauzyStep& step) {
  IntMatrix m = IntMatrix::identity(step.pi.d());
  m(step.winner, step.loser) = -1;
  return m;
}

IntMatrix theta_inverse(const RauzyStep& step) {
  IntMatrix m = IntMatrix::identity(step.pi.d());
  m(step.loser, step.winner) = -1;
  return m;
}

bool check_intertwine(const RauzyStep& step, const IntMatrix& theta) {
  // Theta Omega = Omega' (Theta^t)^{-1}  <=>  Theta Omega Theta^t = Omega'
  return theta * omega_matrix(step.pi) * theta.transpose() == omega_matrix(step.next_pi);
}

bool check_intertwine(const RauzyStep& step) {
  return theta_matrix(step) * omega_matrix(step.pi) == omega_matrix(step.next_pi) * theta_transpose_inverse(step);
}

int omega_rank(const CombinatorialData& pi) { return exact::rank(exact::to_rat(omega_matrix(pi))); }

bool genus_one(const CombinatorialData& pi) { return omega_rank(pi) == 2; }

namespace {
void require_genus_one(const CombinatorialData& pi) {
  if (!genus_one(pi))
    throw Error(ErrorKind::Hypothesis, "combinatorial data " + pi.str() + " does not have genus one (rank Omega != 2)");
}

bool in_kernel(const IntMatrix& om, const std::vector<int>& v) {
  for (int i = 0; i < om.size(); ++i) {
    BigInt s = 0;
    for (int j = 0; j < om.size(); ++j) s += om(i, j) * v[j];
    if (s != 0) return false;
  }
  return true;
}
}  // namespace

std::vector<IntVector> ker_basis(const CombinatorialData& pi) {
  require_genus_one(pi);
  const int d = pi.d();
  if (d == 2) return {};
  const IntMatrix om = omega_matrix(pi);
  // Search {-1,0,1}^d in order of support size, first nonzero entry positive.
  std::vector<std::vector<int>> candidates;
  if (d <= 10) {
    std::vector<int> v(d, -1);
    while (true) {
      bool nonzero = false, lead_pos = false;
      for (int x : v)
        if (x != 0) {
          nonzero = true;
          lead_pos = x > 0;
          break;
        }
      if (nonzero && lead_pos && in_kernel(om, v)) candidates.push_back(v);
      int i = d - 1;
      while (i >= 0 && v[i] == 1) v[i--] = -1;
      if (i < 0) break;
      ++v[i];
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      auto nz = [](const auto& x) { return std::count_if(x.begin(), x.end(), [](int y) { return y != 0; }); };
      return nz(a) < nz(b);
    });
  }
  std::vector<IntVector> basis;
  exact::RatMatrix acc;
  for (const auto& c : candidates) {
    RatVector r(c.begin(), c.end());
    acc.push_back(r);
    if (exact::rank(acc) == static_cast<int>(acc.size())) {
      basis.emplace_back(c.begin(), c.end());
      if (static_cast<int>(basis.size()) == d - 2) return basis;
    } else {
      acc.pop_back();
    }
  }
  // Fallback: primitive integer vectors from the rational nullspace.
  basis.clear();
  for (const auto& v : exact::nullspace(exact::to_rat(om))) {
    BigInt l = 1;
    for (const auto& x : v) l = lcm(l, denominator(x));
    IntVector iv;
    BigInt g = 0;
    for (const auto& x : v) {
      iv.push_back(numerator(x * Rational(l)));
      g = gcd(g, iv.back());
    }
    for (auto& x : iv) x /= g;
    basis.push_back(iv);
  }
  return basis;
}

std::vector<IntVector> image_basis(const CombinatorialData& pi) {
  require_genus_one(pi);
  const IntMatrix om = omega_matrix(pi);
  const int d = pi.d();
  std::vector<IntVector> cols;
  exact::RatMatrix acc;
  for (int j = 0; j < d && cols.size() < 2; ++j) {
    IntVector c(d);
    for (int i = 0; i < d; ++i) c[i] = om(i, j);
    acc.push_back(exact::to_rat(c));
    if (exact::rank(acc) == static_cast<int>(acc.size()))
      cols.push_back(c);
    else
      acc.pop_back();
  }
  return cols;
}

namespace {
// Rows of the T+ inequalities as linear forms on R^A: each must be > 0.
std::vector<RatVector> tplus_forms(const CombinatorialData& pi) {
  const int d = pi.d();
  std::vector<RatVector> rows;
  for (int k = 1; k < d; ++k) {
    RatVector top(d), bot(d);
    for (int a = 0; a < d; ++a) {
      if (pi.pi0[a] <= k) top[a] = 1;
      if (pi.pi1[a] <= k) bot[a] = -1;
    }
    rows.push_back(top);
    rows.push_back(bot);
  }
  return rows;
}

Rational dot(const RatVector& a, const RatVector& b) {
  Rational s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Feasibility of { x = x0 + sum t_i k_i : form_j(x) > 0 for all j }.
bool affine_family_feasible(const RatVector& x0, const std::vector<IntVector>& ker, const std::vector<RatVector>& forms) {
  std::vector<RatVector> a;
  RatVector c;
  for (const auto& f : forms) {
    RatVector row;
    for (const auto& k : ker) row.push_back(dot(f, exact::to_rat(k)));
    a.push_back(row);
    c.push_back(dot(f, x0));
  }
  return exact::strictly_feasible(a, c);
}

std::vector<RatVector> unit_forms(int d) {
  std::vector<RatVector> rows;
  for (int a = 0; a < d; ++a) {
    RatVector r(d);
    r[a] = 1;
    rows.push_back(r);
  }
  return rows;
}
}  // namespace

bool in_cone_Tplus(const CombinatorialData& pi, const RatVector& tau) {
  for (const auto& f : tplus_forms(pi))
    if (dot(f, tau) <= 0) return false;
  return true;
}

bool in_cone_Tplus(const CombinatorialData& pi, const IntVector& tau) { return in_cone_Tplus(pi, exact::to_rat(tau)); }

bool cone_membership_Cs(const CombinatorialData& pi, const RatVector& v) {
  require_genus_one(pi);
  auto w0 = exact::solve(exact::to_rat(omega_matrix(pi)), v);
  if (!w0) return false;
  return affine_family_feasible(*w0, ker_basis(pi), unit_forms(pi.d()));
}

bool cone_membership_Cu(const CombinatorialData& pi, const RatVector& v) {
  require_genus_one(pi);
  RatVector minus_v(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) minus_v[i] = -v[i];
  auto t0 = exact::solve(exact::to_rat(omega_matrix(pi)), minus_v);
  if (!t0) return false;
  return affine_family_feasible(*t0, ker_basis(pi), tplus_forms(pi));
}

bool kernel_meets_positive_orthant(const CombinatorialData& pi) {
  auto ker = ker_basis(pi);
  if (ker.empty()) return false;
  return affine_family_feasible(RatVector(pi.d()), ker, unit_forms(pi.d()));
}

IntMatrix cocycle_range(const CombinatoricsSequence& seq, std::size_t begin, std::size_t end) {
  if (begin > end || end > seq.size()) throw Error(ErrorKind::InvalidInput, "cocycle range outside the sequence");
  if (seq.empty()) throw Error(ErrorKind::InvalidInput, "empty sequence");
  const int d = seq.steps.front().pi.d();
  IntMatrix m = IntMatrix::identity(d);
  // left-multiplying by Theta_n is a row operation: row_loser += row_winner
  for (std::size_t n = begin; n < end; ++n) {
    const auto& s = seq.steps[n];
    for (int j = 0; j < d; ++j) m(s.loser, j) += m(s.winner, j);
  }
  return m;
}

IntMatrix cocycle_product(const CombinatoricsSequence& seq, std::size_t n1, std::size_t n2) {
  if (n1 > n2 || n2 >= seq.size()) throw Error(ErrorKind::InvalidInput, "cocycle_product indices out of range");
  return cocycle_range(seq, n1, n2 + 1);
}

IntMatrix cocycle_range_inverse(const CombinatoricsSequence& seq, std::size_t begin, std::size_t end) {
  if (begin > end || end > seq.size()) throw Error(ErrorKind::InvalidInput, "cocycle range outside the sequence");
  const int d = seq.steps.front().pi.d();
  IntMatrix m = IntMatrix::identity(d);
  // (Theta_{e-1}...Theta_b)^{-1} = Theta_b^{-1} ... Theta_{e-1}^{-1}; right-multiplying by
  // Theta_n^{-1} = I - E_{l,w} is a column operation: col_winner -= col_loser
  for (std::size_t n = begin; n < end; ++n) {
    const auto& s = seq.steps[n];
    for (int i = 0; i < d; ++i) m(i, s.winner) -= m(i, s.loser);
  }
  return m;
}

namespace {
double log_norm1(const IntVector& v) {
  BigInt s = 0;
  for (const auto& x : v) s += abs(x);
  return log_abs(s);
}
}  // namespace

IntVector sample_Tplus(const CombinatorialData& pi) {
  const int d = pi.d();
  for (int r = 2; r <= 6; ++r) {
    std::vector<int> v(d, -r);
    while (true) {
      IntVector iv(v.begin(), v.end());
      if (in_cone_Tplus(pi, iv)) return iv;
      int i = d - 1;
      while (i >= 0 && v[i] == r) v[i--] = -r;
      if (i < 0) break;
      ++v[i];
    }
  }
  throw Error(ErrorKind::Numerical, "no T+ vector found for " + pi.str());
}

HyperbolicityReport hyperbolicity_probe(const CombinatoricsSequence& seq, int samples, std::uint64_t rng_seed,
                                        std::optional<std::pair<int, int>> n_range) {
  if (seq.empty()) throw Error(ErrorKind::InvalidInput, "hyperbolicity_probe needs a nonempty sequence");
  const CombinatorialData& pi0 = seq.steps.front().pi;
  const int d = pi0.d();
  const int len = static_cast<int>(seq.size());
  const auto range = n_range.value_or(std::make_pair(0, len));
  if (range.first < 0 || range.second > len || range.second - range.first < 2)
    throw Error(ErrorKind::InvalidInput, "hyperbolicity_probe range must hold at least three levels");
  if (samples < 1) throw Error(ErrorKind::InvalidInput, "samples must be positive");
  std::mt19937_64 rng(rng_seed);

  std::vector<double> xs, ys;
  // unstable: v0 = -Omega tau with tau in T+ by rejection sampling
  const IntMatrix om0 = omega_matrix(pi0);
  std::uniform_int_distribution<int> coord(-5, 5);
  for (int s = 0; s < samples; ++s) {
    IntVector tau(d);
    int tries = 0;
    do {
      if (++tries > 100000) throw Error(ErrorKind::Numerical, "T+ rejection sampling failed");
      for (auto& x : tau) x = coord(rng);
    } while (!in_cone_Tplus(pi0, tau));
    IntVector v = om0 * tau;
    for (auto& x : v) x = -x;
    const double base = log_norm1(v);
    for (int n = 0; n <= range.second; ++n) {
      if (n >= range.first) {
        xs.push_back(n);
        ys.push_back(log_norm1(v) - base);
      }
      if (n < len) apply_theta(seq.steps[n], v);
    }
  }
  HyperbolicityReport rep;
  {
    LinearFit f = linear_fit(xs, ys);
    rep.mu_u = {std::exp(f.slope), std::exp(f.intercept), f.rms, range};
  }

  // stable: x = Theta_{0,n-1}^{-1} Omega_{pi^n} w for positive w
  xs.clear();
  ys.clear();
  std::uniform_int_distribution<int> pos(1, 5);
  for (int s = 0; s < samples; ++s) {
    IntVector w(d);
    for (auto& x : w) x = pos(rng);
    for (int n = std::max(range.first, 0); n <= range.second; ++n) {
      IntVector v = omega_matrix(seq.pi_at(n)) * w;
      IntVector x = v;
      for (int m = n - 1; m >= 0; --m) apply_theta_inverse(seq.steps[m], x);
      xs.push_back(n);
      ys.push_back(log_norm1(x) - log_norm1(v));
    }
  }
  {
    LinearFit f = linear_fit(xs, ys);
    rep.mu_s = {std::exp(f.slope), std::exp(f.intercept), f.rms, range};
  }
  rep.hyperbolic = rep.mu_u.fitted_rate > 1 && rep.mu_s.fitted_rate > 1;
  return rep;
}

PsiResult psi_p(const CombinatoricsSequence& loop) {
  if (loop.empty() || !(loop.last_pi() == loop.steps.front().pi))
    throw Error(ErrorKind::InvalidInput, "psi_p needs one full period (first pi == last next_pi)");
  const CombinatorialData& pi = loop.steps.front().pi;
  require_genus_one(pi);
  PsiResult out;
  out.kernel = ker_basis(pi);
  if (out.kernel.empty()) return out;
  const IntMatrix M = cocycle_range(loop, 0, loop.size());
  const auto img = image_basis(pi);
  const int d = pi.d();
  // (M - I) [c1 c2] (a, b)^t = k - M k
  exact::RatMatrix A(d, RatVector(2));
  for (int c = 0; c < 2; ++c) {
    IntVector mc = M * img[c];
    for (int i = 0; i < d; ++i) A[i][c] = Rational(mc[i] - img[c][i]);
  }
  if (exact::rank(A) < 2)
    throw Error(ErrorKind::Numerical, "(Theta - Id) restricted to Im Omega is singular on this loop");
  for (const auto& k : out.kernel) {
    IntVector mk = M * k;
    RatVector rhs(d);
    for (int i = 0; i < d; ++i) rhs[i] = Rational(k[i] - mk[i]);
    auto ab = exact::solve(A, rhs);
    if (!ab) throw Error(ErrorKind::Numerical, "k - Theta k is not in Im Omega; loop product inconsistent");
    RatVector x(d), v(d);
    for (int i = 0; i < d; ++i) {
      x[i] = (*ab)[0] * Rational(img[0][i]) + (*ab)[1] * Rational(img[1][i]);
      v[i] = Rational(k[i]) + x[i];
    }
    if (M * v != v) throw Error(ErrorKind::Numerical, "central vector is not fixed by the loop product");
    out.psi.push_back(x);
    out.central_basis.push_back(v);
  }
  return out;
}

CombinatoricsSequence closed_loop(const CombinatoricsSequence& seq, std::size_t j, std::size_t n) {
  if (j >= n || n > seq.size()) throw Error(ErrorKind::InvalidInput, "closure range outside the sequence");
  CombinatoricsSequence part;
  part.steps.assign(seq.steps.begin() + j, seq.steps.begin() + n);
  return concat(part, close_path(part, seq.pi_at(j)));
}

CentralSpaceResult central_space(const CombinatoricsSequence& seq, std::size_t level,
                                 const std::vector<std::size_t>& closures, double tolerance) {
  CentralSpaceResult out;
  std::vector<RatVector> prev;
  for (std::size_t n : closures) {
    CombinatoricsSequence loop = closed_loop(seq, level, n);
    PsiResult r = psi_p(loop);
    if (!prev.empty()) {
      double inc = 0;
      for (std::size_t i = 0; i < r.psi.size(); ++i)
        for (std::size_t a = 0; a < r.psi[i].size(); ++a)
          inc = std::max(inc, std::abs(static_cast<double>(r.psi[i][a] - prev[i][a])));
      out.increments.push_back(inc);
    }
    prev = r.psi;
    out.central_basis = r.central_basis;
    out.closures.push_back(n);
    out.loop_lengths.push_back(loop.size());
  }
  const auto& inc = out.increments;
  if (!inc.empty() && inc.back() >= tolerance) {
    std::ostringstream os;
    os << "central_space: last closure increment " << inc.back() << " exceeds tolerance " << tolerance;
    if (inc.size() >= 2 && inc.back() >= inc[inc.size() - 2]) os << " and increments are not decreasing";
    out.warning = os.str();
  }
  return out;
}

SplitComponents split_vector(const VecD& v, const SpectralSplit& split, double max_condition) {
  const int d = static_cast<int>(v.size());
  std::vector<const VecD*> cols;
  for (const auto& s : split.stable_basis) cols.push_back(&s);
  for (const auto& c : split.central_basis) cols.push_back(&c);
  cols.push_back(&split.unstable_vector);
  if (static_cast<int>(cols.size()) != d) throw Error(ErrorKind::InvalidInput, "split bases do not span R^A");
  Eigen::MatrixXd B(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) B(i, j) = (*cols[j])[i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
  const auto& sv = svd.singularValues();
  const double cond = sv(d - 1) > 0 ? sv(0) / sv(d - 1) : INFINITY;
  if (!(cond < max_condition)) throw Error(ErrorKind::Numerical, "split basis is ill-conditioned");
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
  Eigen::VectorXd c = B.fullPivLu().solve(rhs);
  SplitComponents out;
  out.condition = cond;
  out.coefficients.assign(c.data(), c.data() + d);
  out.stable.assign(d, 0);
  out.central.assign(d, 0);
  out.unstable.assign(d, 0);
  const std::size_t ns = split.stable_basis.size(), nc = split.central_basis.size();
  for (int j = 0; j < d; ++j) {
    VecD& target = j < static_cast<int>(ns) ? out.stable : (j < static_cast<int>(ns + nc) ? out.central : out.unstable);
    for (int i = 0; i < d; ++i) target[i] += c(j) * (*cols[j])[i];
  }
  return out;
}

VecD to_double(const RatVector& v) {
  VecD r;
  for (const auto& x : v) r.push_back(static_cast<double>(x));
  return r;
}

VecD normalized(const IntVector& v) {
  BigInt m = 0;
  for (const auto& x : v) m = std::max(m, BigInt(abs(x)));
  if (m == 0) throw Error(ErrorKind::Numerical, "degenerate zero vector");
  VecD r;
  for (const auto& x : v) r.push_back(static_cast<double>(Rational(x, m)));
  return r;
}

namespace {
VecD unit(VecD v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}
}  // namespace

double angle(const VecD& a, const VecD& b) {
  VecD ua = unit(a), ub = unit(b);
  double c = 0;
  for (std::size_t i = 0; i < ua.size(); ++i) c += ua[i] * ub[i];
  c = std::min(1.0, std::abs(c));
  // acos loses precision near 1; use the sine of the angle via the cross term
  double s2 = 0;
  for (std::size_t i = 0; i < ua.size(); ++i)
    for (std::size_t j = i + 1; j < ua.size(); ++j) {
      double t = ua[i] * ub[j] - ua[j] * ub[i];
      s2 += t * t;
    }
  return std::atan2(std::sqrt(s2), c);
}

DirectionResult stable_space(const CombinatoricsSequence& seq, std::size_t depth, std::size_t level,
                             const IntVector& w_in) {
  if (level + depth > seq.size() || depth == 0) throw Error(ErrorKind::InvalidInput, "stable_space depth outside the sequence");
  const int d = seq.pi_at(level).d();
  IntVector w = w_in.empty() ? IntVector(d, BigInt(1)) : w_in;
  require_genus_one(seq.pi_at(level));
  DirectionResult out;
  VecD prev;
  for (std::size_t m = 1; m <= depth; ++m) {
    IntVector x = omega_matrix(seq.pi_at(level + m)) * w;
    for (std::size_t t = level + m; t-- > level;) apply_theta_inverse(seq.steps[t], x);
    VecD dir = unit(normalized(x));
    if (!prev.empty()) out.increments.push_back(angle(prev, dir));
    prev = dir;
  }
  // fix the sign: first nonzero entry positive
  for (double x : prev)
    if (x != 0) {
      if (x < 0)
        for (double& y : prev) y = -y;
      break;
    }
  out.direction = prev;
  return out;
}

DirectionResult unstable_direction(const CombinatoricsSequence& seq, std::size_t n, const IntVector& tau_in) {
  if (n > seq.size()) throw Error(ErrorKind::InvalidInput, "unstable_direction level outside the sequence");
  const CombinatorialData& pi0 = seq.steps.front().pi;
  IntVector tau = tau_in.empty() ? sample_Tplus(pi0) : tau_in;
  IntVector v = omega_matrix(pi0) * tau;
  for (auto& x : v) x = -x;
  DirectionResult out;
  VecD prev = unit(normalized(v));
  for (std::size_t m = 0; m < n; ++m) {
    apply_theta(seq.steps[m], v);
    VecD dir = unit(normalized(v));
    out.increments.push_back(angle(prev, dir));
    prev = dir;
  }
  out.direction = prev;
  return out;
}

std::pair<double, double> growth_band(const CombinatoricsSequence& seq, const RatVector& v0) {
  RatVector v = v0;
  auto norm = [](const RatVector& x) {
    Rational s = 0;
    for (const auto& y : x) s += abs(y);
    return s;
  };
  const Rational n0 = norm(v0);
  double lo = 1, hi = 1;
  for (const auto& s : seq.steps) {
    apply_theta(s, v);
    double r = static_cast<double>(norm(v) / n0);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo, hi};
}

std::string matrix_to_string(const IntMatrix& m) {
  std::ostringstream os;
  for (int i = 0; i < m.size(); ++i) {
    os << (i ? "\n" : "") << "[";
    for (int j = 0; j < m.size(); ++j) os << (j ? ", " : "") << m(i, j);
    os << "]";
  }
  return os.str();
}

}  // namespace giet
