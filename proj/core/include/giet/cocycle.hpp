#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "giet/combinatorics.hpp"
#include "giet/numeric.hpp"

namespace giet {

using IntVector = std::vector<BigInt>;
using RatVector = std::vector<Rational>;
using VecD = std::vector<double>;

class IntMatrix {
 public:
  IntMatrix() = default;
  explicit IntMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n) {}
  static IntMatrix identity(int n);

  int size() const { return n_; }
  BigInt& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  const BigInt& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

  IntMatrix transpose() const;
  BigInt determinant() const;  // exact, Bareiss
  bool nonnegative() const;
  bool positive() const;

  friend IntMatrix operator*(const IntMatrix& a, const IntMatrix& b);
  friend IntVector operator*(const IntMatrix& a, const IntVector& v);
  friend RatVector operator*(const IntMatrix& a, const RatVector& v);
  friend bool operator==(const IntMatrix& a, const IntMatrix& b) { return a.n_ == b.n_ && a.a_ == b.a_; }

 private:
  int n_ = 0;
  std::vector<BigInt> a_;
};

// Exact rational linear algebra on small dense systems.
namespace exact {
using RatMatrix = std::vector<RatVector>;  // row-major
int rank(RatMatrix m);
std::vector<RatVector> nullspace(RatMatrix m);
// One solution of m x = b with free variables set to zero, or nullopt if inconsistent.
std::optional<RatVector> solve(RatMatrix m, RatVector b);
RatMatrix to_rat(const IntMatrix& m);
RatVector to_rat(const IntVector& v);
// Decides whether { t : a_i . t + c_i > 0 for all i } is nonempty (Fourier-Motzkin).
bool strictly_feasible(std::vector<RatVector> a, RatVector c);
}  // namespace exact

IntMatrix omega_matrix(const CombinatorialData& pi);
IntMatrix theta_matrix(const RauzyStep& step);
// (Theta^t)^{-1} = I - E_{winner, loser}
IntMatrix theta_transpose_inverse(const RauzyStep& step);
IntMatrix theta_inverse(const RauzyStep& step);

bool check_intertwine(const RauzyStep& step);
bool check_intertwine(const RauzyStep& step, const IntMatrix& theta);  // with a caller-supplied Theta

int omega_rank(const CombinatorialData& pi);
bool genus_one(const CombinatorialData& pi);

std::vector<IntVector> ker_basis(const CombinatorialData& pi);
// Two independent columns of Omega spanning Im Omega (genus one).
std::vector<IntVector> image_basis(const CombinatorialData& pi);

bool in_cone_Tplus(const CombinatorialData& pi, const RatVector& tau);
bool in_cone_Tplus(const CombinatorialData& pi, const IntVector& tau);
bool cone_membership_Cs(const CombinatorialData& pi, const RatVector& v);
bool cone_membership_Cu(const CombinatorialData& pi, const RatVector& v);
// True iff some kernel vector of Omega has all entries strictly positive.
bool kernel_meets_positive_orthant(const CombinatorialData& pi);

// Exact ordered product Theta_{n2} ... Theta_{n1}, both ends inclusive.
IntMatrix cocycle_product(const CombinatoricsSequence& seq, std::size_t n1, std::size_t n2);
// Theta_{end-1} ... Theta_{begin}; an empty range gives the identity.
IntMatrix cocycle_range(const CombinatoricsSequence& seq, std::size_t begin, std::size_t end);
// (Theta_{end-1} ... Theta_{begin})^{-1}, exactly integral.
IntMatrix cocycle_range_inverse(const CombinatoricsSequence& seq, std::size_t begin, std::size_t end);

// In-place vector actions: v_loser += v_winner, and its inverse.
template <class V>
void apply_theta(const RauzyStep& s, V& v) {
  v[s.loser] += v[s.winner];
}
template <class V>
void apply_theta_inverse(const RauzyStep& s, V& v) {
  v[s.loser] -= v[s.winner];
}

struct RateEstimate {
  double fitted_rate = 0;
  double prefactor = 0;
  double residual = 0;
  std::pair<int, int> n_range{0, 0};
};

struct HyperbolicityReport {
  RateEstimate mu_u;
  RateEstimate mu_s;
  bool hyperbolic = false;  // both rates > 1
};

// Samples tau in T+ (integer vectors, rejection) and positive w; fits per-step growth of
// -Omega tau under forward products and of pulled-back Omega w under inverse products.
HyperbolicityReport hyperbolicity_probe(const CombinatoricsSequence& seq, int samples, std::uint64_t rng_seed,
                                        std::optional<std::pair<int, int>> n_range = std::nullopt);

// Deterministic T+ representative: first hit of a scan over {-2..2}^d (then wider).
IntVector sample_Tplus(const CombinatorialData& pi);

struct PsiResult {
  std::vector<IntVector> kernel;         // k_i
  std::vector<RatVector> psi;            // Psi_p(k_i) in Im Omega
  std::vector<RatVector> central_basis;  // k_i + Psi_p(k_i), fixed by the loop product
};

PsiResult psi_p(const CombinatoricsSequence& loop);

struct CentralSpaceResult {
  std::vector<RatVector> central_basis;
  std::vector<std::size_t> closures;
  std::vector<double> increments;  // max-norm change of Psi(k_i) between successive closures
  std::vector<std::size_t> loop_lengths;
  std::optional<std::string> warning;
};

// Closes seq[j, n) back to pi^j for every n in closures and solves psi_p on the loop.
CombinatoricsSequence closed_loop(const CombinatoricsSequence& seq, std::size_t j, std::size_t n);
CentralSpaceResult central_space(const CombinatoricsSequence& seq, std::size_t level,
                                 const std::vector<std::size_t>& closures, double tolerance = 1e-6);

struct SpectralSplit {
  std::vector<VecD> stable_basis;
  std::vector<VecD> central_basis;
  VecD unstable_vector;
  std::size_t level = 0;
};

struct SplitComponents {
  VecD stable, central, unstable;
  VecD coefficients;  // stable..., central..., unstable
  double condition = 0;
};

SplitComponents split_vector(const VecD& v, const SpectralSplit& split, double max_condition = 1e12);

struct DirectionResult {
  VecD direction;  // unit Euclidean norm
  std::vector<double> increments;  // angle change per extra depth
};

// Stable line at `level`: pull back Omega_{pi^{level+m}} w through exact inverse products, m = 1..depth.
DirectionResult stable_space(const CombinatoricsSequence& seq, std::size_t depth, std::size_t level = 0,
                             const IntVector& w = {});
// Forward image Theta_{0,n-1}(-Omega tau0), normalized; entries stay positive.
DirectionResult unstable_direction(const CombinatoricsSequence& seq, std::size_t n, const IntVector& tau0 = {});

// min_n ||Theta_{0,n-1} v|| / ||v|| and max_n of the same, n = 0..len (sum norm).
std::pair<double, double> growth_band(const CombinatoricsSequence& seq, const RatVector& v);

VecD to_double(const RatVector& v);
VecD normalized(const IntVector& v);  // v / max|v_i|, computed without overflow
double angle(const VecD& a, const VecD& b);  // angle between lines, in [0, pi/2]

std::string matrix_to_string(const IntMatrix& m);

}  // namespace giet
