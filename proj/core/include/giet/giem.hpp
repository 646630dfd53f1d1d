#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "giet/combinatorics.hpp"
#include "giet/numeric.hpp"

namespace giet {

// Smooth change of coordinates of [0,1]: H(x) = x + c2 u^2 + c3 u^3 + c4 u^4 with u = x(1-x).
// H fixes 0 and 1 with DH = 1 there; c3 = 2 c2 makes it C^3 on the circle.
template <class T>
struct Chart {
  T c2 = 0, c3 = 0, c4 = 0;

  bool identity() const { return c2 == 0 && c3 == 0 && c4 == 0; }
  T value(const T& x) const;
  void eval3(const T& x, T& v, T& d1, T& d2) const;
  T inverse(const T& y) const;
};

// x -> (a x + b) / (c x + d)
template <class T>
struct Moebius {
  T a = 1, b = 0, c = 0, d = 1;

  static Moebius affine(const T& slope, const T& shift) { return {slope, shift, T(0), T(1)}; }
  T value(const T& x) const { return (a * x + b) / (c * x + d); }
  void eval3(const T& x, T& v, T& d1, T& d2) const;
  T inverse(const T& y) const { return (d * y - b) / (a - c * y); }
  Moebius then(const Moebius& next) const;  // next o this
  void normalize();
};

enum class BranchFamily { Affine, Moebius, PerturbedAffine, Charted };
const char* to_string(BranchFamily f);

// A branch on the zoomed domain [0,1] with value(0) = 0 and value(1) = 1.
template <class T>
struct BranchMap {
  BranchFamily family = BranchFamily::Affine;
  T a = 1;        // Moebius: z -> a z / (1 + (a-1) z)
  T s = 0, r = 0;  // perturbed affine: z + s/pi sin(pi z) + r/(2 pi) sin(2 pi z)
  // Charted: H o seed o H^{-1} restricted to one interval, rescaled.
  Chart<T> chart;
  Moebius<T> seed;
  T dom_left = 0, dom_len = 1, img_left = 0, img_len = 1;

  void eval3(const T& z, T& v, T& d1, T& d2) const;
  T value(const T& z) const;
  T inverse(const T& w) const;
  // ln Dphi(1) - ln Dphi(0)
  T nonlinearity() const;
};

struct BranchSpec {
  std::string family = "affine";
  std::map<std::string, std::string> params;  // decimal strings; "balance" = "true" for the solver
};

struct GiemConfig {
  CombinatorialData pi;
  std::vector<std::string> domain_lengths;  // by letter (alphabet order)
  std::vector<std::string> image_lengths;   // empty -> equal to domain lengths
  std::vector<BranchSpec> branches;         // empty -> all affine
  std::optional<std::array<std::string, 3>> chart;  // c2, c3, c4
};

template <class T>
struct Giem {
  CombinatorialData pi;
  std::vector<T> domain_lengths, image_lengths;
  std::vector<T> domain_left, image_left;
  std::vector<BranchMap<T>> branches;
  // Fast path: f = H o M_alpha o H^{-1} on I_alpha with M_alpha fractional linear in absolute
  // chart coordinates. Present for affine, Moebius and charted maps.
  std::optional<Chart<T>> chart;
  std::vector<Moebius<T>> chart_maps;

  int d() const { return pi.d(); }
  int letter_of(const T& x) const;  // letter whose domain contains x in [0,1)
  void eval3(int letter, const T& x, T& v, T& d1, T& d2) const;
  T value(int letter, const T& x) const;
  T inverse(int letter, const T& y) const;
  T derivative(int letter, const T& x) const;
  bool fast_path() const { return chart.has_value(); }
  // every branch a translation: plain affine branches without a chart and equal lengths
  bool isometric() const;
};

template <class T>
Giem<T> build_giem(const GiemConfig& config);

// Closed-form solve of the perturbed-affine parameter s that cancels `others` (sum of the
// other branches' nonlinearities): s = (1 + r) tanh(others / 2).
double balancing_s(double others, double r);

template <class T>
T mean_nonlinearity(const Giem<T>& f);

template <class T>
struct BreakRecord {
  T point;
  T ratio;  // Df(x-)/Df(x+), x- taken on the circle for x = 0
  int letter;
};

template <class T>
std::vector<BreakRecord<T>> break_points(const Giem<T>& f);

using Itinerary = std::shared_ptr<const std::vector<std::uint8_t>>;

template <class T>
struct RenormState {
  std::shared_ptr<const Giem<T>> base;
  std::size_t level = 0;
  CombinatorialData pi;
  T interval_length = 1;
  std::vector<T> dom_len, img_len;  // |I^n_alpha|, |f_n(I^n_alpha)|
  std::vector<BigInt> return_times;
  CombinatoricsSequence seq;
  std::vector<Itinerary> itinerary;  // base letters visited by f^{q}; empty once the cap is exceeded
  std::vector<Moebius<T>> mats;      // fast path composition in chart coordinates

  int d() const { return pi.d(); }
  T dom_left(int letter) const;
  T img_left(int letter) const;
  std::vector<T> cut_points() const;
  bool has_itinerary() const { return !itinerary.empty(); }
  // sum over all floors f^i(I^n_alpha), i < q_alpha, of their lengths; equals 1 when the towers tile
  T tower_mass() const;
  // sum_alpha q_alpha |I^n_alpha|; equals tower_mass() only for isometric exchanges
  T isometric_mass() const;
  int letter_of(const T& x) const;
  // Calls visit(lo, hi) for the floors f^i(I^n_alpha), i = 0..q_alpha-1, in order.
  void walk_floors(int letter, const std::function<void(const T&, const T&)>& visit) const;
};

struct RenormOptions {
  std::size_t itinerary_cap = std::size_t(1) << 26;  // total letters stored across all itineraries
  int guard_bits = 64;  // stop when |I^n| <= 2^-(precision - guard_bits)
};

template <class T>
RenormState<T> initial_state(std::shared_ptr<const Giem<T>> f, const RenormOptions& opt = {});
template <class T>
RenormState<T> rv_step(const RenormState<T>& state, const RenormOptions& opt = {});
template <class T>
std::vector<RenormState<T>> renormalize(std::shared_ptr<const Giem<T>> f, std::size_t steps,
                                        const RenormOptions& opt = {});

enum class EvalMode { Auto, Iterate, Fast };

template <class T>
struct Jet {
  T value, d1, d2;
};

// f_n on I^n_alpha; x in absolute coordinates of I^n.
template <class T>
Jet<T> eval_Rn(const RenormState<T>& state, const T& x, EvalMode mode = EvalMode::Auto);
template <class T>
Jet<T> eval_branch(const RenormState<T>& state, int letter, const T& x, EvalMode mode = EvalMode::Auto);
template <class T>
T inverse_branch(const RenormState<T>& state, int letter, const T& y);
// ln D f_n on I^n_alpha.
template <class T>
T log_derivative(const RenormState<T>& state, int letter, const T& x, EvalMode mode = EvalMode::Auto);

// Zoomed n-th branch: [0,1] -> [0,1].
template <class T>
struct ZoomedBranch {
  const RenormState<T>* state;
  int letter;
  T left, len, img_left, img_len;
  Jet<T> eval(const T& z) const;
};

template <class T>
ZoomedBranch<T> zoom_branch(const RenormState<T>& state, int letter);

template <class T>
std::vector<T> mean_log_derivative(const RenormState<T>& state, int nodes = 32, EvalMode mode = EvalMode::Auto);

// Max over letters of the C^2 grid distance of zoomed branches plus the two L1 terms
// on normalized domain and image length vectors.
template <class T>
double c2_distance(const RenormState<T>& a, const RenormState<T>& b, int grid = 257);
template <class T>
double c2_distance(const Giem<T>& a, const Giem<T>& b, int grid = 257);

template <class T>
struct BreakCheck {
  int letter;       // gamma at level n
  int base_letter;  // alpha with f^{j}(boundary) = boundary of I_alpha
  std::size_t j;
  T lhs, rhs, diff;  // BP ratios and |lhs - rhs|
};

// nullopt when the hypotheses of the telescoping identity do not hold for this letter.
template <class T>
std::optional<BreakCheck<T>> try_break_invariance(const RenormState<T>& state, int letter);
template <class T>
BreakCheck<T> break_invariance_check(const RenormState<T>& state, int letter);

// Zoomed branches of a base map as a level-0 state are available through initial_state.

}  // namespace giet
