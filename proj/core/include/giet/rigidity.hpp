#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "giet/affine.hpp"
#include "giet/cocycle.hpp"
#include "giet/giem.hpp"

namespace giet {

template <class T>
struct ConjugacyTable {
  std::size_t depth = 0;
  std::vector<RenormState<T>> f_states, g_states;
  // levels[j]: matched left endpoints of all floors f^i(I^j_alpha) and g^i(I~^j_alpha), sorted by f
  std::vector<std::vector<std::pair<T, T>>> levels;
  const std::vector<std::pair<T, T>>& deepest() const { return levels.back(); }
};

// First i >= 0 with f^i(x) in I^n.
template <class T>
std::uint64_t entry_time(const RenormState<T>& state_f, const T& x);

template <class T>
ConjugacyTable<T> build_conjugacy(std::shared_ptr<const Giem<T>> f, std::shared_ptr<const Giem<T>> g, std::size_t depth);

template <class T>
std::pair<T, T> conjugacy_point(const ConjugacyTable<T>& table, const T& x);

// Cubic interpolant of h through the four nearest matched pairs, with |cubic - quadratic| as
// the error estimate.
template <class T>
std::pair<T, T> conjugacy_interpolate(const ConjugacyTable<T>& table, const T& x);

template <class T>
struct PsiSeries {
  T x;
  std::vector<T> values;               // psi_n(x), n = 0..depth
  std::vector<std::uint64_t> entry;    // i_n(x)
  std::vector<double> increments;      // |psi_{n+1} - psi_n|
  double max_uncertainty = 0;          // largest |d ln Dg| induced by the h estimate
  bool one_sided = false;
};

template <class T>
PsiSeries<T> psi_series(const ConjugacyTable<T>& table, const T& x, double tolerance = 1e-8);

struct RateFit {
  bool valid = false;             // at least six positive points were available
  RateEstimate sqrt_exponential;  // value ~ C lambda^sqrt(n)
  RateEstimate exponential;       // value ~ C lambda^n
  bool decaying = false;          // sqrt-exponential lambda < 1
};

RateFit rate_fit(const std::vector<std::pair<double, double>>& series);

struct C8Estimate {
  RateEstimate estimate;           // fitted_rate holds C8; residual holds the final per-letter spread
  std::vector<double> spread;      // per level, max - min of the per-letter ratios
  std::vector<VecD> ratios;        // per level, per letter
};

template <class T>
C8Estimate c8_estimate(const ConjugacyTable<T>& table, double spread_tolerance = 1e-3);

struct DhReport {
  double max_relative_deviation = 0;
  double lipschitz = 0;  // largest matched-pair slope of h
  double c8 = 0;
  std::vector<double> samples;
  std::vector<double> fd_slopes;
  std::vector<double> predicted;
  std::vector<double> psi_increment_max;  // per n, max over samples of |psi_{n+1} - psi_n|
};

template <class T>
DhReport dh_check(const ConjugacyTable<T>& table, int samples, std::uint64_t seed, double psi_tolerance = 1e-8);

struct DistanceSeries {
  std::vector<std::pair<double, double>> series;  // (n, d_C2)
  std::optional<std::size_t> divergence;          // first differing step
  RateFit fit;
};

template <class T>
DistanceSeries distance_series(const std::vector<RenormState<T>>& a, const std::vector<RenormState<T>>& b,
                               std::size_t from = 0);

struct TheoremReport {
  // f against the affine model extracted from it
  std::optional<SlopeExtraction> extraction;
  std::optional<ModelBuild> model;
  bool model_combinatorics_agree = false;
  DistanceSeries model_distance;
  double normalization_residual = 0;
  // models extracted from f and g
  std::optional<double> model_mismatch_lengths, model_mismatch_slopes;
  // f against g
  std::optional<DistanceSeries> pair_distance;
  std::vector<std::string> failures;
};

struct TheoremOptions {
  std::size_t depth = 35;            // comparison depth
  std::size_t extraction_depth = 60;  // deeper than the comparison so the closure stays outside the window
  std::size_t fit_from = 5;
  SlopeExtractionOptions extraction;
};

template <class T>
TheoremReport theorem_checks(std::shared_ptr<const Giem<T>> f, std::shared_ptr<const Giem<T>> g,
                             const TheoremOptions& opt = {});

// Per level, the largest variation of ln D f_n over the branch domains I^n_alpha.
template <class T>
std::vector<double> distortion_series(const std::vector<RenormState<T>>& states, int grid = 9);

std::string combinatorics_divergence_message(std::size_t step);

}  // namespace giet
