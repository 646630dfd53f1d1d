#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "giet/cocycle.hpp"
#include "giet/combinatorics.hpp"
#include "giet/giem.hpp"

namespace giet {

struct AffineIem {
  CombinatorialData pi;
  VecD lengths;
  VecD slopes;
  VecD translations;  // g(x) = exp(slope) x + translation on I_alpha
};

AffineIem build_affine(const CombinatorialData& pi, VecD lengths, const VecD& slopes, bool auto_rescale = false,
                       double tolerance = 1e-10);
GiemConfig to_config(const AffineIem& g);
double tiling_residual(const AffineIem& g);

VecD slope_update(const VecD& omega, const RauzyStep& step);
// omega^0 .. omega^len along seq
std::vector<VecD> slope_orbit(const VecD& omega, const CombinatoricsSequence& seq);

double d_p(const VecD& lam, const VecD& gam);

struct TransferMatrix {
  int d = 0;
  std::vector<double> m;  // row-major
  int winner = 0, loser = 0, eps = 0;
  double slope_entry = 0;
  double operator()(int i, int j) const { return m[static_cast<std::size_t>(i) * d + j]; }
};

TransferMatrix t_matrix(const RauzyStep& step, double slope_entry);
VecD apply(const TransferMatrix& t, const VecD& v);
VecD t_nor(const TransferMatrix& t, const VecD& zeta);

struct ModelTraceRow {
  std::size_t depth = 0;
  double d_p_gap = 0;
  double kappa_window = 0;  // NaN until one full window of history exists
  double residual_normalization = 0;
};

struct AffineModel {
  VecD zeta;
  std::vector<ModelTraceRow> trace;
  double kappa = 0;  // fitted contraction per window
  std::size_t window = 0;
  std::size_t depth_used = 0;
};

// zeta~^0 as the limit of T~^nor_0 ... T~^nor_{D-1}(uniform) for growing D.
AffineModel affine_model_lengths(const CombinatoricsSequence& seq, const std::vector<VecD>& slopes_along,
                                 double tolerance = 1e-12);

double normalization_check(const VecD& omega, const VecD& zeta);

// Affine i.e.m. with slopes omega and the combinatorics of the closed-up prefix.
struct ModelBuild {
  AffineIem model;
  AffineModel construction;
  CombinatoricsSequence extension;  // prefix + closure, repeated
};
ModelBuild model_from_prefix(const CombinatoricsSequence& prefix, const VecD& omega, std::size_t min_length = 0);
struct SlopeExtraction;
// Model on the closure chosen by the extraction.
ModelBuild model_from_extraction(const SlopeExtraction& ex, std::size_t min_length = 0);

struct SlopeExtractionOptions {
  double nonlinearity_tolerance = 1e-10;
  double cauchy_tolerance = 1e-4;
  int quadrature_nodes = 32;
  std::size_t stable_depth = 40;
  int max_k = 12;
  std::size_t closure_margin = 24;  // observed steps required after the closing depth
};

struct SlopeExtraction {
  VecD omega;
  std::vector<RatVector> central_basis;  // level 0, exact
  CombinatoricsSequence seq;             // combinatorics of f through depth
  std::size_t closure_depth = 0;         // prefix length that was closed
  CombinatoricsSequence loop;            // seq[0, closure_depth) closed back to pi^0
  std::optional<int> k_bound;
  double mean_nonlinearity = 0;
  std::vector<VecD> L;                  // L^0 .. L^depth
  std::vector<VecD> omega_tilde;        // per level, 1..depth
  std::vector<double> increments;       // ||omega~_{n+1} - omega~_n||_inf
  std::vector<double> residuals;        // ||omega^n - L^n||_inf for n = 0..depth
  std::vector<double> pseudo_orbit;     // ||L^{n+1} - Theta_n L^n||_inf for n = 0..depth-1
};

template <class T>
SlopeExtraction extract_slope_vector(const Giem<T>& f, std::size_t depth, const SlopeExtractionOptions& opt = {});
template <class T>
SlopeExtraction extract_slope_vector(const std::vector<RenormState<T>>& states, const SlopeExtractionOptions& opt = {});

// ||L^{n+1} - Theta_n L^n||_inf along the sequence
std::vector<double> pseudo_orbit_residuals(const std::vector<VecD>& L, const CombinatoricsSequence& seq);

AffineIem weak_model_family(const VecD& omega, const VecD& v_stable, double t, const CombinatoricsSequence& extension);

struct StrongModel {
  AffineIem model;
  double t0 = 0;
  VecD omega;
  VecD v_stable;
  double target_log_break = 0;  // ln BP_f(0)
  double log_break_t1 = 0, log_break_t2 = 0;
};

double log_break_at_zero(const AffineIem& g);
template <class T>
double log_break_at_zero(const Giem<T>& f);

StrongModel strong_model(const SlopeExtraction& ex, double target_log_break);
template <class T>
StrongModel strong_model(const Giem<T>& f, std::size_t depth, const SlopeExtractionOptions& opt = {});

struct InvariantMasses {
  VecD masses;
  double half_gap = 0;  // L1 gap between the two half-orbit estimates
};

InvariantMasses invariant_masses(const AffineIem& g, std::size_t orbit_length = 1000000, double x0 = 0.5);

}  // namespace giet
