#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "giet/affine.hpp"

using namespace giet;
using namespace fixtures;

namespace {

double max_diff(const VecD& a, const VecD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

VecD random_positive(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> U(0.05, 2.0);
  VecD v;
  for (int i = 0; i < d; ++i) v.push_back(U(rng));
  return v;
}

const SlopeExtraction& seed_extraction() {
  static const SlopeExtraction ex = extract_slope_vector(build_giem<Quad>(to_config(seed_model())), 60);
  return ex;
}

}  // namespace

TEST(Affine, BuildStandardAndRotation) {
  const AffineIem g = build_affine(golden_pi(), {phi - 1, 2 - phi}, {0, 0});
  // A moves right by |B|, B moves left by |A|
  EXPECT_NEAR(g.translations[0], 2 - phi, 1e-15);
  EXPECT_NEAR(g.translations[1], -(phi - 1), 1e-15);
  EXPECT_NEAR(tiling_residual(g), 0, 1e-15);
  EXPECT_THROW(build_affine(golden_pi(), {0.5, 0.5}, {0.1, 0.1}), Error);
  const AffineIem r = build_affine(golden_pi(), {0.5, 0.5}, {0.1, 0.3}, true);
  EXPECT_NEAR(tiling_residual(r), 0, 1e-14);
  EXPECT_NEAR(r.slopes[1] - r.slopes[0], 0.2, 1e-14);
  EXPECT_THROW(build_affine(golden_pi(), {0.5, 0.6}, {0, 0}), Error);
}

TEST(Affine, SlopeUpdateExamples) {
  const RauzyStep s = rauzy_move(symmetric_pi(), 0);
  const VecD w = slope_update({0.1, -0.2, 0.1}, s);
  EXPECT_DOUBLE_EQ(w[0], 0.2);
  EXPECT_DOUBLE_EQ(w[1], -0.2);
  EXPECT_DOUBLE_EQ(w[2], 0.1);
  EXPECT_EQ(slope_update({0, 0, 0}, s), (VecD{0, 0, 0}));
}

TEST(AffineProperty, SlopeUpdateIsThetaAction) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-1, 1);
  for (const auto& pi : rauzy_class(p1_pi()))
    for (int e : {0, 1}) {
      const RauzyStep s = rauzy_move(pi, e);
      const IntMatrix t = theta_matrix(s);
      for (int i = 0; i < 100; ++i) {
        const VecD w{U(rng), U(rng), U(rng)};
        const VecD u = slope_update(w, s);
        for (int a = 0; a < 3; ++a) {
          double ref = 0;
          for (int b = 0; b < 3; ++b) ref += static_cast<double>(t(a, b)) * w[b];
          EXPECT_DOUBLE_EQ(u[a], ref);
        }
      }
    }
}

TEST(Affine, ProjectiveMetricExamples) {
  EXPECT_NEAR(d_p({2, 1}, {1, 2}), std::log(4.0), 1e-15);
  EXPECT_NEAR(d_p({0.3, 0.5, 0.2}, {0.6, 1.0, 0.4}), 0, 1e-15);
  EXPECT_THROW(d_p({1, 0}, {1, 1}), Error);
}

TEST(AffineProperty, ProjectiveMetricAxioms) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> E(0, 3);
  for (int i = 0; i < 300; ++i) {
    const VecD a = random_positive(rng, 3), b = random_positive(rng, 3), c = random_positive(rng, 3);
    EXPECT_GE(d_p(a, b), 0);
    EXPECT_NEAR(d_p(a, b), d_p(b, a), 1e-12);
    EXPECT_LE(d_p(a, c), d_p(a, b) + d_p(b, c) + 1e-12);
    // nonnegative matrices do not expand the metric
    std::vector<VecD> g(3, VecD(3));
    for (auto& row : g)
      for (auto& x : row) x = E(rng);
    for (int r = 0; r < 3; ++r) g[r][r] += 1;
    auto apply_g = [&](const VecD& v) {
      VecD out(3, 0.0);
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) out[r] += g[r][k] * v[k];
      return out;
    };
    EXPECT_LE(d_p(apply_g(a), apply_g(b)), d_p(a, b) + 1e-12);
  }
}

TEST(Affine, TransferMatrixStencil) {
  for (const auto& pi : rauzy_class(p1_pi()))
    for (int e : {0, 1}) {
      const RauzyStep s = rauzy_move(pi, e);
      const TransferMatrix t = t_matrix(s, 0.0);
      const IntMatrix th = theta_matrix(s).transpose();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_EQ(t(i, j), static_cast<double>(th(i, j)));
      const VecD z = t_nor(t_matrix(s, 0.4), {0.2, 0.3, 0.5});
      EXPECT_NEAR(z[0] + z[1] + z[2], 1, 1e-15);
    }
}

TEST(Affine, TransferMatrixRecoversLengths) {
  const auto states = renormalize(share<Quad>(to_config(seed_model())), 25);
  const auto orbit = slope_orbit(seed_model().slopes, states.back().seq);
  for (std::size_t n = 0; n + 1 < states.size(); ++n) {
    const RauzyStep& s = states.back().seq.steps[n];
    const TransferMatrix t = t_matrix(s, orbit[n][s.pi.alpha(1)]);
    VecD next, cur;
    for (int a = 0; a < 3; ++a) {
      next.push_back(static_cast<double>(states[n + 1].dom_len[a]));
      cur.push_back(static_cast<double>(states[n].dom_len[a]));
    }
    const VecD back = giet::apply(t, next);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(back[a] / cur[a], 1, 1e-13) << n;
  }
}

TEST(Affine, GoldenModelLengths) {
  const auto seq = alternating(golden_pi(), 60, 0);
  const AffineModel m = affine_model_lengths(seq, slope_orbit({0, 0}, seq));
  EXPECT_NEAR(m.zeta[0], 2 - phi, 1e-12);
  EXPECT_NEAR(m.zeta[1], phi - 1, 1e-12);
  const auto swapped = alternating(golden_pi(), 60, 1);
  const AffineModel m2 = affine_model_lengths(swapped, slope_orbit({0, 0}, swapped));
  EXPECT_NEAR(m2.zeta[0], phi - 1, 1e-12);
  EXPECT_LT(m.kappa, 1);
}

TEST(Affine, ModelLengthsRoundTrip) {
  const AffineIem& g = seed_model();
  const auto ext = periodic_extension(seed_loop(), 120);
  const AffineModel m = affine_model_lengths(ext, slope_orbit(g.slopes, ext));
  EXPECT_LT(max_diff(m.zeta, g.lengths), 1e-10);
  for (double z : m.zeta) EXPECT_GT(z, 0);
  EXPECT_NEAR(m.zeta[0] + m.zeta[1] + m.zeta[2], 1, 1e-14);
  EXPECT_LT(normalization_check(g.slopes, m.zeta), 1e-10);
  EXPECT_EQ(normalization_check({0, 0, 0}, {0.2, 0.3, 0.5}), 0);
  // positive-window contraction
  EXPECT_LT(m.kappa, 1);
  EXPECT_GT(m.window, 0u);
}

TEST(Affine, NonContractingInputIsRejected) {
  // one letter never wins: products never become positive
  const auto seq = make_sequence(golden_pi(), std::vector<int>(200, 0));
  EXPECT_THROW(affine_model_lengths(seq, slope_orbit({0, 0}, seq)), Error);
}

TEST(Affine, ModelFromRandomSlopesTiles) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-0.4, 0.4);
  const VecD c = to_double(psi_p(seed_loop()).central_basis[0]);
  for (int i = 0; i < 5; ++i) {
    const double t = U(rng);
    VecD w;
    for (double x : c) w.push_back(t * x);
    const AffineIem g = model_from_prefix(seed_loop(), w).model;
    EXPECT_LT(tiling_residual(g), 1e-12);
  }
}

TEST(Affine, ExtractionOfAffineInput) {
  const SlopeExtraction& ex = seed_extraction();
  EXPECT_LT(max_diff(ex.omega, seed_model().slopes), 1e-12);
  // the fitted omega is exact to rounding; the unstable part of that rounding grows with n
  for (double r : ex.residuals) EXPECT_LT(r, 1e-8);
  for (double p : ex.pseudo_orbit) EXPECT_LT(p, 1e-12);
  EXPECT_EQ(ex.closure_depth % seed_loop().size(), 0u);

  const SlopeExtraction ex2 = extract_slope_vector(build_giem<Real>(golden_config()), 60);
  for (double w : ex2.omega) EXPECT_EQ(w, 0);
  const AffineIem rot = model_from_extraction(ex2).model;
  EXPECT_NEAR(rot.lengths[0], phi - 1, 1e-12);
}

TEST(Affine, RoundTripThroughRenormalization) {
  const ModelBuild mb = model_from_extraction(seed_extraction());
  EXPECT_LT(max_diff(mb.model.slopes, seed_model().slopes), 1e-10);
  EXPECT_LT(max_diff(mb.model.lengths, seed_model().lengths), 1e-10);
}

TEST(Affine, ExtractionRejectsNonzeroMeanNonlinearity) {
  GiemConfig c = to_config(seed_model());
  c.branches = {BranchSpec{"moebius", {{"a", "1.3"}}}, BranchSpec{}, BranchSpec{}};
  try {
    extract_slope_vector(build_giem<Quad>(c), 30);
    FAIL() << "expected a hypothesis error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Hypothesis);
    EXPECT_NE(std::string(e.what()).find("mean nonlinearity"), std::string::npos);
  }
}

TEST(Affine, ExtractionOfChartedMap) {
  const SlopeExtraction ex = extract_slope_vector(*pair_f<Quad>(), 60);
  // omega~ increments and pseudo-orbit defects decay
  const RateFit inc = rate_fit(window(ex.increments, 5, 34));
  EXPECT_TRUE(inc.valid);
  EXPECT_LT(inc.sqrt_exponential.fitted_rate, 1);
  const RateFit po = rate_fit(window(ex.pseudo_orbit, 5, 35));
  EXPECT_LT(po.sqrt_exponential.fitted_rate, 0.9);
  const ModelBuild mb = model_from_extraction(ex);
  EXPECT_LT(normalization_check(mb.model.slopes, mb.model.lengths), 1e-8);
}

TEST(Affine, StrongModelOfAffineMapIsItself) {
  const StrongModel sm = strong_model(build_giem<Quad>(to_config(seed_model())), 60);
  EXPECT_NEAR(sm.t0, 0, 1e-10);
  EXPECT_LT(max_diff(sm.model.slopes, seed_model().slopes), 1e-10);
  EXPECT_LT(max_diff(sm.model.lengths, seed_model().lengths), 1e-10);
}

TEST(Affine, WeakModelsDifferInTheirBreakAtZero) {
  const SlopeExtraction& ex = seed_extraction();
  const StrongModel sm = strong_model(ex, log_break_at_zero(seed_model()));
  const ModelBuild mb = model_from_extraction(ex);
  const AffineIem g1 = weak_model_family(sm.omega, sm.v_stable, -0.05, mb.extension);
  const AffineIem g2 = weak_model_family(sm.omega, sm.v_stable, 0.05, mb.extension);
  EXPECT_GT(std::abs(log_break_at_zero(g1) - log_break_at_zero(g2)), 1e-4);
  // breaks of a circle-tiling affine map multiply to one
  for (const AffineIem& g : {g1, g2, sm.model}) {
    double logs = 0;
    for (const auto& b : break_points(build_giem<Quad>(to_config(g)))) logs += std::log(static_cast<double>(b.ratio));
    EXPECT_NEAR(logs, 0, 1e-12);
  }
}

TEST(Affine, StrongModelMatchesTargetBreak) {
  const auto f = pair_g<Quad>();
  const StrongModel sm = strong_model(*f, 60);
  EXPECT_NEAR(log_break_at_zero(sm.model), log_break_at_zero(*f), 1e-9);
  EXPECT_NEAR(sm.target_log_break, log_break_at_zero(*f), 1e-15);
}

TEST(Affine, InvariantMasses) {
  const AffineIem rot = build_affine(golden_pi(), {phi - 1, 2 - phi}, {0, 0});
  const InvariantMasses m = invariant_masses(rot);
  EXPECT_NEAR(m.masses[0], phi - 1, 1e-3);
  EXPECT_LT(m.half_gap, 1e-3);

  const AffineIem& g = seed_model();
  const InvariantMasses a = invariant_masses(g, 1000000, 0.5), b = invariant_masses(g, 1000000, 0.123);
  EXPECT_LT(max_diff(a.masses, b.masses), 1e-3);
  double s = 0;
  for (int i = 0; i < 3; ++i) s += g.slopes[i] * a.masses[i];
  EXPECT_LT(std::abs(s), 1e-3);
  EXPECT_NEAR(a.masses[0] + a.masses[1] + a.masses[2], 1, 1e-12);
}
