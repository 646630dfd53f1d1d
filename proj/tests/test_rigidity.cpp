#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "giet/rigidity.hpp"

using namespace giet;
using namespace fixtures;

namespace {

const ConjugacyTable<Quad>& rigid_table() {
  static const ConjugacyTable<Quad> t = build_conjugacy(rigid_f<Quad>(), rigid_g<Quad>(), 25);
  return t;
}

std::shared_ptr<const Giem<Quad>> golden_charted() {
  GiemConfig c = golden_config();
  c.chart = std::array<std::string, 3>{"0.1", "0.2", "0"};
  return share<Quad>(c);
}

double max_gap(const std::vector<std::pair<Quad, Quad>>& pts) {
  double m = static_cast<double>(pts.front().first);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) m = std::max(m, static_cast<double>(pts[k + 1].first - pts[k].first));
  return std::max(m, 1 - static_cast<double>(pts.back().first));
}

}  // namespace

TEST(Rigidity, EntryTimes) {
  const auto states = renormalize(pair_f<Quad>(), 12);
  const auto& st = states.back();
  EXPECT_EQ(entry_time(st, st.interval_length / 2), 0u);
  for (int a = 0; a < 3; ++a) {
    const std::uint64_t q = static_cast<std::uint64_t>(st.return_times[a]);
    std::uint64_t i = 0;
    st.walk_floors(a, [&](const Quad& lo, const Quad& hi) {
      const Quad x = (lo + hi) / 2;
      const std::uint64_t e = entry_time(st, x);
      EXPECT_EQ(e, i == 0 ? 0 : q - i) << "letter " << a << " floor " << i;
      if (e >= 1) EXPECT_EQ(entry_time(st, st.base->value(st.base->letter_of(x), x)), e - 1);
      ++i;
    });
    EXPECT_EQ(i, q);
  }
}

TEST(Rigidity, SelfConjugacyIsIdentity) {
  const auto f = pair_f<Quad>();
  const auto t = build_conjugacy(f, f, 12);
  for (const auto& [x, y] : t.deepest()) EXPECT_EQ(x, y);
  EXPECT_EQ(c8_estimate(t).estimate.fitted_rate, 1);
  const DhReport dh = dh_check(t, 10, 3);
  EXPECT_EQ(dh.max_relative_deviation, 0);
  for (double s : dh.fd_slopes) EXPECT_NEAR(s, 1, 1e-25);
  const PsiSeries<Quad> ps = psi_series(t, Quad(0.4321));
  for (const auto& v : ps.values) EXPECT_EQ(v, 0);
}

TEST(Rigidity, AffineAgainstItsOwnModelIsIdentity) {
  const auto f = share<Quad>(to_config(seed_model()));
  const StrongModel sm = strong_model(*f, 60);
  const auto g = share<Quad>(to_config(sm.model));
  const auto t = build_conjugacy(f, g, 15);
  for (const auto& [x, y] : t.deepest()) EXPECT_LT(abs(x - y), Quad(1e-9));
}

TEST(Rigidity, TablesAreMonotoneAndRefining) {
  const auto t = build_conjugacy(share<Quad>(golden_config()), golden_charted(), 18);
  for (const auto& level : t.levels)
    for (std::size_t k = 0; k + 1 < level.size(); ++k) {
      EXPECT_LT(level[k].first, level[k + 1].first);
      EXPECT_LT(level[k].second, level[k + 1].second);
    }
  for (std::size_t j = 0; j + 1 < t.levels.size(); ++j) {
    const auto& next = t.levels[j + 1];
    // endpoints are recomputed per level, so match them up to rounding
    for (const auto& p : t.levels[j]) {
      auto it = std::lower_bound(next.begin(), next.end(), std::pair<Quad, Quad>{p.first - Quad(1e-24), Quad(-1)});
      ASSERT_NE(it, next.end());
      EXPECT_LT(abs(it->first - p.first), Quad(1e-24)) << "level " << j;
      EXPECT_LT(abs(it->second - p.second), Quad(1e-24)) << "level " << j;
    }
  }
}

TEST(Rigidity, CombinatoricsMismatchNamesStep) {
  GiemConfig c = golden_config();
  c.domain_lengths = {"0.7", "0.3"};
  try {
    build_conjugacy(share<Quad>(golden_config()), share<Quad>(c), 10);
    FAIL() << "expected a combinatorics mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CombinatoricsMismatch);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Rigidity, EnclosuresShrinkAndStayOrdered) {
  const auto& t = rigid_table();
  EXPECT_LT(max_gap(t.levels[25]), 0.1 * max_gap(t.levels[5]));
  const auto& pts = t.deepest();
  const auto [lo, hi] = conjugacy_point(t, pts[100].first);
  EXPECT_EQ(lo, hi);
  Quad prev_hi = -1;
  for (int i = 1; i < 200; ++i) {
    const auto [a, b] = conjugacy_point(t, Quad(i) / 200);
    EXPECT_LE(a, b);
    EXPECT_GE(a, prev_hi - Quad(1e-30));
    EXPECT_LE(b - a, Quad(max_gap(t.deepest()) * 2));
    prev_hi = a;
  }
}

TEST(Rigidity, PsiSeriesConverges) {
  const auto& t = rigid_table();
  const PsiSeries<Quad> ps = psi_series(t, Quad(0.61803));
  for (std::size_t n = 1; n < ps.entry.size(); ++n) EXPECT_GE(ps.entry[n], ps.entry[n - 1]);
  // increments vanish once x sits on a matched point; fit the nonzero tail
  std::vector<std::pair<double, double>> tail;
  for (const auto& [n, v] : window(ps.increments, 5, ps.increments.size() - 1))
    if (v > 0) tail.emplace_back(n, v);
  ASSERT_GE(tail.size(), 6u);
  EXPECT_LT(rate_fit(tail).sqrt_exponential.fitted_rate, 1);
}

TEST(Rigidity, CohomologicalEquation) {
  const auto& t = rigid_table();
  const auto& f = *t.f_states[0].base;
  const auto& g = *t.g_states[0].base;
  for (double xd : {0.137, 0.4242, 0.777}) {
    const Quad x(xd);
    const int a = f.letter_of(x);
    const Quad fx = f.value(a, x);
    const Quad hx = conjugacy_interpolate(t, x).first;
    const double lhs = static_cast<double>(log(g.derivative(g.letter_of(hx), hx)) - log(f.derivative(a, x)));
    const double rhs = static_cast<double>(psi_series(t, fx).values.back() - psi_series(t, x).values.back());
    EXPECT_NEAR(lhs, rhs, 1e-5) << xd;
  }
}

TEST(Rigidity, C8AndDhLaw) {
  const auto& t = rigid_table();
  const C8Estimate c8 = c8_estimate(t);
  EXPECT_LT(c8.spread.back(), 1e-6);
  // for H o f o H^-1 against f, h = H and C8 = Dh(0) = DH(0) = 1
  EXPECT_NEAR(c8.estimate.fitted_rate, 1, 1e-6);
  const DhReport dh = dh_check(t, 50, 7);
  EXPECT_LT(dh.max_relative_deviation, 1e-2);
  EXPECT_EQ(dh.samples.size(), 50u);
  EXPECT_LT(dh.lipschitz, 2);
  EXPECT_GT(dh.lipschitz, 1);
  const RateFit fit = rate_fit(window(dh.psi_increment_max, 5, dh.psi_increment_max.size() - 1));
  EXPECT_LE(fit.sqrt_exponential.fitted_rate, 0.9);
}

TEST(Rigidity, C8AgainstTheAffineSeed) {
  const auto t = build_conjugacy(share<Quad>(to_config(seed_model())), pair_f<Quad>(), 25);
  EXPECT_NEAR(c8_estimate(t).estimate.fitted_rate, 1, 1e-4);
}

TEST(Rigidity, PsiContinuityAtMatchedPoints) {
  const auto& t = rigid_table();
  // just left and right of a matched point deep in the table
  const auto& pts = t.deepest();
  for (std::size_t k : {pts.size() / 3, pts.size() / 2}) {
    const Quad x = pts[k].first;
    const Quad gap = std::min(pts[k + 1].first - x, x - pts[k - 1].first);
    const double l = static_cast<double>(psi_series(t, x - gap / 2).values.back());
    const double r = static_cast<double>(psi_series(t, x + gap / 2).values.back());
    EXPECT_NEAR(l, r, 1e-3);
  }
}

TEST(Rigidity, DistortionDecays) {
  const auto states = renormalize(pair_f<Quad>(), 25);
  const auto d = distortion_series(states);
  EXPECT_LT(d[25], 0.05 * d[2]);
}

TEST(Rigidity, RateFitSynthetic) {
  std::vector<std::pair<double, double>> s, c;
  for (int n = 1; n <= 30; ++n) {
    s.emplace_back(n, std::pow(0.5, std::sqrt(n)));
    c.emplace_back(n, 3.0);
  }
  const RateFit a = rate_fit(s);
  EXPECT_NEAR(a.sqrt_exponential.fitted_rate, 0.5, 1e-12);
  EXPECT_NEAR(a.sqrt_exponential.residual, 0, 1e-12);
  EXPECT_TRUE(a.decaying);
  const RateFit b = rate_fit(c);
  EXPECT_NEAR(b.sqrt_exponential.fitted_rate, 1, 1e-12);
  EXPECT_FALSE(b.decaying);
  c[3].second = 0;
  EXPECT_THROW(rate_fit(c), Error);
  EXPECT_THROW(rate_fit({{1, 1}, {2, 1}}), Error);
}

TEST(Rigidity, TheoremChecksOnAffineInput) {
  const auto f = share<Quad>(to_config(seed_model()));
  const TheoremReport r = theorem_checks<Quad>(f, f);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_TRUE(r.model_combinatorics_agree);
  for (const auto& [n, v] : r.model_distance.series) EXPECT_LT(v, 1e-9) << n;
  EXPECT_EQ(*r.model_mismatch_slopes, 0);
  for (const auto& [n, v] : r.pair_distance->series) EXPECT_EQ(v, 0);
}

TEST(Rigidity, TheoremChecksOnBreakEquivalentPair) {
  const TheoremReport r = theorem_checks<Quad>(pair_f<Quad>(), pair_g<Quad>());
  EXPECT_TRUE(r.failures.empty());
  EXPECT_TRUE(r.model_combinatorics_agree);
  EXPECT_LT(r.normalization_residual, 1e-8);
  EXPECT_LT(*r.model_mismatch_slopes, 1e-8);
  EXPECT_LT(*r.model_mismatch_lengths, 1e-8);
  ASSERT_TRUE(r.pair_distance->fit.valid);
  EXPECT_LT(r.pair_distance->fit.sqrt_exponential.fitted_rate, 0.9);
  EXPECT_LT(r.model_distance.fit.sqrt_exponential.fitted_rate, 0.9);
}

TEST(Rigidity, TheoremChecksReportMissingHypotheses) {
  GiemConfig c = to_config(seed_model());
  c.branches = {BranchSpec{"moebius", {{"a", "1.3"}}}, BranchSpec{}, BranchSpec{}};
  const TheoremReport r = theorem_checks<Quad>(share<Quad>(c), nullptr);
  ASSERT_FALSE(r.failures.empty());
  EXPECT_NE(r.failures[0].find("mean nonlinearity"), std::string::npos);
}
