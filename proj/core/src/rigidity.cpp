#include "giet/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace giet {

std::string combinatorics_divergence_message(std::size_t step) {
  std::ostringstream os;
  os << "combinatorics diverge at step " << step;
  return os.str();
}

template <class T>
std::uint64_t entry_time(const RenormState<T>& state_f, const T& x) {
  if (x < 0 || x >= 1) throw Error(ErrorKind::InvalidInput, "entry_time: x must lie in [0,1)");
  BigInt qmax = 0;
  for (const auto& q : state_f.return_times) qmax = std::max(qmax, q);
  const Giem<T>& f = *state_f.base;
  T p = x;
  std::uint64_t i = 0;
  while (p >= state_f.interval_length) {
    if (BigInt(i) >= qmax) throw Error(ErrorKind::Numerical, "entry time exceeds the tallest tower");
    p = f.value(f.letter_of(p), p);
    ++i;
  }
  return i;
}

namespace {

template <class T>
void collect_floors(const RenormState<T>& st, std::vector<T>& out) {
  for (int a = 0; a < st.d(); ++a) st.walk_floors(a, [&](const T& lo, const T&) { out.push_back(lo); });
}

template <class T>
T lagrange(const std::vector<std::pair<T, T>>& pts, const std::vector<std::size_t>& idx, const T& x) {
  T s = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    T w = pts[idx[i]].second;
    for (std::size_t j = 0; j < idx.size(); ++j)
      if (j != i) w *= (x - pts[idx[j]].first) / (pts[idx[i]].first - pts[idx[j]].first);
    s += w;
  }
  return s;
}

// Index k with pts[k].first <= x < pts[k+1].first; pts carries the sentinel (1,1).
template <class T>
std::size_t bracket(const std::vector<std::pair<T, T>>& pts, const T& x) {
  auto it = std::upper_bound(pts.begin(), pts.end(), x, [](const T& v, const auto& p) { return v < p.first; });
  if (it == pts.begin()) return 0;
  return std::min<std::size_t>(static_cast<std::size_t>(it - pts.begin()) - 1, pts.size() - 2);
}

template <class T>
std::vector<std::pair<T, T>> with_sentinel(const std::vector<std::pair<T, T>>& pts) {
  auto out = pts;
  out.emplace_back(T(1), T(1));
  return out;
}

}  // namespace

template <class T>
ConjugacyTable<T> build_conjugacy(std::shared_ptr<const Giem<T>> f, std::shared_ptr<const Giem<T>> g,
                                  std::size_t depth) {
  if (!(f->pi == g->pi)) throw Error(ErrorKind::CombinatoricsMismatch, combinatorics_divergence_message(0));
  ConjugacyTable<T> t;
  t.depth = depth;
  t.f_states.push_back(initial_state(f));
  t.g_states.push_back(initial_state(g));
  for (std::size_t j = 0; j < depth; ++j) {
    t.f_states.push_back(rv_step(t.f_states.back()));
    t.g_states.push_back(rv_step(t.g_states.back()));
    const auto& sf = t.f_states.back().seq.steps.back();
    const auto& sg = t.g_states.back().seq.steps.back();
    if (sf.eps != sg.eps || sf.winner != sg.winner)
      throw Error(ErrorKind::CombinatoricsMismatch, combinatorics_divergence_message(j));
  }
  for (std::size_t j = 0; j <= depth; ++j) {
    std::vector<T> pf, pg;
    collect_floors(t.f_states[j], pf);
    collect_floors(t.g_states[j], pg);
    std::vector<std::pair<T, T>> level(pf.size());
    for (std::size_t i = 0; i < pf.size(); ++i) level[i] = {pf[i], pg[i]};
    std::sort(level.begin(), level.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < level.size(); ++i)
      if (!(level[i - 1].second < level[i].second))
        throw Error(ErrorKind::Numerical, "matched endpoints are not order preserving at level " + std::to_string(j));
    t.levels.push_back(std::move(level));
  }
  return t;
}

template <class T>
std::pair<T, T> conjugacy_point(const ConjugacyTable<T>& table, const T& x) {
  const auto pts = with_sentinel(table.deepest());
  const std::size_t k = bracket(pts, x);
  if (pts[k].first == x) return {pts[k].second, pts[k].second};
  return {pts[k].second, pts[k + 1].second};
}

template <class T>
std::pair<T, T> conjugacy_interpolate(const ConjugacyTable<T>& table, const T& x) {
  const auto& deep = table.deepest();
  std::vector<std::pair<T, T>> pts;
  pts.reserve(deep.size() + 2);
  // circle neighbours so that the stencil never runs off either end
  pts.emplace_back(deep.back().first - 1, deep.back().second - 1);
  pts.insert(pts.end(), deep.begin(), deep.end());
  pts.emplace_back(T(1), T(1));
  pts.emplace_back(deep[1].first + 1, deep[1].second + 1);
  const std::size_t k = bracket(pts, x);
  if (pts[k].first == x) return {pts[k].second, T(0)};
  const std::size_t lo = k == 0 ? 0 : k - 1;
  const std::size_t hi = std::min(lo + 3, pts.size() - 1);
  std::vector<std::size_t> cubic;
  for (std::size_t i = hi - 3; i <= hi; ++i) cubic.push_back(i);
  std::vector<std::size_t> quad = {k, k + 1};
  const bool left_closer = k > 0 && (k + 2 >= pts.size() || x - pts[k - 1].first < pts[k + 2].first - x);
  quad.push_back(left_closer ? k - 1 : k + 2);
  const T c = lagrange(pts, cubic, x);
  const T q = lagrange(pts, quad, x);
  return {c, abs(c - q)};
}

template <class T>
PsiSeries<T> psi_series(const ConjugacyTable<T>& table, const T& x, double tolerance) {
  const Giem<T>& f = *table.f_states.front().base;
  const Giem<T>& g = *table.g_states.front().base;
  PsiSeries<T> out;
  out.x = x;
  {
    const auto pts = with_sentinel(table.deepest());
    const std::size_t k = bracket(pts, x);
    out.one_sided = pts[k].first == x;
  }
  const std::uint64_t last = entry_time(table.f_states.back(), x);
  out.entry.resize(table.depth + 1);
  std::vector<T> partial(1, T(0));
  T p = x;
  std::size_t n = 0;
  for (std::uint64_t i = 0;; ++i) {
    while (n <= table.depth && p < table.f_states[n].interval_length) {
      out.entry[n] = i;
      ++n;
    }
    if (i == last) break;
    const int a = f.letter_of(p);
    const auto [hp, err] = conjugacy_interpolate(table, p);
    const int b = g.letter_of(hp);
    T gv, gd1, gd2, fv, fd1, fd2;
    g.eval3(b, hp, gv, gd1, gd2);
    f.eval3(a, p, fv, fd1, fd2);
    const double unc = to_double(abs(gd2 / gd1) * err);
    out.max_uncertainty = std::max(out.max_uncertainty, unc);
    if (unc > tolerance)
      throw Error(ErrorKind::Precision, "conjugacy enclosure too wide to evaluate ln Dg o h; deepen the table");
    partial.push_back(partial.back() + log(fd1) - log(gd1));
    p = fv;
  }
  out.values.resize(table.depth + 1);
  for (std::size_t m = 0; m <= table.depth; ++m) out.values[m] = partial[out.entry[m]];
  for (std::size_t m = 0; m < table.depth; ++m)
    out.increments.push_back(to_double(abs(out.values[m + 1] - out.values[m])));
  return out;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& series) {
  if (series.size() < 6) throw Error(ErrorKind::InvalidInput, "rate_fit needs at least six points");
  std::vector<double> xs, sq, ys;
  for (const auto& [n, v] : series) {
    if (!(v > 0)) throw Error(ErrorKind::InvalidInput, "rate_fit needs positive values");
    xs.push_back(n);
    sq.push_back(std::sqrt(n));
    ys.push_back(std::log(v));
  }
  const std::pair<int, int> range{static_cast<int>(series.front().first), static_cast<int>(series.back().first)};
  RateFit r;
  r.valid = true;
  const LinearFit a = linear_fit(sq, ys);
  r.sqrt_exponential = {std::exp(a.slope), std::exp(a.intercept), a.rms, range};
  const LinearFit b = linear_fit(xs, ys);
  r.exponential = {std::exp(b.slope), std::exp(b.intercept), b.rms, range};
  r.decaying = r.sqrt_exponential.fitted_rate < 1 - 1e-9;
  return r;
}

template <class T>
C8Estimate c8_estimate(const ConjugacyTable<T>& table, double spread_tolerance) {
  C8Estimate out;
  for (std::size_t n = 1; n <= table.depth; ++n) {
    const auto& sf = table.f_states[n];
    const auto& sg = table.g_states[n];
    VecD r(static_cast<std::size_t>(sf.d()));
    for (int a = 0; a < sf.d(); ++a) r[a] = to_double(sg.img_len[a] / sf.img_len[a]);
    const auto [mn, mx] = std::minmax_element(r.begin(), r.end());
    out.spread.push_back(*mx - *mn);
    out.ratios.push_back(r);
  }
  if (out.ratios.empty()) throw Error(ErrorKind::InvalidInput, "c8_estimate needs depth >= 1");
  const VecD& last = out.ratios.back();
  double mean = 0;
  for (double v : last) mean += v;
  mean /= static_cast<double>(last.size());
  out.estimate.fitted_rate = mean;
  out.estimate.prefactor = 1;
  out.estimate.residual = out.spread.back();
  out.estimate.n_range = {1, static_cast<int>(table.depth)};
  if (out.spread.back() > spread_tolerance)
    throw Error(ErrorKind::Numerical, "per-letter ratios do not stabilize to a common constant");
  return out;
}

template <class T>
DhReport dh_check(const ConjugacyTable<T>& table, int samples, std::uint64_t seed, double psi_tolerance) {
  DhReport rep;
  const C8Estimate c8 = c8_estimate(table);
  rep.c8 = c8.estimate.fitted_rate;
  const auto pts = with_sentinel(table.deepest());
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double s = to_double((pts[k + 1].second - pts[k].second) / (pts[k + 1].first - pts[k].first));
    rep.lipschitz = std::max(rep.lipschitz, s);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  rep.psi_increment_max.assign(table.depth, 0.0);
  while (static_cast<int>(rep.samples.size()) < samples) {
    const T x = T(uni(rng));
    const std::size_t k = bracket(pts, x);
    const T gap = pts[k + 1].first - pts[k].first;
    // keep away from matched points, which lie on finite orbits of the cut points
    if (x - pts[k].first < gap * T(1e-3) || pts[k + 1].first - x < gap * T(1e-3)) continue;
    const PsiSeries<T> ps = psi_series(table, x, psi_tolerance);
    const double fd = to_double((pts[k + 1].second - pts[k].second) / gap);
    const double pred = rep.c8 * std::exp(to_double(ps.values.back()));
    rep.samples.push_back(to_double(x));
    rep.fd_slopes.push_back(fd);
    rep.predicted.push_back(pred);
    rep.max_relative_deviation = std::max(rep.max_relative_deviation, std::abs(fd - pred) / pred);
    for (std::size_t n = 0; n < ps.increments.size(); ++n)
      rep.psi_increment_max[n] = std::max(rep.psi_increment_max[n], ps.increments[n]);
  }
  return rep;
}

template <class T>
DistanceSeries distance_series(const std::vector<RenormState<T>>& a, const std::vector<RenormState<T>>& b,
                               std::size_t from) {
  DistanceSeries out;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t j = 0; j < n; ++j) {
    if (!(a[j].pi == b[j].pi)) {
      out.divergence = j;
      break;
    }
    if (j >= from) out.series.emplace_back(static_cast<double>(j), c2_distance(a[j], b[j]));
  }
  for (std::size_t j = 1; j < n && !out.divergence; ++j) {
    const auto& sa = a[j].seq.steps.back();
    const auto& sb = b[j].seq.steps.back();
    if (sa.eps != sb.eps || sa.winner != sb.winner) out.divergence = j - 1;
  }
  std::vector<std::pair<double, double>> pos;
  for (const auto& p : out.series)
    if (p.second > 0) pos.push_back(p);
  if (pos.size() >= 6 && pos.size() == out.series.size()) out.fit = rate_fit(pos);
  return out;
}

template <class T>
std::vector<double> distortion_series(const std::vector<RenormState<T>>& states, int grid) {
  std::vector<double> out;
  for (const auto& st : states) {
    double worst = 0;
    for (int a = 0; a < st.d(); ++a) {
      const T left = st.dom_left(a);
      double lo = 0, hi = 0;
      for (int i = 0; i < grid; ++i) {
        const T x = left + st.dom_len[a] * T(i) / T(grid - 1) * T(1 - 1e-12) + st.dom_len[a] * T(5e-13);
        const double v = to_double(log_derivative(st, a, x));
        if (i == 0) lo = hi = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      worst = std::max(worst, hi - lo);
    }
    out.push_back(worst);
  }
  return out;
}

namespace {

double vec_gap(const VecD& a, const VecD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

template <class T>
TheoremReport theorem_checks(std::shared_ptr<const Giem<T>> f, std::shared_ptr<const Giem<T>> g,
                             const TheoremOptions& opt) {
  TheoremReport rep;
  const std::size_t deep = std::max(opt.depth, opt.extraction_depth);
  std::vector<RenormState<T>> fs;
  std::optional<SlopeExtraction> ex_f;
  std::optional<ModelBuild> mb_f;
  try {
    fs = renormalize(f, deep);
    std::vector<RenormState<T>> head(fs.begin(), fs.begin() + static_cast<std::ptrdiff_t>(opt.extraction_depth + 1));
    ex_f = extract_slope_vector(head, opt.extraction);
    mb_f = model_from_extraction(*ex_f);
    rep.normalization_residual = normalization_check(ex_f->omega, mb_f->construction.zeta);
    rep.extraction = ex_f;
    rep.model = mb_f;
    auto fa = std::make_shared<const Giem<T>>(build_giem<T>(to_config(mb_f->model)));
    auto as = renormalize(fa, opt.depth);
    std::vector<RenormState<T>> fh(fs.begin(), fs.begin() + static_cast<std::ptrdiff_t>(opt.depth + 1));
    rep.model_distance = distance_series(fh, as, opt.fit_from);
    rep.model_combinatorics_agree = !rep.model_distance.divergence && as.size() == fh.size();
    if (!rep.model_combinatorics_agree) rep.failures.push_back("affine model: combinatorics differ from f");
  } catch (const Error& e) {
    rep.failures.push_back(std::string("affine model: ") + to_string(e.kind()) + ": " + e.what());
  }
  if (!g) return rep;
  try {
    auto gs = renormalize(g, deep);
    std::vector<RenormState<T>> fh(fs.begin(), fs.begin() + static_cast<std::ptrdiff_t>(opt.depth + 1));
    std::vector<RenormState<T>> gh(gs.begin(), gs.begin() + static_cast<std::ptrdiff_t>(opt.depth + 1));
    rep.pair_distance = distance_series(fh, gh, opt.fit_from);
    if (rep.pair_distance->divergence) rep.failures.push_back("pair distance: " + combinatorics_divergence_message(*rep.pair_distance->divergence));
    if (ex_f && mb_f) {
      std::vector<RenormState<T>> head(gs.begin(), gs.begin() + static_cast<std::ptrdiff_t>(opt.extraction_depth + 1));
      const SlopeExtraction ex_g = extract_slope_vector(head, opt.extraction);
      const ModelBuild mb_g = model_from_extraction(ex_g);
      rep.model_mismatch_slopes = vec_gap(ex_f->omega, ex_g.omega);
      rep.model_mismatch_lengths = vec_gap(mb_f->model.lengths, mb_g.model.lengths);
    }
  } catch (const Error& e) {
    rep.failures.push_back(std::string("pair: ") + to_string(e.kind()) + ": " + e.what());
  }
  return rep;
}

#define GIET_INSTANTIATE(T)                                                                                  \
  template std::uint64_t entry_time<T>(const RenormState<T>&, const T&);                                     \
  template ConjugacyTable<T> build_conjugacy<T>(std::shared_ptr<const Giem<T>>, std::shared_ptr<const Giem<T>>, \
                                                std::size_t);                                                \
  template std::pair<T, T> conjugacy_point<T>(const ConjugacyTable<T>&, const T&);                           \
  template std::pair<T, T> conjugacy_interpolate<T>(const ConjugacyTable<T>&, const T&);                     \
  template PsiSeries<T> psi_series<T>(const ConjugacyTable<T>&, const T&, double);                           \
  template C8Estimate c8_estimate<T>(const ConjugacyTable<T>&, double);                                      \
  template DhReport dh_check<T>(const ConjugacyTable<T>&, int, std::uint64_t, double);                       \
  template DistanceSeries distance_series<T>(const std::vector<RenormState<T>>&,                             \
                                             const std::vector<RenormState<T>>&, std::size_t);               \
  template std::vector<double> distortion_series<T>(const std::vector<RenormState<T>>&, int);                \
  template TheoremReport theorem_checks<T>(std::shared_ptr<const Giem<T>>, std::shared_ptr<const Giem<T>>,   \
                                           const TheoremOptions&);

GIET_INSTANTIATE(Real)
GIET_INSTANTIATE(Quad)

}  // namespace giet
