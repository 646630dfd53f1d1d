#include "giet/affine.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace giet {

namespace {

double sum(const VecD& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

double max_abs_diff(const VecD& a, const VecD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

VecD lefts(const VecD& len, const std::vector<int>& pos) {
  const int d = static_cast<int>(len.size());
  std::vector<int> order(d);
  for (int a = 0; a < d; ++a) order[pos[a] - 1] = a;
  VecD left(d);
  double acc = 0;
  for (int p = 0; p < d; ++p) {
    left[order[p]] = acc;
    acc += len[order[p]];
  }
  return left;
}

// Exact central orbit data for a closed loop.
struct CentralOrbit {
  std::vector<std::vector<VecD>> basis_orbit;  // [i][n] = Theta_{0,n-1} b_i, n = 0..p-1
  std::vector<RatVector> basis;
  std::size_t period = 0;
};

CentralOrbit central_orbit(const CombinatoricsSequence& loop) {
  CentralOrbit co;
  co.basis = psi_p(loop).central_basis;
  co.period = loop.size();
  for (const auto& b : co.basis) {
    std::vector<VecD> orbit;
    RatVector v = b;
    for (std::size_t n = 0; n < loop.size(); ++n) {
      orbit.push_back(to_double(v));
      apply_theta(loop.steps[n], v);
    }
    co.basis_orbit.push_back(orbit);
  }
  return co;
}

// coefficients of omega on the central basis; throws when omega is not central
VecD central_coefficients(const CentralOrbit& co, const VecD& omega) {
  const int d = static_cast<int>(omega.size());
  const int k = static_cast<int>(co.basis.size());
  double norm = 0;
  for (double x : omega) norm = std::max(norm, std::abs(x));
  if (k == 0) {
    if (norm > 1e-12) throw Error(ErrorKind::Hypothesis, "slope vector must vanish when the central space is trivial");
    return {};
  }
  Eigen::MatrixXd B(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) B(i, j) = static_cast<double>(co.basis[j][i]);
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(omega.data(), d);
  Eigen::VectorXd c = B.colPivHouseholderQr().solve(w);
  const double res = (B * c - w).cwiseAbs().maxCoeff();
  if (res > 1e-9 * std::max(1.0, norm))
    throw Error(ErrorKind::Hypothesis, "slope vector is not in the central space of the closed combinatorics");
  return VecD(c.data(), c.data() + k);
}

std::vector<VecD> periodic_slopes(const CentralOrbit& co, const VecD& coeff, std::size_t length, int d) {
  std::vector<VecD> out(length + 1, VecD(d, 0.0));
  for (std::size_t n = 0; n <= length; ++n)
    for (std::size_t i = 0; i < coeff.size(); ++i)
      for (int a = 0; a < d; ++a) out[n][a] += coeff[i] * co.basis_orbit[i][n % co.period][a];
  return out;
}

// Theta_{0,n-1} v for the exact stable vector v = x / ||x||_inf, x the pullback of
// Omega_{pi^M} (1,...,1) from the end of the extension.
std::vector<VecD> stable_orbit(const CombinatoricsSequence& ext) {
  const std::size_t M = ext.size();
  const int d = ext.steps.front().pi.d();
  IntVector y = omega_matrix(ext.pi_at(M)) * IntVector(d, BigInt(1));
  std::vector<IntVector> levels(M + 1);
  levels[M] = y;
  for (std::size_t n = M; n-- > 0;) {
    apply_theta_inverse(ext.steps[n], y);
    levels[n] = y;
  }
  BigInt scale = 0;
  for (const auto& x : levels[0]) scale = std::max(scale, BigInt(abs(x)));
  std::vector<VecD> out;
  for (const auto& lv : levels) {
    VecD v;
    for (const auto& x : lv) v.push_back(static_cast<double>(Rational(x, scale)));
    out.push_back(v);
  }
  // sign: first nonzero entry at level 0 positive
  for (double x : out[0])
    if (x != 0) {
      if (x < 0)
        for (auto& v : out)
          for (double& e : v) e = -e;
      break;
    }
  return out;
}

std::size_t extension_length(const CombinatoricsSequence& loop, std::size_t min_length) {
  return std::max<std::size_t>({min_length, 600, 4 * loop.size()});
}

}  // namespace

AffineIem build_affine(const CombinatorialData& pi, VecD lengths, const VecD& slopes, bool auto_rescale,
                       double tolerance) {
  require_valid(pi);
  const int d = pi.d();
  if (static_cast<int>(lengths.size()) != d || static_cast<int>(slopes.size()) != d)
    throw Error(ErrorKind::InvalidInput, "affine i.e.m. needs one length and one slope per letter");
  for (double x : lengths)
    if (!(x > 0)) throw Error(ErrorKind::InvalidInput, "affine i.e.m. lengths must be positive");
  const double s = sum(lengths);
  if (std::abs(s - 1) > 1e-9) throw Error(ErrorKind::InvalidInput, "affine i.e.m. lengths must sum to 1");
  for (double& x : lengths) x /= s;
  AffineIem g;
  g.pi = pi;
  g.lengths = lengths;
  g.slopes = slopes;
  double tile = 0;
  for (int a = 0; a < d; ++a) tile += std::exp(slopes[a]) * lengths[a];
  if (std::abs(tile - 1) > tolerance) {
    if (!auto_rescale) {
      std::ostringstream os;
      os << "image lengths sum to " << tile << "; tiling identity violated";
      throw Error(ErrorKind::InvalidInput, os.str());
    }
    // lengths stay on the simplex, so the images are rescaled by a common factor
    for (double& w : g.slopes) w -= std::log(tile);
  }
  VecD img(d);
  for (int a = 0; a < d; ++a) img[a] = std::exp(g.slopes[a]) * lengths[a];
  const VecD dl = lefts(lengths, pi.pi0), il = lefts(img, pi.pi1);
  g.translations.resize(d);
  for (int a = 0; a < d; ++a) g.translations[a] = il[a] - std::exp(g.slopes[a]) * dl[a];
  return g;
}

double tiling_residual(const AffineIem& g) { return normalization_check(g.slopes, g.lengths); }

GiemConfig to_config(const AffineIem& g) {
  GiemConfig c;
  c.pi = g.pi;
  for (int a = 0; a < g.pi.d(); ++a) {
    c.domain_lengths.push_back(to_decimal(g.lengths[a]));
    c.image_lengths.push_back(to_decimal(std::exp(g.slopes[a]) * g.lengths[a]));
  }
  return c;
}

VecD slope_update(const VecD& omega, const RauzyStep& step) {
  VecD w = omega;
  w[step.loser] = omega[step.winner] + omega[step.loser];
  return w;
}

std::vector<VecD> slope_orbit(const VecD& omega, const CombinatoricsSequence& seq) {
  std::vector<VecD> out{omega};
  for (const auto& s : seq.steps) out.push_back(slope_update(out.back(), s));
  return out;
}

double d_p(const VecD& lam, const VecD& gam) {
  if (lam.size() != gam.size()) throw Error(ErrorKind::InvalidInput, "d_p: dimension mismatch");
  double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lam.size(); ++i) {
    if (!(lam[i] > 0) || !(gam[i] > 0)) throw Error(ErrorKind::InvalidInput, "d_p needs strictly positive vectors");
    const double r = std::log(lam[i]) - std::log(gam[i]);
    hi = std::max(hi, r);
    lo = std::min(lo, r);
  }
  return hi - lo;
}

TransferMatrix t_matrix(const RauzyStep& step, double slope_entry) {
  TransferMatrix t;
  t.d = step.pi.d();
  t.m.assign(static_cast<std::size_t>(t.d) * t.d, 0.0);
  for (int i = 0; i < t.d; ++i) t.m[static_cast<std::size_t>(i) * t.d + i] = 1;
  t.winner = step.winner;
  t.loser = step.loser;
  t.eps = step.eps;
  t.slope_entry = slope_entry;
  const int l = step.loser, w = step.winner;
  t.m[static_cast<std::size_t>(l) * t.d + l] = std::exp(step.eps * slope_entry);
  t.m[static_cast<std::size_t>(w) * t.d + l] = std::exp((1 - step.eps) * slope_entry);
  return t;
}

VecD apply(const TransferMatrix& t, const VecD& v) {
  VecD r(t.d, 0.0);
  for (int i = 0; i < t.d; ++i)
    for (int j = 0; j < t.d; ++j) r[i] += t(i, j) * v[j];
  return r;
}

VecD t_nor(const TransferMatrix& t, const VecD& zeta) {
  VecD r = apply(t, zeta);
  const double s = sum(r);
  for (double& x : r) x /= s;
  return r;
}

double normalization_check(const VecD& omega, const VecD& zeta) {
  double s = 0;
  for (std::size_t i = 0; i < omega.size(); ++i) s += std::exp(omega[i]) * zeta[i];
  return std::abs(s - 1);
}

AffineModel affine_model_lengths(const CombinatoricsSequence& seq, const std::vector<VecD>& slopes_along,
                                 double tolerance) {
  if (seq.empty()) throw Error(ErrorKind::InvalidInput, "affine_model_lengths needs a nonempty sequence");
  if (slopes_along.size() < seq.size()) throw Error(ErrorKind::InvalidInput, "one slope vector per step is required");
  const int d = seq.steps.front().pi.d();
  int k = seq.k_bound.value_or(0);
  if (k == 0) {
    CombinatoricsSequence head = seq;
    if (head.size() > 80) head.steps.resize(80);
    k = min_k_bound(head, 10).value_or(1);
  }
  AffineModel out;
  out.window = static_cast<std::size_t>(k) * static_cast<std::size_t>(std::max(1, 2 * d - 3));

  std::vector<TransferMatrix> mats;
  for (std::size_t n = 0; n < seq.size(); ++n) {
    const auto& s = seq.steps[n];
    mats.push_back(t_matrix(s, slopes_along[n][s.pi.alpha(1)]));
  }
  std::vector<double> gaps;
  VecD prev;
  const std::size_t w = out.window;
  for (std::size_t D = 1; D <= seq.size(); ++D) {
    VecD z(d, 1.0 / d);
    for (std::size_t n = D; n-- > 0;) z = t_nor(mats[n], z);
    ModelTraceRow row;
    row.depth = D;
    row.d_p_gap = prev.empty() ? std::numeric_limits<double>::infinity() : d_p(z, prev);
    row.kappa_window = D > w + 1 && gaps[D - 1 - w] > 0 ? row.d_p_gap / gaps[D - 1 - w]
                                                        : std::numeric_limits<double>::quiet_NaN();
    row.residual_normalization = normalization_check(slopes_along[0], z);
    gaps.push_back(row.d_p_gap);
    out.trace.push_back(row);
    prev = z;
    if (out.depth_used == 0 && row.d_p_gap < tolerance) out.depth_used = D;
    if (out.depth_used > 0) {
      // past the tolerance keep deepening to the rounding floor, since model lengths feed
      // unstable directions of later renormalizations
      out.zeta = z;
      if (row.d_p_gap < 1e-16 || D >= 2 * out.depth_used) break;
      continue;
    }
    if (D > 3 * w + 1 && std::isfinite(gaps[D - 1 - 3 * w]) && row.d_p_gap >= gaps[D - 1 - 3 * w]) {
      std::ostringstream os;
      os << "transfer chain does not contract: d_p gap " << row.d_p_gap << " at depth " << D << " is not below "
         << gaps[D - 1 - 3 * w] << " three windows earlier";
      throw Error(ErrorKind::Numerical, os.str());
    }
  }
  if (out.zeta.empty())
    throw Error(ErrorKind::InvalidInput, "sequence too short for the model construction to reach tolerance");
  std::vector<double> xs, ys;
  for (const auto& r : out.trace)
    if (std::isfinite(r.d_p_gap) && r.d_p_gap > 0 && r.depth <= out.depth_used) {
      xs.push_back(static_cast<double>(r.depth));
      ys.push_back(std::log(r.d_p_gap));
    }
  out.kappa = xs.size() >= 2 ? std::exp(linear_fit(xs, ys).slope * static_cast<double>(w)) : 0.0;
  return out;
}

ModelBuild model_from_prefix(const CombinatoricsSequence& prefix, const VecD& omega, std::size_t min_length) {
  if (prefix.empty()) throw Error(ErrorKind::InvalidInput, "model_from_prefix needs a nonempty prefix");
  CombinatoricsSequence loop = closed_loop(prefix, 0, prefix.size());
  ModelBuild mb;
  mb.extension = periodic_extension(loop, extension_length(loop, min_length));
  const CentralOrbit co = central_orbit(loop);
  const VecD c = central_coefficients(co, omega);
  const int d = prefix.steps.front().pi.d();
  const auto slopes = periodic_slopes(co, c, mb.extension.size(), d);
  mb.construction = affine_model_lengths(mb.extension, slopes);
  mb.model = build_affine(prefix.steps.front().pi, mb.construction.zeta, omega, false, 1e-8);
  return mb;
}

ModelBuild model_from_extraction(const SlopeExtraction& ex, std::size_t min_length) {
  CombinatoricsSequence prefix = ex.seq;
  prefix.steps.resize(ex.closure_depth);
  return model_from_prefix(prefix, ex.omega, min_length);
}

std::vector<double> pseudo_orbit_residuals(const std::vector<VecD>& L, const CombinatoricsSequence& seq) {
  std::vector<double> out;
  for (std::size_t n = 0; n + 1 < L.size() && n < seq.size(); ++n)
    out.push_back(max_abs_diff(L[n + 1], slope_update(L[n], seq.steps[n])));
  return out;
}

template <class T>
SlopeExtraction extract_slope_vector(const std::vector<RenormState<T>>& states, const SlopeExtractionOptions& opt) {
  if (states.size() < 2) throw Error(ErrorKind::InvalidInput, "slope extraction needs at least one renormalization step");
  const Giem<T>& f = *states.front().base;
  const int d = f.d();
  SlopeExtraction ex;
  if (!genus_one(f.pi)) throw Error(ErrorKind::Hypothesis, "map does not have genus one");
  ex.mean_nonlinearity = to_double(mean_nonlinearity(f));
  if (!(std::abs(ex.mean_nonlinearity) <= opt.nonlinearity_tolerance)) {
    std::ostringstream os;
    os << "zero mean nonlinearity hypothesis violated: integral of D2f/Df = " << ex.mean_nonlinearity
       << " exceeds tolerance " << opt.nonlinearity_tolerance;
    throw Error(ErrorKind::Hypothesis, os.str());
  }
  const std::size_t N = states.size() - 1;
  ex.seq = states.back().seq;
  for (int k = 1; k <= opt.max_k && !ex.k_bound; ++k)
    if (is_k_bounded(ex.seq, k) == Tristate::True) ex.k_bound = k;
  if (!ex.k_bound) {
    bool any_false = false;
    for (int k = 1; k <= opt.max_k; ++k) any_false |= is_k_bounded(ex.seq, k) == Tristate::False;
    if (any_false)
      throw Error(ErrorKind::Hypothesis,
                  "combinatorics are not k-bounded for any k <= " + std::to_string(opt.max_k) + " on the window");
  }
  ex.seq.k_bound = ex.k_bound;

  for (const auto& st : states) {
    auto L = mean_log_derivative(st, opt.quadrature_nodes);
    VecD Ld;
    for (const auto& x : L) Ld.push_back(to_double(x));
    ex.L.push_back(Ld);
  }
  ex.pseudo_orbit = pseudo_orbit_residuals(ex.L, ex.seq);

  // Central data depend on where the prefix is closed. The closing depth is chosen from the
  // combinatorics alone: among prefixes followed by at least `closure_margin` observed steps, the
  // closure whose periodic continuation follows the sequence furthest, ties going to the longer prefix. Maps sharing combinatorics share the gauge.
  struct Fit {
    std::size_t depth = 0;
    CombinatoricsSequence loop;
    std::vector<RatVector> basis;
    VecD coeff;
    std::vector<VecD> omega_tilde;
    std::vector<double> increments, residuals;
  };
  // Central coefficients are read up to `horizon`, the depth through which the closed loop's
  // periodic continuation matches the observed sequence.
  auto fit_closure = [&](std::size_t c, std::size_t horizon) {
    Fit fit;
    fit.depth = c;
    fit.loop = closed_loop(ex.seq, 0, c);
    const CentralOrbit co = central_orbit(fit.loop);
    fit.basis = co.basis;
    const std::size_t nc = co.basis.size();
    fit.coeff.assign(nc, 0.0);
    const CombinatoricsSequence ext = periodic_extension(fit.loop, horizon + opt.stable_depth + 1);
    IntVector u = omega_matrix(f.pi) * sample_Tplus(f.pi);
    for (auto& x : u) x = -x;
    std::vector<RatVector> central = co.basis;
    for (std::size_t n = 0; n <= horizon; ++n) {
      if (n > 0) {
        apply_theta(ex.seq.steps[n - 1], u);
        for (auto& v : central) apply_theta(ex.seq.steps[n - 1], v);
      }
      if (n == 0 || nc == 0) continue;
      SpectralSplit split;
      split.level = n;
      split.stable_basis.push_back(stable_space(ext, opt.stable_depth, n).direction);
      std::vector<double> scale;
      for (const auto& v : central) {
        Rational m = 0;
        for (const auto& x : v) m = std::max(m, Rational(abs(x)));
        VecD w;
        for (const auto& x : v) w.push_back(static_cast<double>(x / m));
        split.central_basis.push_back(w);
        scale.push_back(static_cast<double>(m));
      }
      split.unstable_vector = normalized(u);
      SplitComponents sc = split_vector(ex.L[n], split);
      for (std::size_t i = 0; i < nc; ++i) fit.coeff[i] = sc.coefficients[1 + i] / scale[i];
      VecD wt(d, 0.0);
      for (std::size_t i = 0; i < nc; ++i)
        for (int a = 0; a < d; ++a) wt[a] += fit.coeff[i] * static_cast<double>(co.basis[i][a]);
      if (!fit.omega_tilde.empty()) fit.increments.push_back(max_abs_diff(wt, fit.omega_tilde.back()));
      fit.omega_tilde.push_back(wt);
    }
    const auto orbit = periodic_slopes(co, fit.coeff, N, d);
    for (std::size_t n = 0; n <= N; ++n) fit.residuals.push_back(max_abs_diff(orbit[n], ex.L[n]));
    return fit;
  };
  const std::size_t margin = std::min(N / 2, opt.closure_margin);
  std::size_t best_c = N - margin, best_reach = 0;
  for (std::size_t c = N - margin; c >= std::max<std::size_t>(1, N / 2); --c) {
    const CombinatoricsSequence ext = periodic_extension(closed_loop(ex.seq, 0, c), N);
    std::size_t reach = c;
    while (reach < N && ext.steps[reach].eps == ex.seq.steps[reach].eps) ++reach;
    if (reach > best_reach) {
      best_reach = reach;
      best_c = c;
    }
    if (reach == N) break;
  }
  const Fit best = fit_closure(best_c, best_reach);
  ex.closure_depth = best.depth;
  ex.loop = best.loop;
  ex.central_basis = best.basis;
  ex.omega_tilde = best.omega_tilde;
  ex.increments = best.increments;
  ex.residuals = best.residuals;
  ex.omega = best.basis.empty() ? VecD(d, 0.0) : ex.omega_tilde.back();
  if (!ex.increments.empty() && ex.increments.back() > opt.cauchy_tolerance) {
    std::ostringstream os;
    os << "slope extraction is not Cauchy: increments";
    for (double x : ex.increments) os << ' ' << x;
    throw Error(ErrorKind::Numerical, os.str());
  }
  return ex;
}

template <class T>
SlopeExtraction extract_slope_vector(const Giem<T>& f, std::size_t depth, const SlopeExtractionOptions& opt) {
  auto p = std::make_shared<const Giem<T>>(f);
  return extract_slope_vector(renormalize(p, depth), opt);
}

namespace {

AffineIem weak_model_on(const CombinatoricsSequence& loop, const VecD& omega, const VecD& v_stable, double t,
                        std::size_t min_length) {
  const int d = loop.steps.front().pi.d();
  const CombinatoricsSequence ext = periodic_extension(loop, extension_length(loop, min_length));
  const CentralOrbit co = central_orbit(loop);
  auto slopes = periodic_slopes(co, central_coefficients(co, omega), ext.size(), d);
  const auto sorbit = stable_orbit(ext);
  // v_stable fixes scale and sign of the exact stable line
  double num = 0, den = 0;
  for (int a = 0; a < d; ++a) {
    num += v_stable[a] * sorbit[0][a];
    den += sorbit[0][a] * sorbit[0][a];
  }
  const double scale = num / den;
  if (angle(v_stable, sorbit[0]) > 1e-6)
    throw Error(ErrorKind::Hypothesis, "v_stable is not aligned with the stable space of the combinatorics");
  for (std::size_t n = 0; n < slopes.size(); ++n)
    for (int a = 0; a < d; ++a) slopes[n][a] += t * scale * sorbit[n][a];
  AffineModel m = affine_model_lengths(ext, slopes);
  return build_affine(loop.steps.front().pi, m.zeta, slopes[0], false, 1e-8);
}

}  // namespace

AffineIem weak_model_family(const VecD& omega, const VecD& v_stable, double t, const CombinatoricsSequence& extension) {
  // the extension is periodic; its first period is the loop
  if (extension.empty()) throw Error(ErrorKind::InvalidInput, "weak_model_family needs combinatorics");
  std::size_t p = 1;
  const auto& first = extension.steps.front().pi;
  while (p < extension.size() && !(extension.steps[p].pi == first && extension.steps[p].eps == extension.steps[0].eps)) ++p;
  // shortest period consistent with the whole extension
  for (; p <= extension.size(); ++p) {
    if (!(extension.pi_at(p) == first)) continue;
    bool ok = true;
    for (std::size_t i = p; i < extension.size() && ok; ++i) ok = extension.steps[i].eps == extension.steps[i - p].eps;
    if (ok) break;
  }
  CombinatoricsSequence loop;
  loop.steps.assign(extension.steps.begin(), extension.steps.begin() + std::min(p, extension.size()));
  if (!(loop.last_pi() == first)) throw Error(ErrorKind::InvalidInput, "weak_model_family needs periodic combinatorics");
  return weak_model_on(loop, omega, v_stable, t, 0);
}

double log_break_at_zero(const AffineIem& g) {
  const int d = g.pi.d();
  return g.slopes[g.pi.letter_at0(d)] - g.slopes[g.pi.letter_at0(1)];
}

template <class T>
double log_break_at_zero(const Giem<T>& f) {
  const int last = f.pi.letter_at0(f.d()), first = f.pi.letter_at0(1);
  const T left = f.derivative(last, f.domain_left[last] + f.domain_lengths[last]);
  const T right = f.derivative(first, f.domain_left[first]);
  return to_double(T(log(left) - log(right)));
}

StrongModel strong_model(const SlopeExtraction& ex, double target) {
  StrongModel sm;
  sm.omega = ex.omega;
  sm.target_log_break = target;
  const CombinatoricsSequence ext = periodic_extension(ex.loop, extension_length(ex.loop, 0));
  sm.v_stable = stable_orbit(ext)[0];
  const double t1 = 0, t2 = 1;
  const AffineIem g1 = weak_model_on(ex.loop, ex.omega, sm.v_stable, t1, 0);
  const AffineIem g2 = weak_model_on(ex.loop, ex.omega, sm.v_stable, t2, 0);
  sm.log_break_t1 = log_break_at_zero(g1);
  sm.log_break_t2 = log_break_at_zero(g2);
  const double slope = (sm.log_break_t2 - sm.log_break_t1) / (t2 - t1);
  if (std::abs(slope) < 1e-12)
    throw Error(ErrorKind::Numerical, "break at 0 does not depend on t; stable vector degenerate");
  sm.t0 = t1 + (target - sm.log_break_t1) / slope;
  sm.model = weak_model_on(ex.loop, ex.omega, sm.v_stable, sm.t0, 0);
  return sm;
}

template <class T>
StrongModel strong_model(const Giem<T>& f, std::size_t depth, const SlopeExtractionOptions& opt) {
  return strong_model(extract_slope_vector(f, depth, opt), log_break_at_zero(f));
}

InvariantMasses invariant_masses(const AffineIem& g, std::size_t N, double x0) {
  const int d = g.pi.d();
  const VecD left = lefts(g.lengths, g.pi.pi0);
  VecD scale(d);
  for (int a = 0; a < d; ++a) scale[a] = std::exp(g.slopes[a]);
  std::vector<std::size_t> first(d, 0), second(d, 0);
  double x = x0;
  for (std::size_t i = 0; i < N; ++i) {
    int a = 0;
    for (int b = 0; b < d; ++b)
      if (x >= left[b] && left[b] >= left[a]) a = b;
    (i < N / 2 ? first : second)[a]++;
    x = scale[a] * x + g.translations[a];
    if (x < 0) x = 0;
    if (x >= 1) x = std::nextafter(1.0, 0.0);
  }
  InvariantMasses m;
  m.masses.resize(d);
  for (int a = 0; a < d; ++a) {
    m.masses[a] = static_cast<double>(first[a] + second[a]) / static_cast<double>(N);
    const double h1 = static_cast<double>(first[a]) / static_cast<double>(N / 2);
    const double h2 = static_cast<double>(second[a]) / static_cast<double>(N - N / 2);
    m.half_gap += std::abs(h1 - h2);
  }
  return m;
}

template SlopeExtraction extract_slope_vector<Real>(const Giem<Real>&, std::size_t, const SlopeExtractionOptions&);
template SlopeExtraction extract_slope_vector<Quad>(const Giem<Quad>&, std::size_t, const SlopeExtractionOptions&);
template SlopeExtraction extract_slope_vector<Real>(const std::vector<RenormState<Real>>&, const SlopeExtractionOptions&);
template SlopeExtraction extract_slope_vector<Quad>(const std::vector<RenormState<Quad>>&, const SlopeExtractionOptions&);
template double log_break_at_zero<Real>(const Giem<Real>&);
template double log_break_at_zero<Quad>(const Giem<Quad>&);
template StrongModel strong_model<Real>(const Giem<Real>&, std::size_t, const SlopeExtractionOptions&);
template StrongModel strong_model<Quad>(const Giem<Quad>&, std::size_t, const SlopeExtractionOptions&);

}  // namespace giet
