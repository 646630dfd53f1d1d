#include "giet/giem.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <mutex>
#include <sstream>

namespace giet {

namespace {

template <class T>
T tol_half() {
  return pow2m<T>(scalar_bits<T>() / 2);
}

// Safeguarded Newton for an increasing F on [lo, hi] with F(lo) <= y <= F(hi).
template <class T, class F>
T monotone_solve(F&& fn, const T& y, T lo, T hi) {
  const T eps = (hi - lo) * pow2m<T>(scalar_bits<T>() - 6);
  T x = (lo + hi) / 2;
  for (int it = 0; it < 4 * scalar_bits<T>(); ++it) {
    T v, dv;
    fn(x, v, dv);
    const T g = v - y;
    if (g == 0) return x;
    if (g > 0)
      hi = x;
    else
      lo = x;
    T nx = x - g / dv;
    if (!(nx > lo && nx < hi) || !(dv > 0)) nx = (lo + hi) / 2;
    if (abs(nx - x) <= eps || hi - lo <= eps) return nx;
    x = nx;
  }
  throw Error(ErrorKind::Numerical, "monotone root-find did not converge");
}

template <class T>
T pi_t() {
  return boost::math::constants::pi<T>();
}

}  // namespace

const char* to_string(BranchFamily f) {
  switch (f) {
    case BranchFamily::Affine: return "affine";
    case BranchFamily::Moebius: return "moebius";
    case BranchFamily::PerturbedAffine: return "perturbed-affine";
    case BranchFamily::Charted: return "charted";
  }
  return "?";
}

// ---------------------------------------------------------------- Chart

template <class T>
T Chart<T>::value(const T& x) const {
  const T u = x * (1 - x);
  return x + u * u * (c2 + u * (c3 + u * c4));
}

template <class T>
void Chart<T>::eval3(const T& x, T& v, T& d1, T& d2) const {
  const T u = x * (1 - x);
  const T du = 1 - 2 * x;
  const T p1 = u * (2 * c2 + u * (3 * c3 + u * 4 * c4));  // d/du of the correction
  const T p2 = 2 * c2 + u * (6 * c3 + u * 12 * c4);
  v = x + u * u * (c2 + u * (c3 + u * c4));
  d1 = 1 + p1 * du;
  d2 = p2 * du * du - 2 * p1;
}

template <class T>
T Chart<T>::inverse(const T& y) const {
  if (identity()) return y;
  if (y <= 0) return T(0);
  if (y >= 1) return T(1);
  return monotone_solve<T>(
      [this](const T& x, T& v, T& dv) {
        T d2;
        eval3(x, v, dv, d2);
      },
      y, T(0), T(1));
}

// ---------------------------------------------------------------- Moebius

template <class T>
void Moebius<T>::eval3(const T& x, T& v, T& d1, T& d2) const {
  const T den = c * x + d;
  const T det = a * d - b * c;
  v = (a * x + b) / den;
  d1 = det / (den * den);
  d2 = -2 * c * d1 / den;
}

template <class T>
Moebius<T> Moebius<T>::then(const Moebius& n) const {
  Moebius r{n.a * a + n.b * c, n.a * b + n.b * d, n.c * a + n.d * c, n.c * b + n.d * d};
  r.normalize();
  return r;
}

template <class T>
void Moebius<T>::normalize() {
  T m = std::max({abs(a), abs(b), abs(c), abs(d)});
  if (m > 0) {
    a /= m;
    b /= m;
    c /= m;
    d /= m;
  }
}

// ---------------------------------------------------------------- BranchMap

template <class T>
void BranchMap<T>::eval3(const T& z, T& v, T& d1, T& d2) const {
  switch (family) {
    case BranchFamily::Affine:
      v = z;
      d1 = 1;
      d2 = 0;
      return;
    case BranchFamily::Moebius: {
      const T den = 1 + (a - 1) * z;
      v = a * z / den;
      d1 = a / (den * den);
      d2 = -2 * (a - 1) * d1 / den;
      return;
    }
    case BranchFamily::PerturbedAffine: {
      const T p = pi_t<T>();
      const T s1 = sin(p * z), c1 = cos(p * z);
      const T s2 = 2 * s1 * c1, c2 = 2 * c1 * c1 - 1;
      v = z + s / p * s1 + r / (2 * p) * s2;
      d1 = 1 + s * c1 + r * c2;
      d2 = -p * (s * s1 + 2 * r * s2);
      return;
    }
    case BranchFamily::Charted: {
      const T y = dom_left + z * dom_len;
      const T x = chart.inverse(y);
      T hx, dhx, d2hx, X, m1, m2, Y, h1, h2;
      chart.eval3(x, hx, dhx, d2hx);
      seed.eval3(x, X, m1, m2);
      chart.eval3(X, Y, h1, h2);
      const T g1 = 1 / dhx;
      const T g2 = -d2hx * g1 * g1 * g1;
      const T f1 = h1 * m1 * g1;
      const T f2 = h2 * (m1 * g1) * (m1 * g1) + h1 * m2 * g1 * g1 + h1 * m1 * g2;
      v = (Y - img_left) / img_len;
      d1 = f1 * dom_len / img_len;
      d2 = f2 * dom_len * dom_len / img_len;
      return;
    }
  }
}

template <class T>
T BranchMap<T>::value(const T& z) const {
  T v, d1, d2;
  eval3(z, v, d1, d2);
  return v;
}

template <class T>
T BranchMap<T>::inverse(const T& w) const {
  switch (family) {
    case BranchFamily::Affine: return w;
    case BranchFamily::Moebius: return w / (a - (a - 1) * w);
    case BranchFamily::Charted: {
      const T X = chart.inverse(img_left + w * img_len);
      return (chart.value(seed.inverse(X)) - dom_left) / dom_len;
    }
    case BranchFamily::PerturbedAffine:
      if (w <= 0) return T(0);
      if (w >= 1) return T(1);
      return monotone_solve<T>(
          [this](const T& z, T& v, T& dv) {
            T d2;
            eval3(z, v, dv, d2);
          },
          w, T(0), T(1));
  }
  return w;
}

template <class T>
T BranchMap<T>::nonlinearity() const {
  T v, d0, d1, d2;
  eval3(T(0), v, d0, d2);
  eval3(T(1), v, d1, d2);
  return log(d1) - log(d0);
}

// ---------------------------------------------------------------- Giem

template <class T>
int Giem<T>::letter_of(const T& x) const {
  int best = -1;
  for (int a = 0; a < d(); ++a)
    if (x >= domain_left[a] && (best < 0 || domain_left[a] > domain_left[best])) best = a;
  if (best < 0) best = pi.letter_at0(1);
  return best;
}

template <class T>
void Giem<T>::eval3(int letter, const T& x, T& v, T& d1, T& d2) const {
  if (chart && chart->identity()) {
    chart_maps[letter].eval3(x, v, d1, d2);
    return;
  }
  const T len = domain_lengths[letter], ilen = image_lengths[letter];
  T w, dw, d2w;
  branches[letter].eval3((x - domain_left[letter]) / len, w, dw, d2w);
  v = image_left[letter] + ilen * w;
  d1 = dw * ilen / len;
  d2 = d2w * ilen / (len * len);
}

template <class T>
T Giem<T>::value(int letter, const T& x) const {
  T v, d1, d2;
  eval3(letter, x, v, d1, d2);
  return v;
}

template <class T>
T Giem<T>::derivative(int letter, const T& x) const {
  T v, d1, d2;
  eval3(letter, x, v, d1, d2);
  return d1;
}

template <class T>
T Giem<T>::inverse(int letter, const T& y) const {
  if (chart && chart->identity()) return chart_maps[letter].inverse(y);
  const T w = branches[letter].inverse((y - image_left[letter]) / image_lengths[letter]);
  return domain_left[letter] + w * domain_lengths[letter];
}

namespace {

template <class T>
std::vector<T> parse_lengths(const std::vector<std::string>& s, int d, const char* what) {
  if (static_cast<int>(s.size()) != d)
    throw Error(ErrorKind::InvalidInput, std::string(what) + ": expected one length per letter");
  std::vector<T> v;
  T sum = 0;
  for (const auto& x : s) {
    v.push_back(from_decimal<T>(x));
    if (!(v.back() > 0)) throw Error(ErrorKind::InvalidInput, std::string(what) + ": lengths must be positive");
    sum += v.back();
  }
  if (abs(sum - 1) > T(1e-9))
    throw Error(ErrorKind::InvalidInput, std::string(what) + ": lengths sum to " + to_decimal(sum) + ", not 1");
  for (auto& x : v) x /= sum;
  return v;
}

template <class T>
std::vector<T> lefts(const std::vector<T>& len, const std::vector<int>& pos) {
  const int d = static_cast<int>(len.size());
  std::vector<int> order(d);
  for (int a = 0; a < d; ++a) order[pos[a] - 1] = a;
  std::vector<T> left(d);
  T acc = 0;
  for (int p = 0; p < d; ++p) {
    left[order[p]] = acc;
    acc += len[order[p]];
  }
  return left;
}

template <class T>
T param(const BranchSpec& b, const std::string& key, const T& dflt) {
  auto it = b.params.find(key);
  return it == b.params.end() ? dflt : from_decimal<T>(it->second);
}

// absolute-coordinate fractional linear form of a zoomed affine or Moebius branch
template <class T>
Moebius<T> absolute_form(const BranchMap<T>& br, const T& left, const T& len, const T& ileft, const T& ilen) {
  // Y o Phi o Z with Z(x) = (x - left)/len, Phi(z) = a z / (1 + (a-1) z), Y(w) = ileft + ilen w
  Moebius<T> Z{1 / len, -left / len, T(0), T(1)};
  Moebius<T> Phi{br.family == BranchFamily::Moebius ? br.a : T(1), T(0),
                 br.family == BranchFamily::Moebius ? br.a - 1 : T(0), T(1)};
  Moebius<T> Y{ilen, ileft, T(0), T(1)};
  return Z.then(Phi).then(Y);
}

}  // namespace

double balancing_s(double others, double r) { return (1 + r) * std::tanh(others / 2); }

template <class T>
Giem<T> build_giem(const GiemConfig& cfg) {
  require_valid(cfg.pi);
  const int d = cfg.pi.d();
  Giem<T> f;
  f.pi = cfg.pi;
  std::vector<T> dom = parse_lengths<T>(cfg.domain_lengths, d, "domain_lengths");
  std::vector<T> img = cfg.image_lengths.empty() ? dom : parse_lengths<T>(cfg.image_lengths, d, "image_lengths");

  std::vector<BranchSpec> specs = cfg.branches;
  if (specs.empty()) specs.assign(d, BranchSpec{});
  if (static_cast<int>(specs.size()) != d) throw Error(ErrorKind::InvalidInput, "expected one branch per letter");

  std::vector<BranchMap<T>> br(d);
  int balance = -1;
  for (int a = 0; a < d; ++a) {
    const auto& s = specs[a];
    if (s.family == "affine") {
      br[a].family = BranchFamily::Affine;
    } else if (s.family == "moebius") {
      br[a].family = BranchFamily::Moebius;
      br[a].a = param<T>(s, "a", T(1));
      if (!(br[a].a > 0)) throw Error(ErrorKind::InvalidInput, "moebius parameter a must be positive");
    } else if (s.family == "perturbed-affine") {
      br[a].family = BranchFamily::PerturbedAffine;
      br[a].s = param<T>(s, "s", T(0));
      br[a].r = param<T>(s, "r", T(0));
      auto it = s.params.find("balance");
      if (it != s.params.end() && it->second == "true") {
        if (balance >= 0) throw Error(ErrorKind::InvalidInput, "at most one branch may be balanced");
        balance = a;
      }
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown branch family '" + s.family + "'");
    }
  }
  if (balance >= 0) {
    T others = 0;
    for (int a = 0; a < d; ++a)
      if (a != balance) others += br[a].nonlinearity();
    br[balance].s = (1 + br[balance].r) * tanh(others / 2);
  }

  if (cfg.chart) {
    Chart<T> ch{from_decimal<T>((*cfg.chart)[0]), from_decimal<T>((*cfg.chart)[1]), from_decimal<T>((*cfg.chart)[2])};
    for (int i = 0; i <= 1024; ++i) {
      T v, d1, d2;
      ch.eval3(T(i) / 1024, v, d1, d2);
      if (!(d1 > 0)) throw Error(ErrorKind::InvalidInput, "chart is not monotone");
    }
    const std::vector<T> sl = lefts(dom, cfg.pi.pi0), sil = lefts(img, cfg.pi.pi1);
    f.chart = ch;
    for (int a = 0; a < d; ++a) {
      if (br[a].family == BranchFamily::PerturbedAffine)
        throw Error(ErrorKind::InvalidInput, "charted maps take affine or moebius seed branches");
      f.chart_maps.push_back(absolute_form(br[a], sl[a], dom[a], sil[a], img[a]));
    }
    std::vector<T> cdom(d), cimg(d);
    for (int a = 0; a < d; ++a) {
      cdom[a] = ch.value(sl[a] + dom[a]) - ch.value(sl[a]);
      cimg[a] = ch.value(sil[a] + img[a]) - ch.value(sil[a]);
    }
    f.domain_lengths = cdom;
    f.image_lengths = cimg;
    f.domain_left = lefts(cdom, cfg.pi.pi0);
    f.image_left = lefts(cimg, cfg.pi.pi1);
    for (int a = 0; a < d; ++a) {
      BranchMap<T> b;
      b.family = BranchFamily::Charted;
      b.chart = ch;
      b.seed = f.chart_maps[a];
      b.dom_left = f.domain_left[a];
      b.dom_len = cdom[a];
      b.img_left = f.image_left[a];
      b.img_len = cimg[a];
      f.branches.push_back(b);
    }
  } else {
    f.domain_lengths = dom;
    f.image_lengths = img;
    f.domain_left = lefts(dom, cfg.pi.pi0);
    f.image_left = lefts(img, cfg.pi.pi1);
    f.branches = br;
    const bool projective = std::all_of(br.begin(), br.end(), [](const BranchMap<T>& b) {
      return b.family == BranchFamily::Affine || b.family == BranchFamily::Moebius;
    });
    if (projective) {
      f.chart = Chart<T>{};
      for (int a = 0; a < d; ++a)
        f.chart_maps.push_back(absolute_form(br[a], f.domain_left[a], dom[a], f.image_left[a], img[a]));
    }
  }

  for (int a = 0; a < d; ++a)
    for (int i = 0; i <= 1024; ++i) {
      T v, d1, d2;
      f.branches[a].eval3(T(i) / 1024, v, d1, d2);
      if (!(d1 > 0))
        throw Error(ErrorKind::InvalidInput,
                    "branch " + cfg.pi.alphabet[a] + " has nonpositive derivative at z = " + std::to_string(i / 1024.0));
    }
  return f;
}

template <class T>
T mean_nonlinearity(const Giem<T>& f) {
  T s = 0;
  for (const auto& b : f.branches) s += b.nonlinearity();
  return s;
}

template <class T>
std::vector<BreakRecord<T>> break_points(const Giem<T>& f) {
  std::vector<BreakRecord<T>> out;
  const int d = f.d();
  for (int p = 1; p <= d; ++p) {
    const int a = f.pi.letter_at0(p);
    const int prev = f.pi.letter_at0(p == 1 ? d : p - 1);
    const T left = f.derivative(prev, f.domain_left[prev] + f.domain_lengths[prev]);
    const T right = f.derivative(a, f.domain_left[a]);
    const T ratio = left / right;
    if (abs(ratio - 1) > tol_half<T>()) out.push_back({f.domain_left[a], ratio, a});
  }
  return out;
}

// ---------------------------------------------------------------- RenormState

template <class T>
T RenormState<T>::dom_left(int letter) const {
  T acc = 0;
  for (int a = 0; a < d(); ++a)
    if (pi.pi0[a] < pi.pi0[letter]) acc += dom_len[a];
  return acc;
}

template <class T>
T RenormState<T>::img_left(int letter) const {
  T acc = 0;
  for (int a = 0; a < d(); ++a)
    if (pi.pi1[a] < pi.pi1[letter]) acc += img_len[a];
  return acc;
}

template <class T>
std::vector<T> RenormState<T>::cut_points() const {
  std::vector<T> c;
  T acc = 0;
  for (int p = 1; p < d(); ++p) {
    acc += dom_len[pi.letter_at0(p)];
    c.push_back(acc);
  }
  return c;
}

template <class T>
T RenormState<T>::isometric_mass() const {
  T s = 0;
  for (int a = 0; a < d(); ++a) s += T(return_times[a]) * dom_len[a];
  return s;
}

template <class T>
bool Giem<T>::isometric() const {
  if (chart && !chart->identity()) return false;
  for (int a = 0; a < d(); ++a)
    if (branches[a].family != BranchFamily::Affine || domain_lengths[a] != image_lengths[a]) return false;
  return true;
}

template <class T>
void RenormState<T>::walk_floors(int a, const std::function<void(const T&, const T&)>& visit) const {
  const Giem<T>& f = *base;
  T lo = dom_left(a), hi = lo + dom_len[a];
  if (!has_itinerary() && return_times[a] > BigInt(1) << 40)
    throw Error(ErrorKind::Precision, "return time too large to walk the tower");
  const auto q = static_cast<std::uint64_t>(return_times[a]);
  auto letter = [&](std::uint64_t i, const T& x, const T& y) {
    return has_itinerary() ? static_cast<int>((*itinerary[a])[i]) : f.letter_of((x + y) / 2);
  };
  if (f.fast_path()) {
    // iterate the fractional linear maps in chart coordinates, mapping back once per floor
    const Chart<T>& h = *f.chart;
    const bool id = h.identity();
    T ylo = id ? lo : h.inverse(lo), yhi = id ? hi : h.inverse(hi);
    for (std::uint64_t i = 0; i < q; ++i) {
      visit(lo, hi);
      const int b = letter(i, lo, hi);
      ylo = f.chart_maps[b].value(ylo);
      yhi = f.chart_maps[b].value(yhi);
      lo = id ? ylo : h.value(ylo);
      hi = id ? yhi : h.value(yhi);
    }
    return;
  }
  for (std::uint64_t i = 0; i < q; ++i) {
    visit(lo, hi);
    const int b = letter(i, lo, hi);
    lo = f.value(b, lo);
    hi = f.value(b, hi);
  }
}

template <class T>
T RenormState<T>::tower_mass() const {
  // translations keep floor lengths, so the floor sum is sum q |I| exactly
  if (base->isometric()) return isometric_mass();
  T total = 0;
  for (int a = 0; a < d(); ++a) walk_floors(a, [&](const T& lo, const T& hi) { total += hi - lo; });
  return total;
}

template <class T>
int RenormState<T>::letter_of(const T& x) const {
  T acc = 0;
  for (int p = 1; p <= d(); ++p) {
    const int a = pi.letter_at0(p);
    acc += dom_len[a];
    if (x < acc) return a;
  }
  return pi.letter_at0(d());
}

template <class T>
RenormState<T> initial_state(std::shared_ptr<const Giem<T>> f, const RenormOptions&) {
  RenormState<T> s;
  s.base = f;
  s.pi = f->pi;
  s.interval_length = 1;
  s.dom_len = f->domain_lengths;
  s.img_len = f->image_lengths;
  s.return_times.assign(f->d(), BigInt(1));
  for (int a = 0; a < f->d(); ++a)
    s.itinerary.push_back(std::make_shared<const std::vector<std::uint8_t>>(1, static_cast<std::uint8_t>(a)));
  s.mats = f->chart_maps;
  return s;
}

template <class T>
RenormState<T> rv_step(const RenormState<T>& st, const RenormOptions& opt) {
  const int bits = scalar_bits<T>();
  const int top = st.pi.alpha(0), bottom = st.pi.alpha(1);
  const T A = st.dom_len[top], B = st.img_len[bottom];
  if (abs(A - B) <= pow2m<T>(bits / 2) * std::max(A, B)) {
    std::ostringstream os;
    os << "connection suspected at level " << st.level << ": |I_alpha(0)| and |f(I_alpha(1))| agree to "
       << bits / 2 << " bits";
    throw Error(ErrorKind::Connection, os.str());
  }
  const int eps = A > B ? 0 : 1;
  const RauzyStep step = rauzy_move(st.pi, eps);
  const int w = step.winner, l = step.loser;

  RenormState<T> nx = st;
  nx.level = st.level + 1;
  nx.pi = step.next_pi;
  nx.seq.steps.push_back(step);
  if (eps == 0) {
    nx.interval_length = st.interval_length - st.img_len[l];
    const T bw = st.img_left(w);
    const T c = eval_branch(st, w, nx.interval_length).value;
    nx.dom_len[w] = st.dom_len[w] - st.img_len[l];
    nx.img_len[w] = c - bw;
    nx.img_len[l] = bw + st.img_len[w] - c;
  } else {
    nx.interval_length = st.interval_length - st.dom_len[l];
    const T aw = st.dom_left(w);
    const T y = inverse_branch(st, w, nx.interval_length);
    nx.dom_len[w] = y - aw;
    nx.dom_len[l] = st.dom_len[w] - nx.dom_len[w];
    nx.img_len[w] = st.img_len[w] - st.dom_len[l];
  }
  if (!(nx.dom_len[w] > 0 && nx.dom_len[l] > 0 && nx.img_len[w] > 0 && nx.img_len[l] > 0))
    throw Error(ErrorKind::Numerical, "renormalization produced a nonpositive length at level " + std::to_string(nx.level));
  nx.return_times[l] = st.return_times[l] + st.return_times[w];

  if (st.has_itinerary()) {
    std::size_t total = 0;
    for (const auto& it : st.itinerary) total += it->size();
    total += st.itinerary[w]->size();
    if (total > opt.itinerary_cap) {
      nx.itinerary.clear();
    } else {
      const auto& first = eps == 0 ? *st.itinerary[l] : *st.itinerary[w];
      const auto& second = eps == 0 ? *st.itinerary[w] : *st.itinerary[l];
      auto v = std::make_shared<std::vector<std::uint8_t>>();
      v->reserve(first.size() + second.size());
      v->insert(v->end(), first.begin(), first.end());
      v->insert(v->end(), second.begin(), second.end());
      nx.itinerary[l] = std::move(v);
    }
  }
  if (!st.mats.empty()) nx.mats[l] = eps == 0 ? st.mats[l].then(st.mats[w]) : st.mats[w].then(st.mats[l]);

  if (!(nx.interval_length > pow2m<T>(bits - opt.guard_bits))) {
    std::ostringstream os;
    os << "precision exhausted: |I^" << nx.level << "| fell below 2^-" << bits - opt.guard_bits << " at " << bits
       << " bits; the safe maximum depth is " << st.level;
    throw Error(ErrorKind::Precision, os.str());
  }
  return nx;
}

template <class T>
std::vector<RenormState<T>> renormalize(std::shared_ptr<const Giem<T>> f, std::size_t steps, const RenormOptions& opt) {
  std::vector<RenormState<T>> out;
  out.reserve(steps + 1);
  out.push_back(initial_state(f, opt));
  for (std::size_t i = 0; i < steps; ++i) out.push_back(rv_step(out.back(), opt));
  return out;
}

// ---------------------------------------------------------------- evaluation

namespace {

template <class T>
Jet<T> eval_fast(const RenormState<T>& st, int letter, const T& x) {
  const Chart<T>& ch = *st.base->chart;
  const Moebius<T>& M = st.mats[letter];
  Jet<T> j;
  if (ch.identity()) {
    M.eval3(x, j.value, j.d1, j.d2);
    return j;
  }
  const T xs = ch.inverse(x);
  T hx, dhx, d2hx, X, m1, m2, h1, h2;
  ch.eval3(xs, hx, dhx, d2hx);
  M.eval3(xs, X, m1, m2);
  ch.eval3(X, j.value, h1, h2);
  const T g1 = 1 / dhx;
  const T g2 = -d2hx * g1 * g1 * g1;
  j.d1 = h1 * m1 * g1;
  j.d2 = h2 * (m1 * g1) * (m1 * g1) + h1 * m2 * g1 * g1 + h1 * m1 * g2;
  return j;
}

template <class T>
void check_in_branch(const Giem<T>& f, int b, const T& p) {
  const T tol = tol_half<T>();
  if (p < f.domain_left[b] - tol || p > f.domain_left[b] + f.domain_lengths[b] + tol)
    throw Error(ErrorKind::Numerical, "orbit escapes the expected tower");
}

std::uint64_t small_q(const BigInt& q) {
  if (q > BigInt(1) << 40) throw Error(ErrorKind::Precision, "return time too large for orbit iteration");
  return static_cast<std::uint64_t>(q);
}

template <class T>
Jet<T> eval_iterate(const RenormState<T>& st, int letter, const T& x) {
  const Giem<T>& f = *st.base;
  Jet<T> j{x, T(1), T(0)};
  auto step = [&](int b) {
    T v, d1, d2;
    f.eval3(b, j.value, v, d1, d2);
    j.d2 = d2 * j.d1 * j.d1 + d1 * j.d2;
    j.d1 = d1 * j.d1;
    j.value = v;
  };
  if (st.has_itinerary()) {
    for (std::uint8_t b : *st.itinerary[letter]) {
      check_in_branch(f, b, j.value);
      step(b);
    }
  } else {
    const std::uint64_t q = small_q(st.return_times[letter]);
    for (std::uint64_t i = 0; i < q; ++i) step(f.letter_of(j.value));
  }
  return j;
}

}  // namespace

template <class T>
Jet<T> eval_branch(const RenormState<T>& st, int letter, const T& x, EvalMode mode) {
  const bool fast = st.base->fast_path() && mode != EvalMode::Iterate;
  if (mode == EvalMode::Fast && !st.base->fast_path())
    throw Error(ErrorKind::InvalidInput, "fast evaluation requested for a map without a closed composition");
  return fast ? eval_fast(st, letter, x) : eval_iterate(st, letter, x);
}

template <class T>
Jet<T> eval_Rn(const RenormState<T>& st, const T& x, EvalMode mode) {
  if (x < 0 || !(x < st.interval_length)) throw Error(ErrorKind::InvalidInput, "eval_Rn point outside I^n");
  return eval_branch(st, st.letter_of(x), x, mode);
}

template <class T>
T inverse_branch(const RenormState<T>& st, int letter, const T& y) {
  const Giem<T>& f = *st.base;
  if (f.fast_path()) {
    const Chart<T>& ch = *f.chart;
    if (ch.identity()) return st.mats[letter].inverse(y);
    return ch.value(st.mats[letter].inverse(ch.inverse(y)));
  }
  if (st.has_itinerary()) {
    const auto& it = *st.itinerary[letter];
    T p = y;
    for (auto b = it.rbegin(); b != it.rend(); ++b) p = f.inverse(*b, p);
    return p;
  }
  const T lo = st.dom_left(letter), hi = lo + st.dom_len[letter];
  return monotone_solve<T>(
      [&](const T& x, T& v, T& dv) {
        Jet<T> j = eval_iterate(st, letter, x);
        v = j.value;
        dv = j.d1;
      },
      y, lo, hi);
}

template <class T>
T log_derivative(const RenormState<T>& st, int letter, const T& x, EvalMode mode) {
  const bool fast = st.base->fast_path() && mode != EvalMode::Iterate;
  if (fast) return log(eval_fast(st, letter, x).d1);
  // Birkhoff sum of ln Df along the orbit; products are folded into the log periodically.
  const Giem<T>& f = *st.base;
  T p = x, prod = 1, acc = 0;
  const T big = ldexp(T(1), 200), small = ldexp(T(1), -200);
  auto step = [&](int b) {
    T v, d1, d2;
    f.eval3(b, p, v, d1, d2);
    prod *= d1;
    p = v;
    if (prod > big || prod < small) {
      acc += log(prod);
      prod = 1;
    }
  };
  if (st.has_itinerary()) {
    for (std::uint8_t b : *st.itinerary[letter]) {
      check_in_branch(f, b, p);
      step(b);
    }
  } else {
    const std::uint64_t q = small_q(st.return_times[letter]);
    for (std::uint64_t i = 0; i < q; ++i) step(f.letter_of(p));
  }
  return acc + log(prod);
}

template <class T>
Jet<T> ZoomedBranch<T>::eval(const T& z) const {
  Jet<T> j = eval_branch(*state, letter, left + z * len);
  return {(j.value - img_left) / img_len, j.d1 * len / img_len, j.d2 * len * len / img_len};
}

template <class T>
ZoomedBranch<T> zoom_branch(const RenormState<T>& st, int letter) {
  return {&st, letter, st.dom_left(letter), st.dom_len[letter], st.img_left(letter), st.img_len[letter]};
}

namespace {
template <class T>
const std::pair<std::vector<T>, std::vector<T>>& cached_nodes(int n) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::pair<std::vector<T>, std::vector<T>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(n, scalar_bits<T>());
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, gauss_legendre01<T>(n)).first;
  return it->second;
}
}  // namespace

template <class T>
std::vector<T> mean_log_derivative(const RenormState<T>& st, int nodes, EvalMode mode) {
  const auto& [z, w] = cached_nodes<T>(nodes);
  std::vector<T> L(st.d());
  for (int a = 0; a < st.d(); ++a) {
    const T left = st.dom_left(a), len = st.dom_len[a];
    T s = 0;
    for (int i = 0; i < nodes; ++i) s += w[i] * log_derivative(st, a, left + z[i] * len, mode);
    L[a] = s;
  }
  return L;
}

template <class T>
double c2_distance(const RenormState<T>& a, const RenormState<T>& b, int grid) {
  if (a.pi.alphabet != b.pi.alphabet) throw Error(ErrorKind::InvalidInput, "c2_distance: alphabets differ");
  if (!(a.pi == b.pi))
    throw Error(ErrorKind::CombinatoricsMismatch, "c2_distance: combinatorial data differ (" + a.pi.str() + " vs " +
                                                      b.pi.str() + ")");
  T sup = 0;
  for (int l = 0; l < a.d(); ++l) {
    const ZoomedBranch<T> za = zoom_branch(a, l), zb = zoom_branch(b, l);
    for (int i = 0; i < grid; ++i) {
      const T z = T(i) / (grid - 1);
      const Jet<T> ja = za.eval(z), jb = zb.eval(z);
      sup = std::max({sup, T(abs(ja.value - jb.value)), T(abs(ja.d1 - jb.d1)), T(abs(ja.d2 - jb.d2))});
    }
  }
  T l1 = 0;
  for (int l = 0; l < a.d(); ++l) {
    l1 += abs(a.dom_len[l] / a.interval_length - b.dom_len[l] / b.interval_length);
    l1 += abs(a.img_len[l] / a.interval_length - b.img_len[l] / b.interval_length);
  }
  return to_double(T(sup + l1));
}

template <class T>
double c2_distance(const Giem<T>& a, const Giem<T>& b, int grid) {
  auto pa = std::make_shared<const Giem<T>>(a);
  auto pb = std::make_shared<const Giem<T>>(b);
  return c2_distance(initial_state(pa), initial_state(pb), grid);
}

template <class T>
std::optional<BreakCheck<T>> try_break_invariance(const RenormState<T>& st, int gamma) {
  if (!st.has_itinerary()) return std::nullopt;
  const int pos = st.pi.pi0[gamma];
  if (pos == 1) return std::nullopt;
  const int beta = st.pi.letter_at0(pos - 1);
  if (st.return_times[beta] != st.return_times[gamma]) return std::nullopt;
  const auto& ib = *st.itinerary[beta];
  const auto& ig = *st.itinerary[gamma];
  std::size_t mismatches = 0, j = 0;
  for (std::size_t i = 0; i < ib.size(); ++i)
    if (ib[i] != ig[i]) {
      ++mismatches;
      j = i;
    }
  if (mismatches != 1) return std::nullopt;
  const Giem<T>& f = *st.base;
  const int alpha = ig[j];
  const int left_letter = ib[j];
  // the left orbit must sit in the predecessor of alpha on the circle
  const int d = f.d();
  const int pa = f.pi.pi0[alpha];
  if (f.pi.letter_at0(pa == 1 ? d : pa - 1) != left_letter) return std::nullopt;

  const T tol = tol_half<T>();
  T pl = st.dom_left(gamma), pr = pl, dl = 1, dr = 1;
  for (std::size_t i = 0; i < ib.size(); ++i) {
    T gap = abs(pl - pr);
    gap = std::min(gap, T(abs(1 - gap)));
    if (gap > tol) return std::nullopt;
    T v, d1, d2;
    f.eval3(ib[i], pl, v, d1, d2);
    dl *= d1;
    pl = v;
    f.eval3(ig[i], pr, v, d1, d2);
    dr *= d1;
    pr = v;
  }
  BreakCheck<T> out;
  out.letter = gamma;
  out.base_letter = alpha;
  out.j = j;
  out.lhs = dl / dr;
  const T left = f.derivative(left_letter, f.domain_left[left_letter] + f.domain_lengths[left_letter]);
  const T right = f.derivative(alpha, f.domain_left[alpha]);
  out.rhs = left / right;
  out.diff = abs(out.lhs - out.rhs);
  return out;
}

template <class T>
BreakCheck<T> break_invariance_check(const RenormState<T>& st, int letter) {
  auto r = try_break_invariance(st, letter);
  if (!r)
    throw Error(ErrorKind::Hypothesis, "no matching base break along the orbit of the boundary of I^" +
                                           std::to_string(st.level) + "_" + st.pi.alphabet[letter]);
  return *r;
}

#define GIET_INSTANTIATE(T)                                                                                   \
  template struct Chart<T>;                                                                                   \
  template struct Moebius<T>;                                                                                 \
  template struct BranchMap<T>;                                                                               \
  template struct Giem<T>;                                                                                    \
  template struct RenormState<T>;                                                                             \
  template struct ZoomedBranch<T>;                                                                            \
  template Giem<T> build_giem<T>(const GiemConfig&);                                                          \
  template T mean_nonlinearity<T>(const Giem<T>&);                                                            \
  template std::vector<BreakRecord<T>> break_points<T>(const Giem<T>&);                                       \
  template RenormState<T> initial_state<T>(std::shared_ptr<const Giem<T>>, const RenormOptions&);             \
  template RenormState<T> rv_step<T>(const RenormState<T>&, const RenormOptions&);                           \
  template std::vector<RenormState<T>> renormalize<T>(std::shared_ptr<const Giem<T>>, std::size_t,            \
                                                      const RenormOptions&);                                  \
  template Jet<T> eval_Rn<T>(const RenormState<T>&, const T&, EvalMode);                                      \
  template Jet<T> eval_branch<T>(const RenormState<T>&, int, const T&, EvalMode);                             \
  template T inverse_branch<T>(const RenormState<T>&, int, const T&);                                         \
  template T log_derivative<T>(const RenormState<T>&, int, const T&, EvalMode);                               \
  template ZoomedBranch<T> zoom_branch<T>(const RenormState<T>&, int);                                        \
  template std::vector<T> mean_log_derivative<T>(const RenormState<T>&, int, EvalMode);                       \
  template double c2_distance<T>(const RenormState<T>&, const RenormState<T>&, int);                          \
  template double c2_distance<T>(const Giem<T>&, const Giem<T>&, int);                                        \
  template std::optional<BreakCheck<T>> try_break_invariance<T>(const RenormState<T>&, int);                  \
  template BreakCheck<T> break_invariance_check<T>(const RenormState<T>&, int);

GIET_INSTANTIATE(Real)
GIET_INSTANTIATE(Quad)

}  // namespace giet
