#include "giet/combinatorics.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <random>
#include <set>

#include "giet/numeric.hpp"

namespace giet {

int CombinatorialData::letter_at0(int pos) const {
  for (int a = 0; a < d(); ++a)
    if (pi0[a] == pos) return a;
  throw Error(ErrorKind::InvalidInput, "no letter at top position " + std::to_string(pos));
}

int CombinatorialData::letter_at1(int pos) const {
  for (int a = 0; a < d(); ++a)
    if (pi1[a] == pos) return a;
  throw Error(ErrorKind::InvalidInput, "no letter at bottom position " + std::to_string(pos));
}

int CombinatorialData::index_of(const std::string& name) const {
  auto it = std::find(alphabet.begin(), alphabet.end(), name);
  return it == alphabet.end() ? -1 : static_cast<int>(it - alphabet.begin());
}

std::string CombinatorialData::str() const {
  std::string top, bottom;
  for (int p = 1; p <= d(); ++p) {
    top += alphabet[letter_at0(p)];
    bottom += alphabet[letter_at1(p)];
  }
  return top + "/" + bottom;
}

CombinatorialData make_pi(const std::vector<std::string>& top, const std::vector<std::string>& bottom) {
  CombinatorialData pi;
  pi.alphabet = top;
  std::sort(pi.alphabet.begin(), pi.alphabet.end());
  if (std::adjacent_find(pi.alphabet.begin(), pi.alphabet.end()) != pi.alphabet.end())
    throw Error(ErrorKind::InvalidInput, "repeated letter in top row");
  const int d = pi.d();
  pi.pi0.assign(d, 0);
  pi.pi1.assign(d, 0);
  if (static_cast<int>(bottom.size()) != d) throw Error(ErrorKind::InvalidInput, "rows differ in length");
  for (int i = 0; i < d; ++i) {
    pi.pi0[pi.index_of(top[i])] = i + 1;
    int b = pi.index_of(bottom[i]);
    if (b < 0) throw Error(ErrorKind::InvalidInput, "bottom row letter missing from top row: " + bottom[i]);
    pi.pi1[b] = i + 1;
  }
  return pi;
}

CombinatorialData make_pi(const std::string& top, const std::string& bottom) {
  std::vector<std::string> t, b;
  for (char c : top) t.emplace_back(1, c);
  for (char c : bottom) b.emplace_back(1, c);
  return make_pi(t, b);
}

Validity check(const CombinatorialData& pi) {
  const int d = pi.d();
  if (d < 2 || static_cast<int>(pi.pi0.size()) != d || static_cast<int>(pi.pi1.size()) != d)
    return Validity::Malformed;
  for (const auto* row : {&pi.pi0, &pi.pi1}) {
    std::vector<bool> seen(d + 1, false);
    for (int v : *row) {
      if (v < 1 || v > d || seen[v]) return Validity::Malformed;
      seen[v] = true;
    }
  }
  // irreducible: the first s letters on top are never the first s letters on the bottom
  for (int s = 1; s < d; ++s) {
    bool same = true;
    for (int a = 0; a < d && same; ++a)
      if ((pi.pi0[a] <= s) != (pi.pi1[a] <= s)) same = false;
    if (same) return Validity::Reducible;
  }
  return Validity::Valid;
}

bool validate(const CombinatorialData& pi) { return check(pi) == Validity::Valid; }

void require_valid(const CombinatorialData& pi) {
  switch (check(pi)) {
    case Validity::Valid: return;
    case Validity::Malformed: throw Error(ErrorKind::InvalidInput, "combinatorial data is not a pair of bijections");
    case Validity::Reducible: throw Error(ErrorKind::InvalidInput, "combinatorial data is reducible");
  }
}

RauzyStep rauzy_move(const CombinatorialData& pi, int eps) {
  require_valid(pi);
  if (eps != 0 && eps != 1) throw Error(ErrorKind::InvalidInput, "type must be 0 or 1");
  RauzyStep s;
  s.pi = pi;
  s.eps = eps;
  s.winner = pi.alpha(eps);
  s.loser = pi.alpha(1 - eps);
  s.next_pi = pi;
  // The loser moves to just after the winner in the row where it sits last.
  std::vector<int>& row = eps == 0 ? s.next_pi.pi1 : s.next_pi.pi0;
  const int wpos = row[s.winner];
  for (int a = 0; a < pi.d(); ++a)
    if (row[a] > wpos && a != s.loser) ++row[a];
  row[s.loser] = wpos + 1;
  return s;
}

const CombinatorialData& CombinatoricsSequence::pi_at(std::size_t m) const {
  if (m < steps.size()) return steps[m].pi;
  if (m == steps.size() && !steps.empty()) return steps.back().next_pi;
  throw Error(ErrorKind::InvalidInput, "time index outside the sequence");
}

std::vector<int> CombinatoricsSequence::types() const {
  std::vector<int> t;
  t.reserve(steps.size());
  for (const auto& s : steps) t.push_back(s.eps);
  return t;
}

bool CombinatoricsSequence::admissible() const {
  for (std::size_t i = 0; i + 1 < steps.size(); ++i)
    if (!(steps[i].next_pi == steps[i + 1].pi)) return false;
  return true;
}

void CombinatoricsSequence::append(int eps) { steps.push_back(rauzy_move(last_pi(), eps)); }

CombinatoricsSequence make_sequence(const CombinatorialData& start, const std::vector<int>& eps) {
  CombinatoricsSequence seq;
  CombinatorialData pi = start;
  for (int e : eps) {
    seq.steps.push_back(rauzy_move(pi, e));
    pi = seq.steps.back().next_pi;
  }
  return seq;
}

CombinatoricsSequence concat(const CombinatoricsSequence& a, const CombinatoricsSequence& b) {
  if (!a.empty() && !b.empty() && !(a.last_pi() == b.steps.front().pi))
    throw Error(ErrorKind::InvalidInput, "sequences do not chain");
  CombinatoricsSequence out = a;
  out.steps.insert(out.steps.end(), b.steps.begin(), b.steps.end());
  out.k_bound.reset();
  return out;
}

CombinatoricsSequence periodic_extension(const CombinatoricsSequence& loop, std::size_t min_length) {
  if (loop.empty() || !(loop.last_pi() == loop.steps.front().pi))
    throw Error(ErrorKind::InvalidInput, "periodic extension needs a closed loop");
  CombinatoricsSequence out;
  out.k_bound = loop.k_bound;
  while (out.size() < min_length)
    out.steps.insert(out.steps.end(), loop.steps.begin(), loop.steps.end());
  return out;
}

std::vector<CombinatorialData> rauzy_class(const CombinatorialData& pi) {
  require_valid(pi);
  std::set<CombinatorialData> seen{pi};
  std::deque<CombinatorialData> queue{pi};
  while (!queue.empty()) {
    CombinatorialData cur = queue.front();
    queue.pop_front();
    for (int e = 0; e < 2; ++e) {
      CombinatorialData nxt = rauzy_move(cur, e).next_pi;
      if (seen.insert(nxt).second) queue.push_back(nxt);
    }
  }
  return {seen.begin(), seen.end()};
}

const char* to_string(Tristate t) {
  switch (t) {
    case Tristate::False: return "false";
    case Tristate::True: return "true";
    case Tristate::Indeterminate: return "indeterminate";
  }
  return "?";
}

namespace {
int alpha_at(const CombinatoricsSequence& seq, int m, int row) { return seq.pi_at(m).alpha(row); }
}  // namespace

bool k_bounded_at(const CombinatoricsSequence& seq, int k, int n) {
  const int len = static_cast<int>(seq.size());
  const int d = seq.steps.front().pi.d();
  for (int beta = 0; beta < d; ++beta) {
    for (int gamma = 0; gamma < d; ++gamma) {
      bool ok = false;
      for (int n1 = std::max(0, n - k + 1); n1 < std::min(len, n + k) && !ok; ++n1) {
        if (alpha_at(seq, n1, seq.steps[n1].eps) != beta) continue;
        for (int p = 0;; ++p) {
          const int m = n1 + p;
          if (m >= len || std::abs(n - m) >= k) break;
          const int em = seq.steps[m].eps;
          if (alpha_at(seq, m, 1 - em) != gamma) continue;
          bool chain = true;
          for (int i = 0; i < p && chain; ++i)
            chain = alpha_at(seq, n1 + i, 1 - em) == alpha_at(seq, n1 + i + 1, seq.steps[n1 + i].eps);
          if (chain) {
            ok = true;
            break;
          }
        }
      }
      if (!ok) return false;
    }
  }
  return true;
}

Tristate is_k_bounded(const CombinatoricsSequence& seq, int k) {
  if (k < 1) throw Error(ErrorKind::InvalidInput, "k must be positive");
  const int len = static_cast<int>(seq.size());
  if (len == 0 || len - k < k - 1) return Tristate::Indeterminate;
  for (int n = k - 1; n <= len - k; ++n)
    if (!k_bounded_at(seq, k, n)) return Tristate::False;
  return Tristate::True;
}

std::optional<int> min_k_bound(const CombinatoricsSequence& seq, int kmax) {
  for (int k = 1; k <= kmax; ++k)
    if (is_k_bounded(seq, k) == Tristate::True) return k;
  return std::nullopt;
}

CombinatoricsSequence close_path(const CombinatorialData& from, const CombinatorialData& target) {
  require_valid(from);
  if (from == target) return {};
  // BFS; neighbours visited in eps order, and the winner is a function of eps.
  std::map<CombinatorialData, std::pair<CombinatorialData, int>> parent;
  std::deque<CombinatorialData> queue{from};
  parent.emplace(from, std::make_pair(from, -1));
  while (!queue.empty()) {
    CombinatorialData cur = queue.front();
    queue.pop_front();
    for (int e = 0; e < 2; ++e) {
      CombinatorialData nxt = rauzy_move(cur, e).next_pi;
      if (parent.count(nxt)) continue;
      parent.emplace(nxt, std::make_pair(cur, e));
      if (nxt == target) {
        std::vector<int> eps;
        for (CombinatorialData at = target; !(at == from);) {
          const auto& pr = parent.at(at);
          eps.push_back(pr.second);
          at = pr.first;
        }
        std::reverse(eps.begin(), eps.end());
        return make_sequence(from, eps);
      }
      queue.push_back(nxt);
    }
  }
  throw Error(ErrorKind::InvalidInput, "target " + target.str() + " is not reachable from " + from.str());
}

CombinatoricsSequence close_path(const CombinatoricsSequence& prefix, const CombinatorialData& target) {
  if (prefix.empty()) throw Error(ErrorKind::InvalidInput, "close_path needs a nonempty prefix");
  return close_path(prefix.last_pi(), target);
}

CombinatoricsSequence generate_k_bounded(const CombinatorialData& seed_pi, std::size_t length, int k,
                                         std::uint64_t rng_seed) {
  require_valid(seed_pi);
  if (k < 1) throw Error(ErrorKind::InvalidInput, "k must be positive");
  CombinatoricsSequence seq;
  seq.k_bound = k;
  if (length == 0) return seq;

  std::mt19937_64 rng(rng_seed);
  const long budget = 2'000'000;
  long nodes = 0;
  // Depth-first search with randomized branch order; after each push the newest
  // fully checkable time n = len - k is verified.
  std::vector<std::array<int, 2>> order;
  std::vector<int> tried;
  auto push_order = [&] {
    int first = static_cast<int>(rng() & 1u);
    order.push_back({first, 1 - first});
    tried.push_back(0);
  };
  push_order();
  while (seq.size() < length) {
    if (++nodes > budget)
      throw Error(ErrorKind::InvalidInput, "no " + std::to_string(k) + "-bounded sequence of length " +
                                               std::to_string(length) + " found within the search budget from " +
                                               seed_pi.str());
    const std::size_t depth = seq.size();
    if (tried[depth] == 2) {
      // exhausted: backtrack
      order.pop_back();
      tried.pop_back();
      if (seq.empty())
        throw Error(ErrorKind::InvalidInput, "no " + std::to_string(k) + "-bounded sequence exists from " +
                                                 seed_pi.str() + " (exhaustive search)");
      seq.steps.pop_back();
      continue;
    }
    const int e = order[depth][tried[depth]++];
    const CombinatorialData& from = seq.empty() ? seed_pi : seq.last_pi();
    seq.steps.push_back(rauzy_move(from, e));
    const int n = static_cast<int>(seq.size()) - k;
    if (n >= k - 1 && !k_bounded_at(seq, k, n)) {
      seq.steps.pop_back();
      continue;
    }
    if (seq.size() < length) push_order();
  }
  return seq;
}

}  // namespace giet
