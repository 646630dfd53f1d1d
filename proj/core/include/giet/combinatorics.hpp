#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace giet {

// Letters are indices 0..d-1 into an alphabet kept in alphabetical order.
// pi0/pi1 hold positions 1..d, indexed by letter.
struct CombinatorialData {
  std::vector<std::string> alphabet;
  std::vector<int> pi0;
  std::vector<int> pi1;

  int d() const { return static_cast<int>(alphabet.size()); }
  int letter_at0(int pos) const;  // letter with pi0 == pos
  int letter_at1(int pos) const;
  int index_of(const std::string& name) const;  // -1 if absent
  // alpha(0): last letter on top, alpha(1): last letter on bottom.
  int alpha(int row) const { return row == 0 ? letter_at0(d()) : letter_at1(d()); }
  std::string str() const;  // "ABC/CBA"

  friend bool operator==(const CombinatorialData&, const CombinatorialData&) = default;
  friend auto operator<=>(const CombinatorialData&, const CombinatorialData&) = default;
};

// Builds from two rows given as letter sequences, e.g. {"A","B","C"}, {"C","B","A"}.
// The alphabet is sorted; rows may list letters in any order consistent with each other.
CombinatorialData make_pi(const std::vector<std::string>& top, const std::vector<std::string>& bottom);
CombinatorialData make_pi(const std::string& top, const std::string& bottom);  // single-char letters

enum class Validity { Valid, Malformed, Reducible };
Validity check(const CombinatorialData& pi);
bool validate(const CombinatorialData& pi);
void require_valid(const CombinatorialData& pi);  // throws InvalidInput with the reason

struct RauzyStep {
  CombinatorialData pi;
  int eps = 0;
  int winner = 0;
  int loser = 0;
  CombinatorialData next_pi;
};

RauzyStep rauzy_move(const CombinatorialData& pi, int eps);

struct CombinatoricsSequence {
  std::vector<RauzyStep> steps;
  std::optional<int> k_bound;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  // pi at time m, 0 <= m <= size(); requires size() > 0.
  const CombinatorialData& pi_at(std::size_t m) const;
  const CombinatorialData& last_pi() const { return steps.back().next_pi; }
  std::vector<int> types() const;
  bool admissible() const;
  void append(int eps);  // requires nonempty
};

CombinatoricsSequence make_sequence(const CombinatorialData& start, const std::vector<int>& eps);
CombinatoricsSequence concat(const CombinatoricsSequence& a, const CombinatoricsSequence& b);
// Repeats a closed loop (first pi == last next_pi) until at least min_length steps.
CombinatoricsSequence periodic_extension(const CombinatoricsSequence& loop, std::size_t min_length);

std::vector<CombinatorialData> rauzy_class(const CombinatorialData& pi);

enum class Tristate { False, True, Indeterminate };
const char* to_string(Tristate t);

Tristate is_k_bounded(const CombinatoricsSequence& seq, int k);
// The definition at a single time n; requires the window [n-k+1, n+k-1] inside the sequence.
bool k_bounded_at(const CombinatoricsSequence& seq, int k, int n);
// Smallest k in [1, kmax] for which the window check returns True, if any.
std::optional<int> min_k_bound(const CombinatoricsSequence& seq, int kmax);

// Shortest completion from `from` to `target`; ties broken by (eps, winner) order.
CombinatoricsSequence close_path(const CombinatorialData& from, const CombinatorialData& target);
CombinatoricsSequence close_path(const CombinatoricsSequence& prefix, const CombinatorialData& target);

CombinatoricsSequence generate_k_bounded(const CombinatorialData& seed_pi, std::size_t length, int k,
                                         std::uint64_t rng_seed);

}  // namespace giet
