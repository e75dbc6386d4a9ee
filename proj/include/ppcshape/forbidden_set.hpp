#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ppcshape/channel.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/pattern.hpp"

namespace ppcshape {

// Length-L windows of level indices are coded base M, oldest symbol most
// significant, so code order is lexicographic tuple order. A state is the
// (L-1)-symbol history; window = state * M + newest.
struct PatternSpace {
  int M = 2;
  int L = 2;
  std::size_t pattern_count = 0;  // M^L
  std::size_t state_count = 0;    // M^(L-1)

  PatternSpace() = default;
  PatternSpace(int M_, int L_, std::size_t guard) : M(M_), L(L_) {
    if (M < 2) throw InvalidArgument("constellation size must be at least 2");
    if (L < 2) throw InvalidArgument("memory length must be at least 2");
    std::size_t n = 1;
    for (int i = 0; i < L; ++i) {
      if (n > guard / static_cast<std::size_t>(M)) throw ResourceError("M^L exceeds the enumeration guard");
      n *= static_cast<std::size_t>(M);
    }
    pattern_count = n;
    state_count = n / static_cast<std::size_t>(M);
  }

  std::size_t window(std::size_t state, unsigned newest) const { return state * static_cast<std::size_t>(M) + newest; }
  std::size_t next_state(std::size_t state, unsigned newest) const { return window(state, newest) % state_count; }

  std::vector<unsigned> decode(std::size_t code, int length) const {
    std::vector<unsigned> out(static_cast<std::size_t>(length));
    for (int i = length - 1; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = static_cast<unsigned>(code % static_cast<std::size_t>(M));
      code /= static_cast<std::size_t>(M);
    }
    return out;
  }

  std::size_t encode(std::span<const unsigned> indices) const {
    std::size_t code = 0;
    for (unsigned v : indices) code = code * static_cast<std::size_t>(M) + v;
    return code;
  }
};

inline constexpr std::size_t kPatternGuard = std::size_t{1} << 24;

class ForbiddenSet {
 public:
  ForbiddenSet() = default;

  int M() const noexcept { return space_.M; }
  int L() const noexcept { return space_.L; }
  double gamma() const noexcept { return gamma_; }
  const PatternSpace& space() const noexcept { return space_; }
  const PatternEvaluator& evaluator() const noexcept { return evaluator_; }

  std::size_t size() const noexcept { return count_; }
  bool is_forbidden(std::size_t window_code) const { return forbidden_[window_code] != 0; }
  bool is_dead_end(std::size_t state) const { return dead_end_[state] != 0; }
  std::size_t dead_end_count() const noexcept {
    return static_cast<std::size_t>(std::count(dead_end_.begin(), dead_end_.end(), std::uint8_t{1}));
  }
  // Highest score among forbidden patterns (-inf when empty).
  double score_threshold() const noexcept { return threshold_; }

  double score(std::size_t window_code) const {
    const auto idx = space_.decode(window_code, space_.L);
    std::vector<double> amps(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) amps[i] = 2.0 * idx[i] - (space_.M - 1);
    return evaluator_(amps);
  }

  friend ForbiddenSet build_forbidden_set(int M, int L, double gamma, const PatternEvaluator& evaluator);

 private:
  PatternSpace space_;
  double gamma_ = 0.0;
  PatternEvaluator evaluator_;
  std::vector<std::uint8_t> forbidden_;
  std::vector<std::uint8_t> dead_end_;
  std::size_t count_ = 0;
  double threshold_ = -std::numeric_limits<double>::infinity();
};

// Ranks all M^L patterns by score (ascending, ties by tuple order) and bans
// the lowest floor(gamma * M^L).
inline ForbiddenSet build_forbidden_set(int M, int L, double gamma,
                                        const PatternEvaluator& evaluator = PatternEvaluator::statistics()) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("forbidden ratio must lie in [0, 1)");
  ForbiddenSet fs;
  fs.space_ = PatternSpace(M, L, kPatternGuard);
  fs.gamma_ = gamma;
  fs.evaluator_ = evaluator;
  const std::size_t n = fs.space_.pattern_count;
  fs.forbidden_.assign(n, 0);
  fs.dead_end_.assign(fs.space_.state_count, 0);
  fs.count_ = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(n)));
  if (fs.count_ == 0) return fs;

  std::vector<double> scores(n);
  std::vector<double> amps(static_cast<std::size_t>(L));
  for (std::size_t code = 0; code < n; ++code) {
    std::size_t c = code;
    for (int i = L - 1; i >= 0; --i) {
      amps[static_cast<std::size_t>(i)] = 2.0 * static_cast<double>(c % static_cast<std::size_t>(M)) - (M - 1);
      c /= static_cast<std::size_t>(M);
    }
    scores[code] = evaluator(amps);
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return scores[a] < scores[b] || (scores[a] == scores[b] && a < b);
  });
  for (std::size_t r = 0; r < fs.count_; ++r) fs.forbidden_[order[r]] = 1;
  fs.threshold_ = scores[order[fs.count_ - 1]];

  for (std::size_t s = 0; s < fs.space_.state_count; ++s) {
    bool any_allowed = false;
    for (unsigned x = 0; x < static_cast<unsigned>(M) && !any_allowed; ++x)
      any_allowed = fs.forbidden_[fs.space_.window(s, x)] == 0;
    fs.dead_end_[s] = any_allowed ? 0 : 1;
  }
  return fs;
}

}  // namespace ppcshape
