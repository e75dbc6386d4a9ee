#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ppcshape/dslm.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/gray.hpp"

namespace ppcshape {

inline constexpr std::size_t kStateGuard = std::size_t{1} << 20;

// Detector trellis over (L-1)-symbol histories of *emitted* levels. A branch
// (state, emitted level) exists when its window is allowed, or when the state
// is a dead end (every continuation forbidden), in which case all M
// continuations stay open as on the transmit side. Each branch also records
// which Gray-mapped input levels produce it under the selective-mapping rule,
// and with what probability, so the detector can return posteriors over the
// original inputs rather than the emitted symbols.
class Trellis {
 public:
  struct InputLink {
    std::uint16_t input;
    double log_weight;  // log P(emit this level | state, input)
    double weight;
  };

  Trellis(const ForbiddenSet& fs, const GrayLabeling& lab) : space_(checked_space(fs)), rule_(fs, lab) {
    m_bits_ = lab.bits_per_symbol();
    labels_.resize(static_cast<std::size_t>(fs.M()));
    for (unsigned i = 0; i < labels_.size(); ++i) labels_[i] = lab.label(i);

    const std::size_t K = space_.state_count;
    const auto M = static_cast<std::size_t>(space_.M);
    allowed_.assign(K * M, 0);
    dead_end_.assign(K, 0);
    for (std::size_t s = 0; s < K; ++s) {
      dead_end_[s] = fs.is_dead_end(s) ? 1 : 0;
      for (unsigned x = 0; x < M; ++x) allowed_[s * M + x] = (dead_end_[s] || !fs.is_forbidden(space_.window(s, x))) ? 1 : 0;
    }
    // Group rule outcomes by emitted branch.
    std::vector<std::vector<InputLink>> per_branch(K * M);
    for (std::size_t s = 0; s < K; ++s)
      for (unsigned u = 0; u < M; ++u) {
        const auto cand = rule_.candidates(s, u);
        const double lw = -std::log(static_cast<double>(cand.size()));
        for (unsigned x : cand) per_branch[s * M + x].push_back({static_cast<std::uint16_t>(u), lw, std::exp(lw)});
      }
    link_start_.assign(K * M + 1, 0);
    for (std::size_t b = 0; b < K * M; ++b) {
      link_start_[b + 1] = link_start_[b] + static_cast<std::uint32_t>(per_branch[b].size());
      links_.insert(links_.end(), per_branch[b].begin(), per_branch[b].end());
    }
    branch_input_.assign(K * M, kNoBranch);
    branch_weight_.assign(K * M, 0.0);
    for (std::size_t b = 0; b < K * M; ++b) {
      if (!allowed_[b]) continue;
      if (per_branch[b].size() == 1) {
        branch_input_[b] = static_cast<std::int32_t>(per_branch[b][0].input);
        branch_weight_[b] = per_branch[b][0].log_weight;
      } else {
        branch_input_[b] = kMultiInput;
      }
    }
  }

  static constexpr std::int32_t kNoBranch = -2;
  static constexpr std::int32_t kMultiInput = -1;

  // Flat branch index b = state * M + x. Single-input branches return the
  // input level, otherwise kMultiInput or kNoBranch.
  const std::int32_t* branch_inputs() const noexcept { return branch_input_.data(); }
  const double* branch_weights() const noexcept { return branch_weight_.data(); }

  int M() const noexcept { return space_.M; }
  int L() const noexcept { return space_.L; }
  int bits_per_symbol() const noexcept { return m_bits_; }
  std::size_t states() const noexcept { return space_.state_count; }
  const PatternSpace& space() const noexcept { return space_; }
  const DslmRule& rule() const noexcept { return rule_; }
  unsigned label(unsigned level_index) const { return labels_[level_index]; }

  bool allowed(std::size_t state, unsigned x) const { return allowed_[state * static_cast<std::size_t>(space_.M) + x] != 0; }
  bool dead_end(std::size_t state) const { return dead_end_[state] != 0; }
  std::size_t next_state(std::size_t state, unsigned x) const { return space_.next_state(state, x); }

  std::span<const InputLink> inputs(std::size_t state, unsigned x) const {
    const std::size_t b = state * static_cast<std::size_t>(space_.M) + x;
    return {links_.data() + link_start_[b], link_start_[b + 1] - link_start_[b]};
  }

  std::size_t out_degree(std::size_t state) const {
    std::size_t d = 0;
    for (unsigned x = 0; x < static_cast<unsigned>(space_.M); ++x) d += allowed(state, x);
    return d;
  }

  std::size_t in_degree(std::size_t state) const {
    // Predecessors share the newest L-2 symbols of `state`.
    const std::size_t shift = space_.state_count / static_cast<std::size_t>(space_.M);
    const auto x = static_cast<unsigned>(state % static_cast<std::size_t>(space_.M));
    std::size_t d = 0;
    for (std::size_t p = 0; p < static_cast<std::size_t>(space_.M); ++p) d += allowed(p * shift + state / static_cast<std::size_t>(space_.M), x);
    return d;
  }

  std::size_t disallowed_count() const {
    std::size_t n = 0;
    for (auto a : allowed_) n += a ? 0 : 1;
    return n;
  }

  std::size_t dead_end_count() const {
    std::size_t n = 0;
    for (auto d : dead_end_) n += d;
    return n;
  }

  static constexpr std::size_t initial_state() noexcept { return DslmRule::initial_state(); }

 private:
  static PatternSpace checked_space(const ForbiddenSet& fs) {
    if (fs.space().state_count > kStateGuard) throw ResourceError("trellis state count exceeds the guard");
    return fs.space();
  }

  PatternSpace space_;
  DslmRule rule_;
  int m_bits_ = 1;
  std::vector<unsigned> labels_;
  std::vector<std::uint8_t> allowed_;
  std::vector<std::uint8_t> dead_end_;
  std::vector<std::uint32_t> link_start_;
  std::vector<InputLink> links_;
  std::vector<std::int32_t> branch_input_;
  std::vector<double> branch_weight_;
};

inline Trellis build_trellis(const ForbiddenSet& fs, const GrayLabeling& lab) { return Trellis(fs, lab); }

// Gaussian observation model for one trellis step: the received sample is the
// tap-weighted emitted window plus noise. Taps are indexed like ChannelSpec
// (main cursor at `cursor`, precursors before it).
struct BranchMetricModel {
  std::vector<double> taps{1.0};
  std::size_t cursor = 0;
  double sigma = 1.0;
  bool truncated = false;  // taps were cut to fit the trellis memory

  BranchMetricModel() = default;
  BranchMetricModel(std::vector<double> h, std::size_t main_cursor, double noise_sigma, int memory_length)
      : taps(std::move(h)), cursor(main_cursor), sigma(noise_sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("branch metric sigma must be positive");
    if (taps.empty() || cursor >= taps.size()) throw InvalidArgument("bad tap vector or cursor");
    const auto L = static_cast<std::size_t>(memory_length);
    if (taps.size() > L) {
      // Keep the length-L window containing the cursor with the most energy.
      std::size_t best = 0;
      double best_e = -1.0;
      const std::size_t lo = cursor + 1 >= L ? cursor + 1 - L : 0;
      const std::size_t hi = std::min(cursor, taps.size() - L);
      for (std::size_t start = lo; start <= hi; ++start) {
        double e = 0.0;
        for (std::size_t j = start; j < start + L; ++j) e += taps[j] * taps[j];
        if (e > best_e) {
          best_e = e;
          best = start;
        }
      }
      taps = std::vector<double>(taps.begin() + static_cast<std::ptrdiff_t>(best),
                                 taps.begin() + static_cast<std::ptrdiff_t>(best + L));
      cursor -= best;
      truncated = true;
    }
  }
};

}  // namespace ppcshape
