#pragma once

// Dynamic selective mapping: Gray mapping whose output may be replaced by a
// nearby level when the newest length-L window would be a forbidden pattern.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "ppcshape/errors.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/seed.hpp"

namespace ppcshape {

// Emission candidates for every (history state, Gray-mapped input level).
// A single candidate is emitted deterministically; several are drawn
// uniformly. Built once per (ForbiddenSet, labeling) and shared by the
// transmitter and the receiver trellis.
class DslmRule {
 public:
  DslmRule(const ForbiddenSet& fs, const GrayLabeling& lab) : space_(fs.space()) {
    if (fs.M() != lab.M()) throw InvalidArgument("forbidden set and labeling disagree on M");
    const auto M = static_cast<unsigned>(fs.M());
    const std::size_t K = space_.state_count;
    offsets_.reserve(K * M + 1);
    offsets_.push_back(0);
    std::vector<unsigned> a, c, d;
    for (std::size_t s = 0; s < K; ++s) {
      for (unsigned in = 0; in < M; ++in) {
        if (!fs.is_forbidden(space_.window(s, in)) || fs.is_dead_end(s)) {
          candidates_.push_back(in);
          offsets_.push_back(candidates_.size());
          continue;
        }
        a.clear();
        for (unsigned x = 0; x < M; ++x)
          if (!fs.is_forbidden(space_.window(s, x))) a.push_back(x);
        // Closest Gray label.
        int best_h = std::numeric_limits<int>::max();
        c.clear();
        for (unsigned x : a) {
          const int h = lab.hamming(x, in);
          if (h < best_h) {
            best_h = h;
            c.clear();
          }
          if (h == best_h) c.push_back(x);
        }
        // Best-scoring resulting window.
        d.clear();
        if (c.size() == 1) {
          d = c;
        } else {
          double best_f = -std::numeric_limits<double>::infinity();
          bool first = true;
          for (unsigned x : c) {
            const double f = fs.score(space_.window(s, x));
            if (first || f > best_f) {
              best_f = f;
              d.clear();
              first = false;
            }
            if (f == best_f) d.push_back(x);
          }
        }
        // Closest amplitude.
        unsigned best_e = std::numeric_limits<unsigned>::max();
        const std::size_t start = candidates_.size();
        for (unsigned x : d) {
          const unsigned e = x > in ? x - in : in - x;
          if (e < best_e) {
            best_e = e;
            candidates_.resize(start);
          }
          if (e == best_e) candidates_.push_back(x);
        }
        offsets_.push_back(candidates_.size());
      }
    }
  }

  const PatternSpace& space() const noexcept { return space_; }
  int M() const noexcept { return space_.M; }
  int L() const noexcept { return space_.L; }

  std::span<const unsigned> candidates(std::size_t state, unsigned input) const {
    const std::size_t k = state * static_cast<std::size_t>(space_.M) + input;
    return {candidates_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
  }

  // Virtual prehistory: every history symbol at the lowest level.
  static constexpr std::size_t initial_state() noexcept { return 0; }

 private:
  PatternSpace space_;
  std::vector<std::size_t> offsets_;
  std::vector<unsigned> candidates_;
};

struct DslmOutput {
  std::vector<unsigned> indices;       // emitted level indices
  std::vector<double> symbols;         // emitted amplitudes
  std::vector<std::uint8_t> substituted;

  std::size_t substitution_count() const {
    std::size_t n = 0;
    for (auto f : substituted) n += f;
    return n;
  }
};

// Maps input level indices (already Gray-mapped) through the rule.
inline DslmOutput dslm_encode_indices(std::span<const unsigned> inputs, const DslmRule& rule,
                                      const GrayLabeling& lab, std::uint64_t seed) {
  DslmOutput out;
  out.indices.resize(inputs.size());
  out.substituted.assign(inputs.size(), 0);
  Rng rng(seed);
  std::size_t state = DslmRule::initial_state();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto cand = rule.candidates(state, inputs[k]);
    unsigned x = cand[0];
    if (cand.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
      x = cand[pick(rng)];
    }
    out.indices[k] = x;
    out.substituted[k] = x != inputs[k];
    state = rule.space().next_state(state, x);
  }
  out.symbols = lab.to_amplitudes(out.indices);
  return out;
}

inline DslmOutput dslm_encode(std::span<const std::uint8_t> bits, const DslmRule& rule,
                              const GrayLabeling& lab, std::uint64_t seed) {
  const auto inputs = lab.map_indices(bits);
  return dslm_encode_indices(inputs, rule, lab, seed);
}

inline DslmOutput dslm_encode(std::span<const std::uint8_t> bits, const ForbiddenSet& fs,
                              const GrayLabeling& lab, std::uint64_t seed) {
  return dslm_encode(bits, DslmRule(fs, lab), lab, seed);
}

// Bit error fraction of a plain Gray demap of the emitted symbols.
inline double dslm_direct_ber(std::span<const std::uint8_t> input_bits, std::span<const double> symbols,
                              const GrayLabeling& lab) {
  const auto m = static_cast<std::size_t>(lab.bits_per_symbol());
  if (input_bits.size() != symbols.size() * m) throw InvalidArgument("bit and symbol counts are inconsistent");
  if (input_bits.empty()) throw InvalidArgument("empty input");
  std::size_t errors = 0;
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const unsigned label = lab.label(lab.level_index(symbols[k]));
    for (std::size_t b = 0; b < m; ++b)
      errors += (lab.bit(label, static_cast<int>(b)) != input_bits[k * m + b]) ? 1U : 0U;
  }
  return static_cast<double>(errors) / static_cast<double>(input_bits.size());
}

}  // namespace ppcshape
