#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ppcshape/dslm.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/metrics.hpp"
#include "ppcshape/pattern.hpp"
#include "ppcshape/seed.hpp"

using namespace ppcshape;

namespace {
std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng() >> 63);
  return b;
}
}  // namespace

TEST(Gray, NeighboursDifferInOneBit) {
  for (int M : {2, 4, 8, 16}) {
    const GrayLabeling lab(M);
    for (unsigned i = 0; i + 1 < static_cast<unsigned>(M); ++i)
      EXPECT_EQ(std::popcount(lab.label(i) ^ lab.label(i + 1)), 1);
    const auto bits = random_bits(static_cast<std::size_t>(lab.bits_per_symbol()) * 100, 1);
    EXPECT_EQ(lab.demap_indices(lab.map_indices(bits)), bits);
  }
  EXPECT_THROW(GrayLabeling(6), InvalidArgument);
}

TEST(Pattern, ScoreByHand) {
  // [-1, 1]: variance 1, peak 1 -> 0 dB. [-3, 3]: var 9, peak 3 -> -10 log10 27.
  const std::vector<double> a{-1, 1}, b{-3, 3}, c{5, 5, 5};
  EXPECT_NEAR(evaluate_pattern(a), 0.0, 1e-12);
  EXPECT_NEAR(evaluate_pattern(b), -10 * std::log10(27.0), 1e-12);
  EXPECT_TRUE(std::isinf(evaluate_pattern(c)));
  EXPECT_THROW(evaluate_pattern(std::vector<double>{1.0}), InvalidArgument);
}

TEST(Pattern, PermutationInvariantAndCsiIdentity) {
  std::vector<double> s{-7, 3, 1, -1, 5};
  const double base = evaluate_pattern(s);
  std::sort(s.begin(), s.end());
  do {
    EXPECT_EQ(evaluate_pattern(s), base);
  } while (std::next_permutation(s.begin(), s.end()));
  EXPECT_EQ(evaluate_pattern_csi(s, std::vector<double>{1.0}), evaluate_pattern(s));
}

TEST(ForbiddenSet, CountAndOrdering) {
  for (double g : {0.0, 0.1, 0.33, 0.5, 0.9}) {
    const auto fs = build_forbidden_set(4, 4, g);
    EXPECT_EQ(fs.size(), static_cast<std::size_t>(std::floor(g * 256)));
    // Every forbidden pattern scores at most every allowed one.
    double worst_allowed = std::numeric_limits<double>::infinity(), best_forbidden = -worst_allowed;
    for (std::size_t c = 0; c < 256; ++c) {
      if (fs.is_forbidden(c)) best_forbidden = std::max(best_forbidden, fs.score(c));
      else worst_allowed = std::min(worst_allowed, fs.score(c));
    }
    if (fs.size() > 0) { EXPECT_LE(best_forbidden, worst_allowed); }
  }
  EXPECT_THROW(build_forbidden_set(4, 4, 1.0), InvalidArgument);
  EXPECT_THROW(build_forbidden_set(4, 4, -0.1), InvalidArgument);
}

TEST(Dslm, ZeroGammaIsPassThrough) {
  const GrayLabeling lab(8);
  const auto fs = build_forbidden_set(8, 5, 0.0);
  const auto bits = random_bits(3 * 5000, 2);
  const auto out = dslm_encode(bits, fs, lab, 3);
  EXPECT_EQ(out.substitution_count(), 0U);
  EXPECT_EQ(out.indices, lab.map_indices(bits));
  EXPECT_EQ(dslm_direct_ber(bits, out.symbols, lab), 0.0);
}

TEST(Dslm, NeverEmitsForbiddenWindowsOutsideDeadEnds) {
  const GrayLabeling lab(8);
  const auto fs = build_forbidden_set(8, 4, 0.5);
  const DslmRule rule(fs, lab);
  const auto bits = random_bits(3 * 20000, 4);
  const auto out = dslm_encode(bits, rule, lab, 5);
  std::size_t state = DslmRule::initial_state();
  for (std::size_t k = 0; k < out.indices.size(); ++k) {
    const auto w = fs.space().window(state, out.indices[k]);
    if (!fs.is_dead_end(state)) { EXPECT_FALSE(fs.is_forbidden(w)) << "symbol " << k; }
    state = fs.space().next_state(state, out.indices[k]);
  }
  EXPECT_GT(out.substitution_count(), 0U);
}

TEST(Dslm, SubstitutesClosestGrayLabel) {
  const GrayLabeling lab(8);
  const auto fs = build_forbidden_set(8, 3, 0.4);
  const DslmRule rule(fs, lab);
  for (std::size_t s = 0; s < fs.space().state_count; ++s)
    for (unsigned u = 0; u < 8; ++u) {
      if (fs.is_dead_end(s) || !fs.is_forbidden(fs.space().window(s, u))) continue;
      int best = 99;
      for (unsigned x = 0; x < 8; ++x)
        if (!fs.is_forbidden(fs.space().window(s, x))) best = std::min(best, lab.hamming(x, u));
      for (unsigned x : rule.candidates(s, u)) EXPECT_EQ(lab.hamming(x, u), best);
    }
}

TEST(Dslm, EntropyAndBerGrowWithGamma) {
  const GrayLabeling lab(8);
  const auto bits = random_bits(3 * 100000, 6);
  double prev_ber = -1.0, prev_h = 4.0;
  for (double g : {0.0, 0.2, 0.4, 0.6, 0.8}) {
    const auto out = dslm_encode(bits, build_forbidden_set(8, 4, g), lab, 7);
    const double ber = dslm_direct_ber(bits, out.symbols, lab);
    const auto hist = level_histogram(out.indices, 8);
    const double h = entropy_bits(std::span<const std::size_t>(hist));
    EXPECT_GE(ber, prev_ber);
    EXPECT_LE(h, prev_h + 1e-3);
    prev_ber = ber;
    prev_h = h;
  }
}

TEST(Dslm, SameSeedSameOutput) {
  const GrayLabeling lab(8);
  const auto fs = build_forbidden_set(8, 4, 0.4);
  const auto bits = random_bits(3 * 1000, 8);
  EXPECT_EQ(dslm_encode(bits, fs, lab, 9).indices, dslm_encode(bits, fs, lab, 9).indices);
}
