#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "ppcshape/bcjr.hpp"
#include "ppcshape/channel.hpp"
#include "ppcshape/dslm.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/seed.hpp"
#include "ppcshape/trellis.hpp"

using namespace ppcshape;

namespace {

struct Posteriors {
  std::vector<double> symbol;  // N x M
  std::vector<double> input;   // N x M
};

// Exact MAP by enumeration: every input sequence, every random choice the
// mapper can make, weighted by its probability and the Gaussian likelihood
// of the full received frame (zero amplitude outside the frame).
Posteriors enumerate_map(const std::vector<double>& y, const DslmRule& rule, const std::vector<double>& taps,
                         std::size_t cursor, double sigma, const std::vector<double>& priors) {
  const int M = rule.M();
  const std::size_t N = y.size();
  Posteriors post{std::vector<double>(N * M, 0.0), std::vector<double>(N * M, 0.0)};
  std::vector<unsigned> u(N), x(N);
  double total = 0.0;
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t t, std::size_t state, double w) {
    if (t == N) {
      double ll = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        double e = 0.0;
        for (std::size_t j = 0; j < taps.size(); ++j) {
          const auto k = static_cast<std::ptrdiff_t>(n + cursor) - static_cast<std::ptrdiff_t>(j);
          if (k >= 0 && k < static_cast<std::ptrdiff_t>(N)) e += taps[j] * (2.0 * x[static_cast<std::size_t>(k)] - (M - 1));
        }
        ll += -(y[n] - e) * (y[n] - e) / (2.0 * sigma * sigma);
      }
      const double p = w * std::exp(ll);
      total += p;
      for (std::size_t n = 0; n < N; ++n) {
        post.symbol[n * M + x[n]] += p;
        post.input[n * M + u[n]] += p;
      }
      return;
    }
    for (unsigned in = 0; in < static_cast<unsigned>(M); ++in) {
      const auto cand = rule.candidates(state, in);
      for (unsigned c : cand) {
        u[t] = in;
        x[t] = c;
        walk(t + 1, rule.space().next_state(state, c), w * priors[t * M + in] / static_cast<double>(cand.size()));
      }
    }
  };
  walk(0, DslmRule::initial_state(), 1.0);
  for (double& v : post.symbol) v /= total;
  for (double& v : post.input) v /= total;
  return post;
}

struct Case {
  int M, L;
  double gamma;
  std::vector<double> taps;
  std::size_t cursor;
  std::size_t N;
  double sigma;
};

void check_against_enumeration(const Case& c, std::uint64_t seed) {
  const GrayLabeling lab(c.M);
  const auto fs = build_forbidden_set(c.M, c.L, c.gamma);
  const Trellis tr(fs, lab);
  Rng rng(seed);
  std::vector<unsigned> in(c.N);
  for (auto& v : in) v = static_cast<unsigned>(rng() % static_cast<unsigned>(c.M));
  const auto tx = dslm_encode_indices(in, tr.rule(), lab, seed + 1);
  const ChannelSpec ch(c.taps, c.cursor, c.sigma, static_cast<double>(c.M - 1) * 4);
  const auto y = transmit(tx.symbols, ch, seed + 2);

  // Non-uniform priors exercise the prior path too.
  std::vector<double> pri(c.N * c.M);
  for (std::size_t t = 0; t < c.N; ++t) {
    double s = 0.0;
    for (int a = 0; a < c.M; ++a) s += pri[t * c.M + a] = 0.5 + static_cast<double>((t * 7 + a * 3) % 5);
    for (int a = 0; a < c.M; ++a) pri[t * c.M + a] /= s;
  }
  const BranchMetricModel bm(c.taps, c.cursor, c.sigma, c.L);
  ASSERT_FALSE(bm.truncated);
  const auto out = bcjr(y, tr, bm, pri);
  const auto ref = enumerate_map(y, tr.rule(), ch.taps(), c.cursor, c.sigma, pri);
  for (std::size_t i = 0; i < ref.symbol.size(); ++i) {
    EXPECT_NEAR(out.symbol_posteriors[i], ref.symbol[i], 1e-9) << "symbol entry " << i;
    EXPECT_NEAR(out.input_posteriors[i], ref.input[i], 1e-9) << "input entry " << i;
  }
  const auto full = m_bcjr(y, tr, bm, pri, tr.states());
  for (std::size_t i = 0; i < ref.symbol.size(); ++i) {
    EXPECT_NEAR(full.symbol_posteriors[i], out.symbol_posteriors[i], 1e-9);
    EXPECT_NEAR(full.input_posteriors[i], out.input_posteriors[i], 1e-9);
  }
}

}  // namespace

TEST(Bcjr, MatchesEnumerationOokNoForbidden) {
  check_against_enumeration({2, 3, 0.0, {1.0, 0.4, 0.2}, 0, 12, 0.6}, 11);
}

TEST(Bcjr, MatchesEnumerationOokWithForbiddenPatterns) {
  check_against_enumeration({2, 3, 0.25, {1.0, 0.4, 0.2}, 0, 12, 0.6}, 12);
  check_against_enumeration({2, 3, 0.5, {1.0, 0.5}, 0, 12, 0.8}, 13);
}

TEST(Bcjr, MatchesEnumerationWithPrecursor) {
  check_against_enumeration({2, 3, 0.25, {0.3, 1.0, 0.2}, 1, 12, 0.6}, 14);
}

TEST(Bcjr, MatchesEnumerationWithMergedBranches) {
  // PAM4 with a large forbidden set: several inputs land on one emitted level.
  const GrayLabeling lab(4);
  const auto fs = build_forbidden_set(4, 3, 0.4);
  const Trellis tr(fs, lab);
  std::size_t merged = 0;
  for (std::size_t s = 0; s < tr.states(); ++s)
    for (unsigned x = 0; x < 4; ++x) merged += tr.inputs(s, x).size() > 1;
  ASSERT_GT(merged, 0U);
  check_against_enumeration({4, 3, 0.4, {1.0, 0.3}, 0, 6, 0.7}, 15);
}

TEST(Bcjr, PosteriorsNormalizedEverywhere) {
  const GrayLabeling lab(8);
  const auto fs = build_forbidden_set(8, 4, 0.33);
  const Trellis tr(fs, lab);
  Rng rng(3);
  std::vector<std::uint8_t> bits(3 * 300);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
  const auto tx = dslm_encode(bits, tr.rule(), lab, 4);
  const std::vector<double> taps{1.0, 0.3, 0.1};
  const auto y = transmit(tx.symbols, ChannelSpec(taps, 0, 0.8, 14.0), 5);
  const BranchMetricModel bm(taps, 0, 0.8, 4);
  for (std::size_t keep : {tr.states(), tr.states() / 4, std::size_t{8}}) {
    const auto out = m_bcjr(y, tr, bm, uniform_priors(y.size(), 8), keep);
    for (std::size_t t = 0; t < out.steps; ++t) {
      double s = 0.0, u = 0.0;
      for (double p : out.symbol_row(t)) s += p;
      for (double p : out.input_row(t)) u += p;
      EXPECT_NEAR(s, 1.0, 1e-9);
      EXPECT_NEAR(u, 1.0, 1e-9);
    }
  }
}

TEST(Bcjr, ReducedStateDegradesMonotonically) {
  // Hard-decision SER must not improve when M_keep halves (95% one-sided).
  const int M = 4, L = 4;
  const GrayLabeling lab(M);
  const auto fs = build_forbidden_set(M, L, 0.3);
  const Trellis tr(fs, lab);
  const std::vector<double> taps{0.3, 1.0, 0.5, 0.3};
  const double sigma = pam_sigma(M, 17.0);
  const BranchMetricModel bm(taps, 1, sigma, L);
  std::vector<std::size_t> keeps{tr.states(), 16, 8, 4, 2};
  std::vector<std::size_t> errors(keeps.size(), 0);
  std::size_t symbols = 0;
  for (std::uint64_t f = 0; f < 100; ++f) {
    Rng rng(stream_seed(99, "frame", f));
    std::vector<std::uint8_t> bits(2 * 200);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
    const auto tx = dslm_encode(bits, tr.rule(), lab, stream_seed(99, "choice", f));
    const auto y = transmit(tx.symbols, ChannelSpec(taps, 1, sigma, 3.0 * 2), stream_seed(99, "noise", f));
    symbols += y.size();
    for (std::size_t i = 0; i < keeps.size(); ++i) {
      const auto out = m_bcjr(y, tr, bm, uniform_priors(y.size(), M), keeps[i]);
      for (std::size_t t = 0; t < out.steps; ++t) {
        const auto row = out.symbol_row(t);
        const auto best = static_cast<unsigned>(std::max_element(row.begin(), row.end()) - row.begin());
        errors[i] += best != tx.indices[t];
      }
    }
  }
  for (std::size_t i = 1; i < keeps.size(); ++i) {
    const double a = static_cast<double>(errors[i - 1]) / symbols;
    const double b = static_cast<double>(errors[i]) / symbols;
    const double se = std::sqrt((a * (1 - a) + b * (1 - b)) / symbols);
    EXPECT_GE(b, a - 1.645 * se) << "keep " << keeps[i] << " vs " << keeps[i - 1];
  }
  EXPECT_GT(errors.back(), errors.front());
}

TEST(Trellis, BranchCountsMatchForbiddenSet) {
  const GrayLabeling lab(4);
  for (double g : {0.0, 0.2, 0.5, 0.8}) {
    const auto fs = build_forbidden_set(4, 4, g);
    const Trellis tr(fs, lab);
    EXPECT_EQ(tr.states(), 64U);
    std::size_t allowed = 0, dead = 0, expected_allowed = 0;
    for (std::size_t s = 0; s < tr.states(); ++s) {
      dead += tr.dead_end(s);
      for (unsigned x = 0; x < 4; ++x) {
        allowed += tr.allowed(s, x);
        expected_allowed += fs.is_dead_end(s) || !fs.is_forbidden(fs.space().window(s, x));
        if (tr.allowed(s, x)) { EXPECT_EQ(tr.next_state(s, x), (s * 4 + x) % 64); }
      }
    }
    EXPECT_EQ(allowed, expected_allowed);
    EXPECT_EQ(dead, fs.dead_end_count());
    EXPECT_EQ(tr.disallowed_count(), 256 - allowed);
  }
}

TEST(Trellis, EveryInputHasAnEmission) {
  const GrayLabeling lab(8);
  const auto fs = build_forbidden_set(8, 3, 0.6);
  const Trellis tr(fs, lab);
  for (std::size_t s = 0; s < tr.states(); ++s)
    for (unsigned u = 0; u < 8; ++u) {
      const auto c = tr.rule().candidates(s, u);
      ASSERT_FALSE(c.empty());
      for (unsigned x : c) EXPECT_TRUE(tr.allowed(s, x));
    }
}

TEST(BranchMetric, TruncatesLongChannels) {
  const BranchMetricModel bm({0.05, 0.2, 1.0, 0.2, 0.05, 0.01}, 2, 1.0, 4);
  EXPECT_TRUE(bm.truncated);
  EXPECT_EQ(bm.taps.size(), 4U);
  EXPECT_DOUBLE_EQ(bm.taps[bm.cursor], 1.0);
}
