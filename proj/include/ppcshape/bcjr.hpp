#pragma once

// Forward-backward MAP detection on the selective-mapping trellis, exact or
// with M-algorithm state pruning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ppcshape/errors.hpp"
#include "ppcshape/ldpc.hpp"
#include "ppcshape/trellis.hpp"

namespace ppcshape {

struct BcjrOptions {
  std::size_t m_keep = 0;  // states kept per step; 0 keeps all
  bool max_log = false;    // max instead of log-sum-exp in the recursions
  // Distribution of the Gray-mapped input levels (part of the model, unlike
  // the priors, so it is not removed from the extrinsic). Empty: uniform.
  std::vector<double> source_pmf;
};

struct DetectorOutput {
  std::size_t steps = 0;
  int M = 0;
  std::vector<double> symbol_posteriors;  // steps x M over emitted levels
  std::vector<double> input_posteriors;   // steps x M over Gray-mapped inputs
  LlrFrame bit_posterior;                 // steps x m, MSB first per symbol
  LlrFrame bit_extrinsic;                 // posterior minus the priors' own bit LLRs
  bool flagged = false;                   // some step lost every path

  std::span<const double> symbol_row(std::size_t t) const {
    return {symbol_posteriors.data() + t * static_cast<std::size_t>(M), static_cast<std::size_t>(M)};
  }
  std::span<const double> input_row(std::size_t t) const {
    return {input_posteriors.data() + t * static_cast<std::size_t>(M), static_cast<std::size_t>(M)};
  }
};

// Per-step priors over Gray-mapped input levels, row-major steps x M.
inline std::vector<double> uniform_priors(std::size_t steps, int M) {
  return std::vector<double>(steps * static_cast<std::size_t>(M), 1.0 / M);
}

// Priors from bit LLRs (positive favours 0), one row per symbol.
inline std::vector<double> priors_from_bit_llrs(std::span<const double> llrs, const Trellis& tr) {
  const auto m = static_cast<std::size_t>(tr.bits_per_symbol());
  const auto M = static_cast<std::size_t>(tr.M());
  if (llrs.size() % m != 0) throw InvalidArgument("LLR count is not a multiple of bits per symbol");
  const std::size_t steps = llrs.size() / m;
  std::vector<double> pri(steps * M);
  std::vector<double> logp(M);
  for (std::size_t t = 0; t < steps; ++t) {
    double top = -std::numeric_limits<double>::infinity();
    for (unsigned u = 0; u < M; ++u) {
      const unsigned label = tr.label(u);
      double acc = 0.0;
      for (std::size_t b = 0; b < m; ++b) {
        const double l = clamp_llr(llrs[t * m + b]);
        const unsigned bit = (label >> (m - 1 - b)) & 1U;
        // log P(bit) = -log(1 + e^{-+l})
        acc -= std::log1p(std::exp(bit ? l : -l));
      }
      logp[u] = acc;
      top = std::max(top, acc);
    }
    double total = 0.0;
    for (unsigned u = 0; u < M; ++u) total += (pri[t * M + u] = std::exp(logp[u] - top));
    for (unsigned u = 0; u < M; ++u) pri[t * M + u] /= total;
  }
  return pri;
}

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double level_of(unsigned idx, int M) { return 2.0 * idx - (M - 1); }

// Noiseless observation expected at step t for branch (state, x), with the
// zero prehistory the channel sees before the frame.
class ExpectedObservation {
 public:
  ExpectedObservation(const Trellis& tr, const BranchMetricModel& bm) : tr_(tr), bm_(bm) {
    if (bm.taps.size() > static_cast<std::size_t>(tr.L()))
      throw InvalidArgument("channel memory exceeds the trellis memory");
    const std::size_t K = tr.states();
    const auto M = static_cast<std::size_t>(tr.M());
    steady_.resize(K * M);
    for (std::size_t s = 0; s < K; ++s)
      for (unsigned x = 0; x < M; ++x) steady_[s * M + x] = compute(s, x, std::numeric_limits<std::size_t>::max());
  }

  double operator()(std::size_t t, std::size_t s, unsigned x) const {
    if (t + 1 >= bm_.taps.size()) return steady_[s * static_cast<std::size_t>(tr_.M()) + x];
    return compute(s, x, t);
  }

  std::span<const double> steady() const { return steady_; }

  // Symbol emitted j steps before the newest one of branch (s, x).
  unsigned window_symbol(std::size_t s, unsigned x, std::size_t j) const {
    if (j == 0) return x;
    const auto M = static_cast<std::size_t>(tr_.M());
    std::size_t code = s;
    for (std::size_t i = 1; i < j; ++i) code /= M;
    return static_cast<unsigned>(code % M);
  }

 private:
  double compute(std::size_t s, unsigned x, std::size_t t) const {
    double e = 0.0;
    for (std::size_t j = 0; j < bm_.taps.size(); ++j) {
      if (j > t) break;
      e += bm_.taps[j] * level_of(window_symbol(s, x, j), tr_.M());
    }
    return e;
  }

  const Trellis& tr_;
  const BranchMetricModel& bm_;
  std::vector<double> steady_;
};

// exp() of anything below this only yields subnormals, which are slow and
// irrelevant next to the O(1) leading term.
inline constexpr double kExpFloor = -700.0;

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace detail

// Forward-backward recursion. Observation received[n] belongs to the step of
// the symbol at its main cursor; precursor observations of the last symbols
// fold into the terminal backward metric. Forward starts in the all-lowest
// prehistory state.
inline DetectorOutput bcjr(std::span<const double> received, const Trellis& tr, const BranchMetricModel& bm,
                           std::span<const double> priors, const BcjrOptions& opt = {}) {
  using detail::kNegInf;
  const std::size_t N = received.size();
  const std::size_t K = tr.states();
  const auto M = static_cast<std::size_t>(tr.M());
  const auto m = static_cast<std::size_t>(tr.bits_per_symbol());
  if (N == 0) throw InvalidArgument("empty received frame");
  if (priors.size() != N * M) throw InvalidArgument("priors must hold one row of M per received sample");
  if (opt.m_keep > K) throw InvalidArgument("m_keep exceeds the state count");
  if (!opt.source_pmf.empty() && opt.source_pmf.size() != M) throw InvalidArgument("source pmf must have M entries");
  for (std::size_t t = 0; t < N; ++t) {
    double row = 0.0;
    for (std::size_t u = 0; u < M; ++u) row += priors[t * M + u];
    if (std::abs(row - 1.0) > 1e-6) throw InvalidArgument("prior rows must sum to 1");
  }
  const std::size_t keep = opt.m_keep == 0 ? K : opt.m_keep;
  const detail::ExpectedObservation expect(tr, bm);
  const std::size_t cursor = bm.cursor;
  const double inv2v = 1.0 / (2.0 * bm.sigma * bm.sigma);
  const std::int32_t* bin = tr.branch_inputs();
  const double* bw = tr.branch_weights();

  std::vector<double> log_src(M, 0.0);
  if (!opt.source_pmf.empty())
    for (std::size_t u = 0; u < M; ++u) log_src[u] = opt.source_pmf[u] > 0.0 ? std::log(opt.source_pmf[u]) : -1e300;

  std::vector<double> lp(M), plin(M);
  double lp_top = 0.0;
  auto load_priors = [&](std::size_t t) {
    lp_top = kNegInf;
    for (std::size_t u = 0; u < M; ++u) {
      lp[u] = std::log(std::max(priors[t * M + u], 1e-300)) + log_src[u];
      lp_top = std::max(lp_top, lp[u]);
    }
    for (std::size_t u = 0; u < M; ++u) plin[u] = lp[u] - lp_top > detail::kExpFloor ? std::exp(lp[u] - lp_top) : 0.0;
  };
  auto multi_sum = [&](std::size_t s, unsigned x) {
    double w = 0.0;
    for (const auto& l : tr.inputs(s, x)) w += plin[l.input] * l.weight;
    return w;
  };
  // Input-side log weight of a branch reached by several inputs.
  auto multi_weight = [&](std::size_t s, unsigned x) {
    if (opt.max_log) {
      double w = kNegInf;
      for (const auto& l : tr.inputs(s, x)) w = std::max(w, lp[l.input] + l.log_weight);
      return w;
    }
    const double w = multi_sum(s, x);
    return w > 0.0 ? std::log(w) + lp_top : kNegInf;
  };
  std::vector<double> etab;
  auto expected_table = [&](std::size_t t) -> const double* {
    if (t + 1 >= bm.taps.size()) return expect.steady().data();
    etab.resize(K * M);
    for (std::size_t s = 0; s < K; ++s)
      for (unsigned x = 0; x < M; ++x) etab[s * M + x] = expect(t, s, x);
    return etab.data();
  };
  // g[b]: log branch weight (inputs plus observation) for the listed states.
  std::vector<double> g(K * M);
  auto fill_branches = [&](std::size_t t, const std::vector<std::uint32_t>& states) {
    load_priors(t);
    const double* E = expected_table(t);
    const bool obs = t >= cursor;
    const double y = obs ? received[t - cursor] : 0.0;
    for (auto s : states) {
      const std::size_t base = s * M;
      for (unsigned x = 0; x < M; ++x) {
        const std::size_t b = base + x;
        const std::int32_t k = bin[b];
        double val = kNegInf;
        if (k != Trellis::kNoBranch) {
          val = k >= 0 ? lp[static_cast<std::size_t>(k)] + bw[b] : multi_weight(s, x);
          if (obs) {
            const double d = y - E[b];
            val -= d * d * inv2v;
          }
        }
        g[b] = val;
      }
    }
  };

  DetectorOutput out;
  out.steps = N;
  out.M = static_cast<int>(M);
  out.symbol_posteriors.assign(N * M, 0.0);
  out.input_posteriors.assign(N * M, 0.0);

  // ---- forward ----
  std::vector<double> la((N + 1) * K, kNegInf);
  std::vector<std::vector<std::uint32_t>> alive(N + 1);
  la[Trellis::initial_state()] = 0.0;
  alive[0].push_back(static_cast<std::uint32_t>(Trellis::initial_state()));
  std::vector<double> acc(K);
  const std::size_t shift = K / M;
  for (std::size_t t = 0; t < N; ++t) {
    fill_branches(t, alive[t]);
    const double* cur = la.data() + t * K;
    double top = kNegInf;
    for (auto s : alive[t]) {
      const double cs = cur[s];
      double* gs = g.data() + s * M;
      for (unsigned x = 0; x < M; ++x) {
        gs[x] += cs;
        top = std::max(top, gs[x]);
      }
    }
    double* nxt = la.data() + (t + 1) * K;
    if (top == kNegInf) {
      out.flagged = true;
      break;
    }
    if (opt.max_log) {
      for (auto s : alive[t]) {
        const double* gs = g.data() + s * M;
        double* dst = nxt + (s % shift) * M;
        for (unsigned x = 0; x < M; ++x) dst[x] = std::max(dst[x], gs[x]);
      }
    } else {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (auto s : alive[t]) {
        const double* gs = g.data() + s * M;
        double* dst = acc.data() + (s % shift) * M;
        for (unsigned x = 0; x < M; ++x)
          if (gs[x] - top > detail::kExpFloor) dst[x] += std::exp(gs[x] - top);
      }
      for (std::size_t ns = 0; ns < K; ++ns)
        if (acc[ns] > 0.0) nxt[ns] = std::log(acc[ns]) + top;
    }
    auto& live = alive[t + 1];
    for (std::size_t ns = 0; ns < K; ++ns)
      if (nxt[ns] != kNegInf) live.push_back(static_cast<std::uint32_t>(ns));
    if (live.size() > keep) {
      std::nth_element(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(keep - 1), live.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return nxt[a] > nxt[b] || (nxt[a] == nxt[b] && a < b); });
      for (std::size_t i = keep; i < live.size(); ++i) nxt[live[i]] = kNegInf;
      live.resize(keep);
      std::sort(live.begin(), live.end());
    }
  }

  // ---- backward with posteriors ----
  std::vector<double> lb_next(K, kNegInf), lb(K, kNegInf);
  {
    // Terminal metric: observations whose main-cursor symbol lies past the
    // frame end depend only on the final state.
    for (auto s : alive[N]) {
      double l = 0.0;
      for (std::size_t i = 0; i < cursor && i < N; ++i) {
        const std::size_t n = N - cursor + i;
        if (n >= N) continue;
        double e = 0.0;
        for (std::size_t j = i + 1; j < bm.taps.size(); ++j) {
          // Symbol index N + i - j, counted back from the newest emitted.
          const std::size_t back = j - i - 1;
          if (back >= static_cast<std::size_t>(tr.L() - 1) || back >= N) continue;
          std::size_t code = s;
          for (std::size_t q = 0; q < back; ++q) code /= M;
          e += bm.taps[j] * detail::level_of(static_cast<unsigned>(code % M), tr.M());
        }
        const double d = received[n] - e;
        l -= d * d * inv2v;
      }
      lb_next[s] = l;
    }
  }
  if (out.flagged) {
    for (std::size_t t = 0; t < N; ++t)
      for (std::size_t u = 0; u < M; ++u) {
        out.symbol_posteriors[t * M + u] = 1.0 / static_cast<double>(M);
        out.input_posteriors[t * M + u] = priors[t * M + u];
      }
  }
  std::vector<double> sym(M), inp(M), sf(K);
  for (std::size_t tt = N; tt-- > 0 && !out.flagged;) {
    const std::size_t t = tt;
    fill_branches(t, alive[t]);
    const double* cur = la.data() + t * K;
    double top = kNegInf, la_top = kNegInf;
    for (auto s : alive[t]) {
      la_top = std::max(la_top, cur[s]);
      double* gs = g.data() + s * M;
      const double* bn = lb_next.data() + (s % shift) * M;
      for (unsigned x = 0; x < M; ++x) {
        if (bn[x] == kNegInf) gs[x] = kNegInf;
        else gs[x] += bn[x];
        top = std::max(top, gs[x]);
      }
    }
    std::fill(lb.begin(), lb.end(), kNegInf);
    std::fill(sym.begin(), sym.end(), 0.0);
    std::fill(inp.begin(), inp.end(), 0.0);
    if (top == kNegInf) {
      out.flagged = true;
      break;
    }
    for (auto s : alive[t]) sf[s] = cur[s] - la_top > detail::kExpFloor ? std::exp(cur[s] - la_top) : 0.0;

    auto accumulate = [&](std::size_t s, unsigned x, double w) {
      sym[x] += w;
      const std::int32_t k = bin[s * M + x];
      if (k >= 0) {
        inp[static_cast<std::size_t>(k)] += w;
        return;
      }
      const double wsum = multi_sum(s, x);
      if (!(wsum > 0.0)) return;
      for (const auto& l : tr.inputs(s, x)) inp[l.input] += w * plin[l.input] * l.weight / wsum;
    };

    double total = 0.0;
    for (auto s : alive[t]) {
      double beta = 0.0, best = kNegInf;
      const double* gs = g.data() + s * M;
      for (unsigned x = 0; x < M; ++x) {
        const double val = gs[x];
        if (val == kNegInf) continue;
        best = std::max(best, val);
        if (val - top <= detail::kExpFloor) continue;
        const double e = std::exp(val - top);
        beta += e;
        const double w = e * sf[s];
        if (w == 0.0) continue;
        total += w;
        accumulate(s, x, w);
      }
      if (opt.max_log) lb[s] = best;
      else if (beta > 0.0) lb[s] = std::log(beta) + top;
      else if (best != kNegInf) lb[s] = best;
    }
    if (!(total > 1e-250)) {
      // Both factors underflowed somewhere; redo this step with a joint shift.
      std::fill(sym.begin(), sym.end(), 0.0);
      std::fill(inp.begin(), inp.end(), 0.0);
      double joint = kNegInf;
      for (auto s : alive[t])
        for (unsigned x = 0; x < M; ++x)
          if (g[s * M + x] != kNegInf) joint = std::max(joint, cur[s] + g[s * M + x]);
      total = 0.0;
      for (auto s : alive[t])
        for (unsigned x = 0; x < M; ++x) {
          if (g[s * M + x] == kNegInf || cur[s] + g[s * M + x] - joint <= detail::kExpFloor) continue;
          const double w = std::exp(cur[s] + g[s * M + x] - joint);
          total += w;
          accumulate(s, x, w);
        }
    }
    double isum = 0.0;
    for (std::size_t x = 0; x < M; ++x) isum += inp[x];
    for (std::size_t x = 0; x < M; ++x) {
      out.symbol_posteriors[t * M + x] = sym[x] / total;
      out.input_posteriors[t * M + x] = inp[x] / isum;
    }
    lb_next.swap(lb);
  }

  // ---- bit LLRs ----
  out.bit_posterior.assign(N * m, 0.0);
  out.bit_extrinsic.assign(N * m, 0.0);
  for (std::size_t t = 0; t < N; ++t)
    for (std::size_t b = 0; b < m; ++b) {
      double p0 = 0.0, p1 = 0.0, q0 = 0.0, q1 = 0.0;
      for (unsigned u = 0; u < M; ++u) {
        const bool one = (tr.label(u) >> (m - 1 - b)) & 1U;
        (one ? p1 : p0) += out.input_posteriors[t * M + u];
        (one ? q1 : q0) += priors[t * M + u];
      }
      const double post = clamp_llr(std::log(std::max(p0, 1e-300)) - std::log(std::max(p1, 1e-300)));
      const double pri = clamp_llr(std::log(std::max(q0, 1e-300)) - std::log(std::max(q1, 1e-300)));
      out.bit_posterior[t * m + b] = post;
      out.bit_extrinsic[t * m + b] = clamp_llr(post - pri);
    }
  return out;
}

inline DetectorOutput m_bcjr(std::span<const double> received, const Trellis& tr, const BranchMetricModel& bm,
                             std::span<const double> priors, std::size_t m_keep, BcjrOptions opt = {}) {
  if (m_keep < 1 || m_keep > tr.states()) throw InvalidArgument("m_keep must lie in [1, K]");
  opt.m_keep = m_keep;
  return bcjr(received, tr, bm, priors, opt);
}

}  // namespace ppcshape
