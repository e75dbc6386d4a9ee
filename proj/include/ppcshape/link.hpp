#pragma once

// Coded link: bits -> (PAS) -> selective mapper -> ISI + AWGN -> (FFE) ->
// turbo equalization -> metrics, one LDPC codeword per frame.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppcshape/bcjr.hpp"
#include "ppcshape/channel.hpp"
#include "ppcshape/dsp.hpp"
#include "ppcshape/dslm.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/interleaver.hpp"
#include "ppcshape/ldpc.hpp"
#include "ppcshape/metrics.hpp"
#include "ppcshape/pas.hpp"
#include "ppcshape/seed.hpp"
#include "ppcshape/trellis.hpp"
#include "ppcshape/turbo.hpp"

namespace ppcshape {

struct EqualizerSpec {
  bool enabled = false;
  LmsOptions lms;
  std::size_t training_symbols = 10000;
};

struct LinkSpec {
  int M = 8;
  int L = 5;
  double gamma = 0.0;
  PatternEvaluator evaluator = PatternEvaluator::statistics();
  std::vector<double> taps = default_practical_taps();
  std::size_t main_cursor = 2;
  TurboConfig turbo;
  EqualizerSpec equalizer;
  std::optional<PasConfig> pas;  // set: PAS frames, otherwise uniform bits
};

struct FrameResult {
  std::size_t info_bits = 0;
  std::size_t info_errors = 0;
  std::size_t coded_bits = 0;
  std::size_t pre_fec_errors = 0;  // first detector pass vs the transmitted stream
  double metric_penalty = 0.0;     // sum of log2(1 + e^{-+llr}) over coded bits
  int iterations = 0;
  bool converged = false;
  std::size_t substitutions = 0;
  std::size_t failed_ccdm_blocks = 0;
  std::vector<double> post_fec_trace;  // info BER after each outer iteration
  std::vector<double> pre_fec_trace;
  std::vector<std::size_t> syndrome_trace;
};

struct PointResult {
  double psnr_db = 0.0;
  std::size_t frames = 0;
  std::size_t frame_errors = 0;
  std::size_t info_bits = 0;
  std::size_t info_errors = 0;
  std::size_t coded_bits = 0;
  std::size_t pre_fec_errors = 0;
  double pre_fec_ber = 0.0;
  double post_fec_ber = 0.0;
  double ngmi = 0.0;
  double mean_iterations = 0.0;
  std::vector<double> post_fec_trace;  // mean over frames, padded with each frame's final value
  std::vector<double> pre_fec_trace;
};

class LinkSimulator {
 public:
  // `pc` must outlive the simulator.
  LinkSimulator(LinkSpec spec, const ParityCheck& pc, std::uint64_t master_seed)
      : spec_(std::move(spec)), pc_(&pc), master_(master_seed), lab_(spec_.M) {
    const auto m = static_cast<std::size_t>(lab_.bits_per_symbol());
    if (pc.n() % m != 0) throw ConfigError("code length is not a multiple of bits per symbol");
    if (spec_.main_cursor >= spec_.taps.size()) throw ConfigError("main cursor outside the tap vector");
    fs_ = std::make_unique<ForbiddenSet>(build_forbidden_set(spec_.M, spec_.L, spec_.gamma, spec_.evaluator));
    tr_ = std::make_unique<Trellis>(*fs_, lab_);
    spec_.turbo.validate(tr_->states());
    if (spec_.pas) {
      PasConfig pc_cfg = *spec_.pas;
      pc_cfg.M = spec_.M;
      pc_cfg.L = spec_.L;
      pc_cfg.gamma = spec_.gamma;
      pc_cfg.interleaver_seed = stream_seed(master_, streams::kInterleaver);
      pas_ = std::make_unique<PasCodec>(pc_cfg, pc);
      il_ = pas_->interleaver();
      source_entropy_ = 0.0;
      for (double p : pas_->source_pmf())
        if (p > 0.0) source_entropy_ -= p * std::log2(p);
      spec_.turbo.source_pmf = pas_->source_pmf();
    } else {
      il_ = Interleaver::random(pc.n(), stream_seed(master_, streams::kInterleaver));
      source_entropy_ = static_cast<double>(m);
    }
  }

  const LinkSpec& spec() const noexcept { return spec_; }
  const Trellis& trellis() const noexcept { return *tr_; }
  const ForbiddenSet& forbidden_set() const noexcept { return *fs_; }
  const Interleaver& interleaver() const noexcept { return il_; }
  const PasCodec* pas() const noexcept { return pas_.get(); }
  std::size_t symbols_per_frame() const noexcept { return pc_->n() / static_cast<std::size_t>(lab_.bits_per_symbol()); }
  std::size_t info_bits_per_frame() const noexcept { return pas_ ? pas_->info_bits_per_frame() : pc_->k(); }
  double net_rate() const noexcept {
    return static_cast<double>(info_bits_per_frame()) / static_cast<double>(symbols_per_frame());
  }
  double source_entropy() const noexcept { return source_entropy_; }

  FrameResult run_frame(double psnr_db, std::uint64_t frame_index) const {
    const double sigma = pam_sigma(spec_.M, psnr_db);
    const ChannelSpec ch(spec_.taps, spec_.main_cursor, sigma, static_cast<double>(spec_.M - 1));
    const auto receiver = make_receiver(ch, psnr_db);

    Rng src(stream_seed(master_, streams::kSource, frame_index));
    std::vector<std::uint8_t> info(info_bits_per_frame());
    for (auto& b : info) b = static_cast<std::uint8_t>(src() >> 63);

    std::vector<std::uint8_t> codeword;
    std::vector<unsigned> levels;
    if (pas_) {
      auto f = pas_->encode(info);
      codeword = std::move(f.codeword);
      levels = std::move(f.levels);
    } else {
      codeword = pc_->encode(info);
      levels = lab_.map_indices(il_.interleave<std::uint8_t>(codeword));
    }
    const auto stream = il_.interleave<std::uint8_t>(codeword);
    const auto tx = dslm_encode_indices(levels, tr_->rule(), lab_, stream_seed(master_, streams::kDslmChoice, frame_index));
    auto y = transmit(tx.symbols, ch, stream_seed(master_, streams::kChannel, frame_index));
    if (receiver.ffe) y = apply_ffe(y, *receiver.ffe);

    const auto res = turbo_equalize(y, *tr_, receiver.bm, *pc_, il_, spec_.turbo, std::span<const std::uint8_t>(codeword));

    FrameResult fr;
    fr.substitutions = tx.substitution_count();
    fr.iterations = res.iterations;
    fr.converged = res.converged;
    fr.coded_bits = stream.size();
    for (std::size_t i = 0; i < stream.size(); ++i) {
      fr.pre_fec_errors += (res.detector_llrs[i] < 0.0) != (stream[i] != 0);
      const double s = stream[i] ? res.detector_llrs[i] : -res.detector_llrs[i];
      fr.metric_penalty += (s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s))) / std::numbers::ln2;
    }
    std::vector<std::uint8_t> decoded;
    if (pas_) decoded = pas_->decode(res.codeword, &fr.failed_ccdm_blocks);
    else decoded = res.info;
    fr.info_bits = info.size();
    for (std::size_t i = 0; i < info.size(); ++i) fr.info_errors += decoded[i] != info[i];
    for (const auto& t : res.trace) {
      fr.post_fec_trace.push_back(t.post_fec_ber);
      fr.pre_fec_trace.push_back(t.pre_fec_ber);
      fr.syndrome_trace.push_back(t.syndrome_weight);
    }
    // The per-iteration trace measures code info bits; the end-to-end count
    // above decides the last entry for PAS frames.
    if (!fr.post_fec_trace.empty())
      fr.post_fec_trace.back() = static_cast<double>(fr.info_errors) / static_cast<double>(fr.info_bits);
    return fr;
  }

  // Runs up to `frames` frames; stops early once `stop_after_frame_errors`
  // frames failed (0: never stop early).
  PointResult run_point(double psnr_db, std::size_t frames, std::size_t stop_after_frame_errors,
                        std::uint64_t point_index,
                        const std::function<void(std::size_t, const FrameResult&)>& on_frame = {}) const {
    if (frames == 0) throw ConfigError("need at least one frame per point");
    PointResult pr;
    pr.psnr_db = psnr_db;
    double penalty = 0.0;
    double iters = 0.0;
    const auto outer = static_cast<std::size_t>(spec_.turbo.outer_iterations);
    std::vector<double> post(outer, 0.0), pre(outer, 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
      const auto fr = run_frame(psnr_db, (point_index << 32) | f);
      if (on_frame) on_frame(f, fr);
      ++pr.frames;
      pr.info_bits += fr.info_bits;
      pr.info_errors += fr.info_errors;
      pr.coded_bits += fr.coded_bits;
      pr.pre_fec_errors += fr.pre_fec_errors;
      pr.frame_errors += fr.info_errors > 0 ? 1U : 0U;
      penalty += fr.metric_penalty;
      iters += fr.iterations;
      for (std::size_t i = 0; i < outer; ++i) {
        const std::size_t j = std::min(i, fr.post_fec_trace.size() - 1);
        post[i] += fr.post_fec_trace[j];
        pre[i] += fr.pre_fec_trace[j];
      }
      if (stop_after_frame_errors > 0 && pr.frame_errors >= stop_after_frame_errors) break;
    }
    const auto nf = static_cast<double>(pr.frames);
    pr.pre_fec_ber = static_cast<double>(pr.pre_fec_errors) / static_cast<double>(pr.coded_bits);
    pr.post_fec_ber = static_cast<double>(pr.info_errors) / static_cast<double>(pr.info_bits);
    const auto m = static_cast<double>(lab_.bits_per_symbol());
    const double symbols = static_cast<double>(pr.coded_bits) / m;
    const double gmi = std::max(0.0, source_entropy_ - penalty / symbols);
    pr.ngmi = 1.0 - (source_entropy_ - gmi) / m;
    pr.mean_iterations = iters / nf;
    for (std::size_t i = 0; i < outer; ++i) {
      post[i] /= nf;
      pre[i] /= nf;
    }
    pr.post_fec_trace = std::move(post);
    pr.pre_fec_trace = std::move(pre);
    return pr;
  }

 private:
  struct Receiver {
    BranchMetricModel bm;
    std::optional<LmsResult> ffe;
  };

  Receiver make_receiver(const ChannelSpec& ch, double psnr_db) const {
    Receiver r;
    if (!spec_.equalizer.enabled) {
      r.bm = BranchMetricModel(ch.taps(), ch.main_cursor(), ch.noise_sigma(), spec_.L);
      return r;
    }
    // Train on a dedicated block sent through the same mapper and channel.
    const auto idx = static_cast<std::uint64_t>(std::llround(psnr_db * 1000.0));
    Rng src(stream_seed(master_, streams::kTraining, idx));
    std::vector<unsigned> in(spec_.equalizer.training_symbols);
    for (auto& v : in) v = static_cast<unsigned>(src() % static_cast<std::uint64_t>(spec_.M));
    const auto tx = dslm_encode_indices(in, tr_->rule(), lab_, src());
    const auto y = transmit(tx.symbols, ch, src());
    auto lms = lms_equalize(y, tx.symbols, spec_.equalizer.lms);
    if (lms.diverged)
      throw ConfigError("equalizer diverged; try an LMS step of " + std::to_string(lms.suggested_step));
    // Effective response seen by the detector: channel followed by the FFE.
    const auto eff = convolve(ch.taps(), lms.ffe);
    const std::size_t delay = ch.main_cursor() + lms.ffe.size() / 2;
    // Keep as many precursors as the channel itself has. A window chosen by
    // energy alone can slide onto near-zero precursors, which only delays the
    // observation and starves M-algorithm pruning.
    const auto L = static_cast<std::size_t>(spec_.L);
    const std::size_t pre = std::min(ch.main_cursor(), L - 1);
    const std::vector<double> window(eff.begin() + static_cast<std::ptrdiff_t>(delay - pre),
                                     eff.begin() + static_cast<std::ptrdiff_t>(std::min(eff.size(), delay - pre + L)));
    BranchMetricModel bm(window, pre, 1.0, spec_.L);
    double w2 = 0.0;
    for (double w : lms.ffe) w2 += w * w;
    // Energy of taps cut away by the trellis window counts as extra noise.
    double kept = 0.0, all = 0.0;
    for (double t : eff) all += t * t;
    for (double t : bm.taps) kept += t * t;
    const auto levels = pam_levels(spec_.M);
    double ps = 0.0;
    for (double l : levels) ps += l * l;
    ps /= static_cast<double>(levels.size());
    bm.sigma = std::sqrt(ch.noise_sigma() * ch.noise_sigma() * w2 + ps * std::max(0.0, all - kept));
    r.bm = std::move(bm);
    r.ffe = std::move(lms);
    return r;
  }

  static std::vector<double> apply_ffe(std::span<const double> y, const LmsResult& eq) {
    const std::size_t T = eq.ffe.size();
    const std::size_t c = T / 2;
    std::vector<double> out(y.size(), 0.0);
    for (std::size_t n = 0; n < y.size(); ++n) {
      double acc = 0.0;
      for (std::size_t k = 0; k < T; ++k) {
        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(n + c) - static_cast<std::ptrdiff_t>(k);
        if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(y.size())) acc += eq.ffe[k] * y[static_cast<std::size_t>(idx)];
      }
      out[n] = acc;
    }
    return out;
  }

  LinkSpec spec_;
  const ParityCheck* pc_;
  std::uint64_t master_;
  GrayLabeling lab_;
  std::unique_ptr<ForbiddenSet> fs_;
  std::unique_ptr<Trellis> tr_;
  std::unique_ptr<PasCodec> pas_;
  Interleaver il_;
  double source_entropy_ = 0.0;
};

// Lowest grid PSNR from which every higher point decoded without an info-bit
// error; nullopt if the highest point still has errors.
inline std::optional<double> error_free_threshold(std::span<const PointResult> points) {
  std::optional<double> thr;
  std::vector<const PointResult*> sorted;
  for (const auto& p : points) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->psnr_db < b->psnr_db; });
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if ((*it)->info_errors != 0) break;
    thr = (*it)->psnr_db;
  }
  return thr;
}

}  // namespace ppcshape
