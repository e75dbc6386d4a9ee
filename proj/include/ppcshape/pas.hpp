#pragma once

// Probabilistic amplitude shaping ahead of the selective mapper. A level is
// split into a magnitude class (rank of |level|, 0 innermost) and a side
// (sign) bit. With the binary-reflected Gray labeling the MSB is the side and
// the remaining m-1 bits depend on the magnitude only, so the CCDM output
// fills the systematic bits and the parity lands on the side bits.
//
// Codeword layout: symbol j takes info bits (m-1)j .. (m-1)j+m-2 as amplitude
// bits and the j-th "side" position as MSB, where the side positions are the
// parity positions followed by any info positions left over (uniform payload).
// Symbols are then permuted as whole symbols so the amplitude statistics
// survive interleaving; the combined map is exposed as a bit interleaver for
// the turbo receiver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ppcshape/capacity.hpp"
#include "ppcshape/ccdm.hpp"
#include "ppcshape/channel.hpp"
#include "ppcshape/dslm.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/interleaver.hpp"
#include "ppcshape/ldpc.hpp"

namespace ppcshape {

// Symmetric MB pmf over PAM-M levels with the requested entropy (bits).
inline std::vector<double> mb_pmf_for_entropy(int M, double entropy_bits) {
  const double m = std::log2(static_cast<double>(M));
  if (!(entropy_bits > 1.0) || entropy_bits > m + 1e-12)
    throw ConfigError("target entropy must lie in (1, log2 M]");
  const auto levels = pam_levels(M);
  if (entropy_bits >= m - 1e-12) return std::vector<double>(static_cast<std::size_t>(M), 1.0 / M);
  auto h = [&](double nu) { return exp_family_pmf(levels, nu, ExpFamily::MB).entropy_bits(); };
  double lo = 0.0, hi = 1.0;
  while (h(hi) > entropy_bits) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > entropy_bits ? lo : hi) = mid;
  }
  return exp_family_pmf(levels, 0.5 * (lo + hi), ExpFamily::MB).probs;
}

struct PasConfig {
  int M = 8;
  std::vector<double> target_pmf;  // over level indices, symmetric
  std::size_t ccdm_block = 0;      // symbols per CCDM block; 0: whole frame
  std::uint64_t interleaver_seed = 0;
  int L = 5;
  double gamma = 0.0;
};

struct PasFrame {
  std::vector<std::uint8_t> info;      // the frame's payload bits as given
  std::vector<std::uint8_t> codeword;  // codeword order
  std::vector<unsigned> levels;        // Gray-mapped level indices, stream order
};

// Holds a pointer to the parity-check matrix, which must outlive the codec.
class PasCodec {
 public:
  PasCodec(const PasConfig& cfg, const ParityCheck& pc) : cfg_(cfg), pc_(&pc), lab_(cfg.M) {
    m_ = static_cast<std::size_t>(lab_.bits_per_symbol());
    const auto M = static_cast<std::size_t>(cfg.M);
    if (cfg.target_pmf.size() != M) throw ConfigError("target pmf must have M entries");
    double total = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      if (!(cfg.target_pmf[i] >= 0.0)) throw ConfigError("target pmf entries must be nonnegative");
      if (std::abs(cfg.target_pmf[i] - cfg.target_pmf[M - 1 - i]) > 1e-9) throw ConfigError("target pmf must be symmetric");
      total += cfg.target_pmf[i];
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("target pmf must sum to 1");
    if (pc.n() % m_ != 0) throw ConfigError("code length is not a multiple of bits per symbol");
    symbols_ = pc.n() / m_;
    amp_bits_ = (m_ - 1) * symbols_;
    if (pc.k() < amp_bits_)
      throw ConfigError("code rate below (m-1)/m: parity does not fit on the side bits");
    payload_bits_ = pc.k() - amp_bits_;

    const std::size_t block = cfg.ccdm_block == 0 ? symbols_ : cfg.ccdm_block;
    if (symbols_ % block != 0) throw ConfigError("CCDM block length must divide the symbols per frame");
    blocks_ = symbols_ / block;
    std::vector<double> pa(M / 2);
    for (std::size_t a = 0; a < M / 2; ++a) pa[a] = 2.0 * cfg.target_pmf[M / 2 + a];
    double s = 0.0;
    for (double v : pa) s += v;
    for (double& v : pa) v /= s;
    comp_ = quantize_composition(pa, block);
    ccdm_bits_ = ccdm_input_bits(comp_);

    const double h = target_entropy();
    const double R = pc.rate();
    if (!(h > (1.0 - R) * static_cast<double>(m_)))
      throw ConfigError("target entropy and code rate are incompatible (net rate would be nonpositive)");
    if (ccdm_bits_ == 0 && payload_bits_ == 0) throw ConfigError("composition carries no information");

    // Amplitude bits of each magnitude class: low m-1 bits of the positive level's label.
    amp_label_.resize(M / 2);
    for (unsigned a = 0; a < M / 2; ++a) {
      const unsigned pos = lab_.label(static_cast<unsigned>(M / 2 + a));
      const unsigned neg = lab_.label(static_cast<unsigned>(M / 2 - 1 - a));
      const unsigned low = (1U << (m_ - 1)) - 1U;
      if ((pos & low) != (neg & low) || (pos >> (m_ - 1)) != 1U || (neg >> (m_ - 1)) != 0U)
        throw InvalidArgument("labeling does not split into side and magnitude bits");
      amp_label_[a] = pos & low;
    }
    class_of_label_.assign(std::size_t{1} << (m_ - 1), 0);
    for (unsigned a = 0; a < M / 2; ++a) class_of_label_[amp_label_[a]] = a;

    build_interleaver();
  }

  const PasConfig& config() const noexcept { return cfg_; }
  const GrayLabeling& labeling() const noexcept { return lab_; }
  const Composition& composition() const noexcept { return comp_; }
  const Interleaver& interleaver() const noexcept { return il_; }
  std::size_t symbols_per_frame() const noexcept { return symbols_; }
  std::size_t blocks_per_frame() const noexcept { return blocks_; }
  std::size_t ccdm_bits_per_block() const noexcept { return ccdm_bits_; }
  std::size_t uniform_payload_bits() const noexcept { return payload_bits_; }
  std::size_t info_bits_per_frame() const noexcept { return blocks_ * ccdm_bits_ + payload_bits_; }
  double net_rate() const noexcept {
    return static_cast<double>(info_bits_per_frame()) / static_cast<double>(symbols_);
  }
  double fec_rate() const noexcept { return pc_->rate(); }

  double target_entropy() const {
    double h = 0.0;
    for (double p : cfg_.target_pmf)
      if (p > 0.0) h -= p * std::log2(p);
    return h;
  }

  // Level pmf actually transmitted: quantized magnitudes, uniform side.
  std::vector<double> source_pmf() const {
    const auto M = static_cast<std::size_t>(cfg_.M);
    const auto pa = comp_.pmf();
    std::vector<double> p(M);
    for (std::size_t a = 0; a < M / 2; ++a) p[M / 2 + a] = p[M / 2 - 1 - a] = 0.5 * pa[a];
    return p;
  }

  PasFrame encode(std::span<const std::uint8_t> info) const {
    if (info.size() != info_bits_per_frame()) throw InvalidArgument("info length differs from the PAS frame payload");
    PasFrame f;
    f.info.assign(info.begin(), info.end());
    std::vector<std::uint8_t> code_info(pc_->k(), 0);
    const std::size_t block = comp_.n();
    for (std::size_t b = 0; b < blocks_; ++b) {
      const auto classes = ccdm_encode(info.subspan(b * ccdm_bits_, ccdm_bits_), comp_);
      for (std::size_t j = 0; j < block; ++j) {
        const std::size_t sym = b * block + j;
        for (std::size_t q = 0; q + 1 < m_; ++q)
          code_info[(m_ - 1) * sym + q] = static_cast<std::uint8_t>((amp_label_[classes[j]] >> (m_ - 2 - q)) & 1U);
      }
    }
    for (std::size_t u = 0; u < payload_bits_; ++u) code_info[amp_bits_ + u] = info[blocks_ * ccdm_bits_ + u];
    f.codeword = pc_->encode(code_info);
    const auto stream = il_.interleave<std::uint8_t>(f.codeword);
    f.levels = lab_.map_indices(stream);
    return f;
  }

  // Info bits from a codeword-order hard decision. Blocks whose amplitude
  // classes do not reproduce the composition come back as zeros and are
  // counted in `failed_blocks`.
  std::vector<std::uint8_t> decode(std::span<const std::uint8_t> codeword, std::size_t* failed_blocks = nullptr) const {
    if (codeword.size() != pc_->n()) throw InvalidArgument("codeword length mismatch");
    const auto code_info = pc_->extract_info(codeword);
    std::vector<std::uint8_t> out(info_bits_per_frame(), 0);
    const std::size_t block = comp_.n();
    std::size_t failed = 0;
    std::vector<unsigned> classes(block);
    for (std::size_t b = 0; b < blocks_; ++b) {
      for (std::size_t j = 0; j < block; ++j) {
        unsigned lab = 0;
        const std::size_t sym = b * block + j;
        for (std::size_t q = 0; q + 1 < m_; ++q) lab = (lab << 1) | code_info[(m_ - 1) * sym + q];
        classes[j] = class_of_label_[lab];
      }
      const auto bits = ccdm_try_decode(classes, comp_);
      if (!bits) {
        ++failed;
        continue;
      }
      std::copy(bits->begin(), bits->end(), out.begin() + static_cast<std::ptrdiff_t>(b * ccdm_bits_));
    }
    for (std::size_t u = 0; u < payload_bits_; ++u) out[blocks_ * ccdm_bits_ + u] = code_info[amp_bits_ + u];
    if (failed_blocks) *failed_blocks = failed;
    return out;
  }

  // Hard symbols straight from the channel (no FEC): undo the interleaver.
  std::vector<std::uint8_t> decode_levels(std::span<const unsigned> levels, std::size_t* failed_blocks = nullptr) const {
    const auto stream = lab_.demap_indices(levels);
    return decode(il_.deinterleave<std::uint8_t>(stream), failed_blocks);
  }

 private:
  void build_interleaver() {
    std::vector<std::uint32_t> side;
    side.reserve(symbols_);
    for (auto p : pc_->parity_positions()) side.push_back(p);
    for (std::size_t u = 0; u < payload_bits_; ++u) side.push_back(pc_->info_positions()[amp_bits_ + u]);
    const auto& info = pc_->info_positions();
    auto sym_perm = Interleaver::random(symbols_, cfg_.interleaver_seed).permutation();
    std::vector<std::uint32_t> perm(pc_->n());
    for (std::size_t t = 0; t < symbols_; ++t) {
      const std::size_t j = sym_perm[t];
      perm[t * m_] = side[j];
      for (std::size_t q = 0; q + 1 < m_; ++q) perm[t * m_ + 1 + q] = info[(m_ - 1) * j + q];
    }
    il_ = Interleaver(std::move(perm));
  }

  PasConfig cfg_;
  const ParityCheck* pc_;
  GrayLabeling lab_;
  std::size_t m_ = 1;
  std::size_t symbols_ = 0;
  std::size_t amp_bits_ = 0;
  std::size_t payload_bits_ = 0;
  std::size_t blocks_ = 1;
  Composition comp_;
  std::size_t ccdm_bits_ = 0;
  std::vector<unsigned> amp_label_;
  std::vector<unsigned> class_of_label_;
  Interleaver il_;
};

// PAS frame followed by the selective mapper.
struct PasTransmit {
  PasFrame frame;
  DslmOutput dslm;
};

inline PasTransmit pas_encode(std::span<const std::uint8_t> info, const PasCodec& codec, const DslmRule& rule,
                              std::uint64_t dslm_seed) {
  PasTransmit tx;
  tx.frame = codec.encode(info);
  tx.dslm = dslm_encode_indices(tx.frame.levels, rule, codec.labeling(), dslm_seed);
  return tx;
}

inline std::vector<std::uint8_t> pas_decode(std::span<const std::uint8_t> codeword_hard, const PasCodec& codec,
                                            std::size_t* failed_blocks = nullptr) {
  return codec.decode(codeword_hard, failed_blocks);
}

}  // namespace ppcshape
