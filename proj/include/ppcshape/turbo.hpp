#pragma once

// Iterative exchange of extrinsic bit LLRs between the trellis detector and
// the LDPC decoder.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ppcshape/bcjr.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/interleaver.hpp"
#include "ppcshape/ldpc.hpp"
#include "ppcshape/trellis.hpp"

namespace ppcshape {

struct TurboConfig {
  int outer_iterations = 11;
  int ldpc_iterations = 50;
  std::size_t m_keep = 0;  // 0: exact BCJR
  bool max_log = false;
  BpRule bp_rule = BpRule::SumProduct;
  std::vector<double> source_pmf;  // pmf of the Gray-mapped inputs; empty = uniform

  void validate(std::size_t states) const {
    if (outer_iterations < 1) throw ConfigError("turbo needs at least one outer iteration");
    if (ldpc_iterations < 1) throw ConfigError("LDPC needs at least one iteration");
    if (m_keep > states) throw ConfigError("m_keep exceeds the trellis state count");
  }
};

struct TurboIteration {
  int iteration = 0;
  double pre_fec_ber = -1.0;   // detector hard decisions vs coded bits; -1 if unknown
  double post_fec_ber = -1.0;  // decoder hard decisions on info bits; -1 if unknown
  std::size_t syndrome_weight = 0;
};

struct TurboResult {
  std::vector<std::uint8_t> codeword;  // decoder hard decision, codeword order
  std::vector<std::uint8_t> info;
  std::vector<TurboIteration> trace;
  LlrFrame detector_llrs;  // first-pass detector posterior, stream order
  bool converged = false;
  int iterations = 0;
};

// `received` holds one sample per symbol; the symbol stream carries the
// interleaved codeword, m bits per symbol MSB first. `reference` (codeword
// order) enables the BER trace.
inline TurboResult turbo_equalize(std::span<const double> received, const Trellis& tr, const BranchMetricModel& bm,
                                  const ParityCheck& pc, const Interleaver& il, const TurboConfig& cfg,
                                  std::optional<std::span<const std::uint8_t>> reference = std::nullopt) {
  cfg.validate(tr.states());
  const auto m = static_cast<std::size_t>(tr.bits_per_symbol());
  if (received.size() * m != pc.n()) throw InvalidArgument("frame does not carry exactly one codeword");
  if (il.size() != pc.n()) throw InvalidArgument("interleaver length differs from the code length");
  if (reference && reference->size() != pc.n()) throw InvalidArgument("reference codeword length mismatch");

  BcjrOptions opt;
  opt.m_keep = cfg.m_keep;
  opt.max_log = cfg.max_log;
  opt.source_pmf = cfg.source_pmf;

  std::vector<std::uint8_t> ref_info;
  if (reference) ref_info = pc.extract_info(*reference);

  TurboResult res;
  LlrFrame apriori(pc.n(), 0.0);  // stream order
  for (int it = 1; it <= cfg.outer_iterations; ++it) {
    const auto priors = priors_from_bit_llrs(apriori, tr);
    const auto det = bcjr(received, tr, bm, priors, opt);
    if (it == 1) res.detector_llrs = det.bit_posterior;
    const auto cw_llr = il.deinterleave<double>(det.bit_extrinsic);
    const auto dec = ldpc_decode_bp(cw_llr, pc, cfg.ldpc_iterations, cfg.bp_rule);

    TurboIteration row;
    row.iteration = it;
    row.syndrome_weight = pc.syndrome_weight(dec.hard);
    if (reference) {
      const auto det_post = il.deinterleave<double>(det.bit_posterior);
      std::size_t pre = 0;
      for (std::size_t i = 0; i < pc.n(); ++i) pre += ((det_post[i] < 0.0) != ((*reference)[i] != 0)) ? 1U : 0U;
      row.pre_fec_ber = static_cast<double>(pre) / static_cast<double>(pc.n());
      const auto info = pc.extract_info(dec.hard);
      std::size_t post = 0;
      for (std::size_t i = 0; i < info.size(); ++i) post += info[i] != ref_info[i];
      row.post_fec_ber = static_cast<double>(post) / static_cast<double>(info.size());
    }
    res.trace.push_back(row);
    res.codeword = dec.hard;
    res.iterations = it;
    if (dec.converged) {
      res.converged = true;
      break;
    }
    apriori = il.interleave<double>(dec.extrinsic);
  }
  res.info = pc.extract_info(res.codeword);
  return res;
}

}  // namespace ppcshape
