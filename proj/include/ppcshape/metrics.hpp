#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ppcshape/capacity.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/ldpc.hpp"

namespace ppcshape {

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::string units;
  std::size_t samples = 0;
  double half_width = 0.0;  // 95% normal approximation; 0 when not applicable
};

inline double entropy_bits(std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw InvalidArgument("entropy of an empty tally");
  double h = 0.0;
  for (auto c : counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / static_cast<double>(total);
      h -= p * std::log2(p);
    }
  return h;
}

inline double entropy_bits(const Pmf& pmf) { return pmf.entropy_bits(); }

inline std::vector<std::size_t> level_histogram(std::span<const unsigned> indices, int M) {
  std::vector<std::size_t> h(static_cast<std::size_t>(M), 0);
  for (auto i : indices) {
    if (i >= h.size()) throw InvalidArgument("level index out of range");
    ++h[i];
  }
  return h;
}

// Error fraction with a normal-approximation 95% half-width.
inline MetricReport ber(std::span<const std::uint8_t> bits, std::span<const std::uint8_t> reference) {
  if (bits.size() != reference.size()) throw InvalidArgument("BER inputs differ in length");
  if (bits.empty()) throw InvalidArgument("BER of an empty sequence");
  std::size_t e = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) e += (bits[i] & 1U) != (reference[i] & 1U);
  MetricReport r;
  r.name = "ber";
  r.units = "fraction";
  r.samples = bits.size();
  r.value = static_cast<double>(e) / static_cast<double>(bits.size());
  r.half_width = 1.959963984540054 * std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(bits.size()));
  return r;
}

// Bit-metric GMI per symbol from LLRs (positive favours 0), clamped at 0,
// and NGMI = 1 - (H - GMI) / m.
inline double gmi_bits(std::span<const double> llrs, std::span<const std::uint8_t> bits, double H, int m) {
  if (llrs.size() != bits.size()) throw InvalidArgument("LLR and bit counts differ");
  if (m < 1 || llrs.size() % static_cast<std::size_t>(m) != 0) throw InvalidArgument("bit count not a multiple of m");
  if (llrs.empty()) throw InvalidArgument("empty LLR frame");
  double penalty = 0.0;
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    const double s = bits[i] ? llrs[i] : -llrs[i];  // log2(1 + e^s)
    penalty += (s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s))) / std::numbers::ln2;
  }
  const double symbols = static_cast<double>(llrs.size() / static_cast<std::size_t>(m));
  return std::max(0.0, H - penalty / symbols);
}

inline double ngmi(std::span<const double> llrs, std::span<const std::uint8_t> bits, double H, int m) {
  return 1.0 - (H - gmi_bits(llrs, bits, H, m)) / static_cast<double>(m);
}

// Memoryless max-a-posteriori bit LLRs for PAM over AWGN.
inline LlrFrame soft_demap(std::span<const double> received, double sigma, const GrayLabeling& lab,
                           std::span<const double> level_pmf = {}) {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  const auto M = static_cast<std::size_t>(lab.M());
  const auto m = static_cast<std::size_t>(lab.bits_per_symbol());
  if (!level_pmf.empty() && level_pmf.size() != M) throw InvalidArgument("level pmf must have M entries");
  LlrFrame out(received.size() * m);
  std::vector<double> lw(M);
  for (std::size_t k = 0; k < received.size(); ++k) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < M; ++i) {
      const double d = received[k] - lab.level(static_cast<unsigned>(i));
      lw[i] = -d * d / (2.0 * sigma * sigma) + (level_pmf.empty() ? 0.0 : std::log(std::max(level_pmf[i], 1e-300)));
      top = std::max(top, lw[i]);
    }
    for (std::size_t b = 0; b < m; ++b) {
      double p0 = 0.0, p1 = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        const double w = std::exp(lw[i] - top);
        (lab.bit(lab.label(static_cast<unsigned>(i)), static_cast<int>(b)) ? p1 : p0) += w;
      }
      out[k * m + b] = clamp_llr(std::log(std::max(p0, 1e-300)) - std::log(std::max(p1, 1e-300)));
    }
  }
  return out;
}

}  // namespace ppcshape
