#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ppcshape/channel.hpp"
#include "ppcshape/errors.hpp"

namespace ppcshape {

// Binary-reflected Gray labeling of PAM-M, MSB first, label 0...0 on the
// lowest level. Levels are addressed by index (0 = lowest) or by amplitude.
class GrayLabeling {
 public:
  explicit GrayLabeling(int M) : M_(M), levels_(pam_levels(M)) {
    if (M < 2 || !std::has_single_bit(static_cast<unsigned>(M)))
      throw InvalidArgument("constellation size must be a power of two");
    m_ = std::countr_zero(static_cast<unsigned>(M));
    label_of_.resize(static_cast<std::size_t>(M));
    index_of_.resize(static_cast<std::size_t>(M));
    for (unsigned i = 0; i < static_cast<unsigned>(M); ++i) {
      label_of_[i] = i ^ (i >> 1);
      index_of_[label_of_[i]] = i;
    }
  }

  int M() const noexcept { return M_; }
  int bits_per_symbol() const noexcept { return m_; }
  const std::vector<double>& levels() const noexcept { return levels_; }

  unsigned label(unsigned level_index) const { return label_of_.at(level_index); }
  unsigned index_of_label(unsigned label) const { return index_of_.at(label); }

  double level(unsigned level_index) const { return levels_.at(level_index); }

  unsigned level_index(double amplitude) const {
    const double idx = (amplitude + (M_ - 1)) / 2.0;
    const double r = std::round(idx);
    if (std::abs(idx - r) > 1e-9 || r < 0 || r >= M_) throw InvalidArgument("amplitude is not a constellation level");
    return static_cast<unsigned>(r);
  }

  // Bit b (0 = MSB) of a label.
  unsigned bit(unsigned label, int b) const { return (label >> (m_ - 1 - b)) & 1U; }

  double gray_map(std::span<const std::uint8_t> bits) const {
    if (static_cast<int>(bits.size()) != m_) throw InvalidArgument("bit tuple has the wrong arity");
    unsigned label = 0;
    for (auto b : bits) {
      if (b > 1) throw InvalidArgument("bits must be 0 or 1");
      label = (label << 1) | b;
    }
    return levels_[index_of_[label]];
  }

  std::vector<std::uint8_t> gray_demap(double amplitude) const {
    const unsigned label = label_of_[level_index(amplitude)];
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(m_));
    for (int b = 0; b < m_; ++b) bits[static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(bit(label, b));
    return bits;
  }

  // Level indices for a bit stream (length divisible by m).
  std::vector<unsigned> map_indices(std::span<const std::uint8_t> bits) const {
    if (bits.size() % static_cast<std::size_t>(m_) != 0)
      throw InvalidArgument("bit count is not a multiple of bits per symbol");
    std::vector<unsigned> out(bits.size() / static_cast<std::size_t>(m_));
    for (std::size_t k = 0; k < out.size(); ++k) {
      unsigned label = 0;
      for (int b = 0; b < m_; ++b) label = (label << 1) | (bits[k * static_cast<std::size_t>(m_) + static_cast<std::size_t>(b)] & 1U);
      out[k] = index_of_[label];
    }
    return out;
  }

  std::vector<std::uint8_t> demap_indices(std::span<const unsigned> indices) const {
    std::vector<std::uint8_t> bits(indices.size() * static_cast<std::size_t>(m_));
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const unsigned label = label_of_.at(indices[k]);
      for (int b = 0; b < m_; ++b)
        bits[k * static_cast<std::size_t>(m_) + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(bit(label, b));
    }
    return bits;
  }

  std::vector<double> to_amplitudes(std::span<const unsigned> indices) const {
    std::vector<double> out(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) out[k] = levels_.at(indices[k]);
    return out;
  }

  int hamming(unsigned level_a, unsigned level_b) const {
    return std::popcount(label_of_.at(level_a) ^ label_of_.at(level_b));
  }

 private:
  int M_;
  int m_ = 0;
  std::vector<double> levels_;
  std::vector<unsigned> label_of_;
  std::vector<unsigned> index_of_;
};

}  // namespace ppcshape
