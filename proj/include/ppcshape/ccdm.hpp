#pragma once

// Constant composition distribution matcher. Bits are read as an integer and
// mapped to the sequence of that lexicographic rank among all sequences with
// the given composition (arithmetic coding with unbounded precision), so the
// map is exactly invertible and every output block has exactly the counts.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ppcshape/errors.hpp"

namespace ppcshape {

using BigInt = boost::multiprecision::cpp_int;

struct Composition {
  std::vector<std::size_t> counts;  // per amplitude class

  Composition() = default;
  explicit Composition(std::vector<std::size_t> c) : counts(std::move(c)) {
    if (counts.empty()) throw InvalidArgument("composition needs at least one class");
    if (n() == 0) throw InvalidArgument("composition block length must be positive");
  }

  std::size_t classes() const noexcept { return counts.size(); }
  std::size_t n() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

  std::vector<double> pmf() const {
    std::vector<double> p(counts.size());
    const auto total = static_cast<double>(n());
    for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) / total;
    return p;
  }

  double entropy_bits() const {
    double h = 0.0;
    for (double q : pmf())
      if (q > 0.0) h -= q * std::log2(q);
    return h;
  }
};

// Largest-remainder rounding of n * p to integer counts.
inline Composition quantize_composition(std::span<const double> p, std::size_t n) {
  if (p.empty() || n == 0) throw InvalidArgument("empty distribution or zero block length");
  double total = 0.0;
  for (double q : p) {
    if (!(q >= 0.0)) throw InvalidArgument("probabilities must be nonnegative");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("probabilities must sum to 1");
  std::vector<std::size_t> c(p.size());
  std::vector<std::pair<double, std::size_t>> rem(p.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p[i] * static_cast<double>(n);
    c[i] = static_cast<std::size_t>(std::floor(x));
    used += c[i];
    rem[i] = {x - std::floor(x), i};
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; used < n; ++j, ++used) ++c[rem[j % rem.size()].second];
  return Composition(std::move(c));
}

inline BigInt multinomial(const Composition& comp) {
  // Product of binomials, each exact.
  BigInt r = 1;
  std::size_t placed = 0;
  for (auto c : comp.counts) {
    for (std::size_t i = 1; i <= c; ++i) {
      r *= placed + i;
      r /= i;
    }
    placed += c;
  }
  return r;
}

// k = floor(log2(multinomial)).
inline std::size_t ccdm_input_bits(const Composition& comp) {
  const BigInt m = multinomial(comp);
  if (m <= 1) return 0;
  return static_cast<std::size_t>(boost::multiprecision::msb(m));
}

namespace detail {

// Sequences with the current remaining counts that start with class c:
// total * counts[c] / remaining (exact).
inline BigInt prefix_count(const BigInt& total, std::size_t count_c, std::size_t remaining) {
  return total * count_c / remaining;
}

}  // namespace detail

inline std::vector<unsigned> ccdm_encode(std::span<const std::uint8_t> bits, const Composition& comp) {
  const std::size_t k = ccdm_input_bits(comp);
  if (bits.size() != k) throw InvalidArgument("CCDM input must be exactly floor(log2 multinomial) bits");
  BigInt index = 0;
  for (auto b : bits) {
    if (b > 1) throw InvalidArgument("bits must be 0 or 1");
    index <<= 1;
    index |= b;
  }
  std::vector<std::size_t> left = comp.counts;
  std::size_t remaining = comp.n();
  BigInt total = multinomial(comp);
  std::vector<unsigned> out;
  out.reserve(remaining);
  while (remaining > 0) {
    for (unsigned c = 0; c < left.size(); ++c) {
      if (left[c] == 0) continue;
      const BigInt here = detail::prefix_count(total, left[c], remaining);
      if (index < here) {
        out.push_back(c);
        total = here;
        --left[c];
        break;
      }
      index -= here;
    }
    --remaining;
  }
  return out;
}

// Inverse map; nullopt when the sequence does not have the composition or
// ranks beyond the 2^k codebook.
inline std::optional<std::vector<std::uint8_t>> ccdm_try_decode(std::span<const unsigned> symbols,
                                                                const Composition& comp) {
  if (symbols.size() != comp.n()) return std::nullopt;
  std::vector<std::size_t> seen(comp.classes(), 0);
  for (auto s : symbols) {
    if (s >= comp.classes()) return std::nullopt;
    ++seen[s];
  }
  if (seen != comp.counts) return std::nullopt;
  std::vector<std::size_t> left = comp.counts;
  std::size_t remaining = comp.n();
  BigInt total = multinomial(comp);
  BigInt index = 0;
  for (auto s : symbols) {
    for (unsigned c = 0; c < s; ++c)
      if (left[c] > 0) index += detail::prefix_count(total, left[c], remaining);
    total = detail::prefix_count(total, left[s], remaining);
    --left[s];
    --remaining;
  }
  const std::size_t k = ccdm_input_bits(comp);
  if (index >> k != 0) return std::nullopt;
  std::vector<std::uint8_t> bits(k);
  for (std::size_t i = 0; i < k; ++i) bits[k - 1 - i] = static_cast<std::uint8_t>(bit_test(index, static_cast<unsigned>(i)));
  return bits;
}

inline std::vector<std::uint8_t> ccdm_decode(std::span<const unsigned> symbols, const Composition& comp) {
  if (symbols.size() != comp.n()) throw InvalidArgument("block length differs from the composition");
  auto bits = ccdm_try_decode(symbols, comp);
  if (!bits) throw InvalidArgument("sequence does not match the composition or the codebook");
  return *bits;
}

}  // namespace ppcshape
