#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ppcshape/errors.hpp"
#include "ppcshape/seed.hpp"

namespace ppcshape {

// Position i of the interleaved stream carries element perm[i] of the input.
class Interleaver {
 public:
  Interleaver() = default;
  explicit Interleaver(std::vector<std::uint32_t> perm) : perm_(std::move(perm)), inv_(perm_.size()) {
    std::vector<std::uint8_t> seen(perm_.size(), 0);
    for (std::size_t i = 0; i < perm_.size(); ++i) {
      if (perm_[i] >= perm_.size() || seen[perm_[i]]) throw InvalidArgument("not a permutation");
      seen[perm_[i]] = 1;
      inv_[perm_[i]] = static_cast<std::uint32_t>(i);
    }
  }

  static Interleaver identity(std::size_t n) {
    std::vector<std::uint32_t> p(n);
    std::iota(p.begin(), p.end(), 0U);
    return Interleaver(std::move(p));
  }

  // Uniform random permutation (Fisher-Yates on a seeded stream).
  static Interleaver random(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> p(n);
    std::iota(p.begin(), p.end(), 0U);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(p[i - 1], p[pick(rng)]);
    }
    return Interleaver(std::move(p));
  }

  std::size_t size() const noexcept { return perm_.size(); }
  const std::vector<std::uint32_t>& permutation() const noexcept { return perm_; }

  template <typename T>
  std::vector<T> interleave(std::span<const T> in) const {
    check(in.size());
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[i] = in[perm_[i]];
    return out;
  }

  template <typename T>
  std::vector<T> deinterleave(std::span<const T> in) const {
    check(in.size());
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < perm_.size(); ++i) out[perm_[i]] = in[i];
    return out;
  }

 private:
  void check(std::size_t n) const {
    if (n != perm_.size()) throw InvalidArgument("interleaver length mismatch");
  }

  std::vector<std::uint32_t> perm_;
  std::vector<std::uint32_t> inv_;
};

}  // namespace ppcshape
