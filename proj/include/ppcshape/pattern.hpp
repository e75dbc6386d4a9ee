#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ppcshape/errors.hpp"

namespace ppcshape {

// Envelope quality of a short symbol pattern: -10 log10(var(S) * max|S|) with
// the population variance. Higher is flatter; constant patterns score +inf.
// Mean and variance come from exact sums so permutations score identically.
namespace detail {
inline double var_peak_score(std::span<const double> s) {
  double sum = 0.0, sum_sq = 0.0, peak = 0.0;
  for (double v : s) {
    sum += v;
    sum_sq += v * v;
    peak = std::max(peak, std::abs(v));
  }
  const double n = static_cast<double>(s.size());
  const double var = (n * sum_sq - sum * sum) / (n * n);
  if (var <= 0.0 || peak == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(var * peak);
}
}  // namespace detail

inline double evaluate_pattern(std::span<const double> s) {
  if (s.size() < 2) throw InvalidArgument("pattern length must be at least 2");
  return detail::var_peak_score(s);
}

// Channel-aware variant: the same reduction applied to the valid region of
// the pattern convolved with `taps` (samples fully covered by the pattern).
inline double evaluate_pattern_csi(std::span<const double> s, std::span<const double> taps) {
  if (taps.empty()) throw InvalidArgument("empty tap sequence");
  for (double t : taps)
    if (!std::isfinite(t)) throw InvalidArgument("taps must be finite");
  if (s.size() < taps.size()) throw InvalidArgument("pattern shorter than the tap count");
  std::vector<double> valid(s.size() - taps.size() + 1);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < taps.size(); ++j) acc += taps[j] * s[i + taps.size() - 1 - j];
    valid[i] = acc;
  }
  // Convolved constant patterns are constant up to rounding.
  const auto [lo, hi] = std::minmax_element(valid.begin(), valid.end());
  if (*hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi))) return std::numeric_limits<double>::infinity();
  return detail::var_peak_score(valid);
}

// Which score ranks patterns for the forbidden set.
struct PatternEvaluator {
  std::vector<double> taps;  // empty: statistics only

  static PatternEvaluator statistics() { return {}; }
  static PatternEvaluator channel_aware(std::vector<double> h) { return {std::move(h)}; }

  double operator()(std::span<const double> s) const {
    return taps.empty() ? evaluate_pattern(s) : evaluate_pattern_csi(s, taps);
  }

  std::string id() const {
    if (taps.empty()) return "var-peak";
    std::string out = "csi[";
    for (std::size_t i = 0; i < taps.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(taps[i]);
    }
    return out + "]";
  }
};

}  // namespace ppcshape
