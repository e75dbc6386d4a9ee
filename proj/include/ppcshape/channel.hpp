#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "ppcshape/errors.hpp"
#include "ppcshape/seed.hpp"

namespace ppcshape {

// Bipolar PAM levels -(M-1), -(M-3), ..., M-1.
inline std::vector<double> pam_levels(int M) {
  if (M < 2) throw InvalidArgument("constellation size must be at least 2");
  std::vector<double> levels(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) levels[static_cast<std::size_t>(i)] = 2.0 * i - (M - 1);
  return levels;
}

// Peak-signal-to-noise ratio: PSNR = 10 log10(peak^2 / sigma^2).
inline double sigma_from_psnr(double psnr_db, double peak_amplitude) {
  if (!(peak_amplitude > 0.0)) throw InvalidArgument("peak amplitude must be positive");
  return peak_amplitude * std::pow(10.0, -psnr_db / 20.0);
}

inline double psnr_from_sigma(double sigma, double peak_amplitude) {
  if (!(peak_amplitude > 0.0) || !(sigma > 0.0))
    throw InvalidArgument("peak amplitude and sigma must be positive");
  return 20.0 * std::log10(peak_amplitude / sigma);
}

// Reference peak for PSNR on a PAM-M link. The intensity signal is the bipolar
// constellation shifted by M-1 onto [0, 2(M-1)], and its peak is what the
// modulator limits; the DC shift itself carries no information.
inline double pam_psnr_peak(int M) { return 2.0 * (M - 1); }

// Noise sigma for bipolar PAM-M symbols at the given PSNR.
inline double pam_sigma(int M, double psnr_db) { return sigma_from_psnr(psnr_db, pam_psnr_peak(M)); }

// 5-tap symmetric low-pass response used as the simulated "practical" link.
inline std::vector<double> default_practical_taps() { return {0.05, 0.2, 1.0, 0.2, 0.05}; }

class ChannelSpec {
 public:
  using Transfer = std::function<double(double)>;

  // `main_cursor` indexes the tap aligned with the current symbol; taps before
  // it are precursors. Taps are rescaled so the main cursor equals 1.
  ChannelSpec(std::vector<double> taps, std::size_t main_cursor, double noise_sigma,
              double peak_amplitude, Transfer nonlinearity = {})
      : taps_(std::move(taps)),
        main_cursor_(main_cursor),
        noise_sigma_(noise_sigma),
        peak_amplitude_(peak_amplitude),
        nonlinearity_(std::move(nonlinearity)) {
    if (taps_.empty()) throw InvalidArgument("channel needs at least one tap");
    if (main_cursor_ >= taps_.size()) throw InvalidArgument("main cursor outside tap range");
    for (double t : taps_)
      if (!std::isfinite(t)) throw InvalidArgument("channel taps must be finite");
    if (!(noise_sigma_ > 0.0) || !std::isfinite(noise_sigma_))
      throw InvalidArgument("noise sigma must be positive");
    if (!(peak_amplitude_ > 0.0)) throw InvalidArgument("peak amplitude must be positive");
    const double main = taps_[main_cursor_];
    if (main == 0.0) throw InvalidArgument("main cursor tap is zero");
    for (double& t : taps_) t /= main;
  }

  // Memoryless AWGN.
  static ChannelSpec awgn(double noise_sigma, double peak_amplitude) {
    return ChannelSpec({1.0}, 0, noise_sigma, peak_amplitude);
  }

  // Taps with the main cursor at the largest-magnitude tap.
  static ChannelSpec isi(std::vector<double> taps, double noise_sigma, double peak_amplitude) {
    std::size_t cursor = 0;
    for (std::size_t i = 1; i < taps.size(); ++i)
      if (std::abs(taps[i]) > std::abs(taps[cursor])) cursor = i;
    return ChannelSpec(std::move(taps), cursor, noise_sigma, peak_amplitude);
  }

  const std::vector<double>& taps() const noexcept { return taps_; }
  std::size_t main_cursor() const noexcept { return main_cursor_; }
  double noise_sigma() const noexcept { return noise_sigma_; }
  double peak_amplitude() const noexcept { return peak_amplitude_; }
  const Transfer& nonlinearity() const noexcept { return nonlinearity_; }
  bool memoryless() const noexcept { return taps_.size() == 1; }

  ChannelSpec with_sigma(double sigma) const {
    return ChannelSpec(taps_, main_cursor_, sigma, peak_amplitude_, nonlinearity_);
  }

 private:
  std::vector<double> taps_;
  std::size_t main_cursor_;
  double noise_sigma_;
  double peak_amplitude_;
  Transfer nonlinearity_;
};

inline void check_peak(std::span<const double> symbols, double peak) {
  for (std::size_t i = 0; i < symbols.size(); ++i)
    if (!(std::abs(symbols[i]) <= peak + 1e-9)) throw PeakConstraintError(i, symbols[i], peak);
}

// Noiseless channel output: y[n] = sum_j taps[j] * x[n + cursor - j], with zeros
// outside the frame on both sides.
inline std::vector<double> convolve_same(std::span<const double> x, const std::vector<double>& taps,
                                         std::size_t cursor) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < taps.size(); ++j) {
      const std::ptrdiff_t k = i + static_cast<std::ptrdiff_t>(cursor) - static_cast<std::ptrdiff_t>(j);
      if (k >= 0 && k < n) acc += taps[j] * x[static_cast<std::size_t>(k)];
    }
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

inline std::vector<double> transmit_noiseless(std::span<const double> symbols, const ChannelSpec& spec) {
  if (symbols.empty()) throw InvalidArgument("empty symbol sequence");
  check_peak(symbols, spec.peak_amplitude());
  if (!spec.nonlinearity()) return convolve_same(symbols, spec.taps(), spec.main_cursor());
  std::vector<double> shaped(symbols.begin(), symbols.end());
  for (double& s : shaped) s = spec.nonlinearity()(s);
  return convolve_same(shaped, spec.taps(), spec.main_cursor());
}

inline std::vector<double> transmit(std::span<const double> symbols, const ChannelSpec& spec,
                                    std::uint64_t seed) {
  std::vector<double> y = transmit_noiseless(symbols, spec);
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma());
  for (double& v : y) v += noise(rng);
  return y;
}

}  // namespace ppcshape
