#pragma once

// Waveform-level helpers: root-raised-cosine shaping, LMS equalization,
// Welch spectra and PAPR.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "ppcshape/errors.hpp"

namespace ppcshape {

struct Waveform {
  std::vector<double> samples;
  int sps = 1;

  Waveform() = default;
  Waveform(std::vector<double> s, int samples_per_symbol) : samples(std::move(s)), sps(samples_per_symbol) {
    if (sps < 1) throw InvalidArgument("samples per symbol must be at least 1");
    if (samples.size() % static_cast<std::size_t>(sps) != 0) throw InvalidArgument("waveform length not divisible by sps");
  }
};

// Unit-energy RRC taps, span*sps + 1 long, centered.
inline std::vector<double> rrc_taps(double beta, int span, int sps) {
  if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("roll-off must lie in (0, 1]");
  if (span < 2 || span % 2 != 0) throw InvalidArgument("span must be a positive even number of symbols");
  if (sps < 2) throw InvalidArgument("RRC needs at least 2 samples per symbol");
  const double pi = std::numbers::pi;
  const int n = span * sps + 1;
  std::vector<double> h(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i - n / 2) / sps;
    double v;
    if (std::abs(t) < 1e-12) {
      v = 1.0 - beta + 4.0 * beta / pi;
    } else if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
      v = beta / std::sqrt(2.0) * ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
    } else {
      const double x = 4.0 * beta * t;
      v = (std::sin(pi * t * (1.0 - beta)) + x * std::cos(pi * t * (1.0 + beta))) / (pi * t * (1.0 - x * x));
    }
    h[static_cast<std::size_t>(i)] = v;
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  const double s = 1.0 / std::sqrt(e);
  for (double& v : h) v *= s;
  return h;
}

// Full linear convolution.
inline std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> y(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) y[i + j] += a[i] * b[j];
  return y;
}

// Zero-stuffs to sps and filters with an odd-length, centered pulse; the
// output is aligned so sample k*sps sits on symbol k.
inline Waveform shape_symbols(std::span<const double> symbols, std::span<const double> pulse, int sps) {
  if (sps < 1) throw InvalidArgument("samples per symbol must be at least 1");
  if (pulse.empty() || pulse.size() % 2 == 0) throw InvalidArgument("pulse must have odd length");
  const auto S = static_cast<std::size_t>(sps);
  const std::size_t half = pulse.size() / 2;
  std::vector<double> out(symbols.size() * S, 0.0);
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const double a = symbols[k];
    if (a == 0.0) continue;
    const std::size_t center = k * S;
    for (std::size_t j = 0; j < pulse.size(); ++j) {
      const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(center + j) - static_cast<std::ptrdiff_t>(half);
      if (n < 0 || n >= static_cast<std::ptrdiff_t>(out.size())) continue;
      out[static_cast<std::size_t>(n)] += a * pulse[j];
    }
  }
  return Waveform(std::move(out), sps);
}

inline Waveform rrc_waveform(std::span<const double> symbols, double beta = 0.1, int span = 32, int sps = 8) {
  const auto h = rrc_taps(beta, span, sps);
  return shape_symbols(symbols, h, sps);
}

inline double papr_db(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("empty waveform");
  double peak = 0.0, mean = 0.0;
  for (double v : x) {
    peak = std::max(peak, v * v);
    mean += v * v;
  }
  mean /= static_cast<double>(x.size());
  if (!(mean > 0.0)) throw InvalidArgument("all-zero waveform has no PAPR");
  return 10.0 * std::log10(peak / mean);
}

inline double papr_db(const Waveform& w) { return papr_db(w.samples); }

struct Spectrum {
  std::vector<double> freq;   // cycles per sample, 0 .. 0.5
  std::vector<double> power;  // one-sided, linear, sums to the variance
  std::vector<double> power_db;

  // Mean power (dB) over bins with lo <= f <= hi.
  double band_mean_db(double lo, double hi) const {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < freq.size(); ++i)
      if (freq[i] >= lo && freq[i] <= hi) {
        acc += power[i];
        ++n;
      }
    if (n == 0) throw InvalidArgument("no spectrum bins in band");
    return 10.0 * std::log10(acc / static_cast<double>(n));
  }

  double total() const {
    double s = 0.0;
    for (double p : power) s += p;
    return s;
  }
};

// Averaged Hann-windowed periodogram with per-segment mean removal. The
// scaling makes the bins sum to the mean-square of the detrended segments.
inline Spectrum welch_spectrum(std::span<const double> x, std::size_t segment, std::size_t overlap) {
  if (segment < 2 || segment > x.size()) throw InvalidArgument("segment must lie in [2, length]");
  if (overlap >= segment) throw InvalidArgument("overlap must be smaller than the segment");
  const std::size_t hop = segment - overlap;
  const std::size_t bins = segment / 2 + 1;
  std::vector<double> win(segment);
  double wss = 0.0;
  for (std::size_t i = 0; i < segment; ++i) {
    win[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment));
    wss += win[i] * win[i];
  }
  auto* in = static_cast<double*>(fftw_malloc(sizeof(double) * segment));
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
  if (!in || !out) throw ResourceError("FFT buffer allocation failed");
  const auto n_int = static_cast<int>(segment);
  fftw_plan plan = fftw_plan_dft_r2c_1d(n_int, in, out, FFTW_ESTIMATE);
  std::unique_ptr<void, void (*)(void*)> guard_in(in, fftw_free);
  std::unique_ptr<void, void (*)(void*)> guard_out(out, fftw_free);
  std::unique_ptr<std::remove_pointer_t<fftw_plan>, void (*)(fftw_plan)> guard_plan(plan, fftw_destroy_plan);

  Spectrum sp;
  sp.power.assign(bins, 0.0);
  std::size_t segments = 0;
  for (std::size_t start = 0; start + segment <= x.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < segment; ++i) mean += x[start + i];
    mean /= static_cast<double>(segment);
    for (std::size_t i = 0; i < segment; ++i) in[i] = (x[start + i] - mean) * win[i];
    fftw_execute(plan);
    for (std::size_t k = 0; k < bins; ++k) {
      double p = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / (static_cast<double>(segment) * wss);
      if (k != 0 && !(segment % 2 == 0 && k == bins - 1)) p *= 2.0;
      sp.power[k] += p;
    }
    ++segments;
  }
  sp.freq.resize(bins);
  sp.power_db.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    sp.power[k] /= static_cast<double>(segments);
    sp.freq[k] = static_cast<double>(k) / static_cast<double>(segment);
    sp.power_db[k] = 10.0 * std::log10(std::max(sp.power[k], 1e-300));
  }
  return sp;
}

inline Spectrum welch_spectrum(const Waveform& w, std::size_t segment, std::size_t overlap) {
  return welch_spectrum(w.samples, segment, overlap);
}

enum class EqualizerMode { FFE, DFE };

struct LmsOptions {
  int num_taps = 31;
  EqualizerMode mode = EqualizerMode::FFE;
  double step = 1e-3;
  int feedback_taps = 4;        // DFE only
  std::vector<double> levels;   // DFE decision levels after training
};

struct LmsResult {
  std::vector<double> ffe;        // ffe[k] weights received[n + num_taps/2 - k]
  std::vector<double> dfe;        // dfe[j] weights the decision j+1 symbols back
  std::vector<double> equalized;  // one per received sample
  double training_mse = 0.0;      // over the last quarter of training
  bool diverged = false;
  double suggested_step = 0.0;    // set when diverged
};

// Symbol-spaced LMS trained on the first training.size() samples, then frozen.
inline LmsResult lms_equalize(std::span<const double> received, std::span<const double> training,
                              const LmsOptions& opt = {}) {
  if (opt.num_taps < 1) throw InvalidArgument("equalizer needs at least one tap");
  if (!(opt.step > 0.0)) throw InvalidArgument("LMS step must be positive");
  if (training.size() > received.size()) throw InvalidArgument("training longer than the received block");
  const bool dfe = opt.mode == EqualizerMode::DFE;
  if (dfe && opt.feedback_taps < 1) throw InvalidArgument("DFE needs feedback taps");
  if (dfe && training.size() < received.size() && opt.levels.empty())
    throw InvalidArgument("DFE needs decision levels beyond the training block");
  const auto T = static_cast<std::size_t>(opt.num_taps);
  const std::size_t c = T / 2;
  const std::size_t B = dfe ? static_cast<std::size_t>(opt.feedback_taps) : 0;
  LmsResult r;
  r.ffe.assign(T, 0.0);
  r.ffe[c] = 1.0;
  r.dfe.assign(B, 0.0);
  r.equalized.assign(received.size(), 0.0);
  std::vector<double> decided(received.size(), 0.0);

  auto tap_in = [&](std::size_t n, std::size_t k) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(n + c) - static_cast<std::ptrdiff_t>(k);
    return (idx < 0 || idx >= static_cast<std::ptrdiff_t>(received.size())) ? 0.0 : received[static_cast<std::size_t>(idx)];
  };
  auto nearest = [&](double v) {
    double best = opt.levels.front();
    for (double l : opt.levels)
      if (std::abs(v - l) < std::abs(v - best)) best = l;
    return best;
  };

  const std::size_t window = std::max<std::size_t>(1, training.size() / 4);
  double early = 0.0, late = 0.0;
  std::size_t early_n = 0, late_n = 0;
  for (std::size_t n = 0; n < received.size(); ++n) {
    double y = 0.0;
    for (std::size_t k = 0; k < T; ++k) y += r.ffe[k] * tap_in(n, k);
    for (std::size_t j = 0; j < B; ++j)
      if (n > j) y -= r.dfe[j] * decided[n - j - 1];
    r.equalized[n] = y;
    if (n < training.size()) {
      const double e = training[n] - y;
      if (!std::isfinite(e)) {
        r.diverged = true;
        break;
      }
      for (std::size_t k = 0; k < T; ++k) r.ffe[k] += opt.step * e * tap_in(n, k);
      for (std::size_t j = 0; j < B; ++j)
        if (n > j) r.dfe[j] -= opt.step * e * decided[n - j - 1];
      decided[n] = training[n];
      if (n < window) {
        early += e * e;
        ++early_n;
      }
      if (n + window >= training.size()) {
        late += e * e;
        ++late_n;
      }
    } else {
      decided[n] = dfe ? nearest(y) : y;
    }
  }
  if (late_n > 0) r.training_mse = late / static_cast<double>(late_n);
  if (early_n > 0 && late_n > 0 && late / static_cast<double>(late_n) > 10.0 * (early / static_cast<double>(early_n)))
    r.diverged = true;
  if (!std::isfinite(r.training_mse)) r.diverged = true;
  if (r.diverged) r.suggested_step = opt.step / 10.0;
  return r;
}

}  // namespace ppcshape
