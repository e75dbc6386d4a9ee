#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "ppcshape/capacity.hpp"
#include "ppcshape/channel.hpp"
#include "ppcshape/dsp.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/metrics.hpp"
#include "ppcshape/seed.hpp"

using namespace ppcshape;

namespace {

// Solves A x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r][c]) > std::abs(A[p][c])) p = r;
    std::swap(A[c], A[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= A[i][k] * x[k];
    x[i] = s / A[i][i];
  }
  return x;
}

}  // namespace

TEST(Rrc, UnitEnergyAndNyquistAfterMatchedFilter) {
  // Truncation leaves ISI at the outermost lags; a roll-off of 0.1 needs a
  // 64-symbol span to stay under 1e-3 (32 symbols give about 4e-3).
  for (auto [beta, span] : {std::pair{0.1, 64}, std::pair{0.35, 32}, std::pair{0.5, 16}}) {
    const int sps = 8;
    const auto h = rrc_taps(beta, span, sps);
    EXPECT_EQ(h.size(), static_cast<std::size_t>(span * sps + 1));
    double e = 0.0;
    for (double v : h) e += v * v;
    EXPECT_NEAR(e, 1.0, 1e-12);
    const auto rc = convolve(h, h);
    const std::size_t mid = rc.size() / 2;
    EXPECT_NEAR(rc[mid], 1.0, 1e-12);
    for (std::size_t k = 1; k * sps <= mid; ++k) {
      EXPECT_LE(std::abs(rc[mid + k * sps]), 1e-3) << "beta " << beta << " lag " << k;
      EXPECT_LE(std::abs(rc[mid - k * sps]), 1e-3);
    }
  }
}

TEST(Rrc, ShapedSymbolsSitOnTheSampleGrid) {
  // Zero guard symbols keep the pulses of the payload inside the window.
  std::vector<double> sym(80, 0.0);
  const std::vector<double> payload{1, -3, 5, 7, -1};
  std::copy(payload.begin(), payload.end(), sym.begin() + 40);
  const auto w = rrc_waveform(sym, 0.1, 64, 8);
  EXPECT_EQ(w.sps, 8);
  EXPECT_EQ(w.samples.size(), sym.size() * 8);
  // Matched filtering recovers the symbols at multiples of sps.
  const auto h = rrc_taps(0.1, 64, 8);
  const auto mf = shape_symbols(w.samples, h, 1);
  for (std::size_t k = 0; k < sym.size(); ++k) EXPECT_NEAR(mf.samples[k * 8], sym[k], 1e-2) << k;
}

TEST(Papr, KnownWaveforms) {
  std::vector<double> sq(1000);
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = i % 2 ? 1.0 : -1.0;
  EXPECT_NEAR(papr_db(sq), 0.0, 1e-12);
  std::vector<double> impulse(100, 0.0);
  impulse[7] = 2.0;
  EXPECT_NEAR(papr_db(impulse), 20.0, 1e-12);
  std::vector<double> sine(8000);
  for (std::size_t i = 0; i < sine.size(); ++i) sine[i] = std::sin(2 * std::numbers::pi * i / 80.0);
  EXPECT_NEAR(papr_db(sine), 10 * std::log10(2.0), 1e-3);
  EXPECT_THROW(papr_db(std::vector<double>(10, 0.0)), InvalidArgument);
}

TEST(Welch, ConservesPowerOfWhiteNoise) {
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<double> x(1 << 18);
  for (double& v : x) v = g(rng);
  const auto sp = welch_spectrum(x, 1024, 512);
  EXPECT_NEAR(sp.total(), 4.0, 0.02 * 4.0);
  // Flat: every band averages the same level.
  EXPECT_NEAR(sp.band_mean_db(0.05, 0.2), sp.band_mean_db(0.3, 0.45), 0.2);
}

TEST(Welch, LocatesATone) {
  std::vector<double> x(1 << 14);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 3.0 * std::cos(2 * std::numbers::pi * 0.125 * i);
  const auto sp = welch_spectrum(x, 512, 256);
  std::size_t best = 0;
  for (std::size_t k = 1; k < sp.power.size(); ++k)
    if (sp.power[k] > sp.power[best]) best = k;
  EXPECT_NEAR(sp.freq[best], 0.125, 1e-12);
  EXPECT_NEAR(sp.total(), 4.5, 0.02 * 4.5);
}

TEST(Lms, ApproachesTheWienerMmse) {
  const std::vector<double> h{0.3, 1.0, 0.4};  // cursor 1
  const int M = 8, T = 11;
  const double sigma = pam_sigma(M, 30.0);
  const GrayLabeling lab(M);
  Rng rng(3);
  std::vector<double> x(60000);
  for (double& v : x) v = lab.level(static_cast<unsigned>(rng() % M));
  const auto y = transmit(x, ChannelSpec(h, 1, sigma, 14.0), 4);
  LmsOptions opt;
  opt.num_taps = T;
  opt.step = 2e-5;
  const auto r = lms_equalize(y, x, opt);
  ASSERT_FALSE(r.diverged);

  // Wiener solution for the same tap layout: z[n] = sum_k w[k] y[n + c - k].
  const double sx2 = 21.0;
  const std::size_t c = T / 2;
  auto hh = [&](std::ptrdiff_t j) { return j >= 0 && j < 3 ? h[static_cast<std::size_t>(j)] : 0.0; };
  // y[n] = sum_j h[j] x[n + 1 - j]
  std::vector<std::vector<double>> R(T, std::vector<double>(T, 0.0));
  std::vector<double> p(T, 0.0);
  for (std::size_t a = 0; a < static_cast<std::size_t>(T); ++a) {
    const auto da = static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(a);
    // E[y[n+da] x[n]] = sx2 h[da + 1]
    p[a] = sx2 * hh(da + 1);
    for (std::size_t b = 0; b < static_cast<std::size_t>(T); ++b) {
      const auto db = static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(b);
      double acc = 0.0;
      for (std::ptrdiff_t j = 0; j < 3; ++j) acc += hh(j) * hh(j + db - da);
      R[a][b] = sx2 * acc + (a == b ? sigma * sigma : 0.0);
    }
  }
  const auto w = solve(R, p);
  double jmin = sx2;
  for (std::size_t a = 0; a < static_cast<std::size_t>(T); ++a) jmin -= p[a] * w[a];
  ASSERT_GT(jmin, 0.0);
  EXPECT_LE(10 * std::log10(r.training_mse / jmin), 1.0);
  EXPECT_GE(r.training_mse, 0.9 * jmin);
}

TEST(Lms, FlagsDivergence) {
  std::vector<double> x(2000);
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(x.size());
  for (double& v : x) v = (rng() >> 63) ? 7.0 : -7.0;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + g(rng);
  LmsOptions opt;
  opt.num_taps = 31;
  opt.step = 0.5;
  const auto r = lms_equalize(y, x, opt);
  EXPECT_TRUE(r.diverged);
  EXPECT_GT(r.suggested_step, 0.0);
  EXPECT_LT(r.suggested_step, opt.step);
}

TEST(Metrics, BerMatchesBinomialExpectation) {
  Rng rng(7);
  const std::size_t n = 1000000;
  std::vector<std::uint8_t> ref(n), got(n);
  std::bernoulli_distribution flip(0.01);
  for (std::size_t i = 0; i < n; ++i) {
    ref[i] = static_cast<std::uint8_t>(rng() >> 63);
    got[i] = ref[i] ^ static_cast<std::uint8_t>(flip(rng));
  }
  const auto r = ber(got, ref);
  EXPECT_NEAR(r.value, 0.01, 0.0002);
  EXPECT_NEAR(r.half_width, 1.96 * std::sqrt(0.01 * 0.99 / n), 2e-5);
  EXPECT_EQ(r.samples, n);
}

TEST(Metrics, EntropyBounds) {
  const std::vector<std::size_t> uni(8, 5), one{0, 10, 0};
  EXPECT_NEAR(entropy_bits(std::span<const std::size_t>(uni)), 3.0, 1e-12);
  EXPECT_EQ(entropy_bits(std::span<const std::size_t>(one)), 0.0);
  EXPECT_THROW(entropy_bits(std::span<const std::size_t>(std::vector<std::size_t>(3, 0))), InvalidArgument);
}

TEST(Metrics, GmiFromSoftDemapTracksMutualInformation) {
  const int M = 4;
  const GrayLabeling lab(M);
  for (double psnr : {10.0, 16.0, 22.0}) {
    const double sigma = pam_sigma(M, psnr);
    Rng rng(11);
    std::normal_distribution<double> noise(0.0, sigma);
    const std::size_t n = 200000;
    std::vector<std::uint8_t> bits(n * 2);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
    const auto idx = lab.map_indices(bits);
    std::vector<double> y(n);
    for (std::size_t k = 0; k < n; ++k) y[k] = lab.level(idx[k]) + noise(rng);
    const auto llr = soft_demap(y, sigma, lab);
    const double gmi = gmi_bits(llr, bits, 2.0, 2);
    const auto ch = discretize_awgn(pam_levels(M), sigma);
    const double mi = mutual_information(Pmf::uniform(ch.levels), ch);
    EXPECT_LE(gmi, mi + 0.01);
    EXPECT_NEAR(gmi, mi, 0.05) << "psnr " << psnr;
    EXPECT_NEAR(ngmi(llr, bits, 2.0, 2), 1.0 - (2.0 - gmi) / 2.0, 1e-12);
  }
}

TEST(Metrics, NgmiIsOneForConfidentCorrectLlrs) {
  std::vector<std::uint8_t> bits{0, 1, 1, 0, 1, 0};
  std::vector<double> llr;
  for (auto b : bits) llr.push_back(b ? -40.0 : 40.0);
  EXPECT_NEAR(ngmi(llr, bits, 3.0, 3), 1.0, 1e-12);
}
