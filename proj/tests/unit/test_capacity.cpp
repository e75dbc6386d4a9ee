#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ppcshape/capacity.hpp"
#include "ppcshape/channel.hpp"
#include "ppcshape/seed.hpp"

using namespace ppcshape;

namespace {

// Monte-Carlo I(X;Y) for a discrete input over continuous AWGN, using the
// exact Gaussian densities (no grid).
double monte_carlo_mi(const std::vector<double>& levels, const std::vector<double>& p, double sigma,
                      std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
  std::normal_distribution<double> noise(0.0, sigma);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    const double y = levels[k] + noise(rng);
    double py = 0.0;
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const double d = y - levels[j];
      py += p[j] * std::exp(-d * d / (2 * sigma * sigma));
    }
    const double d = y - levels[k];
    acc += std::log2(std::exp(-d * d / (2 * sigma * sigma)) / py);
  }
  return acc / static_cast<double>(n);
}

double h2(double p) { return p <= 0 || p >= 1 ? 0.0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

}  // namespace

TEST(Psnr, ConventionRoundTrips) {
  EXPECT_NEAR(psnr_from_sigma(sigma_from_psnr(17.3, 14.0), 14.0), 17.3, 1e-12);
  EXPECT_DOUBLE_EQ(pam_psnr_peak(8), 14.0);
  EXPECT_NEAR(pam_sigma(8, 20.0), 1.4, 1e-12);
}

TEST(Capacity, DiscretizedMiMatchesMonteCarlo) {
  for (int M : {2, 4, 8}) {
    for (double psnr : {8.0, 18.0, 26.0}) {
      const double sigma = pam_sigma(M, psnr);
      const auto ch = discretize_awgn(pam_levels(M), sigma);
      std::vector<double> p(static_cast<std::size_t>(M));
      double s = 0.0;
      for (int i = 0; i < M; ++i) s += p[static_cast<std::size_t>(i)] = 1.0 + 0.3 * i;
      for (double& v : p) v /= s;
      const double grid = mutual_information(Pmf(ch.levels, p), ch);
      const double mc = monte_carlo_mi(ch.levels, p, sigma, 200000, 42 + static_cast<std::uint64_t>(M));
      EXPECT_NEAR(grid, mc, 0.01) << "M " << M << " psnr " << psnr;
    }
  }
}

TEST(Capacity, BlahutArimotoOnBinaryChannelIsSymmetricCapacity) {
  // Antipodal input over AWGN with a sign-quantized output is a BSC with
  // crossover Q(1/sigma); its capacity is 1 - h2(p), reached by the uniform input.
  const double sigma = 0.8;
  DiscretizedChannel ch;
  ch.levels = {-1.0, 1.0};
  ch.sigma = sigma;
  ch.y_count = 2;
  ch.y_start = -1.0;
  ch.y_step = 2.0;
  const double p = 0.5 * std::erfc(1.0 / (sigma * std::numbers::sqrt2));
  ch.transition = {1 - p, p, p, 1 - p};
  const auto ba = ba_solve(ch);
  EXPECT_TRUE(ba.converged);
  EXPECT_NEAR(ba.capacity_bits, 1.0 - h2(p), 1e-9);
  EXPECT_NEAR(ba.pmf.probs[0], 0.5, 1e-6);
}

TEST(Capacity, BlahutArimotoOnZChannel) {
  // Z-channel closed form: C = log2(1 + (1-e) e^(e/(1-e))).
  const double e = 0.3;
  DiscretizedChannel ch;
  ch.levels = {0.0, 1.0};
  ch.sigma = 1.0;
  ch.y_count = 2;
  ch.y_step = 1.0;
  ch.transition = {1.0, 0.0, e, 1.0 - e};
  const double c = std::log2(1.0 + (1.0 - e) * std::pow(e, e / (1.0 - e)));
  EXPECT_NEAR(ba_solve(ch, 1e-12).capacity_bits, c, 1e-8);
}

TEST(Capacity, BlahutArimotoDominatesRandomInputs) {
  const auto ch = discretize_awgn(pam_levels(8), pam_sigma(8, 20.0));
  const double c = ba_solve(ch).capacity_bits;
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(8);
    double s = 0.0;
    for (double& v : p) s += v = u(rng);
    for (double& v : p) v /= s;
    EXPECT_LE(mutual_information(Pmf(ch.levels, p), ch), c + 1e-9);
  }
}

TEST(Capacity, UniformAirIsMonotoneAndBounded) {
  double prev = 0.0;
  for (double psnr = 0.0; psnr <= 40.0; psnr += 2.0) {
    const auto ch = discretize_awgn(pam_levels(4), pam_sigma(4, psnr));
    const double mi = mutual_information(Pmf::uniform(ch.levels), ch);
    EXPECT_GE(mi, prev - 1e-12);
    EXPECT_LE(mi, 2.0 + 1e-12);
    prev = mi;
  }
  EXPECT_NEAR(prev, 2.0, 1e-3);
}

TEST(Capacity, OokHasNoShapingGain) {
  for (double psnr : {0.0, 10.0, 20.0, 30.0})
    EXPECT_LT(shaping_gain_point(2, psnr, ShapingMethod::BA).gain_bits, 1e-3);
}

TEST(Capacity, GridValidation) {
  EXPECT_THROW(discretize_awgn(pam_levels(4), 1.0, GridSpec{5.0, 0.1}), ConfigError);
  EXPECT_THROW(discretize_awgn(pam_levels(4), 1.0, GridSpec{6.0, 0.2}), ConfigError);
  EXPECT_THROW(discretize_awgn(pam_levels(4), 0.0), InvalidArgument);
}

TEST(Capacity, ExpFamilyEndpoints) {
  const auto lv = pam_levels(8);
  const auto flat = exp_family_pmf(lv, 0.0, ExpFamily::MB);
  for (double p : flat.probs) EXPECT_NEAR(p, 0.125, 1e-15);
  const auto mb = exp_family_pmf(lv, 0.05, ExpFamily::MB);
  const auto iv = exp_family_pmf(lv, 0.05, ExpFamily::IvMB);
  EXPECT_GT(mb.probs[3], mb.probs[0]);
  EXPECT_LT(iv.probs[3], iv.probs[0]);
}
