#pragma once

// Mutual information and capacity of the memoryless peak-constrained channel:
// a finite PAM input observed through AWGN, with the output density integrated
// on a uniform grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ppcshape/channel.hpp"
#include "ppcshape/errors.hpp"

namespace ppcshape {

struct Pmf {
  std::vector<double> levels;  // strictly ascending
  std::vector<double> probs;

  Pmf() = default;
  Pmf(std::vector<double> lv, std::vector<double> p) : levels(std::move(lv)), probs(std::move(p)) {
    validate();
  }

  static Pmf uniform(std::vector<double> lv) {
    const double p = 1.0 / static_cast<double>(lv.size());
    std::vector<double> probs(lv.size(), p);
    return Pmf(std::move(lv), std::move(probs));
  }

  std::size_t size() const noexcept { return levels.size(); }

  void validate() const {
    if (levels.empty() || levels.size() != probs.size())
      throw InvalidArgument("pmf levels and probabilities must be non-empty and equal length");
    for (std::size_t i = 1; i < levels.size(); ++i)
      if (!(levels[i] > levels[i - 1])) throw InvalidArgument("pmf levels must be strictly ascending");
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw InvalidArgument("pmf probabilities must be nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("pmf probabilities must sum to 1");
  }

  double entropy_bits() const {
    double h = 0.0;
    for (double p : probs)
      if (p > 0.0) h -= p * std::log2(p);
    return h;
  }
};

// Output grid: [min level - margin, max level + margin] with the given spacing,
// both expressed in units of the noise sigma.
struct GridSpec {
  double margin_sigmas = 6.0;
  double step_over_sigma = 1.0 / 8.0;
};

struct DiscretizedChannel {
  std::vector<double> levels;
  double y_start = 0.0;
  double y_step = 0.0;
  std::size_t y_count = 0;
  double sigma = 0.0;
  std::vector<double> transition;  // levels.size() x y_count, row-major, p(y_j|x_i) dy

  std::span<const double> row(std::size_t i) const {
    return {transition.data() + i * y_count, y_count};
  }
};

inline DiscretizedChannel discretize_awgn(std::vector<double> levels, double sigma, GridSpec grid = {}) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
  if (levels.empty()) throw InvalidArgument("no input levels");
  if (grid.margin_sigmas < 6.0 || !(grid.step_over_sigma > 0.0) || grid.step_over_sigma > 1.0 / 8.0)
    throw ConfigError("output grid must span +/-6 sigma with spacing at most sigma/8");
  std::sort(levels.begin(), levels.end());

  DiscretizedChannel ch;
  ch.sigma = sigma;
  ch.y_step = grid.step_over_sigma * sigma;
  // Symmetric grid: the same number of cells on each side of the level midpoint.
  const double mid = 0.5 * (levels.front() + levels.back());
  const double half_span = 0.5 * (levels.back() - levels.front()) + grid.margin_sigmas * sigma;
  const auto half_cells = static_cast<std::size_t>(std::ceil(half_span / ch.y_step));
  ch.y_count = 2 * half_cells + 1;
  ch.y_start = mid - static_cast<double>(half_cells) * ch.y_step;
  ch.levels = std::move(levels);

  const std::size_t M = ch.levels.size();
  ch.transition.assign(M * ch.y_count, 0.0);
  const double inv2var = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < M; ++i) {
    double* row = ch.transition.data() + i * ch.y_count;
    double total = 0.0;
    for (std::size_t j = 0; j < ch.y_count; ++j) {
      const double d = ch.y_start + static_cast<double>(j) * ch.y_step - ch.levels[i];
      row[j] = std::exp(-d * d * inv2var);
      total += row[j];
    }
    for (std::size_t j = 0; j < ch.y_count; ++j) row[j] /= total;
  }
  return ch;
}

namespace detail {

inline void check_levels_match(const Pmf& pmf, const DiscretizedChannel& ch) {
  if (pmf.levels.size() != ch.levels.size())
    throw InvalidArgument("pmf and channel have different level counts");
  for (std::size_t i = 0; i < ch.levels.size(); ++i)
    if (std::abs(pmf.levels[i] - ch.levels[i]) > 1e-12)
      throw InvalidArgument("pmf levels differ from channel levels");
}

// D_i = sum_j T_ij log2(T_ij / q_j), q = p T. Returns I = sum_i p_i D_i.
inline double divergences(std::span<const double> probs, const DiscretizedChannel& ch,
                          std::vector<double>& q, std::vector<double>& d) {
  const std::size_t M = ch.levels.size();
  q.assign(ch.y_count, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    const double p = probs[i];
    if (p == 0.0) continue;
    const double* row = ch.transition.data() + i * ch.y_count;
    for (std::size_t j = 0; j < ch.y_count; ++j) q[j] += p * row[j];
  }
  d.assign(M, 0.0);
  double info = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double* row = ch.transition.data() + i * ch.y_count;
    double acc = 0.0;
    for (std::size_t j = 0; j < ch.y_count; ++j)
      if (row[j] > 0.0) acc += row[j] * std::log2(row[j] / q[j]);
    d[i] = acc;
    info += probs[i] * acc;
  }
  return info;
}

}  // namespace detail

inline double mutual_information(const Pmf& pmf, const DiscretizedChannel& ch) {
  detail::check_levels_match(pmf, ch);
  std::vector<double> q, d;
  return std::max(0.0, detail::divergences(pmf.probs, ch, q, d));
}

struct BaResult {
  Pmf pmf;
  double capacity_bits = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> mi_trace;
};

// Blahut-Arimoto from a uniform start. Each sweep forms the posterior
// p(x|y) = p(x) p(y|x) / sum_x' p(x') p(y|x') and updates the prior to
// p(x) ~ 2^{sum_y p(y|x) log2 p(x|y)}; the exponent equals log2 p(x) + D(x).
inline BaResult ba_solve(const DiscretizedChannel& ch, double tol = 1e-9, int max_iter = 10000) {
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (max_iter < 1) throw InvalidArgument("max_iter must be positive");
  const std::size_t M = ch.levels.size();
  std::vector<double> p(M, 1.0 / static_cast<double>(M));
  std::vector<double> q, d, next(M);

  BaResult res;
  double info = detail::divergences(p, ch, q, d);
  res.mi_trace.push_back(info);
  for (int it = 1; it <= max_iter; ++it) {
    double dmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < M; ++i)
      if (p[i] > 0.0) dmax = std::max(dmax, d[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      next[i] = p[i] * std::exp2(d[i] - dmax);
      total += next[i];
    }
    for (std::size_t i = 0; i < M; ++i) p[i] = next[i] / total;
    const double updated = detail::divergences(p, ch, q, d);
    res.mi_trace.push_back(updated);
    res.iterations = it;
    const double delta = std::abs(updated - info);
    info = updated;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  // Renormalize exactly once more so the pmf invariant holds to rounding.
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  res.pmf = Pmf(ch.levels, p);
  res.capacity_bits = std::max(0.0, info);
  return res;
}

enum class ExpFamily { MB, IvMB };

inline const char* to_string(ExpFamily f) { return f == ExpFamily::MB ? "MB" : "IvMB"; }

// p(x) ~ exp(-nu x^2) for MB (cap-shaped), exp(+nu x^2) for IvMB (cup-shaped).
inline Pmf exp_family_pmf(const std::vector<double>& levels, double nu, ExpFamily family) {
  if (!(nu >= 0.0)) throw InvalidArgument("nu must be nonnegative");
  const double sign = family == ExpFamily::MB ? -1.0 : 1.0;
  double top = -std::numeric_limits<double>::infinity();
  for (double x : levels) top = std::max(top, sign * nu * x * x);
  std::vector<double> p(levels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    p[i] = std::exp(sign * nu * levels[i] * levels[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= total;
  return Pmf(levels, std::move(p));
}

struct FamilyOptimum {
  double nu = 0.0;
  Pmf pmf;
  double air_bits = 0.0;
};

// Coarse scan of nu over [0, 10/A^2] (A = largest |level|) followed by
// golden-section refinement around the best scan point. Ties go to smaller nu.
inline FamilyOptimum optimize_exp_family(const DiscretizedChannel& ch, ExpFamily family,
                                         int scan_points = 200, double rel_tol = 1e-6) {
  double peak = 0.0;
  for (double x : ch.levels) peak = std::max(peak, std::abs(x));
  if (!(peak > 0.0)) throw InvalidArgument("levels must not all be zero");
  if (scan_points < 3) throw InvalidArgument("need at least three scan points");
  const double nu_max = 10.0 / (peak * peak);
  auto air = [&](double nu) { return mutual_information(exp_family_pmf(ch.levels, nu, family), ch); };

  std::size_t best = 0;
  double best_air = -1.0;
  std::vector<double> grid(static_cast<std::size_t>(scan_points));
  for (int i = 0; i < scan_points; ++i) {
    grid[static_cast<std::size_t>(i)] = nu_max * i / (scan_points - 1);
    const double v = air(grid[static_cast<std::size_t>(i)]);
    if (v > best_air + 1e-15) {
      best_air = v;
      best = static_cast<std::size_t>(i);
    }
  }

  double lo = grid[best == 0 ? 0 : best - 1];
  double hi = grid[std::min(best + 1, grid.size() - 1)];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
  double fa = air(a), fb = air(b);
  while (hi - lo > rel_tol * nu_max) {
    if (fa >= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = air(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = air(b);
    }
  }
  double nu = grid[best];
  const double refined = 0.5 * (lo + hi);
  const double refined_air = air(refined);
  if (refined_air > best_air + 1e-15 || (refined_air >= best_air - 1e-15 && refined < nu)) {
    nu = refined;
    best_air = refined_air;
  }
  FamilyOptimum out;
  out.nu = nu;
  out.pmf = exp_family_pmf(ch.levels, nu, family);
  out.air_bits = best_air;
  return out;
}

enum class ShapingMethod { BA, MB, IvMB };

inline const char* to_string(ShapingMethod m) {
  switch (m) {
    case ShapingMethod::BA: return "BA";
    case ShapingMethod::MB: return "MB";
    case ShapingMethod::IvMB: return "IvMB";
  }
  return "?";
}

struct GainRow {
  double psnr_db;
  double air_uniform;
  double air_shaped;
  double gain_bits;
};

inline GainRow shaping_gain_point(int M, double psnr_db, ShapingMethod method, GridSpec grid = {}) {
  const auto ch = discretize_awgn(pam_levels(M), pam_sigma(M, psnr_db), grid);
  const double uniform = mutual_information(Pmf::uniform(ch.levels), ch);
  double shaped = 0.0;
  switch (method) {
    case ShapingMethod::BA: shaped = ba_solve(ch).capacity_bits; break;
    case ShapingMethod::MB: shaped = optimize_exp_family(ch, ExpFamily::MB).air_bits; break;
    case ShapingMethod::IvMB: shaped = optimize_exp_family(ch, ExpFamily::IvMB).air_bits; break;
  }
  return {psnr_db, uniform, shaped, shaped - uniform};
}

inline std::vector<GainRow> shaping_gain_curve(int M, std::span<const double> psnr_grid,
                                               ShapingMethod method, GridSpec grid = {}) {
  if (M != 2 && M != 4 && M != 8 && M != 16) throw InvalidArgument("format must be OOK, PAM4, PAM8 or PAM16");
  std::vector<GainRow> rows;
  rows.reserve(psnr_grid.size());
  for (double psnr : psnr_grid) rows.push_back(shaping_gain_point(M, psnr, method, grid));
  return rows;
}

// PSNR at which uniform PAM-M reaches `target_bits`, by bisection on the
// (monotone) uniform-input mutual information.
inline double psnr_for_uniform_air(int M, double target_bits, double lo_db = -10.0, double hi_db = 60.0,
                                   double tol_db = 1e-6, GridSpec grid = {}) {
  auto air = [&](double psnr) {
    const auto ch = discretize_awgn(pam_levels(M), pam_sigma(M, psnr), grid);
    return mutual_information(Pmf::uniform(ch.levels), ch);
  };
  if (!(air(lo_db) < target_bits && air(hi_db) > target_bits))
    throw InvalidArgument("target AIR not bracketed by the PSNR search range");
  while (hi_db - lo_db > tol_db) {
    const double mid = 0.5 * (lo_db + hi_db);
    (air(mid) < target_bits ? lo_db : hi_db) = mid;
  }
  return 0.5 * (lo_db + hi_db);
}

}  // namespace ppcshape
