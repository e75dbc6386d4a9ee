#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ppcshape/errors.hpp"
#include "ppcshape/seed.hpp"

namespace ppcshape {

// Bit log-likelihood ratios, log p(b=0)/p(b=1): positive favours 0.
using LlrFrame = std::vector<double>;
inline constexpr double kLlrClamp = 40.0;

inline double clamp_llr(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, -kLlrClamp, kLlrClamp);
}

class ParityCheck {
 public:
  ParityCheck() = default;

  // rows[i] lists the (0-based) variable nodes of check i.
  ParityCheck(std::size_t n, std::vector<std::vector<std::uint32_t>> rows) : n_(n), rows_(std::move(rows)) {
    cols_.assign(n_, {});
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      auto& row = rows_[r];
      std::sort(row.begin(), row.end());
      if (std::adjacent_find(row.begin(), row.end()) != row.end())
        throw InvalidArgument("check " + std::to_string(r) + " lists a variable twice");
      for (auto v : row) {
        if (v >= n_) throw InvalidArgument("variable index out of range in check " + std::to_string(r));
        cols_[v].push_back(static_cast<std::uint32_t>(r));
      }
    }
    build_edges();
    build_encoder();
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return n_ - rank_; }
  std::size_t checks() const noexcept { return rows_.size(); }
  std::size_t rank() const noexcept { return rank_; }
  double rate() const noexcept { return static_cast<double>(k()) / static_cast<double>(n_); }
  const std::vector<std::vector<std::uint32_t>>& rows() const noexcept { return rows_; }
  const std::vector<std::vector<std::uint32_t>>& cols() const noexcept { return cols_; }
  // Codeword positions carrying the information bits, in order.
  const std::vector<std::uint32_t>& info_positions() const noexcept { return info_pos_; }
  const std::vector<std::uint32_t>& parity_positions() const noexcept { return parity_pos_; }

  std::size_t syndrome_weight(std::span<const std::uint8_t> word) const {
    std::size_t w = 0;
    for (const auto& row : rows_) {
      unsigned acc = 0;
      for (auto v : row) acc ^= word[v];
      w += acc & 1U;
    }
    return w;
  }

  std::vector<std::uint8_t> encode(std::span<const std::uint8_t> info) const {
    if (info.size() != k()) throw InvalidArgument("info length does not match code dimension");
    std::vector<std::uint64_t> packed((k() + 63) / 64, 0);
    for (std::size_t i = 0; i < info.size(); ++i)
      if (info[i] & 1U) packed[i / 64] |= std::uint64_t{1} << (i % 64);
    std::vector<std::uint8_t> word(n_, 0);
    for (std::size_t i = 0; i < info_pos_.size(); ++i) word[info_pos_[i]] = info[i] & 1U;
    const std::size_t words = packed.size();
    for (std::size_t r = 0; r < parity_pos_.size(); ++r) {
      const std::uint64_t* row = gen_.data() + r * words;
      unsigned acc = 0;
      for (std::size_t w = 0; w < words; ++w) acc += static_cast<unsigned>(std::popcount(row[w] & packed[w]));
      word[parity_pos_[r]] = static_cast<std::uint8_t>(acc & 1U);
    }
    return word;
  }

  std::vector<std::uint8_t> extract_info(std::span<const std::uint8_t> word) const {
    std::vector<std::uint8_t> info(info_pos_.size());
    for (std::size_t i = 0; i < info_pos_.size(); ++i) info[i] = word[info_pos_[i]];
    return info;
  }

  // Flattened edge view for message passing (edges grouped by check).
  struct Edges {
    std::vector<std::uint32_t> check_start;  // size checks+1
    std::vector<std::uint32_t> var;          // variable of each edge
    std::vector<std::uint32_t> var_start;    // size n+1, into var_edge
    std::vector<std::uint32_t> var_edge;     // edge ids grouped by variable
  };
  const Edges& edges() const noexcept { return edges_; }

 private:
  void build_edges() {
    edges_.check_start.assign(rows_.size() + 1, 0);
    for (std::size_t r = 0; r < rows_.size(); ++r)
      edges_.check_start[r + 1] = edges_.check_start[r] + static_cast<std::uint32_t>(rows_[r].size());
    edges_.var.clear();
    for (const auto& row : rows_) edges_.var.insert(edges_.var.end(), row.begin(), row.end());
    edges_.var_start.assign(n_ + 1, 0);
    for (auto v : edges_.var) ++edges_.var_start[v + 1];
    for (std::size_t v = 0; v < n_; ++v) edges_.var_start[v + 1] += edges_.var_start[v];
    edges_.var_edge.assign(edges_.var.size(), 0);
    std::vector<std::uint32_t> fill(edges_.var_start.begin(), edges_.var_start.end() - 1);
    for (std::uint32_t e = 0; e < edges_.var.size(); ++e) edges_.var_edge[fill[edges_.var[e]]++] = e;
  }

  // Gauss-Jordan elimination over GF(2). Pivot columns become parity
  // positions; each reduced row expresses one parity bit in the info bits.
  void build_encoder() {
    const std::size_t m = rows_.size();
    const std::size_t words = (n_ + 63) / 64;
    std::vector<std::uint64_t> h(m * words, 0);
    for (std::size_t r = 0; r < m; ++r)
      for (auto v : rows_[r]) h[r * words + v / 64] |= std::uint64_t{1} << (v % 64);
    auto bit = [&](std::size_t r, std::size_t c) { return (h[r * words + c / 64] >> (c % 64)) & 1U; };

    std::vector<std::uint8_t> is_pivot(n_, 0);
    std::vector<std::size_t> pivot_col;
    std::size_t rank = 0;
    for (std::size_t c = 0; c < n_ && rank < m; ++c) {
      std::size_t p = rank;
      while (p < m && !bit(p, c)) ++p;
      if (p == m) continue;
      if (p != rank)
        std::swap_ranges(h.begin() + static_cast<std::ptrdiff_t>(p * words),
                         h.begin() + static_cast<std::ptrdiff_t>((p + 1) * words),
                         h.begin() + static_cast<std::ptrdiff_t>(rank * words));
      for (std::size_t r = 0; r < m; ++r)
        if (r != rank && bit(r, c))
          for (std::size_t w = 0; w < words; ++w) h[r * words + w] ^= h[rank * words + w];
      is_pivot[c] = 1;
      pivot_col.push_back(c);
      ++rank;
    }
    rank_ = rank;
    info_pos_.clear();
    parity_pos_.clear();
    std::vector<std::size_t> info_rank(n_, 0);
    for (std::size_t c = 0; c < n_; ++c)
      if (!is_pivot[c]) {
        info_rank[c] = info_pos_.size();
        info_pos_.push_back(static_cast<std::uint32_t>(c));
      }
    const std::size_t k = info_pos_.size();
    const std::size_t kw = (k + 63) / 64;
    gen_.assign(rank * kw, 0);
    for (std::size_t r = 0; r < rank; ++r) {
      parity_pos_.push_back(static_cast<std::uint32_t>(pivot_col[r]));
      for (std::size_t c = 0; c < n_; ++c)
        if (!is_pivot[c] && bit(r, c)) gen_[r * kw + info_rank[c] / 64] |= std::uint64_t{1} << (info_rank[c] % 64);
    }
  }

  std::size_t n_ = 0;
  std::vector<std::vector<std::uint32_t>> rows_;
  std::vector<std::vector<std::uint32_t>> cols_;
  std::size_t rank_ = 0;
  std::vector<std::uint32_t> info_pos_;
  std::vector<std::uint32_t> parity_pos_;
  std::vector<std::uint64_t> gen_;
  Edges edges_;
};

namespace detail {

inline std::vector<long> parse_ints(std::string_view line, std::size_t line_no) {
  std::vector<long> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    const std::string tok(line.substr(i, j - i));
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      throw ParseError("expected an integer, found '" + tok + "'", line_no);
    }
    if (used != tok.size()) throw ParseError("expected an integer, found '" + tok + "'", line_no);
    out.push_back(v);
    i = j;
  }
  return out;
}

}  // namespace detail

// alist: "n m" / "max_col_deg max_row_deg" / n column degrees / m row degrees /
// n lines of 1-based check indices / m lines of 1-based variable indices.
// Zero entries pad short lists and are ignored.
inline ParityCheck load_alist(std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<long>>> lines;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    ++line_no;
    auto ints = detail::parse_ints(text.substr(pos, end - pos), line_no);
    if (!ints.empty()) lines.emplace_back(line_no, std::move(ints));
    if (end == text.size()) break;
    pos = end + 1;
  }
  std::size_t cursor = 0;
  auto next = [&](const char* what) -> const std::pair<std::size_t, std::vector<long>>& {
    if (cursor >= lines.size()) throw ParseError(std::string("unexpected end of file reading ") + what, line_no);
    return lines[cursor++];
  };
  const auto& dims = next("dimensions");
  if (dims.second.size() != 2 || dims.second[0] <= 0 || dims.second[1] <= 0)
    throw ParseError("dimension line must hold two positive integers", dims.first);
  const auto n = static_cast<std::size_t>(dims.second[0]);
  const auto m = static_cast<std::size_t>(dims.second[1]);
  const auto& maxdeg = next("maximum degrees");
  if (maxdeg.second.size() != 2) throw ParseError("max-degree line must hold two integers", maxdeg.first);

  // Degree lists may wrap across lines; gather exactly n then m values.
  auto gather = [&](std::size_t count, const char* what) {
    std::vector<long> vals;
    std::size_t first_line = cursor < lines.size() ? lines[cursor].first : line_no;
    while (vals.size() < count) {
      const auto& l = next(what);
      vals.insert(vals.end(), l.second.begin(), l.second.end());
    }
    if (vals.size() != count) throw ParseError(std::string("too many values in ") + what, first_line);
    return vals;
  };
  const auto col_deg = gather(n, "column degrees");
  const auto row_deg = gather(m, "row degrees");

  std::vector<std::vector<std::uint32_t>> col_lists(n), rows(m);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& l = next("column lists");
    for (long c : l.second) {
      if (c == 0) continue;
      if (c < 0 || static_cast<std::size_t>(c) > m) throw ParseError("check index out of range", l.first);
      col_lists[v].push_back(static_cast<std::uint32_t>(c - 1));
    }
    if (static_cast<long>(col_lists[v].size()) != col_deg[v])
      throw ParseError("column list length disagrees with its degree", l.first);
  }
  for (std::size_t c = 0; c < m; ++c) {
    const auto& l = next("row lists");
    for (long v : l.second) {
      if (v == 0) continue;
      if (v < 0 || static_cast<std::size_t>(v) > n) throw ParseError("variable index out of range", l.first);
      rows[c].push_back(static_cast<std::uint32_t>(v - 1));
    }
    if (static_cast<long>(rows[c].size()) != row_deg[c])
      throw ParseError("row list length disagrees with its degree", l.first);
  }
  // Row and column views must describe the same matrix.
  std::vector<std::vector<std::uint32_t>> from_rows(n);
  for (std::size_t c = 0; c < m; ++c)
    for (auto v : rows[c]) from_rows[v].push_back(static_cast<std::uint32_t>(c));
  for (std::size_t v = 0; v < n; ++v) {
    auto a = col_lists[v];
    std::sort(a.begin(), a.end());
    if (a != from_rows[v]) throw ParseError("column " + std::to_string(v + 1) + " disagrees with the row lists", dims.first);
  }
  return ParityCheck(n, std::move(rows));
}

inline std::string write_alist(const ParityCheck& pc) {
  std::ostringstream os;
  std::size_t max_col = 0, max_row = 0;
  for (const auto& c : pc.cols()) max_col = std::max(max_col, c.size());
  for (const auto& r : pc.rows()) max_row = std::max(max_row, r.size());
  os << pc.n() << ' ' << pc.checks() << '\n' << max_col << ' ' << max_row << '\n';
  for (std::size_t v = 0; v < pc.n(); ++v) os << (v ? " " : "") << pc.cols()[v].size();
  os << '\n';
  for (std::size_t c = 0; c < pc.checks(); ++c) os << (c ? " " : "") << pc.rows()[c].size();
  os << '\n';
  auto emit = [&](const std::vector<std::uint32_t>& list, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) {
      if (i) os << ' ';
      os << (i < list.size() ? list[i] + 1 : 0);
    }
    os << '\n';
  };
  for (const auto& c : pc.cols()) emit(c, max_col);
  for (const auto& r : pc.rows()) emit(r, max_row);
  return os.str();
}

inline std::vector<std::uint8_t> ldpc_encode(std::span<const std::uint8_t> info, const ParityCheck& pc) {
  return pc.encode(info);
}

enum class BpRule { SumProduct, MinSum };

struct BpResult {
  std::vector<std::uint8_t> hard;
  LlrFrame posterior;
  LlrFrame extrinsic;  // posterior - input
  bool converged = false;
  int iterations = 0;
};

// Flooding-schedule belief propagation in the LLR domain.
inline BpResult ldpc_decode_bp(std::span<const double> llrs, const ParityCheck& pc, int max_iters,
                               BpRule rule = BpRule::SumProduct) {
  if (llrs.size() != pc.n()) throw InvalidArgument("LLR frame length does not match code length");
  const auto& E = pc.edges();
  const std::size_t n = pc.n();
  const std::size_t ne = E.var.size();
  BpResult res;
  res.posterior.resize(n);
  res.hard.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    res.posterior[v] = clamp_llr(llrs[v]);
    res.hard[v] = res.posterior[v] < 0.0 ? 1 : 0;
  }
  res.extrinsic.assign(n, 0.0);
  if (pc.syndrome_weight(res.hard) == 0) {
    res.converged = true;
    return res;
  }

  std::vector<double> v2c(ne), c2v(ne, 0.0), fwd, bwd;
  for (std::uint32_t e = 0; e < ne; ++e) v2c[e] = clamp_llr(llrs[E.var[e]]);

  for (int it = 1; it <= max_iters; ++it) {
    for (std::size_t c = 0; c + 1 < E.check_start.size(); ++c) {
      const std::uint32_t b = E.check_start[c], end = E.check_start[c + 1];
      const std::size_t deg = end - b;
      if (deg == 0) continue;
      if (rule == BpRule::SumProduct) {
        fwd.assign(deg + 1, 1.0);
        bwd.assign(deg + 1, 1.0);
        for (std::size_t i = 0; i < deg; ++i) fwd[i + 1] = fwd[i] * std::tanh(0.5 * v2c[b + i]);
        for (std::size_t i = deg; i-- > 0;) bwd[i] = bwd[i + 1] * std::tanh(0.5 * v2c[b + i]);
        for (std::size_t i = 0; i < deg; ++i) {
          const double t = std::clamp(fwd[i] * bwd[i + 1], -1.0 + 1e-15, 1.0 - 1e-15);
          c2v[b + i] = clamp_llr(2.0 * std::atanh(t));
        }
      } else {
        double min1 = std::numeric_limits<double>::infinity(), min2 = min1;
        std::size_t arg = 0;
        unsigned neg = 0;
        for (std::size_t i = 0; i < deg; ++i) {
          const double a = std::abs(v2c[b + i]);
          if (v2c[b + i] < 0.0) neg ^= 1U;
          if (a < min1) {
            min2 = min1;
            min1 = a;
            arg = i;
          } else if (a < min2) {
            min2 = a;
          }
        }
        for (std::size_t i = 0; i < deg; ++i) {
          const double mag = i == arg ? min2 : min1;
          const unsigned s = neg ^ (v2c[b + i] < 0.0 ? 1U : 0U);
          c2v[b + i] = clamp_llr(s ? -mag : mag);
        }
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      double total = clamp_llr(llrs[v]);
      for (std::uint32_t i = E.var_start[v]; i < E.var_start[v + 1]; ++i) total += c2v[E.var_edge[i]];
      for (std::uint32_t i = E.var_start[v]; i < E.var_start[v + 1]; ++i) {
        const std::uint32_t e = E.var_edge[i];
        v2c[e] = clamp_llr(total - c2v[e]);
      }
      res.extrinsic[v] = clamp_llr(total - clamp_llr(llrs[v]));
      res.posterior[v] = clamp_llr(total);
      res.hard[v] = total < 0.0 ? 1 : 0;
    }
    res.iterations = it;
    if (pc.syndrome_weight(res.hard) == 0) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// Progressive-edge-growth construction with constant variable degree: each
// new edge goes to a check outside the current depth-limited neighbourhood of
// the variable (or at maximum distance), lowest check degree first, with
// seeded random tie-breaking.
inline ParityCheck generate_peg(std::size_t n, std::size_t m, int col_weight, std::uint64_t seed) {
  if (m == 0 || m >= n) throw InvalidArgument("need 0 < m < n");
  if (col_weight < 1 || static_cast<std::size_t>(col_weight) > m) throw InvalidArgument("bad column weight");
  Rng rng(seed);
  std::vector<std::vector<std::uint32_t>> var_checks(n), check_vars(m);
  std::vector<int> depth_of(m);
  std::vector<std::uint32_t> var_seen_epoch(n, 0), check_seen_epoch(m, 0);
  std::uint32_t epoch = 0;

  for (std::size_t v = 0; v < n; ++v) {
    for (int e = 0; e < col_weight; ++e) {
      std::vector<std::uint32_t> candidates;
      if (e == 0) {
        candidates.resize(m);
        std::iota(candidates.begin(), candidates.end(), 0U);
      } else {
        // BFS from v over the current graph.
        ++epoch;
        std::vector<std::uint32_t> frontier{static_cast<std::uint32_t>(v)};
        var_seen_epoch[v] = epoch;
        std::vector<std::uint32_t> last_layer;
        std::size_t reached = 0;
        while (!frontier.empty()) {
          std::vector<std::uint32_t> checks_layer;
          for (auto u : frontier)
            for (auto c : var_checks[u])
              if (check_seen_epoch[c] != epoch) {
                check_seen_epoch[c] = epoch;
                checks_layer.push_back(c);
              }
          if (checks_layer.empty()) break;
          reached += checks_layer.size();
          if (reached == m) {
            last_layer = checks_layer;
            break;
          }
          std::vector<std::uint32_t> next;
          for (auto c : checks_layer)
            for (auto u : check_vars[c])
              if (var_seen_epoch[u] != epoch) {
                var_seen_epoch[u] = epoch;
                next.push_back(u);
              }
          frontier.swap(next);
        }
        if (reached < m) {
          for (std::uint32_t c = 0; c < m; ++c)
            if (check_seen_epoch[c] != epoch) candidates.push_back(c);
        } else {
          candidates = last_layer;
        }
      }
      std::size_t best_deg = std::numeric_limits<std::size_t>::max();
      std::vector<std::uint32_t> lightest;
      for (auto c : candidates) {
        if (std::find(var_checks[v].begin(), var_checks[v].end(), c) != var_checks[v].end()) continue;
        if (check_vars[c].size() < best_deg) {
          best_deg = check_vars[c].size();
          lightest.clear();
        }
        if (check_vars[c].size() == best_deg) lightest.push_back(c);
      }
      if (lightest.empty()) {
        for (std::uint32_t c = 0; c < m; ++c)
          if (std::find(var_checks[v].begin(), var_checks[v].end(), c) == var_checks[v].end()) lightest.push_back(c);
      }
      std::uniform_int_distribution<std::size_t> pick(0, lightest.size() - 1);
      const auto c = lightest[pick(rng)];
      var_checks[v].push_back(c);
      check_vars[c].push_back(static_cast<std::uint32_t>(v));
    }
  }
  return ParityCheck(n, std::move(check_vars));
}

// Full-rank PEG code of the requested rate; retries seeds derived from `seed`
// until the check matrix has full row rank.
inline ParityCheck generate_full_rank_peg(std::size_t n, std::size_t k, int col_weight, std::uint64_t seed,
                                          int attempts = 64) {
  if (k >= n) throw InvalidArgument("need k < n");
  for (int a = 0; a < attempts; ++a) {
    auto pc = generate_peg(n, n - k, col_weight, stream_seed(seed, streams::kCodeGeneration, static_cast<std::uint64_t>(a)));
    if (pc.k() == k) return pc;
  }
  throw ResourceError("no full-rank PEG code found within the attempt budget");
}

}  // namespace ppcshape
