#pragma once

// Experiment configuration: one JSON document, validated completely before
// any computation starts. Relative file paths resolve against the directory
// holding the configuration file.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ppcshape/capacity.hpp"
#include "ppcshape/channel.hpp"
#include "ppcshape/dsp.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/ldpc.hpp"
#include "ppcshape/link.hpp"
#include "ppcshape/turbo.hpp"

namespace ppcshape {

using Json = nlohmann::json;

enum class ExperimentKind { Capacity, DslmStats, LinkSim, PasLink };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Capacity: return "capacity";
    case ExperimentKind::DslmStats: return "dslm-stats";
    case ExperimentKind::LinkSim: return "link-sim";
    case ExperimentKind::PasLink: return "pas-link";
  }
  return "?";
}

struct CodeRef {
  std::filesystem::path alist;  // empty when generated
  std::size_t n = 0, k = 0;
  int column_weight = 3;
  bool generated() const { return alist.empty(); }
};

struct SpectrumSpec {
  int sps = 8;
  double rolloff = 0.1;
  int span_symbols = 32;
  std::size_t segment = 1024;
  std::size_t overlap = 512;
};

struct LinkConfig {
  ExperimentKind kind = ExperimentKind::Capacity;
  std::uint64_t seed = 0;
  std::vector<int> formats{8};
  // capacity
  std::vector<ShapingMethod> methods{ShapingMethod::BA};
  GridSpec grid;
  // shaping
  int L = 5;
  std::vector<double> gammas{0.0};
  std::string evaluator = "statistics";
  std::vector<double> input_entropy_bits;  // dslm-stats inputs; empty: uniform only
  std::optional<double> pas_entropy_bits;
  std::size_t ccdm_block_symbols = 0;
  // channel
  std::vector<double> taps = default_practical_taps();
  std::size_t main_cursor = 2;
  // link
  CodeRef code;
  TurboConfig turbo;
  EqualizerSpec equalizer;
  std::vector<double> psnr_db;
  std::size_t frames = 10;
  std::size_t stop_after_frame_errors = 0;
  std::size_t symbols = 1000000;
  SpectrumSpec spectrum;
  bool traces = true;

  int M() const { return formats.front(); }

  PatternEvaluator make_evaluator() const {
    if (evaluator == "csi") return PatternEvaluator::channel_aware(taps);
    return PatternEvaluator::statistics();
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(const Json& j, std::string path = "") : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + what);
  }

  bool has(const char* key) const { return j_.contains(key); }

  ConfigReader child(const char* key) const {
    if (!j_.contains(key)) fail(std::string("missing section '") + key + "'");
    return ConfigReader(j_.at(key), join(key));
  }

  std::optional<ConfigReader> optional_child(const char* key) const {
    if (!j_.contains(key)) return std::nullopt;
    return ConfigReader(j_.at(key), join(key));
  }

  void only(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) fail("unknown key '" + it.key() + "'");
  }

  double number(const char* key, std::optional<double> dflt = std::nullopt) const {
    if (!j_.contains(key)) {
      if (dflt) return *dflt;
      fail(std::string("missing '") + key + "'");
    }
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(std::string("'") + key + "' must be finite");
    return d;
  }

  long long integer(const char* key, std::optional<long long> dflt = std::nullopt) const {
    if (!j_.contains(key)) {
      if (dflt) return *dflt;
      fail(std::string("missing '") + key + "'");
    }
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
    return v.get<long long>();
  }

  bool boolean(const char* key, bool dflt) const {
    if (!j_.contains(key)) return dflt;
    if (!j_.at(key).is_boolean()) fail(std::string("'") + key + "' must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const char* key, std::optional<std::string> dflt = std::nullopt) const {
    if (!j_.contains(key)) {
      if (dflt) return *dflt;
      fail(std::string("missing '") + key + "'");
    }
    if (!j_.at(key).is_string()) fail(std::string("'") + key + "' must be a string");
    return j_.at(key).get<std::string>();
  }

  // Scalar or array of numbers.
  std::vector<double> numbers(const char* key) const {
    if (!j_.contains(key)) fail(std::string("missing '") + key + "'");
    const auto& v = j_.at(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_number()) fail(std::string("'") + key + "' must hold numbers");
        out.push_back(e.get<double>());
      }
    } else {
      fail(std::string("'") + key + "' must be a number or an array of numbers");
    }
    for (double d : out)
      if (!std::isfinite(d)) fail(std::string("'") + key + "' must be finite");
    return out;
  }

  const Json& raw() const { return j_; }
  const std::string& path() const { return path_; }

 private:
  std::string join(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }
  const Json& j_;
  std::string path_;
};

inline std::vector<double> read_psnr_grid(const ConfigReader& r) {
  const auto& v = r.raw().at("psnr_db");
  std::vector<double> grid;
  if (v.is_object()) {
    ConfigReader g(v, "psnr_db");
    g.only({"start", "stop", "step"});
    const double a = g.number("start"), b = g.number("stop"), s = g.number("step");
    if (!(s > 0.0)) g.fail("step must be positive");
    if (b < a) g.fail("stop must not be below start");
    const auto n = static_cast<std::size_t>(std::floor((b - a) / s + 1e-9)) + 1;
    if (n > 100000) g.fail("grid too large");
    for (std::size_t i = 0; i < n; ++i) grid.push_back(a + s * static_cast<double>(i));
  } else {
    grid = r.numbers("psnr_db");
  }
  if (grid.empty()) r.fail("psnr_db grid is empty");
  return grid;
}

inline std::size_t positive(const ConfigReader& r, const char* key, long long v, long long lo = 1) {
  if (v < lo) r.fail(std::string("'") + key + "' must be at least " + std::to_string(lo));
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline ExperimentKind parse_kind(const std::string& s) {
  if (s == "capacity") return ExperimentKind::Capacity;
  if (s == "dslm-stats") return ExperimentKind::DslmStats;
  if (s == "link-sim") return ExperimentKind::LinkSim;
  if (s == "pas-link") return ExperimentKind::PasLink;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

// `seed_override` (the CLI flag) wins over the file's seed; one of the two
// must be present.
inline LinkConfig parse_config(const Json& doc, const std::filesystem::path& base_dir,
                               std::optional<std::uint64_t> seed_override = std::nullopt) {
  using detail::ConfigReader;
  const ConfigReader r(doc);
  r.only({"kind", "seed", "modulation", "shaping", "channel", "code", "turbo", "equalizer", "psnr_db", "trials",
          "capacity", "spectrum", "output"});
  LinkConfig c;
  c.kind = parse_kind(r.string("kind"));

  if (seed_override) {
    c.seed = *seed_override;
  } else {
    if (!r.has("seed")) r.fail("seed is required (no implicit seeds)");
    const auto& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) r.fail("seed must be a nonnegative integer");
    c.seed = s.get<std::uint64_t>();
  }

  {
    const auto mod = r.child("modulation");
    mod.only({"M"});
    const auto& v = mod.raw().at("M");
    c.formats.clear();
    if (v.is_number_integer()) c.formats.push_back(v.get<int>());
    else if (v.is_array())
      for (const auto& e : v) {
        if (!e.is_number_integer()) mod.fail("M must hold integers");
        c.formats.push_back(e.get<int>());
      }
    else mod.fail("M must be an integer or an array of integers");
    if (c.formats.empty()) mod.fail("M is empty");
    for (int M : c.formats)
      if (M < 2 || M > 16 || (M & (M - 1)) != 0) mod.fail("M must be a power of two in [2, 16]");
    if (c.kind != ExperimentKind::Capacity && c.formats.size() != 1) mod.fail("only capacity runs accept several formats");
  }

  if (auto sh = r.optional_child("shaping")) {
    sh->only({"methods", "dslm", "pas", "input_entropy_bits"});
    if (sh->has("methods")) {
      const auto& v = sh->raw().at("methods");
      if (!v.is_array() || v.empty()) sh->fail("methods must be a non-empty array");
      c.methods.clear();
      for (const auto& e : v) {
        const std::string s = e.is_string() ? e.get<std::string>() : "";
        if (s == "BA") c.methods.push_back(ShapingMethod::BA);
        else if (s == "MB") c.methods.push_back(ShapingMethod::MB);
        else if (s == "IvMB") c.methods.push_back(ShapingMethod::IvMB);
        else sh->fail("methods entries must be BA, MB or IvMB");
      }
    }
    if (auto d = sh->optional_child("dslm")) {
      d->only({"L", "gamma", "evaluator"});
      c.L = static_cast<int>(d->integer("L", 5));
      if (c.L < 2) d->fail("L must be at least 2");
      if (d->has("gamma")) c.gammas = d->numbers("gamma");
      if (c.gammas.empty()) d->fail("gamma list is empty");
      for (double g : c.gammas)
        if (!(g >= 0.0 && g < 1.0)) d->fail("gamma must lie in [0, 1)");
      c.evaluator = d->string("evaluator", "statistics");
      if (c.evaluator != "statistics" && c.evaluator != "csi") d->fail("evaluator must be 'statistics' or 'csi'");
    }
    if (auto p = sh->optional_child("pas")) {
      p->only({"entropy_bits", "ccdm_block_symbols"});
      c.pas_entropy_bits = p->number("entropy_bits");
      c.ccdm_block_symbols = static_cast<std::size_t>(std::max<long long>(0, p->integer("ccdm_block_symbols", 0)));
    }
    if (sh->has("input_entropy_bits")) c.input_entropy_bits = sh->numbers("input_entropy_bits");
  }

  if (auto ch = r.optional_child("channel")) {
    ch->only({"taps", "main_cursor"});
    c.taps = ch->numbers("taps");
    const long long cur = ch->integer("main_cursor");
    if (cur < 0 || static_cast<std::size_t>(cur) >= c.taps.size()) ch->fail("main_cursor outside the tap vector");
    c.main_cursor = static_cast<std::size_t>(cur);
    if (c.taps[c.main_cursor] == 0.0) ch->fail("main cursor tap is zero");
  }

  const bool linkish = c.kind == ExperimentKind::LinkSim || c.kind == ExperimentKind::PasLink;
  if (linkish) {
    const auto code = r.child("code");
    code.only({"alist", "peg"});
    if (code.has("alist") == code.has("peg")) code.fail("give exactly one of 'alist' or 'peg'");
    if (code.has("alist")) {
      std::filesystem::path p = code.string("alist");
      if (p.is_relative()) p = base_dir / p;
      if (!std::filesystem::exists(p)) code.fail("alist file not found: " + p.string());
      c.code.alist = p;
    } else {
      const auto peg = code.child("peg");
      peg.only({"n", "k", "column_weight"});
      c.code.n = detail::positive(peg, "n", peg.integer("n"), 2);
      c.code.k = detail::positive(peg, "k", peg.integer("k"));
      c.code.column_weight = static_cast<int>(peg.integer("column_weight", 3));
      if (c.code.k >= c.code.n) peg.fail("k must be below n");
      if (c.code.column_weight < 2) peg.fail("column_weight must be at least 2");
    }

    if (auto t = r.optional_child("turbo")) {
      t->only({"outer_iterations", "ldpc_iterations", "m_keep", "max_log", "bp_rule"});
      c.turbo.outer_iterations = static_cast<int>(detail::positive(*t, "outer_iterations", t->integer("outer_iterations", 11)));
      c.turbo.ldpc_iterations = static_cast<int>(detail::positive(*t, "ldpc_iterations", t->integer("ldpc_iterations", 50)));
      c.turbo.m_keep = detail::positive(*t, "m_keep", t->integer("m_keep", 0), 0);
      c.turbo.max_log = t->boolean("max_log", false);
      const auto rule = t->string("bp_rule", "sum-product");
      if (rule == "sum-product") c.turbo.bp_rule = BpRule::SumProduct;
      else if (rule == "min-sum") c.turbo.bp_rule = BpRule::MinSum;
      else t->fail("bp_rule must be 'sum-product' or 'min-sum'");
    }
    if (auto e = r.optional_child("equalizer")) {
      e->only({"enabled", "mode", "taps", "step", "training_symbols", "feedback_taps"});
      c.equalizer.enabled = e->boolean("enabled", false);
      const auto mode = e->string("mode", "ffe");
      if (mode != "ffe") e->fail("only the 'ffe' mode can feed the turbo receiver");
      c.equalizer.lms.num_taps = static_cast<int>(detail::positive(*e, "taps", e->integer("taps", 31)));
      c.equalizer.lms.step = e->number("step", 1e-3);
      if (!(c.equalizer.lms.step > 0.0)) e->fail("step must be positive");
      c.equalizer.training_symbols = detail::positive(*e, "training_symbols", e->integer("training_symbols", 10000));
    }
    if (!r.has("psnr_db")) r.fail("psnr_db grid is required");
  }
  if (r.has("psnr_db")) c.psnr_db = detail::read_psnr_grid(r);
  if (c.kind == ExperimentKind::Capacity && c.psnr_db.empty()) r.fail("psnr_db grid is required");

  if (auto t = r.optional_child("trials")) {
    t->only({"frames", "stop_after_frame_errors", "symbols"});
    c.frames = detail::positive(*t, "frames", t->integer("frames", 10));
    c.stop_after_frame_errors = detail::positive(*t, "stop_after_frame_errors", t->integer("stop_after_frame_errors", 0), 0);
    c.symbols = detail::positive(*t, "symbols", t->integer("symbols", 1000000), 1024);
  }
  if (auto cap = r.optional_child("capacity")) {
    cap->only({"margin_sigma", "step_sigma"});
    c.grid.margin_sigmas = cap->number("margin_sigma", 6.0);
    c.grid.step_over_sigma = cap->number("step_sigma", 0.125);
    if (c.grid.margin_sigmas < 6.0) cap->fail("margin_sigma must be at least 6");
    if (!(c.grid.step_over_sigma > 0.0 && c.grid.step_over_sigma <= 0.125)) cap->fail("step_sigma must lie in (0, 1/8]");
  }
  if (auto sp = r.optional_child("spectrum")) {
    sp->only({"sps", "rolloff", "span_symbols", "segment", "overlap"});
    c.spectrum.sps = static_cast<int>(detail::positive(*sp, "sps", sp->integer("sps", 8), 2));
    c.spectrum.rolloff = sp->number("rolloff", 0.1);
    if (!(c.spectrum.rolloff > 0.0 && c.spectrum.rolloff <= 1.0)) sp->fail("rolloff must lie in (0, 1]");
    c.spectrum.span_symbols = static_cast<int>(detail::positive(*sp, "span_symbols", sp->integer("span_symbols", 32), 2));
    if (c.spectrum.span_symbols % 2 != 0) sp->fail("span_symbols must be even");
    c.spectrum.segment = detail::positive(*sp, "segment", sp->integer("segment", 1024), 16);
    c.spectrum.overlap = detail::positive(*sp, "overlap", sp->integer("overlap", 512), 0);
    if (c.spectrum.overlap >= c.spectrum.segment) sp->fail("overlap must be below segment");
  }
  if (c.kind == ExperimentKind::DslmStats && c.spectrum.segment > c.symbols) r.fail("spectrum segment exceeds the symbol count");
  if (auto o = r.optional_child("output")) {
    o->only({"traces"});
    c.traces = o->boolean("traces", true);
  }

  // Cross-field checks.
  const int M = c.M();
  const double m = std::log2(static_cast<double>(M));
  if (c.kind != ExperimentKind::Capacity) {
    std::size_t n = 1;
    for (int i = 0; i < c.L; ++i) {
      if (n > kPatternGuard / static_cast<std::size_t>(M)) r.fail("M^L exceeds the pattern enumeration guard");
      n *= static_cast<std::size_t>(M);
    }
    if (linkish && n / static_cast<std::size_t>(M) > kStateGuard) r.fail("trellis state count exceeds the guard");
    if (linkish && c.turbo.m_keep > n / static_cast<std::size_t>(M)) r.fail("turbo.m_keep exceeds the trellis state count");
    if (c.evaluator == "csi" && c.taps.size() > static_cast<std::size_t>(c.L))
      r.fail("the csi evaluator needs L at least the tap count");
  }
  if (linkish && c.code.generated() && c.code.n % static_cast<std::size_t>(m) != 0)
    r.fail("code length is not a multiple of bits per symbol");
  if (c.kind == ExperimentKind::PasLink) {
    if (!c.pas_entropy_bits) r.fail("pas-link needs shaping.pas.entropy_bits");
    if (!(*c.pas_entropy_bits > 1.0 && *c.pas_entropy_bits <= m)) r.fail("shaping.pas.entropy_bits must lie in (1, log2 M]");
  }
  for (double h : c.input_entropy_bits)
    if (!(h > 1.0 && h <= m)) r.fail("shaping.input_entropy_bits entries must lie in (1, log2 M]");

  return c;
}

inline LinkConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path(), seed_override);
}

}  // namespace ppcshape
