#pragma once

// The four experiment families behind the CLI. Each writes CSV tables into an
// output directory and returns a RunRecord listing every file with a content
// digest; nothing in the outputs depends on the clock or the host.

#include <nlohmann/json.hpp>

#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ppcshape/capacity.hpp"
#include "ppcshape/config.hpp"
#include "ppcshape/dsp.hpp"
#include "ppcshape/dslm.hpp"
#include "ppcshape/errors.hpp"
#include "ppcshape/forbidden_set.hpp"
#include "ppcshape/gray.hpp"
#include "ppcshape/ldpc.hpp"
#include "ppcshape/link.hpp"
#include "ppcshape/metrics.hpp"
#include "ppcshape/pas.hpp"
#include "ppcshape/seed.hpp"

namespace ppcshape {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Comma-separated, header row, LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : cols_(header.size()) {
    add_strings(header);
  }

  void add(std::initializer_list<double> row) { add(std::vector<double>(row)); }

  void add(const std::vector<double>& row) {
    std::vector<std::string> s;
    s.reserve(row.size());
    for (double v : row) s.push_back(format_number(v));
    add_strings(s);
  }

  const std::string& text() const noexcept { return text_; }

 private:
  void add_strings(const std::vector<std::string>& row) {
    if (row.size() != cols_) throw InvalidArgument("CSV row width differs from the header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text_ += ',';
      text_ += row[i];
    }
    text_ += '\n';
  }

  std::size_t cols_;
  std::string text_;
};

struct OutputFile {
  std::string name;
  std::size_t bytes = 0;
  std::string digest;  // fnv1a64 of the content
};

struct RunRecord {
  std::string kind;
  std::string tool_version = kToolVersion;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> module_seeds;
  std::vector<OutputFile> outputs;
  Json details = Json::object();

  Json to_json() const {
    Json j;
    j["kind"] = kind;
    j["tool_version"] = tool_version;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["seed_rule"] = "stream_seed(master, label, index) = splitmix64(master ^ fnv1a64(label) ^ splitmix64(index))";
    j["module_seeds"] = module_seeds;
    Json files = Json::array();
    for (const auto& f : outputs) files.push_back({{"file", f.name}, {"bytes", f.bytes}, {"fnv1a64", f.digest}});
    j["outputs"] = files;
    j["details"] = details;
    return j;
  }
};

class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ResourceError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content, RunRecord& rec) const {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot write " + path.string());
    out << content;
    if (!out) throw ResourceError("write failed for " + path.string());
    rec.outputs.push_back({name, content.size(), hex64(fnv1a64(content))});
  }

  void write(const std::string& name, const CsvTable& t, RunRecord& rec) const { write(name, t.text(), rec); }

  void write_record(const RunRecord& rec) const {
    const auto path = dir_ / "run.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ResourceError("cannot write " + path.string());
    out << rec.to_json().dump(2) << '\n';
  }

  const std::filesystem::path& path() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

// Normalized form of a parsed configuration: defaults filled in, numbers
// typed, file references replaced by content digests. Key order and
// whitespace of the source file do not matter.
inline Json normalized_config(const LinkConfig& c) {
  Json j;
  j["kind"] = to_string(c.kind);
  j["seed"] = c.seed;
  j["formats"] = c.formats;
  std::vector<std::string> methods;
  for (auto m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["grid"] = {{"margin_sigmas", c.grid.margin_sigmas}, {"step_over_sigma", c.grid.step_over_sigma}};
  j["dslm"] = {{"L", c.L}, {"gamma", c.gammas}, {"evaluator", c.evaluator}};
  j["input_entropy_bits"] = c.input_entropy_bits;
  if (c.pas_entropy_bits) j["pas"] = {{"entropy_bits", *c.pas_entropy_bits}, {"ccdm_block_symbols", c.ccdm_block_symbols}};
  j["channel"] = {{"taps", c.taps}, {"main_cursor", c.main_cursor}};
  if (c.kind == ExperimentKind::LinkSim || c.kind == ExperimentKind::PasLink) {
    if (c.code.generated()) {
      j["code"] = {{"peg", {{"n", c.code.n}, {"k", c.code.k}, {"column_weight", c.code.column_weight}}}};
    } else {
      std::ifstream in(c.code.alist, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      j["code"] = {{"alist_fnv1a64", hex64(fnv1a64(ss.str()))}};
    }
    j["turbo"] = {{"outer_iterations", c.turbo.outer_iterations},
                  {"ldpc_iterations", c.turbo.ldpc_iterations},
                  {"m_keep", c.turbo.m_keep},
                  {"max_log", c.turbo.max_log},
                  {"bp_rule", c.turbo.bp_rule == BpRule::SumProduct ? "sum-product" : "min-sum"}};
    j["equalizer"] = {{"enabled", c.equalizer.enabled},
                      {"taps", c.equalizer.lms.num_taps},
                      {"step", c.equalizer.lms.step},
                      {"training_symbols", c.equalizer.training_symbols}};
    j["trials"] = {{"frames", c.frames}, {"stop_after_frame_errors", c.stop_after_frame_errors}};
    j["output"] = {{"traces", c.traces}};
  }
  if (c.kind == ExperimentKind::DslmStats) {
    j["trials"] = {{"symbols", c.symbols}};
    j["spectrum"] = {{"sps", c.spectrum.sps},
                     {"rolloff", c.spectrum.rolloff},
                     {"span_symbols", c.spectrum.span_symbols},
                     {"segment", c.spectrum.segment},
                     {"overlap", c.spectrum.overlap}};
  }
  j["psnr_db"] = c.psnr_db;
  return j;
}

inline std::string config_digest(const LinkConfig& c) { return hex64(fnv1a64(normalized_config(c).dump())); }

inline RunRecord start_record(const LinkConfig& c) {
  RunRecord r;
  r.kind = to_string(c.kind);
  r.config_digest = config_digest(c);
  r.seed = c.seed;
  for (auto label : {streams::kChannel, streams::kDslmChoice, streams::kInterleaver, streams::kCodeGeneration,
                     streams::kSource, streams::kTraining})
    r.module_seeds[std::string(label)] = hex64(stream_seed(c.seed, label));
  return r;
}

inline std::string tag(const char* prefix, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%.2f", prefix, v);
  return buf;
}

inline Json describe(const ForbiddenSet& fs) {
  return {{"M", fs.M()},
          {"L", fs.L()},
          {"gamma", fs.gamma()},
          {"forbidden_patterns", fs.size()},
          {"dead_end_states", fs.dead_end_count()},
          {"score_threshold", fs.size() ? fs.score_threshold() : 0.0},
          {"evaluator", fs.evaluator().id()}};
}

// ---------------------------------------------------------------- capacity

inline RunRecord run_capacity(const LinkConfig& c, const OutputDir& out) {
  if (c.kind != ExperimentKind::Capacity) throw ConfigError("not a capacity configuration");
  auto rec = start_record(c);
  for (int M : c.formats) {
    for (auto method : c.methods) {
      const auto rows = shaping_gain_curve(M, c.psnr_db, method, c.grid);
      CsvTable t({"psnr_db", "air_uniform", "air_shaped", "gain_bits"});
      for (const auto& r : rows) t.add({r.psnr_db, r.air_uniform, r.air_shaped, r.gain_bits});
      out.write("capacity_pam" + std::to_string(M) + "_" + to_string(method) + ".csv", t, rec);
    }
  }
  return rec;
}

// -------------------------------------------------------------- dslm-stats

struct DslmStatsRow {
  double input_entropy_bits = 0.0;
  double gamma = 0.0;
  std::size_t symbols = 0;  // counted symbols (after the warm-up)
  std::size_t forbidden_patterns = 0;
  double substitution_rate = 0.0;
  double entropy_bits = 0.0;
  double direct_ber = 0.0;
  double papr_db = 0.0;
  double hf_power_db = 0.0;     // mean PSD over the upper quarter of the Nyquist band
  double outer_level_prob = 0.0;  // P(|x| = M-1)
  std::vector<double> histogram;
  Spectrum spectrum;
  std::vector<double> eye_peak, eye_rms;  // per sample phase
};

// Input level indices: uniform Gray-mapped bits, or i.i.d. draws from the MB
// pmf of the requested entropy.
inline std::vector<unsigned> dslm_source(int M, double input_entropy_bits, std::size_t n, std::uint64_t seed) {
  const GrayLabeling lab(M);
  Rng rng(seed);
  const double m = lab.bits_per_symbol();
  if (input_entropy_bits >= m - 1e-12) {
    std::vector<std::uint8_t> bits(n * static_cast<std::size_t>(m));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
    return lab.map_indices(bits);
  }
  const auto pmf = mb_pmf_for_entropy(M, input_entropy_bits);
  std::vector<double> cdf(pmf.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) cdf[i] = acc += pmf[i];
  std::vector<unsigned> idx(n);
  for (auto& v : idx) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * acc;
    std::size_t i = 0;
    while (i + 1 < cdf.size() && u >= cdf[i]) ++i;
    v = static_cast<unsigned>(i);
  }
  return idx;
}

inline DslmStatsRow dslm_statistics(const LinkConfig& c, double input_entropy_bits, double gamma,
                                    std::uint64_t item_index) {
  const int M = c.M();
  const GrayLabeling lab(M);
  const auto fs = build_forbidden_set(M, c.L, gamma, c.make_evaluator());
  const DslmRule rule(fs, lab);
  const auto warm = static_cast<std::size_t>(c.L - 1);
  const auto inputs = dslm_source(M, input_entropy_bits, c.symbols + warm, stream_seed(c.seed, streams::kSource, item_index));
  const auto tx = dslm_encode_indices(inputs, rule, lab, stream_seed(c.seed, streams::kDslmChoice, item_index));

  DslmStatsRow row;
  row.input_entropy_bits = input_entropy_bits;
  row.gamma = gamma;
  row.forbidden_patterns = fs.size();
  row.symbols = c.symbols;
  const std::span<const unsigned> counted(tx.indices.data() + warm, c.symbols);
  const auto hist = level_histogram(counted, M);
  row.entropy_bits = entropy_bits(std::span<const std::size_t>(hist));
  row.histogram.resize(hist.size());
  for (std::size_t i = 0; i < hist.size(); ++i) row.histogram[i] = static_cast<double>(hist[i]) / static_cast<double>(c.symbols);
  row.outer_level_prob = row.histogram.front() + row.histogram.back();

  std::size_t subs = 0, bit_errors = 0;
  for (std::size_t k = warm; k < tx.indices.size(); ++k) {
    subs += tx.substituted[k];
    bit_errors += static_cast<std::size_t>(std::popcount(lab.label(tx.indices[k]) ^ lab.label(inputs[k])));
  }
  row.substitution_rate = static_cast<double>(subs) / static_cast<double>(c.symbols);
  row.direct_ber = static_cast<double>(bit_errors) / static_cast<double>(c.symbols * static_cast<std::size_t>(lab.bits_per_symbol()));

  const std::span<const double> amps(tx.symbols.data() + warm, c.symbols);
  const auto w = rrc_waveform(amps, c.spectrum.rolloff, c.spectrum.span_symbols, c.spectrum.sps);
  // Drop the filter ramps at both ends.
  const auto edge = static_cast<std::size_t>(c.spectrum.span_symbols * c.spectrum.sps);
  std::span<const double> body(w.samples);
  if (body.size() > 4 * edge) body = body.subspan(edge, body.size() - 2 * edge);
  row.papr_db = papr_db(body);
  row.spectrum = welch_spectrum(body, c.spectrum.segment, c.spectrum.overlap);
  const double sps = c.spectrum.sps;
  row.hf_power_db = row.spectrum.band_mean_db(0.375 / sps, 0.5 / sps);

  const auto P = static_cast<std::size_t>(c.spectrum.sps);
  row.eye_peak.assign(P, 0.0);
  row.eye_rms.assign(P, 0.0);
  std::vector<std::size_t> n(P, 0);
  for (std::size_t i = 0; i < body.size(); ++i) {
    const std::size_t ph = (i + edge) % P;
    row.eye_peak[ph] = std::max(row.eye_peak[ph], std::abs(body[i]));
    row.eye_rms[ph] += body[i] * body[i];
    ++n[ph];
  }
  for (std::size_t p = 0; p < P; ++p) row.eye_rms[p] = std::sqrt(row.eye_rms[p] / static_cast<double>(std::max<std::size_t>(n[p], 1)));
  return row;
}

inline RunRecord run_dslm_stats(const LinkConfig& c, const OutputDir& out) {
  if (c.kind != ExperimentKind::DslmStats) throw ConfigError("not a dslm-stats configuration");
  auto rec = start_record(c);
  const GrayLabeling lab(c.M());
  std::vector<double> inputs = c.input_entropy_bits;
  if (inputs.empty()) inputs.push_back(lab.bits_per_symbol());

  CsvTable summary({"input_entropy_bits", "L", "gamma", "symbols", "forbidden_patterns", "substitution_rate",
                    "entropy_bits", "direct_ber", "papr_db", "hf_power_db", "outer_level_prob"});
  Json sets = Json::array();
  std::uint64_t item = 0;
  for (double h : inputs) {
    for (double g : c.gammas) {
      const auto row = dslm_statistics(c, h, g, item++);
      summary.add({row.input_entropy_bits, static_cast<double>(c.L), row.gamma, static_cast<double>(row.symbols),
                   static_cast<double>(row.forbidden_patterns), row.substitution_rate, row.entropy_bits, row.direct_ber,
                   row.papr_db, row.hf_power_db, row.outer_level_prob});
      const std::string suffix = tag("_h", h) + tag("_gamma", g) + ".csv";
      CsvTable hist({"bin", "value"});
      for (std::size_t i = 0; i < row.histogram.size(); ++i) hist.add({lab.level(static_cast<unsigned>(i)), row.histogram[i]});
      out.write("histogram" + suffix, hist, rec);
      CsvTable spec({"bin", "value"});
      for (std::size_t i = 0; i < row.spectrum.freq.size(); ++i)
        spec.add({row.spectrum.freq[i] * c.spectrum.sps, row.spectrum.power_db[i]});
      out.write("spectrum" + suffix, spec, rec);
      CsvTable eye({"bin", "value", "rms"});
      for (std::size_t p = 0; p < row.eye_peak.size(); ++p)
        eye.add({static_cast<double>(p) / c.spectrum.sps, row.eye_peak[p], row.eye_rms[p]});
      out.write("eye" + suffix, eye, rec);
      const auto fs = build_forbidden_set(c.M(), c.L, g, c.make_evaluator());
      sets.push_back(describe(fs));
    }
  }
  out.write("dslm_stats.csv", summary, rec);
  rec.details["forbidden_sets"] = sets;
  return rec;
}

// ------------------------------------------------------- link-sim, pas-link

inline ParityCheck load_code(const LinkConfig& c) {
  if (c.code.generated()) return generate_full_rank_peg(c.code.n, c.code.k, c.code.column_weight, c.seed);
  std::ifstream in(c.code.alist, std::ios::binary);
  if (!in) throw ConfigError("cannot open alist file " + c.code.alist.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return load_alist(ss.str());
  } catch (const std::exception& e) {
    throw ConfigError("bad alist file " + c.code.alist.string() + ": " + e.what());
  }
}

inline LinkSpec link_spec(const LinkConfig& c, double gamma) {
  LinkSpec s;
  s.M = c.M();
  s.L = c.L;
  s.gamma = gamma;
  s.evaluator = c.make_evaluator();
  s.taps = c.taps;
  s.main_cursor = c.main_cursor;
  s.turbo = c.turbo;
  s.equalizer = c.equalizer;
  if (c.kind == ExperimentKind::PasLink) {
    PasConfig p;
    p.M = c.M();
    p.target_pmf = mb_pmf_for_entropy(c.M(), *c.pas_entropy_bits);
    p.ccdm_block = c.ccdm_block_symbols;
    s.pas = p;
  }
  return s;
}

struct LinkRun {
  double gamma = 0.0;
  std::vector<PointResult> points;
  std::optional<double> threshold_db;
  double net_rate = 0.0;
};

// Builds every simulator first so that sizing errors surface before any
// frame is simulated.
inline std::vector<LinkRun> run_link_family(const LinkConfig& c, const OutputDir& out, RunRecord& rec,
                                            std::ostream* progress) {
  const bool pas = c.kind == ExperimentKind::PasLink;
  const auto pc = load_code(c);
  std::vector<std::unique_ptr<LinkSimulator>> sims;
  for (double g : c.gammas) sims.push_back(std::make_unique<LinkSimulator>(link_spec(c, g), pc, c.seed));

  Json code = {{"n", pc.n()}, {"k", pc.k()}, {"rate", pc.rate()}};
  rec.details["code"] = code;
  Json sets = Json::array();
  for (const auto& s : sims) sets.push_back(describe(s->forbidden_set()));
  rec.details["forbidden_sets"] = sets;
  if (pas) {
    const auto* codec = sims.front()->pas();
    rec.details["pas"] = {{"target_entropy_bits", *c.pas_entropy_bits},
                          {"composition", codec->composition().counts},
                          {"composition_entropy_bits", codec->composition().entropy_bits()},
                          {"ccdm_blocks_per_frame", codec->blocks_per_frame()},
                          {"ccdm_bits_per_block", codec->ccdm_bits_per_block()},
                          {"uniform_payload_bits", codec->uniform_payload_bits()},
                          {"info_bits_per_frame", codec->info_bits_per_frame()},
                          {"net_rate", codec->net_rate()}};
  }

  CsvTable il({"position", "source"});
  const auto& perm = sims.front()->interleaver().permutation();
  for (std::size_t i = 0; i < perm.size(); ++i) il.add({static_cast<double>(i), static_cast<double>(perm[i])});
  out.write("interleaver.csv", il, rec);

  std::vector<LinkRun> runs;
  for (std::size_t gi = 0; gi < sims.size(); ++gi) {
    const auto& sim = *sims[gi];
    LinkRun run;
    run.gamma = c.gammas[gi];
    run.net_rate = sim.net_rate();
    std::vector<std::string> header{"psnr_db", "pre_fec_ber", "post_fec_ber", "ngmi", "mean_iterations"};
    if (pas) header.push_back("net_rate");
    for (const char* h : {"frames", "frame_errors", "info_bits", "info_errors"}) header.push_back(h);
    CsvTable table(header);
    CsvTable traces({"psnr_db", "frame", "iteration", "pre_fec_ber", "post_fec_ber", "syndrome_weight"});
    for (std::size_t pi = 0; pi < c.psnr_db.size(); ++pi) {
      const double psnr = c.psnr_db[pi];
      auto on_frame = [&](std::size_t f, const FrameResult& fr) {
        if (!c.traces) return;
        for (std::size_t it = 0; it < fr.post_fec_trace.size(); ++it)
          traces.add({psnr, static_cast<double>(f), static_cast<double>(it + 1), fr.pre_fec_trace[it],
                      fr.post_fec_trace[it], static_cast<double>(fr.syndrome_trace[it])});
      };
      const auto pr = sim.run_point(psnr, c.frames, c.stop_after_frame_errors, pi, on_frame);
      std::vector<double> row{pr.psnr_db, pr.pre_fec_ber, pr.post_fec_ber, pr.ngmi, pr.mean_iterations};
      if (pas) row.push_back(sim.net_rate());
      for (auto v : {pr.frames, pr.frame_errors, pr.info_bits, pr.info_errors}) row.push_back(static_cast<double>(v));
      table.add(row);
      if (progress) {
        *progress << to_string(c.kind) << " gamma " << format_number(run.gamma) << " psnr_db " << format_number(psnr)
                  << " post_fec_ber " << format_number(pr.post_fec_ber) << " frames " << pr.frames << '\n';
      }
      run.points.push_back(pr);
    }
    run.threshold_db = error_free_threshold(run.points);
    const std::string suffix = tag("_gamma", run.gamma) + ".csv";
    out.write(std::string(pas ? "pas" : "link") + suffix, table, rec);
    if (c.traces) out.write("traces" + suffix, traces, rec);
    runs.push_back(std::move(run));
  }

  CsvTable thr({"gamma", "threshold_psnr_db", "net_rate"});
  for (const auto& r : runs) thr.add({r.gamma, r.threshold_db ? *r.threshold_db : std::nan(""), r.net_rate});
  out.write("thresholds.csv", thr, rec);
  return runs;
}

inline RunRecord run_link_sim(const LinkConfig& c, const OutputDir& out, std::ostream* progress = nullptr) {
  if (c.kind != ExperimentKind::LinkSim) throw ConfigError("not a link-sim configuration");
  auto rec = start_record(c);
  run_link_family(c, out, rec, progress);
  return rec;
}

inline RunRecord run_pas_link(const LinkConfig& c, const OutputDir& out, std::ostream* progress = nullptr) {
  if (c.kind != ExperimentKind::PasLink) throw ConfigError("not a pas-link configuration");
  auto rec = start_record(c);
  run_link_family(c, out, rec, progress);
  return rec;
}

inline RunRecord run_experiment(const LinkConfig& c, const OutputDir& out, std::ostream* progress = nullptr) {
  switch (c.kind) {
    case ExperimentKind::Capacity: return run_capacity(c, out);
    case ExperimentKind::DslmStats: return run_dslm_stats(c, out);
    case ExperimentKind::LinkSim: return run_link_sim(c, out, progress);
    case ExperimentKind::PasLink: return run_pas_link(c, out, progress);
  }
  throw InvalidArgument("unknown experiment kind");
}

}  // namespace ppcshape
