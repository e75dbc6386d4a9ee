#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ppcshape/config.hpp"
#include "ppcshape/experiments.hpp"
#include "ppcshape/link.hpp"

using namespace ppcshape;

namespace {

const std::filesystem::path kSource = PPCSHAPE_SOURCE_DIR;

Json base_link() {
  return Json::parse(R"({
    "kind": "link-sim", "seed": 3, "modulation": {"M": 8},
    "shaping": {"dslm": {"L": 4, "gamma": [0.0, 0.3]}},
    "code": {"peg": {"n": 504, "k": 336}},
    "turbo": {"outer_iterations": 3, "ldpc_iterations": 10, "m_keep": 64},
    "psnr_db": [40], "trials": {"frames": 1}
  })");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ppcshape_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParsesShippedConfigs) {
  for (const char* f : {"capacity.json", "dslm_stats.json", "link_sim.json", "link_sim_ffe.json", "pas_link.json"}) {
    const auto c = load_config(kSource / "configs" / f);
    EXPECT_GT(c.seed, 0U) << f;
  }
  const auto c = load_config(kSource / "configs" / "link_sim.json");
  EXPECT_EQ(c.kind, ExperimentKind::LinkSim);
  EXPECT_TRUE(std::filesystem::exists(c.code.alist));
  EXPECT_EQ(c.psnr_db.size(), 9U);
  EXPECT_EQ(c.turbo.m_keep, 1024U);
}

TEST(Config, RejectsBadInput) {
  auto expect_error = [](Json j, const char* why) {
    EXPECT_THROW(parse_config(j, kSource), ConfigError) << why;
  };
  auto j = base_link();
  j["shaping"]["dslm"]["gamma"] = 1.0;
  expect_error(j, "gamma = 1");
  j = base_link();
  j.erase("seed");
  expect_error(j, "no seed");
  EXPECT_NO_THROW(parse_config(j, kSource, 9));
  j = base_link();
  j["turbo"]["m_keep"] = 100000;
  expect_error(j, "m_keep above K");
  j = base_link();
  j["psnr_db"] = Json::array();
  expect_error(j, "empty grid");
  j = base_link();
  j["psnr_gb"] = 3;
  expect_error(j, "unknown key");
  j = base_link();
  j["modulation"]["M"] = 6;
  expect_error(j, "M not a power of two");
  j = base_link();
  j["code"] = {{"alist", "no/such/file.alist"}};
  expect_error(j, "missing alist");
  j = base_link();
  j["code"]["peg"]["n"] = 500;
  expect_error(j, "n not a multiple of m");
  j = base_link();
  j["shaping"]["dslm"]["evaluator"] = "csi";
  j["shaping"]["dslm"]["L"] = 3;
  expect_error(j, "csi evaluator shorter than the channel");
  j = base_link();
  j["kind"] = "pas-link";
  expect_error(j, "pas-link without a target entropy");
  j["shaping"]["pas"] = {{"entropy_bits", 3.5}};
  expect_error(j, "entropy above log2 M");
  j = base_link();
  j["psnr_db"] = {{"start", 10}, {"stop", 5}, {"step", 1}};
  expect_error(j, "reversed grid");
  EXPECT_THROW(load_config(kSource / "nonexistent.json"), ConfigError);
}

TEST(Config, GridShorthand) {
  auto j = base_link();
  j["psnr_db"] = {{"start", 20}, {"stop", 22}, {"step", 0.5}};
  const auto c = parse_config(j, kSource);
  EXPECT_EQ(c.psnr_db, (std::vector<double>{20, 20.5, 21, 21.5, 22}));
}

TEST(Config, DigestIgnoresLayoutAndDefaults) {
  const auto a = parse_config(base_link(), kSource);
  auto reordered = Json::parse(R"({
    "trials": {"frames": 1}, "psnr_db": [40.0],
    "turbo": {"m_keep": 64, "ldpc_iterations": 10, "outer_iterations": 3, "max_log": false},
    "code": {"peg": {"k": 336, "n": 504, "column_weight": 3}},
    "shaping": {"dslm": {"gamma": [0.0, 0.3], "L": 4, "evaluator": "statistics"}},
    "modulation": {"M": 8}, "seed": 3, "kind": "link-sim"
  })");
  const auto b = parse_config(reordered, kSource);
  EXPECT_EQ(config_digest(a), config_digest(b));
  auto changed = base_link();
  changed["seed"] = 4;
  EXPECT_NE(config_digest(a), config_digest(parse_config(changed, kSource)));
}

TEST(Csv, DialectIsFixed) {
  CsvTable t({"a", "b"});
  t.add({0.1, 1e-12});
  t.add({2.0, -3.5});
  EXPECT_EQ(t.text(), "a,b\n0.1,1e-12\n2,-3.5\n");
  EXPECT_THROW(t.add({1.0}), InvalidArgument);
}

TEST(Experiments, CapacityRunIsDeterministicWithManifest) {
  auto j = Json::parse(R"({"kind": "capacity", "seed": 1, "modulation": {"M": [2, 8]},
                          "shaping": {"methods": ["BA", "MB"]}, "psnr_db": [0, 15, 30]})");
  const auto c = parse_config(j, kSource);
  const auto d1 = scratch("cap1"), d2 = scratch("cap2");
  const auto r1 = run_capacity(c, OutputDir(d1));
  const auto r2 = run_capacity(c, OutputDir(d2));
  ASSERT_EQ(r1.outputs.size(), 4U);
  for (const auto& f : r1.outputs) {
    const auto text = slurp(d1 / f.name);
    EXPECT_EQ(text, slurp(d2 / f.name));
    EXPECT_EQ(f.digest, hex64(fnv1a64(text)));
    EXPECT_EQ(text.substr(0, text.find('\n')), "psnr_db,air_uniform,air_shaped,gain_bits");
  }
  // OOK and MB rows carry no gain.
  std::istringstream ook(slurp(d1 / "capacity_pam2_BA.csv"));
  std::string line;
  std::getline(ook, line);
  while (std::getline(ook, line)) EXPECT_LT(std::stod(line.substr(line.rfind(',') + 1)), 1e-3);
  std::istringstream mb(slurp(d1 / "capacity_pam8_MB.csv"));
  std::getline(mb, line);
  while (std::getline(mb, line)) EXPECT_LT(std::stod(line.substr(line.rfind(',') + 1)), 1e-3);
}

TEST(Experiments, DslmStatsZeroGammaRow) {
  auto j = Json::parse(R"({"kind": "dslm-stats", "seed": 2, "modulation": {"M": 8},
                          "shaping": {"dslm": {"L": 4, "gamma": [0.0, 0.5]}},
                          "trials": {"symbols": 20000}})");
  const auto c = parse_config(j, kSource);
  const auto zero = dslm_statistics(c, 3.0, 0.0, 0);
  EXPECT_EQ(zero.substitution_rate, 0.0);
  EXPECT_EQ(zero.direct_ber, 0.0);
  for (double p : zero.histogram) EXPECT_NEAR(p, 0.125, 4 * std::sqrt(0.125 * 0.875 / 20000));
  const auto half = dslm_statistics(c, 3.0, 0.5, 1);
  EXPECT_GT(half.direct_ber, 0.0);
  EXPECT_LT(half.entropy_bits, zero.entropy_bits);
  const auto d = scratch("dslm");
  const auto rec = run_dslm_stats(c, OutputDir(d));
  EXPECT_EQ(rec.outputs.size(), 7U);
}

TEST(Link, IdentityChannelDecodesOnFirstIteration) {
  const auto pc = generate_full_rank_peg(504, 336, 3, 1);
  LinkSpec s;
  s.L = 3;
  s.taps = {1.0};
  s.main_cursor = 0;
  s.turbo.outer_iterations = 5;
  const LinkSimulator sim(s, pc, 7);
  const auto fr = sim.run_frame(40.0, 0);
  EXPECT_EQ(fr.info_errors, 0U);
  EXPECT_EQ(fr.iterations, 1);
  EXPECT_EQ(fr.post_fec_trace.front(), 0.0);
}

TEST(Link, FramesAreReproducible) {
  const auto pc = generate_full_rank_peg(504, 336, 3, 1);
  LinkSpec s;
  s.L = 4;
  s.gamma = 0.3;
  s.turbo.m_keep = 64;
  s.turbo.outer_iterations = 3;
  const LinkSimulator a(s, pc, 7), b(s, pc, 7);
  const auto fa = a.run_frame(24.0, 5), fb = b.run_frame(24.0, 5);
  EXPECT_EQ(fa.info_errors, fb.info_errors);
  EXPECT_EQ(fa.pre_fec_errors, fb.pre_fec_errors);
  EXPECT_EQ(fa.post_fec_trace, fb.post_fec_trace);
  EXPECT_GT(fa.substitutions, 0U);
}

TEST(Link, PasRoundTripAtHighPsnr) {
  std::ifstream in(kSource / "data/codes/peg_2016_r23.alist");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto pc = load_alist(ss.str());
  LinkSpec s;
  s.L = 4;
  s.gamma = 0.5;
  s.turbo.m_keep = 128;
  s.turbo.outer_iterations = 3;
  PasConfig p;
  p.target_pmf = mb_pmf_for_entropy(8, 2.8);
  s.pas = p;
  const LinkSimulator sim(s, pc, 3);
  const auto fr = sim.run_frame(45.0, 0);
  EXPECT_EQ(fr.info_bits, sim.pas()->info_bits_per_frame());
  EXPECT_EQ(fr.info_errors, 0U);
  EXPECT_EQ(fr.failed_ccdm_blocks, 0U);
}

TEST(Link, ErrorFreeThreshold) {
  std::vector<PointResult> pts(4);
  const double psnr[] = {20, 21, 22, 23};
  const std::size_t errs[] = {5, 0, 2, 0};
  for (int i = 0; i < 4; ++i) {
    pts[static_cast<std::size_t>(i)].psnr_db = psnr[i];
    pts[static_cast<std::size_t>(i)].info_errors = errs[i];
  }
  EXPECT_EQ(error_free_threshold(pts), 23.0);
  pts[2].info_errors = 0;
  EXPECT_EQ(error_free_threshold(pts), 21.0);
  pts[3].info_errors = 1;
  EXPECT_FALSE(error_free_threshold(pts).has_value());
}
