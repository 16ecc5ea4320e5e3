#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "amc/common/error.hpp"
#include "amc/evalcli/grid.hpp"

namespace fs = std::filesystem;
using namespace amc;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amc_evalcli_" + name);
  fs::remove_all(p);
  return p;
}

eval::ExperimentConfig tiny(const fs::path& out) {
  auto cfg = eval::load_config(fs::path(AMC_TEST_CONFIG_DIR) / "tiny.json");
  cfg.out_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

eval::SerReport toy_report() {
  eval::SerReport r;
  r.config_digest = "abc";
  r.seeds = {1, 2};
  r.rows = {{"clean", "none", 0, -6.0, "pgd@cnn_small-relu", 3, 10, 1},
            {"clean", "none", 0, std::nullopt, "pgd@cnn_small-relu", 3, 10, 1},
            {"clean", "none", 0, std::nullopt, "pgd@cnn_small-relu", 5, 10, 2},
            {"meta", "dann", 5, std::nullopt, "pgd@cnn_small-relu", 0, 10, 1},
            {"meta", "dann", 5, std::nullopt, "pgd@cnn_small-relu", 10, 10, 2}};
  eval::EfficiencyRow e;
  e.offline = "meta";
  e.online = "dann";
  e.shots = 5;
  e.reached = true;
  e.mean_ser = 0.5;
  e.threshold = 0.6;
  e.curve = {{1, 0.7}, {5, 0.5}};
  r.efficiency = {e};
  return r;
}

}  // namespace

TEST(Config, EmptyConfigTakesDefaults) {
  const auto c = eval::parse_config({{"schema_version", 1}});
  EXPECT_EQ(c.dataset.frame_len, 128u);
  EXPECT_EQ(c.dataset.shots, (std::vector<std::size_t>{5, 10}));
  EXPECT_EQ(c.seeds.size(), 5u);
  EXPECT_EQ(c.attack.methods.size(), 5u);
  EXPECT_DOUBLE_EQ(c.attack.psr_db, -10.0);
  EXPECT_EQ(c.attack.substitutes.size(), 5u);
  EXPECT_FALSE(c.efficiency.threshold.has_value());
}

TEST(Config, ToJsonRoundTripsToSameDigest) {
  const auto a = eval::load_config(fs::path(AMC_TEST_CONFIG_DIR) / "tiny.json");
  const auto b = eval::parse_config(a.to_json());
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Config, RejectsUnknownKeysAtEveryLevel) {
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"datset", json::object()}}), ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"dataset", {{"frame_length", 64}}}}), ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"offline", {{"meta", {{"inner_lrr", 0.1}}}}}}),
               ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"online", {{"dann", {{"lambda", 1.0}}}}}}), ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(eval::parse_config(json::object()), ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 2}}), ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"dataset", {{"frame_len", "long"}}}}), ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"attack", {{"methods", {"deepfool"}}}}}), ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"attack", {{"holdout", 0}}}}), ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"eval", {{"seeds", json::array()}}}}), ConfigError);
  // 45 pilots per class need at least 495 target frames per class.
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"dataset", {{"target_per_class", 400}}}}),
               ConfigError);
  EXPECT_THROW(eval::parse_config({{"schema_version", 1}, {"eval", {{"efficiency", {{"shots", {3, 2}}}}}}}),
               ConfigError);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(eval::load_config("/nonexistent/amc.json"), IoError);
}

TEST(Config, DigestIgnoresOutputButTracksEverythingElse) {
  auto a = eval::parse_config({{"schema_version", 1}, {"output", {{"dir", "/tmp/a"}}}});
  auto b = eval::parse_config({{"schema_version", 1}, {"output", {{"dir", "/tmp/b"}}}});
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
  auto c = eval::parse_config({{"schema_version", 1}, {"eval", {{"seeds", {1, 2, 3}}}}});
  EXPECT_NE(a.digest(), c.digest());
  auto d = eval::parse_config({{"schema_version", 1}, {"attack", {{"psr_db", -12.0}}}});
  EXPECT_NE(a.digest(), d.digest());
}

TEST(Config, Sha256KnownVectors) {
  EXPECT_EQ(eval::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(eval::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Report, CsvHasHeaderAndOneLinePerRow) {
  const auto r = toy_report();
  const auto csv = eval::report_csv(r);
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), r.rows.size() + 1);
  EXPECT_EQ(lines[0], eval::kCsvHeader);
  EXPECT_EQ(lines[1], "clean,none,0,-6,pgd@cnn_small-relu,0.300000,10,1");
  EXPECT_EQ(lines[2], "clean,none,0,all,pgd@cnn_small-relu,0.300000,10,1");
  EXPECT_EQ(lines[4], "meta,dann,5,all,pgd@cnn_small-relu,0.000000,10,1");
  EXPECT_EQ(lines[5], "meta,dann,5,all,pgd@cnn_small-relu,1.000000,10,2");
}

TEST(Report, JsonRoundTrip) {
  const auto r = toy_report();
  EXPECT_EQ(eval::report_from_json(report_to_json(r)), r);
  auto j = report_to_json(r);
  j["schema_version"] = 99;
  EXPECT_THROW(eval::report_from_json(j), FormatError);
}

TEST(Report, SummaryAveragesOverSeeds) {
  const auto s = eval::summarize(toy_report());
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].offline, "clean");
  EXPECT_NEAR(s[0].mean, 0.4, 1e-12);
  EXPECT_NEAR(s[0].std, std::sqrt(0.02), 1e-12);
  EXPECT_EQ(s[0].seeds, 2u);
  EXPECT_NEAR(s[1].mean, 0.5, 1e-12);
  EXPECT_NEAR(eval::mean_ser(toy_report(), "meta", "dann", 5), 0.5, 1e-12);
  EXPECT_TRUE(std::isnan(eval::mean_ser(toy_report(), "meta", "finetune", 5)));
}

TEST(Report, EmitWritesFilesAndLoadsBack) {
  const auto dir = fresh_dir("emit");
  const auto r = toy_report();
  const auto paths = eval::emit_report(r, dir);
  EXPECT_GE(paths.size(), 5u);
  for (const auto& p : paths) EXPECT_GT(fs::file_size(p), 0u) << p;
  EXPECT_TRUE(fs::exists(dir / "plots" / "ser_vs_snr_none.svg"));
  EXPECT_NE(slurp(dir / "plots" / "ser_vs_snr_none.svg").find("<polyline"), std::string::npos);
  EXPECT_EQ(eval::load_report(dir / "report.json"), r);
  EXPECT_EQ(slurp(dir / "report.csv"), eval::report_csv(r));
}

TEST(Grid, ProducesFullGridDeterministically) {
  const auto dir = fresh_dir("grid_a");
  const auto cfg = tiny(dir);
  const auto r = eval::run_grid(cfg, false, Exec::parallel);
  // Per seed and held-out attack: 4 zero-shot cells plus 4 x 2 x |shots| adapted cells.
  const std::size_t cells = cfg.seeds.size() * cfg.attack.holdout * (4 + 4 * 2 * cfg.dataset.shots.size());
  std::size_t pooled = 0;
  for (const auto& row : r.rows) {
    if (!row.snr_db) ++pooled;
    EXPECT_LE(row.wrong, row.n);
  }
  EXPECT_EQ(pooled, cells);
  EXPECT_EQ(r.config_digest, cfg.digest());

  // A second, independent directory reproduces the CSV byte for byte.
  const auto dir_b = fresh_dir("grid_b");
  const auto r_b = eval::run_grid(tiny(dir_b), false, Exec::serial);
  EXPECT_EQ(eval::report_csv(r), eval::report_csv(r_b));
  fs::remove_all(dir_b);
}

TEST(Grid, RefusesExistingRunWithoutResumeAndForeignDigest) {
  const auto dir = fresh_dir("grid_refuse");
  auto cfg = tiny(dir);
  eval::open_run_dir(cfg, false);
  EXPECT_THROW(eval::open_run_dir(cfg, false), ConfigError);
  EXPECT_NO_THROW(eval::open_run_dir(cfg, true));
  cfg.attack.psr_db = -12.0;
  try {
    eval::open_run_dir(cfg, true);
    FAIL() << "digest mismatch accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("digest"), std::string::npos);
  }
}

TEST(Grid, ResumeAfterInterruptionMatchesFreshRun) {
  const auto dir = fresh_dir("grid_resume");
  const auto cfg = tiny(dir);
  const auto fresh = eval::report_csv(eval::run_grid(cfg, false));
  // Drop some finished cells and one offline artifact, as an interrupted run would leave it.
  std::size_t removed = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.path().extension() == ".json" && e.path().parent_path().filename() == "cells" && removed++ % 3 == 0)
      fs::remove(e.path());
  fs::remove(eval::seed_dir(cfg, cfg.seeds[0]) / "offline" / "meta.amcw");
  EXPECT_GT(removed, 0u);
  EXPECT_EQ(eval::report_csv(eval::run_grid(cfg, true)), fresh);
}

TEST(Grid, EfficiencyProbeIsDeterministicAndConsistent) {
  const auto dir = fresh_dir("efficiency");
  const auto cfg = tiny(dir);
  eval::run_grid(cfg, false);
  const auto a = eval::efficiency_probe(cfg);
  const auto b = eval::efficiency_probe(cfg);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].shots, b[i].shots);
    EXPECT_EQ(a[i].mean_ser, b[i].mean_ser);
    EXPECT_EQ(a[i].reached, a[i].mean_ser <= a[i].threshold);
    EXPECT_EQ(a[i].curve.back().first, a[i].shots);
    if (!a[i].reached) {
      EXPECT_EQ(a[i].shots, cfg.efficiency.shots.back());
    }
  }
}

TEST(Grid, SeedDataIsDisjointAndSized) {
  const auto cfg = tiny({});
  const auto d = eval::make_seed_data(cfg, 7);
  EXPECT_EQ(d.source_train.size(), 7 * cfg.dataset.source_per_class);
  EXPECT_EQ(d.target_test.size(), 7 * cfg.dataset.target_test_per_class);
  EXPECT_EQ(d.pilot_pool.size() + d.unlabeled.size(), 7 * cfg.dataset.target_per_class);
  EXPECT_EQ(d.attacker_train.size(), 7 * cfg.dataset.attacker_per_class);
  EXPECT_NO_THROW(onl::audit_disjoint(d.pilot_pool, d.unlabeled, d.target_test));
}
