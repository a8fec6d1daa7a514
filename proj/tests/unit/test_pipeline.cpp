#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "wdr/pipeline.hpp"

using namespace wdr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small slices of the bundled corpus keep the end-to-end tests fast.
class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("wdr_pipeline_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const std::string data = WDR_DATA_DIR;
    auto train = load_corpus(data + "/toy_train.jsonl", 2);
    train.examples.resize(300);
    save_corpus(train, dir_ / "train.jsonl");
    auto attack = load_corpus(data + "/toy_attack.jsonl", 2);
    attack.examples.resize(120);
    save_corpus(attack, dir_ / "attack.jsonl");
    fs::copy_file(data + "/lexicon.tsv", dir_ / "lexicon.tsv");
  }

  nlohmann::json config(const std::string& out = "run") const {
    nlohmann::json j;
    j["paths"]["train_corpus"] = (dir_ / "train.jsonl").string();
    j["paths"]["attack_corpus"] = (dir_ / "attack.jsonl").string();
    j["paths"]["lexicon"] = (dir_ / "lexicon.tsv").string();
    j["paths"]["out_dir"] = (dir_ / out).string();
    j["classifier"]["feature_dim"] = 1 << 14;
    j["classifier"]["epochs"] = 10;
    return j;
  }

  PipelineConfig cfg(const std::string& out = "run") const { return PipelineConfig::from_json(config(out)); }

  fs::path dir_;
};

}  // namespace

TEST(Config, DefaultsAndSeedPropagation) {
  const auto c = PipelineConfig::from_json(nlohmann::json{{"seed", 77}});
  EXPECT_EQ(c.seed, 77u);
  EXPECT_EQ(c.classifier.seed, 77u);
  EXPECT_EQ(c.attack.seed, 77u);
  EXPECT_EQ(c.detector.seed, 77u);
  EXPECT_EQ(c.detector.num_trees, 29);
  EXPECT_EQ(c.detector.max_depth, 3);
  EXPECT_DOUBLE_EQ(c.detector.learning_rate, 0.34);
  EXPECT_EQ(c.wdr.length, 64u);
  EXPECT_EQ(c.attack_kind, AttackKind::pwws);
  EXPECT_EQ(c.sweep_thresholds, kDefaultThresholdGrid);
  EXPECT_EQ(c.paths.detector_path(), fs::path("runs/default/detector.json"));
  EXPECT_EQ(c.paths.report_path("sweep"), fs::path("runs/default/reports/sweep.json"));
}

TEST(Config, StrictKeysAndTypes) {
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json{{"detector", {{"trees", 3}}}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json{{"colour", 1}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json{{"detector", {{"num_trees", "many"}}}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json{{"threshold", 1.5}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json{{"attack", {{"kind", "hotflip"}}}}), ConfigError);
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json::array()), ConfigError);
  try {
    PipelineConfig::from_json(nlohmann::json{{"wdr", {{"lenght", 3}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("wdr.lenght"), std::string::npos);
  }
}

TEST(Config, DottedOverrides) {
  nlohmann::json j = nlohmann::json::object();
  apply_override(j, "detector.num_trees", "5");
  apply_override(j, "attack.kind", "genetic");
  apply_override(j, "detector.append_baseline", "true");
  apply_override(j, "sweep.thresholds", "[0.6, 0.2]");
  const auto c = PipelineConfig::from_json(j);
  EXPECT_EQ(c.detector.num_trees, 5);
  EXPECT_EQ(c.attack_kind, AttackKind::genetic);
  EXPECT_TRUE(c.detector.append_baseline);
  EXPECT_EQ(c.sweep_thresholds, (std::vector<Real>{0.6, 0.2}));
  EXPECT_THROW(apply_override(j, "a..b", "1"), ConfigError);
}

TEST(Config, ToJsonRoundTrips) {
  nlohmann::json j{{"seed", 5}, {"threshold", 0.3}, {"attack", {{"kind", "importance"}}}};
  j["transfer"]["tests"] = {{{"attack", "genetic"}, {"wdr", "g.jsonl"}}};
  const auto c = PipelineConfig::from_json(j);
  ASSERT_EQ(c.transfer.tests.size(), 1u);
  EXPECT_EQ(c.transfer.tests[0].config.model, "builtin");
  EXPECT_EQ(c.transfer.tests[0].config.attack, "genetic");
  const auto again = PipelineConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(again.to_json().dump(), c.to_json().dump());
  EXPECT_EQ(default_config_json().dump(), PipelineConfig::from_json(default_config_json()).to_json().dump());
}

TEST(Split, StratifiedAndDeterministic) {
  std::vector<LabeledWdr> rows(100);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].vector.values = Vec::Constant(2, static_cast<Real>(i));
    rows[i].origin = i < 60 ? Origin::original : Origin::adversarial;
  }
  std::vector<LabeledWdr> train, test, train2, test2;
  stratified_split(rows, 0.3, 9, train, test);
  EXPECT_EQ(test.size(), 30u);
  EXPECT_EQ(std::count_if(test.begin(), test.end(), [](const auto& r) { return r.origin == Origin::adversarial; }), 12);
  stratified_split(rows, 0.3, 9, train2, test2);
  ASSERT_EQ(test2.size(), test.size());
  for (std::size_t i = 0; i < test.size(); ++i) EXPECT_EQ(test[i].vector.values, test2[i].vector.values);
}

TEST(ExitCodes, MapErrorKinds) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(MissingArtifactError("a", "attack")), 3);
  EXPECT_EQ(exit_code_for(FormatError("x")), 4);
  EXPECT_EQ(exit_code_for(VersionError("x")), 4);
  EXPECT_EQ(exit_code_for(ProviderError("x")), 5);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
}

TEST_F(PipelineTest, MissingArtifactsNameTheProducer) {
  const auto c = cfg();
  try {
    cmd_wdr(c);
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "attack");
    EXPECT_NE(std::string(e.what()).find("attack"), std::string::npos);
  }
  try {
    cmd_attack(c);
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "train-classifier");
  }
  try {
    cmd_evaluate(c);
    FAIL();
  } catch (const MissingArtifactError& e) {
    EXPECT_EQ(e.producer(), "train-detector");
  }
}

TEST_F(PipelineTest, EndToEndWritesReportsAndIsReproducible) {
  const auto c = cfg();
  for (const auto& name : kCommands) {
    if (name == "transfer") continue;
    const auto out = run_command(name, c);
    EXPECT_EQ(out.summary.find('\n'), std::string::npos) << name;
    EXPECT_EQ(out.summary.rfind(name, 0), 0u) << out.summary;
    ASSERT_TRUE(fs::exists(out.report_path)) << name;
    const auto report = nlohmann::json::parse(slurp(out.report_path));
    EXPECT_EQ(report["command"], name);
  }
  const auto attack = nlohmann::json::parse(slurp(c.paths.report_path("attack")));
  EXPECT_GT(attack["succeeded"].get<int>(), 20);
  const auto sweep = nlohmann::json::parse(slurp(c.paths.report_path("sweep")));
  EXPECT_EQ(sweep["rows"].size(), 4u);
  const auto explain = nlohmann::json::parse(slurp(c.paths.report_path("explain")));
  EXPECT_EQ(explain["features"].size(), 64u);
  EXPECT_EQ(explain["top_positions_by_gain"].size(), 3u);

  // Same seed, second output directory: byte-identical artifacts.
  const auto c2 = cfg("run2");
  for (const char* name : {"train-classifier", "attack", "wdr", "train-detector"}) run_command(name, c2);
  EXPECT_EQ(slurp(c.paths.classifier_path()), slurp(c2.paths.classifier_path()));
  EXPECT_EQ(slurp(c.paths.attacked_path()), slurp(c2.paths.attacked_path()));
  EXPECT_EQ(slurp(c.paths.wdr_path()), slurp(c2.paths.wdr_path()));
  EXPECT_EQ(slurp(c.paths.detector_path()), slurp(c2.paths.detector_path()));
  // Re-running train-detector in place rewrites the same bytes.
  const auto before = file_digest(c.paths.detector_path());
  run_command("train-detector", c);
  EXPECT_EQ(file_digest(c.paths.detector_path()), before);

  // Transfer: self row plus a genetic row; the detector file is untouched.
  auto j = config();
  j["attack"]["kind"] = "genetic";
  j["paths"]["attacked"] = (dir_ / "run" / "genetic.jsonl").string();
  j["paths"]["wdr"] = (dir_ / "run" / "genetic_wdr.jsonl").string();
  const auto gcfg = PipelineConfig::from_json(j);
  cmd_attack(gcfg);
  cmd_wdr(gcfg);
  j = config();
  j["transfer"]["tests"] = {{{"wdr", c.paths.heldout_path().string()}},
                            {{"attack", "genetic"}, {"wdr", gcfg.paths.wdr_path().string()}}};
  const auto tcfg = PipelineConfig::from_json(j);
  const auto t = cmd_transfer(tcfg);
  EXPECT_EQ(t.report["detector_digest_before"], t.report["detector_digest_after"]);
  EXPECT_EQ(file_digest(c.paths.detector_path()), before);
  ASSERT_EQ(t.report["rows"].size(), 2u);
  EXPECT_TRUE(t.report["rows"][0]["changed"].empty());
  EXPECT_EQ(t.report["rows"][1]["changed"], nlohmann::json::array({"attack"}));
  const auto plain = nlohmann::json::parse(slurp(c.paths.report_path("evaluate")));
  EXPECT_EQ(t.report["rows"][0]["f1"], plain["f1"]);
}

TEST_F(PipelineTest, CliRunsCommandsAndReportsErrors) {
  const std::string cli = WDR_CLI_PATH;
  const auto out_dir = (dir_ / "cli").string();
  const auto cfg_path = dir_ / "cfg.json";
  std::ofstream(cfg_path) << config("cli").dump(2);
  const auto log = (dir_ / "cli.log").string();
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > " + log + " 2>&1").c_str());
    return WEXITSTATUS(status);
  };

  EXPECT_EQ(run("wdr --config " + cfg_path.string()), 3);
  EXPECT_NE(slurp(log).find("wdr attack"), std::string::npos) << slurp(log);
  EXPECT_EQ(run("train-classifier --config " + cfg_path.string() + " --classifier.epochs 3 --seed 4"), 0);
  const auto line = slurp(log);
  EXPECT_EQ(std::count(line.begin(), line.end(), '\n'), 1) << line;
  EXPECT_EQ(line.rfind("train-classifier:", 0), 0u) << line;
  EXPECT_TRUE(fs::exists(fs::path(out_dir) / "reports" / "train-classifier.json"));
  EXPECT_EQ(run("train-classifier --config " + cfg_path.string() + " --classifier.epoch=3"), 2);
  EXPECT_EQ(run("train-classifier --config " + cfg_path.string() + " --threshold 2"), 2);
  EXPECT_EQ(run("bogus"), 2);
}
