#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lhc/cli.hpp"
#include "lhc/data.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run lhc_run(std::vector<std::string> args) {
  args.insert(args.begin(), "lhc");
  std::ostringstream out, err;
  const int code = lhc::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("lhc_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string p(const std::string &rel) const { return (dir / rel).string(); }
  void synth(const std::string &rel, std::size_t n = 40) {
    ASSERT_EQ(lhc_run({"synth", "--out", p(rel), "--seed", "3", "--n-sequences", std::to_string(n)}).code, 0);
  }
  fs::path dir;
};

bool single_error_line(const std::string &err, const std::string &code) {
  return err.rfind("error: code=" + code + " message=\"", 0) == 0 && err.find('\n') == err.size() - 1;
}

} // namespace

TEST_F(Cli, EndToEndSynthTrainEval) {
  synth("d.jsonl");
  EXPECT_TRUE(fs::exists(p("resolved_config.json")));
  ASSERT_EQ(lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run")}).code, 0);
  EXPECT_TRUE(fs::exists(p("run/model.json")));
  EXPECT_TRUE(fs::exists(p("run/train_log.jsonl")));
  EXPECT_TRUE(fs::exists(p("run/resolved_config.json")));
  const auto ev = lhc_run({"eval", "--model", p("run/model.json"), "--data", p("d.jsonl"), "--out-dir", p("ev")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_NE(ev.out.find("accuracy"), std::string::npos);
  for (const char *f : {"metrics.json", "metrics.txt", "confusion_actions.tsv", "confusion_activities.tsv"})
    EXPECT_TRUE(fs::exists(dir / "ev" / f)) << f;
  const auto metrics = nlohmann::json::parse(slurp(p("ev/metrics.json")));
  EXPECT_GE(metrics["actions"]["accuracy"].get<double>(), 0.9);
}

TEST_F(Cli, PredictWritesOneLinePerSequence) {
  synth("d.jsonl", 12);
  ASSERT_EQ(lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--max-cccp-iters", "2"}).code, 0);
  ASSERT_EQ(lhc_run({"predict", "--model", p("run/model.json"), "--data", p("d.jsonl"), "--out", p("pred.jsonl")}).code, 0);
  std::istringstream in(slurp(p("pred.jsonl")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("id") && j.contains("actions") && j.contains("activity") && j.contains("score"));
    ++n;
  }
  EXPECT_EQ(n, 12u);
}

TEST_F(Cli, RerunsAreByteIdentical) {
  synth("d.jsonl", 24);
  for (const char *out : {"a", "b"}) {
    ASSERT_EQ(lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p(out), "--init", "random", "--seed", "4"}).code, 0);
    ASSERT_EQ(lhc_run({"predict", "--model", p(std::string(out) + "/model.json"), "--data", p("d.jsonl"), "--out",
                       p(std::string(out) + "/pred.jsonl")})
                  .code,
              0);
  }
  for (const char *f : {"model.json", "train_log.jsonl", "pred.jsonl"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  // Thread count does not change the result.
  ASSERT_EQ(lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("c"), "--init", "random", "--seed", "4",
                     "--threads", "3"})
                .code,
            0);
  EXPECT_EQ(slurp(p("a/model.json")), slurp(p("c/model.json")));
}

TEST_F(Cli, ActionOnlyTrainingWithLambdaZero) {
  synth("d.jsonl", 16);
  ASSERT_EQ(lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--lambda", "0"}).code, 0);
  const auto cfg = nlohmann::json::parse(slurp(p("run/resolved_config.json")));
  EXPECT_EQ(cfg["hyperparams"]["lambda_loss"].get<double>(), 0.0);
}

TEST_F(Cli, ConfigOverridesFlags) {
  synth("d.jsonl", 16);
  std::ofstream(p("cfg.json")) << R"({"c_reg": 7.5, "n_latent": 1})";
  ASSERT_EQ(lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--c", "0.5", "--config", p("cfg.json")}).code, 0);
  const auto cfg = nlohmann::json::parse(slurp(p("run/resolved_config.json")));
  EXPECT_EQ(cfg["hyperparams"]["c_reg"].get<double>(), 7.5);
  EXPECT_EQ(cfg["hyperparams"]["n_latent"].get<int>(), 1);
  std::ofstream(p("bad.json")) << R"({"nonsense": 1})";
  const auto r = lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--config", p("bad.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(single_error_line(r.err, "Usage")) << r.err;
}

TEST_F(Cli, CrossValidationReport) {
  synth("d.jsonl", 16);
  const auto r = lhc_run({"cv", "--data", p("d.jsonl"), "--out-dir", p("cv"), "--max-cccp-iters", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(slurp(p("cv/cv_report.json")));
  EXPECT_EQ(rep["folds"].size(), 4u);
  EXPECT_TRUE(fs::exists(p("cv/cv_report.txt")));
  const auto two = lhc_run({"cv", "--data", p("d.jsonl"), "--out-dir", p("cv2"), "--max-cccp-iters", "2", "--repeats", "2"});
  ASSERT_EQ(two.code, 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(p("cv2/cv_report.json")))["repeats"].size(), 2u);
}

TEST_F(Cli, Inspect) {
  synth("d.jsonl", 8);
  auto r = lhc_run({"inspect", "--data", p("d.jsonl")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("records 8"), std::string::npos) << r.out;
  ASSERT_EQ(lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--max-cccp-iters", "2"}).code, 0);
  r = lhc_run({"inspect", "--model", p("run/model.json")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("N_z=2"), std::string::npos);
  EXPECT_NE(r.out.find("weight dim 193"), std::string::npos) << r.out;
  EXPECT_EQ(lhc_run({"inspect"}).code, 2);
}

TEST_F(Cli, UsageErrors) {
  auto r = lhc_run({"train", "--out-dir", p("run")});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(single_error_line(r.err, "Usage")) << r.err;
  r = lhc_run({});
  EXPECT_EQ(r.code, 2);
  r = lhc_run({"synth", "--out", p("x.jsonl"), "--bogus"});
  EXPECT_EQ(r.code, 2);
  synth("d.jsonl", 8);
  r = lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--c", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(single_error_line(r.err, "Usage")) << r.err;
  r = lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--init", "kmeans_categorical"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(lhc_run({"--help"}).code, 0);
}

TEST_F(Cli, IoAndValidationErrors) {
  auto r = lhc_run({"train", "--data", p("missing.jsonl"), "--out-dir", p("run")});
  EXPECT_EQ(r.code, 3);
  EXPECT_TRUE(single_error_line(r.err, "Io")) << r.err;
  std::ofstream(p("broken.jsonl")) << "{\"format\":\"lhc-dataset\",\"version\":1\n";
  r = lhc_run({"train", "--data", p("broken.jsonl"), "--out-dir", p("run")});
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(single_error_line(r.err, "Validation")) << r.err;
}

TEST_F(Cli, CategoricalInitFromSideChannel) {
  synth("d.jsonl", 12);
  const auto ds = lhc::load_dataset(p("d.jsonl"));
  lhc::CategoricalLabels cats;
  cats.n_categories = ds.space.n_actions;
  cats.names = ds.action_names;
  for (const auto &rec : ds.records) {
    cats.ids.push_back(rec.id);
    cats.labels.push_back(*rec.actions);
  }
  lhc::save_categories(cats, p("cats.jsonl"));
  const auto r = lhc_run({"train", "--data", p("d.jsonl"), "--out-dir", p("run"), "--init", "kmeans_categorical",
                          "--categories", p("cats.jsonl"), "--max-cccp-iters", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, ConvertTool) {
  std::ofstream(p("t.csv")) << "sequence_id,subject,activity,action,f_1,f_2\nv1,s1,cook,reach,1,2\nv1,s1,cook,move,3,4\n";
  std::ostringstream out, err;
  EXPECT_EQ(lhc::run_convert({"lhc-convert", "--in", p("t.csv"), "--out", p("t.jsonl")}, out, err), 0) << err.str();
  const auto ds = lhc::load_dataset(p("t.jsonl"));
  EXPECT_EQ(ds.records.size(), 1u);
  std::ostringstream out2, err2;
  EXPECT_EQ(lhc::run_convert({"lhc-convert", "--in", p("nope.csv"), "--out", p("x.jsonl")}, out2, err2), 3);
}
