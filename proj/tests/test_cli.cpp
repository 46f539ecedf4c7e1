#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reachmap/chain_io.hpp"
#include "reachmap/cli.hpp"
#include "reachmap/error.hpp"
#include "reachmap/models.hpp"
#include "reachmap/planner.hpp"
#include "reachmap/sampling.hpp"

using namespace reachmap;
namespace fs = std::filesystem;

namespace {

const std::string kData = REACHMAP_DATA_DIR;

struct Out {
  int code;
  std::string out;
  std::string err;
};

Out cli(const std::vector<std::string>& args) {
  std::ostringstream o, e;
  const int code = run_cli(args, o, e);
  return {code, o.str(), e.str()};
}

// Fresh directory per test, entered for the duration of the test so that
// manifest paths stay relative.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("reachmap_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    old_ = fs::current_path();
    fs::current_path(dir_);
  }
  void TearDown() override {
    fs::current_path(old_);
    fs::remove_all(dir_);
  }

  // Small 2-DoF IK sample set and SVM shared by several tests.
  void arm_model() {
    ASSERT_EQ(cli({"sample", "--chain", kData + "/arm2.json", "--method", "ik", "--count", "1500", "--seed",
                   "7", "--out", "s.csv"})
                  .code,
              0);
    ASSERT_EQ(cli({"train", "--model", "svm", "--data", "s.csv", "--out", "m.json"}).code, 0);
  }

  fs::path dir_, old_;
};

nlohmann::json read_json(const std::string& path) { return nlohmann::json::parse(load_text(path)); }

}  // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"train", "--model", "svm", "--data", "a.csv", "--out", "m.json", "--bogus", "1"}).code, 2);
  EXPECT_EQ(cli({"train", "--model", "tree", "--data", "a.csv", "--out", "m.json"}).code, 2);
  EXPECT_EQ(cli({"sample", "--chain", "c.json", "--method", "ik"}).code, 2);  // no --out
  const Out help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("heatmap"), std::string::npos);
}

TEST_F(CliTest, DomainErrorsExitOneWithPrefix) {
  const Out missing = cli({"train", "--model", "svm", "--data", "missing.csv", "--out", "m.json"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_EQ(missing.err.rfind("error:io: ", 0), 0u) << missing.err;
  EXPECT_EQ(std::count(missing.err.begin(), missing.err.end(), '\n'), 1);
  EXPECT_FALSE(fs::exists("m.json.manifest.json"));

  save_text("bad.json", "{\"kind\": \"basic\", \"models\": {\"map\": \"m.json\"}, \"target\": [1, 1], \"extra\": 1}");
  const Out schema = cli({"plan", "--problem", "bad.json", "--out", "p.csv"});
  EXPECT_EQ(schema.code, 1);
  EXPECT_EQ(schema.err.rfind("error:schema: ", 0), 0u) << schema.err;

  const Out wrong_robot =
      cli({"sample", "--chain", kData + "/arm2.json", "--method", "footstep", "--count", "10", "--out", "x.csv"});
  EXPECT_EQ(wrong_robot.code, 1);
  EXPECT_EQ(wrong_robot.err.rfind("error:invalid_argument: ", 0), 0u);

  save_text("one_class.csv", "R2,fk,0,2\n0.5,0.5,1\n0.6,0.5,1\n");
  const Out single = cli({"train", "--model", "svm", "--data", "one_class.csv", "--out", "m.json"});
  EXPECT_EQ(single.code, 1);
  EXPECT_EQ(single.err.rfind("error:single_class: ", 0), 0u);
}

TEST_F(CliTest, SampleWritesCsvAndManifest) {
  const Out r = cli({"sample", "--chain", kData + "/arm2.json", "--method", "fk", "--count", "200", "--seed", "3",
                     "--out", "fk.csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const SampleSet s = read_samples_csv("fk.csv");
  EXPECT_EQ(s.size(), 200);
  EXPECT_EQ(s.positives(), 200);

  const nlohmann::json m = read_json("fk.csv.manifest.json");
  EXPECT_EQ(m["command"], "sample");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(m["config"]["method"], "fk");
  EXPECT_EQ(m["config"]["ik_restarts"], 10);  // defaults are resolved
  EXPECT_EQ(m["outputs"][0]["path"], "fk.csv");
  EXPECT_EQ(m["outputs"][0]["fnv1a64"], file_fnv1a("fk.csv"));
  EXPECT_EQ(m["inputs"][0]["fnv1a64"], file_fnv1a(kData + "/arm2.json"));
}

TEST_F(CliTest, HoldoutSplitsRows) {
  ASSERT_EQ(cli({"sample", "--chain", kData + "/arm2.json", "--method", "ik", "--count", "300", "--holdout",
                 "0.2", "--out", "train.csv", "--test-out", "test.csv"})
                .code,
            0);
  EXPECT_EQ(read_samples_csv("train.csv").size(), 240);
  EXPECT_EQ(read_samples_csv("test.csv").size(), 60);
  EXPECT_EQ(read_json("train.csv.manifest.json")["outputs"].size(), 2u);
}

TEST_F(CliTest, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST_F(CliTest, TrainEvalPipeline) {
  arm_model();
  ASSERT_EQ(cli({"sample", "--chain", kData + "/arm2.json", "--method", "grid", "--per-axis", "40", "--out",
                 "grid.csv"})
                .code,
            0);
  const Out e = cli({"eval", "--model", "m.json", "--test", "grid.csv", "--out", "r.csv", "--no-timing"});
  ASSERT_EQ(e.code, 0) << e.err;
  std::istringstream csv(load_text("r.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "model,test_set,offset,iou,tp,fp,fn,tn");
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells[0], "svm");
  EXPECT_GT(std::stod(cells[3]), 0.9);
  EXPECT_EQ(std::stoi(cells[4]) + std::stoi(cells[5]) + std::stoi(cells[6]) + std::stoi(cells[7]), 1600);

  const Out sweep = cli({"eval", "--model", "m.json", "--test", "grid.csv", "--sweep", "0,0.1", "--out", "sw.csv"});
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  EXPECT_EQ(load_text("sw.csv").substr(0, 11), "offset,iou\n");

  const Out knn = cli({"eval", "--baseline", "knn", "--train", "s.csv", "--test", "grid.csv", "--no-timing"});
  EXPECT_EQ(knn.code, 0) << knn.err;
  EXPECT_NE(knn.out.find("knn5"), std::string::npos);
  EXPECT_EQ(cli({"eval", "--model", "m.json", "--baseline", "knn", "--test", "grid.csv"}).code, 1);
}

TEST_F(CliTest, HeatmapMatchesDirectEvaluation) {
  arm_model();
  ASSERT_EQ(cli({"heatmap", "--model", "m.json", "--res", "7", "--range", "-1:2,0.5:1.5", "--out", "h.csv"}).code,
            0);
  const MapPtr m = load_model("m.json");
  std::istringstream csv(load_text("h.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "x,y,f");
  int n = 0;
  while (std::getline(csv, line)) {
    double x, y, f;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &f), 3);
    const int ix = n % 7, iy = n / 7;
    EXPECT_DOUBLE_EQ(x, -1.0 + 3.0 * ix / 6);
    EXPECT_DOUBLE_EQ(y, 0.5 + 1.0 * iy / 6);
    EXPECT_EQ(f, m->value(encode(Pose::r2(x, y))));
    ++n;
  }
  EXPECT_EQ(n, 49);
  EXPECT_EQ(cli({"heatmap", "--model", "m.json", "--slice", "theta=0", "--out", "h2.csv"}).code, 1);
  EXPECT_EQ(cli({"heatmap", "--model", "m.json", "--res", "1", "--out", "h2.csv"}).code, 1);
}

TEST_F(CliTest, HeatmapSe2Slice) {
  // A tiny SE2 model trained directly keeps this test fast.
  SampleSet s;
  s.space = TaskSpace(SpaceKind::kSE2);
  s.inputs.resize(4, 4);
  s.labels.resize(4);
  const double xs[4] = {0.0, 0.1, 1.0, 1.1};
  for (int i = 0; i < 4; ++i) {
    s.inputs.row(i) = encode(Pose::se2(xs[i], 0.0, 0.3)).transpose();
    s.labels[i] = i < 2 ? 1.0 : -1.0;
  }
  SvmConfig cfg;
  cfg.gamma = 1.0;
  save_model(train_svm(s, cfg).model, "se2.json");
  ASSERT_EQ(cli({"heatmap", "--model", "se2.json", "--slice", "theta=0.3", "--res", "3", "--range", "0:1,-1:1",
                 "--out", "h.csv"})
                .code,
            0);
  const MapPtr m = load_model("se2.json");
  std::istringstream csv(load_text("h.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  double x, y, f;
  ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &f), 3);
  EXPECT_EQ(f, m->value(encode(Pose::se2(0.0, -1.0, 0.3))));
  EXPECT_EQ(read_json("h.csv.manifest.json")["config"]["slice"]["theta"], 0.3);
  EXPECT_EQ(cli({"heatmap", "--model", "se2.json", "--slice", "z=0", "--out", "h.csv"}).code, 1);
}

TEST_F(CliTest, PlanFromProblemFile) {
  arm_model();
  fs::create_directories("plans");
  save_text("plans/basic.json",
            "{\"kind\": \"basic\", \"models\": {\"map\": \"../m.json\"}, \"target\": [0.8, 1.2],"
            " \"sqp\": {\"max_iters\": 80}}");
  const Out r = cli({"plan", "--problem", "plans/basic.json", "--out", "p.csv", "--json", "p.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("basic plan"), std::string::npos);
  const nlohmann::json j = read_json("p.json");
  EXPECT_TRUE(j["converged"].get<bool>());
  EXPECT_EQ(load_text("p.csv").rfind("kind,index,", 0), 0u);
  const nlohmann::json m = read_json("p.csv.manifest.json");
  EXPECT_EQ(m["inputs"].size(), 2u);  // the problem file and the model it names
  EXPECT_EQ(m["inputs"][1]["path"], "plans/../m.json");
  EXPECT_EQ(m["config"]["sqp"]["max_iters"], 80);
  EXPECT_EQ(m["outputs"].size(), 2u);
}

TEST_F(CliTest, ReplayIsByteIdentical) {
  arm_model();
  ASSERT_EQ(cli({"heatmap", "--model", "m.json", "--res", "20", "--out", "h.csv"}).code, 0);
  fs::create_directories("again");
  for (const char* manifest : {"s.csv.manifest.json", "m.json.manifest.json", "h.csv.manifest.json"}) {
    const Out r = cli({"replay", "--manifest", manifest, "--out-dir", "again"});
    EXPECT_EQ(r.code, 0) << manifest << ": " << r.err;
    EXPECT_NE(r.out.find("identical"), std::string::npos);
  }
  EXPECT_EQ(load_text("again/m.json"), load_text("m.json"));
  EXPECT_EQ(load_text("again/h.csv"), load_text("h.csv"));
}

TEST_F(CliTest, ReplayRejectsChangedInputAndDetectsDrift) {
  arm_model();
  fs::create_directories("again");
  // Same inputs, tampered recorded hash: the rerun differs from the record.
  nlohmann::json m = read_json("m.json.manifest.json");
  m["outputs"][0]["fnv1a64"] = "0000000000000000";
  save_text("tampered.json", m.dump());
  const Out drift = cli({"replay", "--manifest", "tampered.json", "--out-dir", "again"});
  EXPECT_EQ(drift.code, 1);
  EXPECT_EQ(drift.err.rfind("error:replay_mismatch: ", 0), 0u) << drift.err;
  EXPECT_NE(drift.out.find("DIFFERENT"), std::string::npos);

  save_text("s.csv", load_text("s.csv") + "0.1,0.1,-1\n");
  const Out changed = cli({"replay", "--manifest", "m.json.manifest.json", "--out-dir", "again"});
  EXPECT_EQ(changed.code, 1);
  EXPECT_EQ(changed.err.rfind("error:io: ", 0), 0u) << changed.err;
}

TEST(PlanFile, ParsesEveryKind) {
  const fs::path dir = fs::temp_directory_path() / "reachmap_planfile";
  fs::create_directories(dir);
  // Any SE2 model serves for wiring checks.
  SampleSet s;
  s.space = TaskSpace(SpaceKind::kSE2);
  s.inputs.resize(2, 4);
  s.inputs.row(0) = encode(Pose::se2(0.0, 0.2, 0.0)).transpose();
  s.inputs.row(1) = encode(Pose::se2(1.0, 0.2, 0.0)).transpose();
  s.labels = Eigen::Vector2d(1.0, -1.0);
  save_model(train_svm(s, SvmConfig{}).model, (dir / "se2.json").string());

  const std::string base = dir.string();
  const PlanFile feet = plan_file_from_json(R"({"kind": "footsteps", "models": {"feet": "se2.json"},
      "start": {"left": [0, 0.1, 0], "right": [0, -0.1, 0]},
      "goal": {"left": [1, 0.1, 0], "right": [1, -0.1, 0]}, "steps": 4,
      "obstacles": [{"normal": [0, 1], "offset": 0.1, "first_step": 2, "last_step": 3}],
      "sqp": {"margin": 0.5, "lambda": 2, "trust_radius": [0.1, 0.1, 0.3]}})",
                                            base);
  EXPECT_EQ(feet.kind, "footsteps");
  EXPECT_EQ(feet.problem.pose_count(), 6);
  EXPECT_EQ(feet.problem.linear.size(), 2u);  // steps 2 and 3
  EXPECT_EQ(feet.config.margin, 0.5);
  EXPECT_EQ(feet.config.lambda, 2.0);
  EXPECT_EQ(feet.config.trust_radius.size(), 3);
  EXPECT_EQ(feet.model_paths, std::vector<std::string>{base + "/se2.json"});

  const PlanFile door = plan_file_from_json(R"({"kind": "trajectory",
      "models": {"feet": "se2.json", "hand": "se2.json"},
      "hand": {"radius": 0.8}, "s": {"goal": 1.0}, "steps": 3})",
                                            base);
  EXPECT_EQ(door.problem.variant, PlanVariant::kSequentialWithParam);
  EXPECT_EQ(door.problem.param_count(), 4);

  const PlanFile contacts = plan_file_from_json(R"({"kind": "contacts",
      "models": {"feet": "se2.json", "hand": "se2.json"},
      "start": {"left": [0, 0.1, 0], "right": [0, -0.1, 0], "hand": [0.5, -0.2, 0]},
      "goal": {"left": [0.2, 0.1, 0], "right": [0.2, -0.1, 0]}, "order": ["hand", "right"]})",
                                                base);
  EXPECT_EQ(contacts.problem.pose_count(), 5);

  const PlanFile place = plan_file_from_json(R"({"kind": "placement", "models": {"map": "se2.json"},
      "targets": [[1, 1, 0], [1, 2, 0]], "base": {"initial": [0, 0, 0]}})",
                                             base);
  EXPECT_EQ(place.problem.variant, PlanVariant::kSimultaneous);
  EXPECT_EQ(place.problem.pose_count(), 3);

  const auto schema = [&](const std::string& text) {
    try {
      plan_file_from_json(text, base);
    } catch (const Error& e) {
      return e.code() == ErrorCode::kSchema;
    }
    return false;
  };
  EXPECT_TRUE(schema("[1, 2]"));
  EXPECT_TRUE(schema("{\"kind\": \"warp\", \"models\": {}}"));
  EXPECT_TRUE(schema(R"({"kind": "basic", "models": {"map": "se2.json"}, "target": [1, 2]})"));  // SE2 needs 3
  EXPECT_TRUE(schema(R"({"kind": "basic", "models": {"map": "se2.json"}, "target": [1, 2, 0], "sqp": {"tol": 1}})"));
  EXPECT_TRUE(schema(R"({"kind": "basic", "models": {"map": "se2.json", "hand": "x"}, "target": [1, 2, 0]})"));
  EXPECT_TRUE(schema(R"({"kind": "footsteps", "models": {"feet": "se2.json"}, "start": {"left": [0, 0, 0]}})"));
  fs::remove_all(dir);
}
