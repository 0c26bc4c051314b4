#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <Eigen/Dense>
#include "doctest.h"
#include "json.hpp"

#include "opnet/cases.hpp"
#include "opnet/errors.hpp"
#include "opnet/experiment.hpp"
#include "opnet/snapshot_io.hpp"

using namespace opnet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string output;
};

Run cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "opnet_cli_test.log";
  const std::string cmd = std::string(OPNET_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

ExperimentConfig tiny_tc2(const std::string& arch) {
  ExperimentConfig c = default_config("tc2", arch);
  c.data.scenarios = 12;
  c.data.test_scenarios = 3;
  c.data.times = 40;
  c.train.epochs = 5;
  c.train.lr_schedule = {{0, 1e-3}};
  c.trunk_train.epochs = 5;
  c.trunk_train.lr_schedule = {{0, 1e-3}};
  c.branch = {{8}};
  if (arch != "flex") c.trunk = {{8}};
  return c;
}

}  // namespace

TEST_CASE("rmse examples") {
  const Eigen::Vector3d a(1.0, -2.0, 0.5);
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a.array() + 2.0, a) == doctest::Approx(2.0));
  CHECK(rmse(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(3.0, 4.0)) == doctest::Approx(std::sqrt(12.5)));
  try {
    rmse(Eigen::VectorXd(0), Eigen::VectorXd(0));
    FAIL("expected InvalidData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidData);
  }
  CHECK_THROWS_AS(rmse(Eigen::Vector2d::Zero(), Eigen::Vector3d::Zero()), Error);
}

TEST_CASE("config round-trip") {
  for (const char* c : {"tc1", "tc2", "tc4"}) {
    for (const char* a : {"vanilla", "pod", "svd", "svd-shared", "flex"}) {
      if (std::string(c) == "tc4" && std::string(a) != "vanilla" && std::string(a) != "flex") continue;
      ExperimentConfig cfg = default_config(c, a);
      cfg.train.early_stop_patience = 7;
      cfg.data.files = {"a.csv"};
      CHECK(parse_config(serialize_config(cfg)) == cfg);
    }
  }
  ExperimentConfig partial = parse_config(R"({"case": "tc2", "arch": "flex", "p": 3})");
  CHECK(partial.p == 3);
  CHECK(partial.train == default_config("tc2", "flex").train);
  CHECK_THROWS_AS(parse_config(R"({"case": "tc1", "colour": 1})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"train": {"epochs": "many"}})"), Error);
  CHECK_THROWS_AS(parse_config("[1, 2]"), Error);
  CHECK_THROWS_AS(parse_config("{"), Error);
  CHECK_THROWS_AS(parse_config(R"({"case": "tc7"})"), Error);
  CHECK_THROWS_AS(default_config("tc4", "svd").validate(), Error);

  nlohmann::json j = nlohmann::json::object();
  apply_override(j, "train.batch_size=16");
  apply_override(j, "arch=pod");
  apply_override(j, "branch.hidden=[4,4]");
  CHECK(j["train"]["batch_size"] == 16);
  CHECK(j["arch"] == "pod");
  const ExperimentConfig o = parse_config(j.dump());
  CHECK(o.train.batch_size == 16);
  CHECK(o.branch.hidden == std::vector<int>{4, 4});
  CHECK_THROWS_AS(apply_override(j, "novalue"), Error);
  CHECK_THROWS_AS(apply_override(j, "a..b=1"), Error);
}

TEST_CASE("reruns from one config are identical") {
  for (const char* arch : {"vanilla", "pod", "svd", "flex"}) {
    CAPTURE(arch);
    const ExperimentConfig cfg = tiny_tc2(arch);
    const ExperimentResult a = run_experiment(cfg);
    const ExperimentResult b = run_experiment(parse_config(serialize_config(cfg)));
    std::stringstream ma, mb;
    write_model(ma, a.model);
    write_model(mb, b.model);
    CHECK(ma.str() == mb.str());
    CHECK(a.row.rmse == b.row.rmse);
    CHECK(a.row.param_count == a.model.param_count());
  }
}

TEST_CASE("held-out scenarios are disjoint from training") {
  const ExperimentConfig cfg = tiny_tc2("vanilla");
  const CaseData d = make_case_data(cfg);
  REQUIRE(d.train_grid);
  for (Eigen::Index j = 0; j < d.test.scenarios(); ++j) {
    CHECK(((d.train_grid->u.colwise() - d.test.u.col(j)).cwiseAbs().colwise().maxCoeff().array() > 0.0).all());
  }
  ExperimentConfig tc4 = default_config("tc4", "flex");
  tc4.data.train_points = 100;
  tc4.data.grid = 20;
  const CaseData d4 = make_case_data(tc4);
  CHECK(d4.test.points() == 400);
  CHECK(d4.test.scenarios() == 10);
  CHECK(d4.interior_half_width == 10.0);
}

TEST_CASE("external case ingests snapshot CSVs") {
  const fs::path dir = fs::temp_directory_path() / "opnet_external";
  fs::create_directories(dir);
  Tc1Options opt;
  opt.scenarios = 15;
  opt.times = 30;
  const ScenarioSet set = tc1_scenarios(opt, 5);
  write_snapshot_csv(dir / "x.csv", assemble_scenario_matrix(set, 0));
  write_snapshot_csv(dir / "v.csv", assemble_scenario_matrix(set, 1));
  ExperimentConfig cfg = default_config("external", "svd");
  cfg.data.files = {(dir / "x.csv").string(), (dir / "v.csv").string()};
  cfg.data.variables = {"x", "v"};
  cfg.data.test_scenarios = 4;
  const CaseData d = make_case_data(cfg);
  CHECK(d.train_grid->scenarios() == 11);
  CHECK(d.test.scenarios() == 4);
  CHECK(d.test.values[1].rows() == 30);
  cfg.train.epochs = 3;
  cfg.trunk_train.epochs = 3;
  cfg.branch = cfg.trunk = {{4}};
  CHECK(run_experiment(cfg).row.rmse.size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("report and loss CSV headers") {
  const fs::path dir = fs::temp_directory_path() / "opnet_reports";
  fs::create_directories(dir);
  ReportRow r;
  r.case_id = "tc1";
  r.arch = "svd";
  r.p = 2;
  r.param_count = 10;
  r.variables = {"x", "v"};
  r.rmse = {0.1, 0.2};
  write_report_csv((dir / "r.csv").string(), {r});
  const std::string text = slurp(dir / "r.csv");
  CHECK(text.rfind("case,arch,p,param_count,variable,rmse,train_seconds,predict_ms_per_10k\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  TrainResult t;
  t.history.train = {1.0, 0.5};
  write_loss_csv((dir / "l.csv").string(), {t});
  CHECK(slurp(dir / "l.csv") == "run,epoch,train_loss,validation_loss\n0,0,1,\n0,1,0.5,\n");
  fs::remove_all(dir);
}

TEST_CASE("command line") {
  const fs::path dir = fs::temp_directory_path() / "opnet_cli";
  fs::remove_all(dir);
  const std::string small = " --set data.scenarios=12 --set data.test_scenarios=3 --set data.times=40 --quiet";

  SUBCASE("usage errors exit with 2") {
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("train --case tc9").code == 2);
    CHECK(cli("train --case tc1 --arch resnet").code == 2);
    const Run missing = cli("train --config /no/such/config.json");
    CHECK(missing.code == 2);
    CHECK(missing.output.find("/no/such/config.json") != std::string::npos);
    const Run nomodel = cli("eval --model /no/such/model.txt --case tc1");
    CHECK(nomodel.code == 2);
    CHECK(nomodel.output.find("/no/such/model.txt") != std::string::npos);
    CHECK(cli("svd --input /no/such/data.csv").code == 2);
  }

  SUBCASE("train, eval, report and a case mismatch") {
    const std::string out = (dir / "flex").string();
    const Run train = cli("train --case tc2 --arch flex --epochs 5 --out " + out + small);
    CHECK(train.code == 0);
    for (const char* f : {"model.txt", "loss.csv", "report.csv", "config.json"}) CHECK(fs::exists(fs::path(out) / f));
    const ExperimentConfig saved = load_config((fs::path(out) / "config.json").string());
    CHECK(saved.train.epochs == 5);
    CHECK(saved.data.scenarios == 12);

    const Run rerun = cli("train --config " + out + "/config.json --out " + out + "2 --quiet");
    CHECK(rerun.code == 0);
    CHECK(slurp(fs::path(out) / "model.txt") == slurp(fs::path(out + "2") / "model.txt"));

    const Run eval = cli("eval --model " + out + "/model.txt --case tc2 --out " + out + "/eval" + small);
    CHECK(eval.code == 0);
    CHECK(fs::exists(fs::path(out) / "eval" / "predictions.csv"));
    CHECK(fs::exists(fs::path(out) / "eval" / "rmse.csv"));

    const Run mismatch = cli("eval --model " + out + "/model.txt --case tc1");
    CHECK(mismatch.code == 2);
    CHECK(mismatch.output.find("tc2") != std::string::npos);

    const Run report = cli("report --model " + out + "/model.txt --case tc2 --out " + out + "/plots" + small);
    CHECK(report.code == 0);
    CHECK(fs::exists(fs::path(out) / "plots" / "alignment_x.csv"));
    CHECK(fs::exists(fs::path(out) / "plots" / "aligned_curves_x.csv"));
  }

  SUBCASE("compare reports exact parameter counts") {
    const std::string out = (dir / "cmp").string();
    const Run cmp = cli("compare --case tc2 --archs vanilla:p=8:epochs=2,flex:p=1:epochs=2 --out " + out + small);
    CHECK(cmp.code == 0);
    const std::string report = slurp(fs::path(out) / "report.csv");
    CHECK(report.find("tc2,vanilla,8,4881,x,") != std::string::npos);
    CHECK(report.find("tc2,flex,1,") != std::string::npos);
  }

  SUBCASE("gen and svd") {
    const std::string out = (dir / "gen").string();
    CHECK(cli("gen --case tc1 --out " + out + " --set data.scenarios=10 --set data.times=50").code == 0);
    const auto manifest = nlohmann::json::parse(slurp(fs::path(out) / "manifest.json"));
    CHECK(manifest["case"] == "tc1");
    CHECK(manifest["seed"] == 1);
    CHECK(manifest["files"].size() == 4);
    const SnapshotMatrix x = load_snapshot_csv(fs::path(out) / "train_x.csv");
    CHECK(x.rows() == 50);
    CHECK(x.cols() == 10);

    const Run s = cli("svd --case tc1 --variable x --out " + out);
    CHECK(s.code == 0);
    const std::string energy = slurp(fs::path(out) / "tc1_x_energy.csv");
    std::istringstream lines(energy);
    std::string header, k1, k2;
    std::getline(lines, header);
    std::getline(lines, k1);
    std::getline(lines, k2);
    CHECK(header == "k,sigma,cumulative_energy_squared,cumulative_energy_linear");
    const double e2 = std::stod(k2.substr(k2.find(',', k2.find(',') + 1) + 1));
    CHECK(e2 >= 0.999999);
    CHECK(cli("svd --input " + out + "/train_v.csv --preprocess raw --out " + out).code == 0);
    CHECK(fs::exists(fs::path(out) / "train_v_reconstruction.csv"));
    CHECK(cli("svd --case tc1 --preprocess sideways").code == 2);
  }
  fs::remove_all(dir);
}
