#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "opnet/flex_deeponet.hpp"
#include "opnet/nn.hpp"
#include "opnet/operator_data.hpp"
#include "opnet/operator_model.hpp"
#include "opnet/train.hpp"

namespace opnet {

/// Dataset sizes and sources. Counts not used by a case are ignored.
struct DataConfig {
  std::size_t scenarios = 100;
  std::size_t test_scenarios = 10;
  std::size_t times = 500;
  bool random_times = false;
  std::size_t grid = 100;
  std::size_t snapshot_times = 100;
  std::size_t train_points = 200000;
  double half_width = 15.0;
  double train_half_width = 10.0;
  /// External case: one scenario-aggregated snapshot CSV per variable.
  std::vector<std::string> files;
  std::vector<std::string> variables;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

/// Everything needed to rerun one experiment. `seed` drives data
/// generation and the held-out split; `train.seed` drives initialization
/// and shuffling.
struct ExperimentConfig {
  std::string case_id = "tc1";  ///< tc1 | tc2 | tc4 | external
  std::string arch = "vanilla";  ///< vanilla | pod | svd | svd-shared | flex
  int p = 2;
  NetSpec branch{{32, 32, 32}};
  NetSpec trunk{{32, 32, 32}};
  PreNetSpec prenet;
  bool scale_targets = true;
  TrainConfig train;
  /// Trunk stage of the POD and SVD paradigms.
  TrainConfig trunk_train;
  std::uint64_t seed = 0;
  DataConfig data;
  std::string output_dir = "out";

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

void to_json(nlohmann::json& j, const NetSpec& s);
void from_json(const nlohmann::json& j, NetSpec& s);
void to_json(nlohmann::json& j, const PreNetSpec& s);
void from_json(const nlohmann::json& j, PreNetSpec& s);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

std::string serialize_config(const ExperimentConfig& cfg);
/// Keys absent from the text take the defaults of default_config(case, arch)
/// (tc1 / vanilla when unset); unknown keys are a Usage error.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies a `dotted.path=value` override; the value is read as JSON when
/// it parses, else as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Tuned defaults per case and architecture.
ExperimentConfig default_config(const std::string& case_id, const std::string& arch);

/// Training and held-out test data of one case.
struct CaseData {
  std::optional<GridData> train_grid;  ///< absent for point-sampled cases
  PointData train_points;
  GridData test;
  /// Test points with max(|y_i|) below this count as interior (0 = no split).
  double interior_half_width = 0.0;
};

CaseData make_case_data(const ExperimentConfig& cfg);

/// Root mean squared difference; InvalidData on empty input.
double rmse(const Eigen::Ref<const Eigen::MatrixXd>& pred, const Eigen::Ref<const Eigen::MatrixXd>& truth);

struct ReportRow {
  std::string case_id;
  std::string arch;
  int p = 0;
  std::size_t param_count = 0;
  std::vector<std::string> variables;
  std::vector<double> rmse;  ///< per variable, held-out scenarios only
  double train_seconds = 0.0;
  double predict_ms_per_10k = 0.0;
  /// Extra metrics such as interior/exterior RMSE.
  std::map<std::string, double> extra;
};

struct Evaluation {
  std::vector<double> rmse;                ///< per variable
  std::vector<Eigen::MatrixXd> prediction;  ///< per variable, T x S_test
  std::map<std::string, double> extra;
};

Evaluation evaluate(const OperatorModel& model, const CaseData& data);

struct ExperimentResult {
  OperatorModel model;
  std::vector<TrainResult> runs;
  ReportRow row;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const EpochCallback& on_epoch = {});

/// Header: case,arch,p,param_count,variable,rmse,train_seconds,predict_ms_per_10k
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);
/// Header: run,epoch,train_loss,validation_loss
void write_loss_csv(const std::string& path, const std::vector<TrainResult>& runs);

}  // namespace opnet
