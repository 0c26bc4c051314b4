#include "opnet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "opnet/cases.hpp"
#include "opnet/deeponet.hpp"
#include "opnet/errors.hpp"
#include "opnet/rng.hpp"
#include "opnet/snapshot_io.hpp"
#include "opnet/svd_deeponet.hpp"

namespace opnet {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Usage, where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw Error(ErrorKind::Usage, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

const std::set<std::string> kCases{"tc1", "tc2", "tc4", "external"};
const std::set<std::string> kArchs{"vanilla", "pod", "svd", "svd-shared", "flex"};

}  // namespace

void to_json(json& j, const NetSpec& s) {
  j = json{{"hidden", s.hidden},
           {"activation", std::string(to_string(s.activation))},
           {"output_activation", std::string(to_string(s.output_activation))}};
}

void from_json(const json& j, NetSpec& s) {
  check_keys(j, {"hidden", "activation", "output_activation"}, "net spec");
  read_opt(j, "hidden", s.hidden);
  if (j.contains("activation")) s.activation = activation_from_string(j.at("activation").get<std::string>());
  if (j.contains("output_activation")) {
    s.output_activation = activation_from_string(j.at("output_activation").get<std::string>());
  }
}

void to_json(json& j, const PreNetSpec& s) {
  j = json{{"stretch", s.stretch},
           {"rotate", s.rotate},
           {"shift", s.shift},
           {"separate_nets", s.separate_nets},
           {"per_variable_stretch", s.per_variable_stretch},
           {"net", s.net}};
}

void from_json(const json& j, PreNetSpec& s) {
  check_keys(j, {"stretch", "rotate", "shift", "separate_nets", "per_variable_stretch", "net"}, "prenet");
  read_opt(j, "stretch", s.stretch);
  read_opt(j, "rotate", s.rotate);
  read_opt(j, "shift", s.shift);
  read_opt(j, "separate_nets", s.separate_nets);
  read_opt(j, "per_variable_stretch", s.per_variable_stretch);
  read_opt(j, "net", s.net);
}

void to_json(json& j, const TrainConfig& c) {
  json schedule = json::array();
  for (const auto& s : c.lr_schedule) schedule.push_back(json::array({s.epoch, s.lr}));
  j = json{{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr_schedule", schedule},
           {"seed", c.seed},
           {"validation_fraction", c.validation_fraction},
           {"early_stop_patience", c.early_stop_patience ? json(*c.early_stop_patience) : json(nullptr)},
           {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}}};
}

void from_json(const json& j, TrainConfig& c) {
  check_keys(j, {"epochs", "batch_size", "lr_schedule", "seed", "validation_fraction", "early_stop_patience", "adam"},
             "train config");
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  if (j.contains("lr_schedule")) {
    c.lr_schedule.clear();
    for (const auto& step : j.at("lr_schedule")) {
      if (!step.is_array() || step.size() != 2) throw Error(ErrorKind::Usage, "lr_schedule entries are [epoch, lr]");
      c.lr_schedule.push_back({step[0].get<std::size_t>(), step[1].get<double>()});
    }
  }
  read_opt(j, "seed", c.seed);
  read_opt(j, "validation_fraction", c.validation_fraction);
  if (j.contains("early_stop_patience")) {
    const auto& v = j.at("early_stop_patience");
    c.early_stop_patience = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
  }
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    check_keys(a, {"lr", "beta1", "beta2", "epsilon"}, "adam");
    read_opt(a, "lr", c.adam.lr);
    read_opt(a, "beta1", c.adam.beta1);
    read_opt(a, "beta2", c.adam.beta2);
    read_opt(a, "epsilon", c.adam.epsilon);
  }
}

void to_json(json& j, const DataConfig& c) {
  j = json{{"scenarios", c.scenarios},
           {"test_scenarios", c.test_scenarios},
           {"times", c.times},
           {"random_times", c.random_times},
           {"grid", c.grid},
           {"snapshot_times", c.snapshot_times},
           {"train_points", c.train_points},
           {"half_width", c.half_width},
           {"train_half_width", c.train_half_width},
           {"files", c.files},
           {"variables", c.variables}};
}

void from_json(const json& j, DataConfig& c) {
  check_keys(j, {"scenarios", "test_scenarios", "times", "random_times", "grid", "snapshot_times", "train_points",
                 "half_width", "train_half_width", "files", "variables"},
             "data");
  read_opt(j, "scenarios", c.scenarios);
  read_opt(j, "test_scenarios", c.test_scenarios);
  read_opt(j, "times", c.times);
  read_opt(j, "random_times", c.random_times);
  read_opt(j, "grid", c.grid);
  read_opt(j, "snapshot_times", c.snapshot_times);
  read_opt(j, "train_points", c.train_points);
  read_opt(j, "half_width", c.half_width);
  read_opt(j, "train_half_width", c.train_half_width);
  read_opt(j, "files", c.files);
  read_opt(j, "variables", c.variables);
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"case", c.case_id},     {"arch", c.arch},   {"p", c.p},
           {"branch", c.branch},    {"trunk", c.trunk}, {"prenet", c.prenet},
           {"scale_targets", c.scale_targets},
           {"train", c.train},      {"trunk_train", c.trunk_train},
           {"seed", c.seed},        {"data", c.data},   {"output_dir", c.output_dir}};
}

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j, {"case", "arch", "p", "branch", "trunk", "prenet", "scale_targets", "train",
                 "trunk_train", "seed", "data", "output_dir"},
             "experiment config");
  read_opt(j, "case", c.case_id);
  read_opt(j, "arch", c.arch);
  read_opt(j, "p", c.p);
  read_opt(j, "branch", c.branch);
  read_opt(j, "trunk", c.trunk);
  read_opt(j, "prenet", c.prenet);
  read_opt(j, "scale_targets", c.scale_targets);
  read_opt(j, "train", c.train);
  read_opt(j, "trunk_train", c.trunk_train);
  read_opt(j, "seed", c.seed);
  read_opt(j, "data", c.data);
  read_opt(j, "output_dir", c.output_dir);
}

void ExperimentConfig::validate() const {
  if (!kCases.count(case_id)) throw Error(ErrorKind::Usage, "unknown case '" + case_id + "'");
  if (!kArchs.count(arch)) throw Error(ErrorKind::Usage, "unknown architecture '" + arch + "'");
  if (p < 1) throw Error(ErrorKind::Usage, "p must be positive");
  if (case_id == "tc4" && (arch == "pod" || arch == "svd" || arch == "svd-shared")) {
    throw Error(ErrorKind::Usage, "the " + arch + " paradigm needs gridded scenarios; tc4 training data is pointwise");
  }
  if (case_id == "external" && (data.files.empty() || data.files.size() != data.variables.size())) {
    throw Error(ErrorKind::Usage, "external case needs one file per variable in data.files / data.variables");
  }
  if (data.test_scenarios == 0) throw Error(ErrorKind::Usage, "test_scenarios must be positive");
  train.validate();
  trunk_train.validate();
}

std::string serialize_config(const ExperimentConfig& cfg) { return json(cfg).dump(2); }

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Usage, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Usage, "config must be a JSON object");
  ExperimentConfig cfg;
  try {
    const std::string case_id = j.contains("case") ? j.at("case").get<std::string>() : "tc1";
    const std::string arch = j.contains("arch") ? j.at("arch").get<std::string>() : "vanilla";
    cfg = default_config(case_id, arch);
    from_json(j, cfg);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Usage, std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Usage, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::Usage, "override must look like key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorKind::Usage, "empty key in override '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

namespace {

std::vector<LrStep> step_schedule(std::size_t epochs, double lr) {
  return {{0, lr}, {epochs / 2, lr / 3.0}, {epochs * 4 / 5, lr / 10.0}};
}

}  // namespace

ExperimentConfig default_config(const std::string& case_id, const std::string& arch) {
  if (!kCases.count(case_id)) throw Error(ErrorKind::Usage, "unknown case '" + case_id + "'");
  if (!kArchs.count(arch)) throw Error(ErrorKind::Usage, "unknown architecture '" + arch + "'");
  ExperimentConfig c;
  c.case_id = case_id;
  c.arch = arch;
  c.seed = 1;
  c.train.seed = 3;
  c.trunk_train.seed = 5;
  c.output_dir = "out/" + case_id + "-" + arch;

  if (case_id == "tc1" || case_id == "external") {
    c.p = 2;
    c.branch = {{32, 32, 32}};
    c.trunk = {{32, 32, 32}};
    // 100 scenarios only: the branch keeps improving long after the trunk has converged
    c.train.epochs = case_id == "tc1" ? 15000 : 3000;
    c.train.batch_size = 8;
    c.train.lr_schedule = step_schedule(c.train.epochs, 2e-3);
    c.trunk_train.epochs = 3000;
    c.trunk_train.batch_size = 32;
    c.trunk_train.lr_schedule = step_schedule(c.trunk_train.epochs, 2e-3);
  } else if (case_id == "tc2") {
    c.p = arch == "flex" ? 1 : 8;
    c.branch = {{32, 32, 32}};
    c.trunk = {{32, 32, 32}};
    c.train.epochs = 3000;
    c.train.batch_size = 8;
    c.train.lr_schedule = step_schedule(c.train.epochs, 2e-3);
    c.trunk_train = c.train;
    c.trunk_train.batch_size = 32;
    if (arch == "flex") {
      c.branch = {{}, Activation::Tanh, Activation::Identity};
      c.trunk = {{4}, Activation::Tanh, Activation::Identity};
      c.prenet.stretch = false;
      c.prenet.rotate = false;
      c.prenet.shift = true;
      c.prenet.net = {{}, Activation::Tanh, Activation::Identity};
      c.train.epochs = 400;
      c.train.batch_size = 128;
      c.train.lr_schedule = step_schedule(c.train.epochs, 1e-2);
    }
  } else {  // tc4
    c.data.test_scenarios = 10;
    c.train.validation_fraction = 0.2;
    if (arch == "flex") {
      c.p = 1;
      c.branch = {{16, 16}};
      c.trunk = {{16, 16}, Activation::Tanh, Activation::Exp};
      c.prenet.stretch = true;
      c.prenet.rotate = true;
      c.prenet.shift = true;
      c.prenet.separate_nets = true;
      c.prenet.net = {{16, 16}};
      c.train.epochs = 100;
      c.train.batch_size = 256;
      c.train.lr_schedule = step_schedule(c.train.epochs, 3e-3);
    } else {
      c.p = 32;
      c.branch = {{64, 64, 64, 64, 64, 64}};
      c.trunk = {{64, 64, 64, 64, 64, 64}};
      c.train.epochs = 60;
      c.train.batch_size = 256;
      c.train.lr_schedule = step_schedule(c.train.epochs, 1e-3);
    }
  }
  return c;
}

namespace {

std::vector<std::size_t> held_out_columns(std::size_t total, std::size_t count, std::uint64_t seed) {
  if (count >= total) throw Error(ErrorKind::InvalidData, "not enough scenarios to hold out " + std::to_string(count));
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  Rng rng = stream_rng(test_seed(seed), "external-split");
  rng.shuffle(idx);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

CaseData make_case_data(const ExperimentConfig& cfg) {
  cfg.validate();
  CaseData out;
  const auto& d = cfg.data;
  if (cfg.case_id == "tc1") {
    Tc1Options opt;
    opt.scenarios = d.scenarios;
    opt.times = d.times;
    out.train_grid = tc1_scenarios(opt, cfg.seed).to_grid();
    opt.scenarios = d.test_scenarios;
    out.test = tc1_scenarios(opt, test_seed(cfg.seed)).to_grid();
  } else if (cfg.case_id == "tc2") {
    Tc2Options opt;
    opt.scenarios = d.scenarios;
    opt.times = d.times;
    opt.random_times = d.random_times;
    out.train_grid = tc2_scenarios(opt, cfg.seed).to_grid();
    opt.scenarios = d.test_scenarios;
    out.test = tc2_scenarios(opt, test_seed(cfg.seed)).to_grid();
  } else if (cfg.case_id == "tc4") {
    Tc4Options opt;
    opt.grid = d.grid;
    opt.times = d.snapshot_times;
    opt.train_points = d.train_points;
    opt.half_width = d.half_width;
    opt.train_half_width = d.train_half_width;
    out.train_points = tc4_training_points(opt, cfg.seed);
    const Eigen::MatrixXd times = lhs_sample({{0.0, opt.params.t_end}}, d.test_scenarios, test_seed(cfg.seed));
    out.test = tc4_grid(opt, times.row(0).transpose());
    out.interior_half_width = d.train_half_width;
    return out;
  } else {
    std::vector<SnapshotMatrix> mats;
    for (const auto& f : d.files) mats.push_back(load_snapshot_csv(f));
    GridData all = grid_from_snapshots(mats, d.variables);
    const auto test_idx = held_out_columns(static_cast<std::size_t>(all.scenarios()), d.test_scenarios, cfg.seed);
    std::vector<std::size_t> train_idx;
    for (std::size_t j = 0; j < static_cast<std::size_t>(all.scenarios()); ++j) {
      if (!std::binary_search(test_idx.begin(), test_idx.end(), j)) train_idx.push_back(j);
    }
    out.train_grid = all.select_scenarios(train_idx);
    out.test = all.select_scenarios(test_idx);
  }
  out.train_points = out.train_grid->flatten();
  return out;
}

double rmse(const Eigen::Ref<const Eigen::MatrixXd>& pred, const Eigen::Ref<const Eigen::MatrixXd>& truth) {
  if (pred.size() == 0 || truth.size() == 0) throw Error(ErrorKind::InvalidData, "rmse of an empty array");
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw Error(ErrorKind::InvalidShape, "rmse inputs differ in shape");
  }
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

Evaluation evaluate(const OperatorModel& model, const CaseData& data) {
  const GridData& test = data.test;
  test.validate();
  if (model.variables() != test.variables) throw Error(ErrorKind::Usage, "model and data variables differ");
  const PointData flat = test.flatten();
  const Eigen::MatrixXd pred = model.predict(flat.u, flat.y);
  const Eigen::Index t = test.points();
  const Eigen::Index s = test.scenarios();
  Evaluation ev;
  for (std::size_t v = 0; v < test.variables.size(); ++v) {
    const Eigen::RowVectorXd row = pred.row(static_cast<Eigen::Index>(v));
    Eigen::MatrixXd grid = Eigen::Map<const Eigen::MatrixXd>(row.data(), t, s);
    ev.rmse.push_back(rmse(grid, test.values[v]));
    ev.prediction.push_back(std::move(grid));
  }
  if (data.interior_half_width > 0.0) {
    std::vector<Eigen::Index> inner, outer;
    for (Eigen::Index i = 0; i < t; ++i) {
      (test.y.col(i).cwiseAbs().maxCoeff() < data.interior_half_width ? inner : outer).push_back(i);
    }
    for (std::size_t v = 0; v < test.variables.size(); ++v) {
      const Eigen::MatrixXd diff = ev.prediction[v] - test.values[v];
      auto region = [&](const std::vector<Eigen::Index>& rows) {
        if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
        double sum = 0.0;
        for (auto i : rows) sum += diff.row(i).squaredNorm();
        return std::sqrt(sum / static_cast<double>(rows.size() * static_cast<std::size_t>(s)));
      };
      const std::string suffix = test.variables.size() > 1 ? "_" + test.variables[v] : "";
      ev.extra["rmse_interior" + suffix] = region(inner);
      ev.extra["rmse_exterior" + suffix] = region(outer);
    }
  }
  return ev;
}

namespace {

double time_predictions(const OperatorModel& model, const PointData& points) {
  const Eigen::Index n = 10000;
  Eigen::MatrixXd u(points.u.rows(), n), y(points.y.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    u.col(k) = points.u.col(k % points.size());
    y.col(k) = points.y.col(k % points.size());
  }
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::MatrixXd pred = model.predict(u, y);
  const auto t1 = std::chrono::steady_clock::now();
  if (!pred.allFinite()) throw NumericalFailure("non-finite prediction");
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const EpochCallback& on_epoch) {
  const CaseData data = make_case_data(cfg);
  ExperimentResult result;
  result.model.case_id = cfg.case_id;
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.arch == "vanilla") {
    result.model.variant = Variant::Vanilla;
    const VanillaSpec spec{cfg.p, cfg.branch, cfg.trunk};
    auto fit = data.train_grid ? vanilla_fit(*data.train_grid, spec, cfg.train)
                               : vanilla_fit(data.train_points, spec, cfg.train);
    result.model.net = std::move(fit.model);
    result.runs = std::move(fit.runs);
  } else if (cfg.arch == "pod") {
    result.model.variant = Variant::Pod;
    if (!data.train_grid) throw Error(ErrorKind::GridRequired, "POD-DeepONet needs gridded scenarios");
    const PodSpec spec{cfg.p, cfg.trunk, cfg.branch};
    auto fit = pod_deeponet_fit(*data.train_grid, spec, cfg.trunk_train, cfg.train);
    result.model.net = std::move(fit.model);
    result.runs = std::move(fit.runs);
  } else if (cfg.arch == "svd" || cfg.arch == "svd-shared") {
    result.model.variant = Variant::Svd;
    if (!data.train_grid) throw Error(ErrorKind::GridRequired, "SVD-DeepONet needs gridded scenarios");
    SvdSpec spec{cfg.p, cfg.trunk, cfg.branch, {}};
    if (cfg.arch == "svd-shared") {
      std::vector<std::size_t> all(data.train_grid->variables.size());
      for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
      spec.shared_groups = {all};
    }
    auto fit = svd_deeponet_fit(*data.train_grid, spec, cfg.trunk_train, cfg.train);
    result.model.net = std::move(fit.model);
    result.runs = std::move(fit.runs);
  } else {
    result.model.variant = Variant::Flex;
    const FlexSpec spec{cfg.p, cfg.branch, cfg.trunk, cfg.prenet, cfg.scale_targets};
    auto fit = flex_fit(data.train_points, spec, cfg.train, on_epoch);
    result.model.net = std::move(fit.model);
    result.runs = std::move(fit.runs);
  }
  const auto t1 = std::chrono::steady_clock::now();

  const Evaluation ev = evaluate(result.model, data);
  ReportRow& row = result.row;
  row.case_id = cfg.case_id;
  row.arch = cfg.arch;
  row.p = result.model.p();
  row.param_count = result.model.param_count();
  row.variables = result.model.variables();
  row.rmse = ev.rmse;
  row.extra = ev.extra;
  row.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  row.predict_ms_per_10k = time_predictions(result.model, data.test.flatten());
  return result;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidData, "cannot write " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "case,arch,p,param_count,variable,rmse,train_seconds,predict_ms_per_10k\n";
  for (const auto& r : rows) {
    for (std::size_t v = 0; v < r.variables.size(); ++v) {
      out << r.case_id << ',' << r.arch << ',' << r.p << ',' << r.param_count << ',' << r.variables[v] << ','
          << r.rmse[v] << ',' << r.train_seconds << ',' << r.predict_ms_per_10k << '\n';
    }
  }
}

void write_loss_csv(const std::string& path, const std::vector<TrainResult>& runs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidData, "cannot write " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "run,epoch,train_loss,validation_loss\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& h = runs[r].history;
    for (std::size_t e = 0; e < h.train.size(); ++e) {
      out << r << ',' << e << ',' << h.train[e] << ',';
      if (e < h.validation.size()) out << h.validation[e];
      out << '\n';
    }
  }
}

}  // namespace opnet
